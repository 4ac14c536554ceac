//! Admissible velocity weights for the L^∞_ω solution spaces, the
//! polynomial-degree threshold q*, and the wall-Maxwellian bound ℭ₀.

use crate::error::Error;
use crate::{Result, Vec3};

use super::frequency::nu_star;
use super::wall_maxwellian;

/// Which boundary assumption the weight must serve: constant
/// accommodation ι₀ everywhere, or diffuse caps with specular lateral
/// wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryAssumption {
    ConstantAccommodation { iota0: f64 },
    CapsDiffuse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightClass {
    /// ⟨v⟩^q with q above the threshold q*.
    Polynomial { q: f64 },
    /// e^{ζ⟨v⟩^s}, s ∈ (0,2), ζ > 0.
    StretchedExp { zeta: f64, s: f64 },
    /// e^{ζ|v|²}, ζ ∈ (0,1/2).
    InverseGaussian { zeta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Confinement {
    Weak,
    Strong,
}

#[derive(Clone, Copy, Debug)]
pub struct WeightFunction {
    pub class: WeightClass,
    pub confinement: Confinement,
    /// ℭ₀ = sup_v ω(v)·𝓜ᴹ(v), computed at construction.
    pub c0: f64,
}

/// Polynomial-degree threshold with ν* = 2√(2eπ). Two closed-form
/// branches depending on the boundary assumption.
pub fn q_star(assumption: BoundaryAssumption, c0: f64) -> f64 {
    let ns = nu_star();
    match assumption {
        BoundaryAssumption::ConstantAccommodation { iota0 } => {
            let disc = 128.0 * std::f64::consts::PI * c0 * iota0 * ns
                + (8.0 * ns - 3.0 * iota0).powi(2);
            (5.0 * iota0 + 8.0 * ns + disc.sqrt()) / (2.0 * iota0)
        }
        BoundaryAssumption::CapsDiffuse => {
            let disc = 9.0
                + 160.0 * ns
                + 256.0 * ns * (1.0 + std::f64::consts::PI * c0)
                + 256.0 * ns * ns;
            (5.0 + 16.0 * ns + disc.sqrt()) / 2.0
        }
    }
}

fn radial_value(class: WeightClass, a: f64) -> f64 {
    match class {
        WeightClass::Polynomial { q } => (1.0 + a * a).powf(q / 2.0),
        WeightClass::StretchedExp { zeta, s } => (zeta * (1.0 + a * a).powf(s / 2.0)).exp(),
        WeightClass::InverseGaussian { zeta } => (zeta * a * a).exp(),
    }
}

/// Golden-section maximization of a unimodal function on [lo, hi].
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    f(0.5 * (lo + hi)).max(fc).max(fd)
}

impl WeightFunction {
    pub fn new(class: WeightClass) -> Result<Self> {
        match class {
            WeightClass::Polynomial { q } if q <= 0.0 => {
                return Err(Error::InvalidParameter("polynomial weight needs q > 0".into()))
            }
            WeightClass::StretchedExp { zeta, s } if zeta <= 0.0 || s <= 0.0 || s >= 2.0 => {
                return Err(Error::InvalidParameter(
                    "stretched-exponential weight needs ζ > 0, s ∈ (0,2)".into(),
                ))
            }
            WeightClass::InverseGaussian { zeta } if zeta <= 0.0 || zeta >= 0.5 => {
                return Err(Error::InvalidParameter(
                    "inverse-Gaussian weight needs ζ ∈ (0, 1/2)".into(),
                ))
            }
            _ => {}
        }
        let confinement = match class {
            WeightClass::InverseGaussian { zeta } if zeta > 0.25 => Confinement::Strong,
            _ => Confinement::Weak,
        };
        // ω(a)𝓜ᴹ(a) is radial and unimodal for all admissible classes;
        // any upper bound qualifies as ℭ₀ and we keep it ≥ 1
        let wall = |a: f64| wall_maxwellian(Vec3::new(a, 0.0, 0.0));
        let c0 = golden_max(|a| radial_value(class, a) * wall(a), 0.0, 80.0, 1e-10).max(1.0);
        Ok(WeightFunction { class, confinement, c0 })
    }

    /// Polynomial weight validated against the q* threshold for the
    /// given boundary assumption.
    pub fn polynomial(q: f64, assumption: BoundaryAssumption) -> Result<Self> {
        let w = Self::new(WeightClass::Polynomial { q })?;
        let qs = q_star(assumption, w.c0);
        if q <= qs {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree q={q} must exceed q*={qs:.4}"
            )));
        }
        Ok(w)
    }

    pub fn eval(&self, v: Vec3) -> f64 {
        radial_value(self.class, v.norm())
    }
}
