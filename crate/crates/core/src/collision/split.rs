//! Smooth splitting of the gain operator into a small-remainder part
//! 𝒜_δ = K((1−χ_δ)·) and a compact part 𝒦_δ = K(χ_δ·).
//!
//! The cutoff χ_δ is a product of smoothsteps in the three constraint
//! coordinates (|v|, |v−v*|, |cos θ|), sandwiched between the indicator
//! of the inner window {|v| ≤ δ⁻¹, 2δ ≤ |v−v*| ≤ δ⁻¹, |cosθ| ≤ 1−2δ}
//! and that of the outer window with doubled margins. When applied
//! through the σ-integrated kernel k(v,v*) the angle coordinate is
//! averaged out (the kernel itself carries no σ dependence).

use rayon::prelude::*;

use crate::error::Error;
use crate::{Result, Vec3};

use super::kernel::CollisionKernel;
use super::weights::WeightFunction;

#[derive(Clone, Copy, Debug)]
pub struct SplitParams {
    pub delta: f64,
}

/// Cubic smoothstep: 0 below a, 1 above b.
fn smoothstep(x: f64, a: f64, b: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl SplitParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "splitting parameter must lie in (0, 1/2), got {delta}"
            )));
        }
        Ok(SplitParams { delta })
    }

    /// Full cutoff on (v, v*, cosθ).
    pub fn chi(&self, v: Vec3, vs: Vec3, cos_theta: f64) -> f64 {
        self.chi_vv(v, vs) * self.chi_angle(cos_theta)
    }

    /// The (v, v*) part: speed window × relative-speed window.
    pub fn chi_vv(&self, v: Vec3, vs: Vec3) -> f64 {
        self.chi_speeds(v.norm(), (v - vs).norm())
    }

    /// Same cutoff as a function of the speed |v| and relative speed
    /// |v−v*| alone (it depends on nothing else).
    pub fn chi_speeds(&self, speed: f64, rel: f64) -> f64 {
        let d = self.delta;
        let lo = 1.0 - smoothstep(speed, 1.0 / d, 2.0 / d);
        let rel_lo = smoothstep(rel, d, 2.0 * d);
        let rel_hi = 1.0 - smoothstep(rel, 1.0 / d, 2.0 / d);
        lo * rel_lo * rel_hi
    }

    /// The angle factor 1 on |cosθ| ≤ 1−2δ, 0 above 1−δ.
    pub fn chi_angle(&self, cos_theta: f64) -> f64 {
        let d = self.delta;
        1.0 - smoothstep(cos_theta.abs(), 1.0 - 2.0 * d, 1.0 - d)
    }

    fn in_e1(&self, v: Vec3, vs: Vec3, cos_theta: f64) -> bool {
        let d = self.delta;
        let r = (v - vs).norm();
        v.norm() <= 1.0 / d && (2.0 * d..=1.0 / d).contains(&r) && cos_theta.abs() <= 1.0 - 2.0 * d
    }

    fn in_e2(&self, v: Vec3, vs: Vec3, cos_theta: f64) -> bool {
        let d = self.delta;
        let r = (v - vs).norm();
        v.norm() <= 2.0 / d && (d..=2.0 / d).contains(&r) && cos_theta.abs() <= 1.0 - d
    }

    /// Sandwich property 1_{E₁} ≤ χ ≤ 1_{E₂} at a sample point.
    pub fn sandwich_ok(&self, v: Vec3, vs: Vec3, cos_theta: f64) -> bool {
        let c = self.chi(v, vs, cos_theta);
        (!self.in_e1(v, vs, cos_theta) || c >= 1.0 - 1e-12)
            && (self.in_e2(v, vs, cos_theta) || c <= 1e-12)
    }
}

/// 𝒜_δ f = K((1−χ_δ)f) through the σ-integrated kernel (angle factor
/// averaged against the deviation-angle distribution of the hard-sphere
/// σ-integral; here dropped to its mean over the Lebedev set, recorded
/// as a design choice).
pub fn apply_a_delta(kern: &CollisionKernel, sp: &SplitParams, f: &[f64]) -> Vec<f64> {
    apply_weighted_k(kern, f, |a, r| 1.0 - sp.chi_speeds(a, r))
}

/// 𝒦_δ f = K(χ_δ f).
pub fn apply_k_delta(kern: &CollisionKernel, sp: &SplitParams, f: &[f64]) -> Vec<f64> {
    apply_weighted_k(kern, f, |a, r| sp.chi_speeds(a, r))
}

fn apply_weighted_k(
    kern: &CollisionKernel,
    f: &[f64],
    factor: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    let g = &kern.grid;
    (0..g.len())
        .into_par_iter()
        .map(|i| kern.apply_k_weighted_at(f, g.node(i), &factor))
        .collect()
}

/// Measured damping ratio ϖ: ‖𝒜_δ f‖_{∞,ω ν⁻¹} / ‖f‖_{∞,ω} maximized
/// over the given inputs.
pub fn measure_varpi(
    kern: &CollisionKernel,
    sp: &SplitParams,
    omega: &WeightFunction,
    inputs: &[Vec<f64>],
) -> f64 {
    let g = &kern.grid;
    inputs
        .iter()
        .map(|f| {
            let af = apply_a_delta(kern, sp, f);
            let num = (0..g.len())
                .map(|i| omega.eval(g.node(i)) * af[i].abs() / kern.nu[i])
                .fold(0.0, f64::max);
            let den = g.sup_weighted(f, |v| omega.eval(v));
            num / den
        })
        .fold(0.0, f64::max)
}
