//! Hard-sphere collision frequency ν(v) = 2π∫|v−v*|𝓜(v*)dv* and its
//! explicit bounds ν₀⟨v⟩ ≤ ν(v) ≤ ν₁⟨v⟩.

use rayon::prelude::*;

use crate::error::Error;
use crate::{Result, Vec3};

use super::grid::VelocityGrid;

/// Lower bound constant ν₀ = 4π√(2/(eπ)).
pub fn nu_0() -> f64 {
    4.0 * std::f64::consts::PI * (2.0 / (std::f64::consts::E * std::f64::consts::PI)).sqrt()
}

/// Upper bound constant 16π.
pub fn nu_1() -> f64 {
    16.0 * std::f64::consts::PI
}

/// ν* = ν₁/ν₀ = 2√(2eπ).
pub fn nu_star() -> f64 {
    2.0 * (2.0 * std::f64::consts::E * std::f64::consts::PI).sqrt()
}

/// ⟨v⟩ = √(1+|v|²).
pub fn bracket(v: Vec3) -> f64 {
    (1.0 + v.norm_sq()).sqrt()
}

/// Spherical mean of |a·e − r·u| over directions u: equals
/// max + min²/(3·max) for max/min of (a, r). Algebraically identical to
/// ((a+r)³ − |a−r|³)/(6ar) but stable for small arguments.
fn angular_mean_distance(a: f64, r: f64) -> f64 {
    let (s, m) = if a >= r { (a, r) } else { (r, a) };
    if s == 0.0 {
        return 0.0;
    }
    s + m * m / (3.0 * s)
}

/// ν at speed a = |v| (radially symmetric), by Gauss-Legendre panels of
/// the 1-D radial reduction, split at the kink r = a. Returns the value
/// and a refinement-based error estimate.
pub fn collision_frequency_speed(a: f64) -> (f64, f64) {
    let c = 2.0 * std::f64::consts::PI * 4.0 * std::f64::consts::PI
        / (2.0 * std::f64::consts::PI).powf(1.5);
    let integrand = |r: f64| c * r * r * (-r * r / 2.0).exp() * angular_mean_distance(a, r);
    let upper = 14.0f64.max(a + 14.0);
    let split = a.min(upper);
    let eval = |panels: usize| {
        crate::quad::integrate(&integrand, 0.0, split, 16, panels)
            + crate::quad::integrate(&integrand, split, upper, 16, panels + 4)
    };
    let coarse = eval(4);
    let fine = eval(8);
    (fine, (fine - coarse).abs().max(f64::EPSILON * fine))
}

/// ν(v) with quadrature error estimate.
pub fn collision_frequency(v: Vec3) -> (f64, f64) {
    collision_frequency_speed(v.norm())
}

/// Independent oracle: ν via a 3-D quadrature on a velocity grid; slow
/// and coarser, used only for cross-checks.
pub fn collision_frequency_grid_oracle(v: Vec3, grid: &VelocityGrid) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let vs = grid.node(i);
        acc += grid.weight(i) * (v - vs).norm() * super::maxwellian(vs);
    }
    2.0 * std::f64::consts::PI * acc
}

/// ν on every node of a grid (parallel), with the max error estimate.
pub fn collision_frequency_table(grid: &VelocityGrid) -> (Vec<f64>, f64) {
    let vals: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| collision_frequency(grid.node(i)))
        .collect();
    let max_err = vals.iter().map(|p| p.1).fold(0.0, f64::max);
    (vals.into_iter().map(|p| p.0).collect(), max_err)
}

/// Check ν₀⟨v⟩ ≤ ν ≤ ν₁⟨v⟩ at a node, with the quadrature error charged
/// against the slack.
pub fn check_nu_bounds(v: Vec3) -> Result<()> {
    let (nu, err) = collision_frequency(v);
    let b = bracket(v);
    let (lo, hi) = (nu_0() * b, nu_1() * b);
    if nu - err < lo || nu + err > hi {
        return Err(Error::InvalidParameter(format!(
            "nu bound violated at |v|={}: nu={nu}±{err} outside [{lo}, {hi}]",
            v.norm()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::grid::QuadratureRule;

    #[test]
    fn nu_at_zero_is_mean_speed_of_gaussian() {
        // ν(0) = 2π·E|Z| = 2π·2√(2/π)
        let expect = 2.0 * std::f64::consts::PI * 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        let (nu, err) = collision_frequency_speed(0.0);
        assert!((nu - expect).abs() < 1e-10, "nu(0)={nu}, expect {expect}, err {err}");
    }

    #[test]
    fn nu_matches_grid_oracle() {
        // the 3-D Gauss rule converges slowly across the |v−v*| kink, so
        // the cross-check tolerance is coarse
        let g = VelocityGrid::new(10.0, 40, QuadratureRule::Gauss);
        for a in [0.5, 1.0, 2.5] {
            let v = Vec3::new(a, 0.0, 0.0);
            let (nu, _) = collision_frequency(v);
            let oracle = collision_frequency_grid_oracle(v, &g);
            assert!((nu - oracle).abs() / nu < 2e-3, "a={a}: {nu} vs {oracle}");
        }
    }

    /// Abramowitz–Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
    fn erf_approx(x: f64) -> f64 {
        let s = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        s * (1.0 - poly * (-x * x).exp())
    }

    #[test]
    fn nu_matches_closed_form() {
        // E|v − Z| for Z standard normal has the closed form
        // √(2/π) e^{−a²/2} + (a + 1/a) erf(a/√2), a = |v|
        for a in [0.3f64, 0.5, 1.0, 2.5, 6.0] {
            let exact = 2.0
                * std::f64::consts::PI
                * ((2.0 / std::f64::consts::PI).sqrt() * (-a * a / 2.0).exp()
                    + (a + 1.0 / a) * erf_approx(a / 2.0f64.sqrt()));
            let (nu, _) = collision_frequency_speed(a);
            assert!((nu - exact).abs() / nu < 1e-6, "a={a}: {nu} vs {exact}");
        }
    }

    #[test]
    fn nu_bounds_at_reference_speeds() {
        for a in [0.0, 1.0, 2.0, 4.0, 8.0] {
            check_nu_bounds(Vec3::new(a, 0.0, 0.0)).unwrap();
        }
    }

    #[test]
    fn nu_linear_asymptotics() {
        let (nu, _) = collision_frequency_speed(20.0);
        let lead = 2.0 * std::f64::consts::PI * 20.0;
        assert!((nu - lead).abs() / nu < 0.01);
    }

    #[test]
    fn quadrature_error_estimate_is_small() {
        let (nu, err) = collision_frequency_speed(3.0);
        assert!(err < 1e-10 * nu);
    }
}
