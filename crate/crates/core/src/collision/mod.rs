//! Velocity-space machinery of the linearized hard-sphere model:
//! Maxwellians, collision frequency, the gain kernel and its truncations
//! and splittings, the bilinear collision operator, the equilibrium
//! projection, and the admissible weight classes.

pub mod bilinear;
pub mod frequency;
pub mod grid;
pub mod kernel;
pub mod projection;
pub mod split;
pub mod weights;

pub use bilinear::{measure_c_q, q_bilinear, q_bilinear_exact_at, q_moments, BilinearScheme, QResult};
pub use frequency::{collision_frequency, collision_frequency_table, nu_0, nu_1, nu_star};
pub use grid::{QuadratureRule, VelocityGrid};
pub use kernel::CollisionKernel;
pub use projection::{coercivity_sanity, dirichlet_form, project_pi};
pub use split::{apply_a_delta, measure_varpi, SplitParams};
pub use weights::{q_star, BoundaryAssumption, Confinement, WeightClass, WeightFunction};

/// Global Maxwellian 𝓜(v) = (2π)^{−3/2} e^{−|v|²/2}.
pub fn maxwellian(v: crate::Vec3) -> f64 {
    let c = (2.0 * std::f64::consts::PI).powf(-1.5);
    c * (-v.norm_sq() / 2.0).exp()
}

/// Wall Maxwellian √(2π)𝓜, normalized to unit half-space flux.
pub fn wall_maxwellian(v: crate::Vec3) -> f64 {
    (2.0 * std::f64::consts::PI).sqrt() * maxwellian(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn maxwellian_at_origin() {
        assert!((maxwellian(Vec3::ZERO) - 0.06349363593424097).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_normalization_on_grid() {
        let g = VelocityGrid::new(8.0, 64, QuadratureRule::Midpoint);
        let f = g.sample(maxwellian);
        assert!((g.integrate(&f) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wall_maxwellian_unit_flux() {
        // ∫ 𝓜ᴹ (e·v)₊ dv for any unit e; radial-tangential factorization
        let e = Vec3::new(0.0, 0.6, 0.8);
        let g = VelocityGrid::new(8.0, 64, QuadratureRule::Midpoint);
        let f = g.sample(|v| wall_maxwellian(v) * e.dot(v).max(0.0));
        // midpoint quadrature is only second order across the kink at
        // the half-space boundary
        assert!((g.integrate(&f) - 1.0).abs() < 5e-3);
        // sharper check without the kink: Gauss panels on the normal axis
        let flux = crate::quad::integrate(|s| s * (-s * s / 2.0).exp(), 0.0, 14.0, 24, 8);
        assert!((flux - 1.0).abs() < 1e-9);
    }
}
