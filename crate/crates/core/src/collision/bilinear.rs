//! Symmetrized bilinear hard-sphere collision operator on the velocity
//! grid, with a 26-point Lebedev rule for the scattering direction.
//!
//! Two discretizations are provided: a gather scheme that interpolates
//! the inputs at the post-collision velocities, and a scatter scheme
//! that deposits each pair's gain conservatively so the five collision
//! invariants are preserved to rounding.

use rayon::prelude::*;

use crate::Vec3;

use super::grid::VelocityGrid;

/// 26-point Lebedev rule on the unit sphere: octahedron vertices, edge
/// midpoints and cube vertices. Exact for polynomials up to degree 7;
/// weights sum to 4π.
pub fn lebedev_26() -> Vec<(Vec3, f64)> {
    let fourpi = 4.0 * std::f64::consts::PI;
    let mut pts = Vec::with_capacity(26);
    for a in 0..3 {
        for s in [-1.0, 1.0] {
            let mut p = [0.0; 3];
            p[a] = s;
            pts.push((Vec3::new(p[0], p[1], p[2]), fourpi / 21.0));
        }
    }
    let r = 1.0 / 2.0f64.sqrt();
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for sb in [-1.0, 1.0] {
            for sc in [-1.0, 1.0] {
                let mut p = [0.0; 3];
                p[b] = sb * r;
                p[c] = sc * r;
                pts.push((Vec3::new(p[0], p[1], p[2]), fourpi * 4.0 / 105.0));
            }
        }
    }
    let q = 1.0 / 3.0f64.sqrt();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                pts.push((Vec3::new(sx * q, sy * q, sz * q), fourpi * 9.0 / 280.0));
            }
        }
    }
    pts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilinearScheme {
    /// Interpolate g, h trilinearly at the post-collision velocities.
    /// Simple, but the interpolation error breaks exact conservation.
    GatherTrilinear,
    /// Scatter each pair's gain with a moment-preserving deposit; mass,
    /// momentum and energy are conserved to rounding, up to the mass
    /// clipped at pairs whose post-collision velocities leave the grid.
    ConservativeDeposit,
}

#[derive(Clone, Debug)]
pub struct QResult {
    /// Q(g,h) as a density on the grid nodes.
    pub values: Vec<f64>,
    /// Total |mass| that could not be deposited because a post-collision
    /// velocity fell outside the grid (scatter scheme only).
    pub clipped_mass: f64,
}

/// Symmetrized bilinear collision operator
/// Q(g,h)(v) = ½∫∫ |u·σ| (g'h*' + h'g*' − g h* − h g*) dσ dv*,
/// u = v − v*, v' = v − (u·σ)σ, v*' = v* + (u·σ)σ.
pub fn q_bilinear(grid: &VelocityGrid, g: &[f64], h: &[f64], scheme: BilinearScheme) -> QResult {
    let sphere = lebedev_26();
    match scheme {
        BilinearScheme::GatherTrilinear => {
            let values = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let v = grid.node(i);
                    let mut acc = 0.0;
                    for j in 0..grid.len() {
                        let vs = grid.node(j);
                        let u = v - vs;
                        let loss = (g[i] * h[j] + h[i] * g[j]) / 2.0;
                        for &(sigma, ws) in &sphere {
                            let p = u.dot(sigma);
                            let vp = v - sigma * p;
                            let vsp = vs + sigma * p;
                            let gp = grid.interp_trilinear(g, vp).unwrap_or(0.0);
                            let hp = grid.interp_trilinear(h, vp).unwrap_or(0.0);
                            let gsp = grid.interp_trilinear(g, vsp).unwrap_or(0.0);
                            let hsp = grid.interp_trilinear(h, vsp).unwrap_or(0.0);
                            let gain = (gp * hsp + hp * gsp) / 2.0;
                            acc += grid.weight(j) * ws * p.abs() * (gain - loss);
                        }
                    }
                    acc
                })
                .collect();
            QResult { values, clipped_mass: 0.0 }
        }
        BilinearScheme::ConservativeDeposit => {
            let n = grid.len();
            let (mut mass, clipped) = (0..n)
                .into_par_iter()
                .fold(
                    || (vec![0.0f64; n], 0.0f64),
                    |(mut out, mut clip), i| {
                        let v = grid.node(i);
                        for j in 0..n {
                            let vs = grid.node(j);
                            let u = v - vs;
                            let pair = (g[i] * h[j] + h[i] * g[j]) / 2.0;
                            if pair == 0.0 {
                                continue;
                            }
                            let ww = grid.weight(i) * grid.weight(j);
                            for &(sigma, ws) in &sphere {
                                let p = u.dot(sigma);
                                let rate = ww * ws * p.abs() * pair;
                                if rate == 0.0 {
                                    continue;
                                }
                                // loss lands exactly on the two nodes
                                out[i] -= rate;
                                out[j] -= rate;
                                let vp = v - sigma * p;
                                let vsp = vs + sigma * p;
                                clip += grid.deposit_conservative(&mut out, vp, rate).abs();
                                clip += grid.deposit_conservative(&mut out, vsp, rate).abs();
                            }
                        }
                        (out, clip)
                    },
                )
                .reduce(
                    || (vec![0.0f64; n], 0.0f64),
                    |(mut a, ca), (b, cb)| {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                        (a, ca + cb)
                    },
                );
            // the per-node accumulator holds mass; convert to density
            for i in 0..n {
                mass[i] /= grid.weight(i);
            }
            QResult { values: mass, clipped_mass: clipped }
        }
    }
}

/// Q(g,h) at one velocity with g, h given as closures evaluated exactly
/// at the post-collision points — no interpolation error, so pointwise
/// identities (e.g. Q(𝓜,𝓜) = 0) hold to the σ-rule and rounding.
pub fn q_bilinear_exact_at(
    grid: &VelocityGrid,
    g: &(impl Fn(Vec3) -> f64 + Sync),
    h: &(impl Fn(Vec3) -> f64 + Sync),
    v: Vec3,
) -> f64 {
    let sphere = lebedev_26();
    let gv = g(v);
    let hv = h(v);
    (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let vs = grid.node(j);
            let u = v - vs;
            let loss = (gv * h(vs) + hv * g(vs)) / 2.0;
            let mut acc = 0.0;
            for &(sigma, ws) in &sphere {
                let p = u.dot(sigma);
                let vp = v - sigma * p;
                let vsp = vs + sigma * p;
                let gain = (g(vp) * h(vsp) + h(vp) * g(vsp)) / 2.0;
                acc += ws * p.abs() * (gain - loss);
            }
            grid.weight(j) * acc
        })
        .sum()
}

/// The five collision invariants ∫ q {1, vₓ, v_y, v_z, |v|²} dv.
pub fn q_moments(grid: &VelocityGrid, q: &[f64]) -> [f64; 5] {
    let mut m = [0.0; 5];
    for i in 0..grid.len() {
        let v = grid.node(i);
        let w = grid.weight(i) * q[i];
        m[0] += w;
        m[1] += w * v.x;
        m[2] += w * v.y;
        m[3] += w * v.z;
        m[4] += w * v.norm_sq();
    }
    m
}

/// Continuity-constant estimate: ‖Q(g,h)‖_{∞, ω/ν} relative to
/// ‖g‖_{∞,ω} ‖h‖_{∞,ω}.
pub fn measure_c_q(
    grid: &VelocityGrid,
    nu: &[f64],
    omega: impl Fn(Vec3) -> f64,
    g: &[f64],
    h: &[f64],
    q: &[f64],
) -> f64 {
    let num = (0..grid.len())
        .map(|i| omega(grid.node(i)) * q[i].abs() / nu[i])
        .fold(0.0, f64::max);
    let den = grid.sup_weighted(g, &omega) * grid.sup_weighted(h, &omega);
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::grid::QuadratureRule;
    use crate::collision::maxwellian;

    #[test]
    fn lebedev_weights_sum_to_sphere_area() {
        let pts = lebedev_26();
        assert_eq!(pts.len(), 26);
        let total: f64 = pts.iter().map(|&(_, w)| w).sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        // degree-6 moment check: ∫ x⁶ dσ = 4π/7
        let m6: f64 = pts.iter().map(|&(p, w)| w * p.x.powi(6)).sum();
        assert!((m6 - 4.0 * std::f64::consts::PI / 7.0).abs() < 1e-12);
        for &(p, _) in &pts {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn maxwellian_is_an_equilibrium() {
        let grid = VelocityGrid::new(5.0, 8, QuadratureRule::Midpoint);
        let m = grid.sample(maxwellian);
        for scheme in [BilinearScheme::GatherTrilinear, BilinearScheme::ConservativeDeposit] {
            let q = q_bilinear(&grid, &m, &m, scheme);
            // Q(M,M) = 0 in the continuum; the discrete residual must be
            // small against the loss term alone (which is O(1) pointwise)
            let sup = q.values.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            // loss term alone peaks near ν(0)𝓜(0) ≈ 0.64, so ~0.07 is a
            // ~10% cancellation residual at this coarse grid
            assert!(sup < 0.1, "{scheme:?}: sup residual {sup}");
        }
    }

    #[test]
    fn exact_evaluation_kills_equilibrium_pointwise() {
        let grid = VelocityGrid::new(5.0, 8, QuadratureRule::Midpoint);
        for v in [Vec3::ZERO, Vec3::new(1.3, -0.4, 0.7), Vec3::new(2.0, 2.0, -1.0)] {
            let q = q_bilinear_exact_at(&grid, &maxwellian, &maxwellian, v);
            assert!(q.abs() < 1e-15, "Q(M,M)({v:?}) = {q}");
        }
    }

    #[test]
    fn deposit_scheme_conserves_all_five_moments() {
        let grid = VelocityGrid::new(5.0, 8, QuadratureRule::Midpoint);
        let g = grid.sample(|v| (1.0 + 0.3 * v.x) * maxwellian(v));
        let h = grid.sample(|v| (1.0 - 0.2 * v.y + 0.1 * v.norm_sq()) * maxwellian(v));
        let q = q_bilinear(&grid, &g, &h, BilinearScheme::ConservativeDeposit);
        let m = q_moments(&grid, &q.values);
        let scale = q.values.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        for (k, &mk) in m.iter().enumerate() {
            assert!(
                mk.abs() <= 1e-10 * scale.max(1.0) + q.clipped_mass * 100.0,
                "moment {k} = {mk}, clip = {}",
                q.clipped_mass
            );
        }
    }

    #[test]
    fn schemes_agree_on_smooth_data() {
        let grid = VelocityGrid::new(5.0, 10, QuadratureRule::Midpoint);
        let g = grid.sample(|v| (1.0 + 0.3 * v.x) * maxwellian(v));
        let h = grid.sample(maxwellian);
        let qa = q_bilinear(&grid, &g, &h, BilinearScheme::GatherTrilinear);
        let qb = q_bilinear(&grid, &g, &h, BilinearScheme::ConservativeDeposit);
        let sup_a = qa.values.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let max_diff = qa
            .values
            .iter()
            .zip(&qb.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        // both are O(dv²)-consistent discretizations of the same operator
        assert!(max_diff < 0.5 * sup_a.max(0.1), "diff {max_diff} vs sup {sup_a}");
    }

    #[test]
    fn bilinearity_and_symmetry() {
        let grid = VelocityGrid::new(4.0, 6, QuadratureRule::Midpoint);
        let g = grid.sample(|v| (0.5 + v.x * v.z * 0.1) * maxwellian(v));
        let h = grid.sample(|v| (1.0 - 0.4 * v.y) * maxwellian(v));
        let qgh = q_bilinear(&grid, &g, &h, BilinearScheme::GatherTrilinear);
        let qhg = q_bilinear(&grid, &h, &g, BilinearScheme::GatherTrilinear);
        for (a, b) in qgh.values.iter().zip(&qhg.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let g2: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        let q2 = q_bilinear(&grid, &g2, &h, BilinearScheme::GatherTrilinear);
        for (a, b) in q2.values.iter().zip(&qgh.values) {
            assert!((a - 2.0 * b).abs() < 1e-11);
        }
    }
}
