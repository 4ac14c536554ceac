//! Hydrodynamic projection and the quadratic (Dirichlet) form of the
//! linearized collision operator.
//!
//! ⟨−𝒞f, f⟩ in L²(𝓜^{-1/2}) equals the nonnegative form
//! ¼∫∫∫ |u·σ| 𝓜𝓜* (F + F* − F' − F*')² dσ dv* dv with F = f/𝓜.
//! Evaluating it in this form keeps positivity automatic and, with a
//! triquadratic interpolant for F (exact on quadratics), annihilates
//! the five conserved modes exactly.

use rayon::prelude::*;

use crate::rng::{stream_id, CounterRng};
use crate::Vec3;

use super::bilinear::lebedev_26;
use super::grid::VelocityGrid;
use super::maxwellian;

/// Inner product ∫ f g 𝓜⁻¹ dv.
fn inner_m(grid: &VelocityGrid, f: &[f64], g: &[f64]) -> f64 {
    (0..grid.len())
        .map(|i| grid.weight(i) * f[i] * g[i] / maxwellian(grid.node(i)))
        .sum()
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for row in col + 1..n {
            let m = a[row][col] / d;
            for k in col..n {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col][col];
        for row in 0..col {
            b[row] -= a[row][col] * b[col];
        }
    }
    b
}

/// Orthogonal projection of f onto span{𝓜, v𝓜, (|v|²−3)𝓜} in
/// L²(𝓜^{-1/2}), via the Gram system so the discrete remainder is
/// orthogonal to the discrete modes exactly. Returns (Πf, f − Πf).
pub fn project_pi(grid: &VelocityGrid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let modes: Vec<Vec<f64>> = vec![
        grid.sample(maxwellian),
        grid.sample(|v| v.x * maxwellian(v)),
        grid.sample(|v| v.y * maxwellian(v)),
        grid.sample(|v| v.z * maxwellian(v)),
        grid.sample(|v| (v.norm_sq() - 3.0) * maxwellian(v)),
    ];
    let gram: Vec<Vec<f64>> = modes
        .iter()
        .map(|a| modes.iter().map(|b| inner_m(grid, a, b)).collect())
        .collect();
    let rhs: Vec<f64> = modes.iter().map(|m| inner_m(grid, f, m)).collect();
    let coef = solve_dense(gram, rhs);
    let mut pi = vec![0.0; grid.len()];
    for (c, m) in coef.iter().zip(&modes) {
        for (p, &mv) in pi.iter_mut().zip(m) {
            *p += c * mv;
        }
    }
    let perp: Vec<f64> = f.iter().zip(&pi).map(|(a, b)| a - b).collect();
    (pi, perp)
}

/// The quadratic form ¼∫∫∫ |u·σ| 𝓜𝓜* (F + F* − F' − F*')² dσ dv* dv,
/// F = f/𝓜 interpolated triquadratically at the post-collision points.
pub fn dirichlet_form(grid: &VelocityGrid, f: &[f64]) -> f64 {
    let sphere = lebedev_26();
    let big_f: Vec<f64> = (0..grid.len())
        .map(|i| f[i] / maxwellian(grid.node(i)))
        .collect();
    let m: Vec<f64> = grid.sample(maxwellian);
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let v = grid.node(i);
            let mut acc = 0.0;
            for j in 0..grid.len() {
                let vs = grid.node(j);
                let u = v - vs;
                let mm = grid.weight(i) * grid.weight(j) * m[i] * m[j];
                for &(sigma, ws) in &sphere {
                    let p = u.dot(sigma);
                    let fp = grid.interp_quadratic_clamped(&big_f, v - sigma * p);
                    let fsp = grid.interp_quadratic_clamped(&big_f, vs + sigma * p);
                    let d = big_f[i] + big_f[j] - fp - fsp;
                    acc += mm * ws * p.abs() * d * d;
                }
            }
            acc
        })
        .sum::<f64>()
        / 4.0
}

/// Sanity check of the form: the five conserved modes must be
/// annihilated, and the Rayleigh quotient D(f)/‖f‖²_{L²(𝓜^{-1/2})} over
/// random microscopic (projected-out) inputs estimates the spectral gap.
/// Returns (max kernel-mode residual, gap estimate).
pub fn coercivity_sanity(grid: &VelocityGrid, seed: u64, n_random: usize) -> (f64, f64) {
    let modes: [fn(Vec3) -> f64; 5] = [
        |_| 1.0,
        |v| v.x,
        |v| v.y,
        |v| v.z,
        |v| v.norm_sq() - 3.0,
    ];
    let residual = modes
        .iter()
        .map(|phi| {
            let f = grid.sample(|v| phi(v) * maxwellian(v));
            dirichlet_form(grid, &f).abs()
        })
        .fold(0.0, f64::max);
    let mut rng = CounterRng::from_parts(seed, stream_id("coercivity"));
    let mut gap = f64::INFINITY;
    for _ in 0..n_random {
        let (a, b, c, d) = (
            rng.uniform_in(-1.0, 1.0),
            rng.uniform_in(-1.0, 1.0),
            rng.uniform_in(-1.0, 1.0),
            rng.uniform_in(-1.0, 1.0),
        );
        let f = grid.sample(|v| {
            (a * v.x * v.y + b * (v.x.powi(2) - v.y.powi(2)) + c * v.z * v.norm_sq()
                + d * (v.norm_sq() - 5.0) * v.x)
                * maxwellian(v)
        });
        let (_, perp) = project_pi(grid, &f);
        let norm2 = inner_m(grid, &perp, &perp);
        if norm2 > 1e-12 {
            gap = gap.min(dirichlet_form(grid, &perp) / norm2);
        }
    }
    (residual, gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::grid::QuadratureRule;

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let grid = VelocityGrid::new(5.0, 10, QuadratureRule::Midpoint);
        let f = grid.sample(|v| (0.7 + 0.2 * v.x - 0.1 * v.norm_sq() + v.y * v.z) * maxwellian(v));
        let (pi, perp) = project_pi(&grid, &f);
        // remainder is orthogonal to each mode
        for phi in [
            grid.sample(maxwellian),
            grid.sample(|v| v.x * maxwellian(v)),
            grid.sample(|v| (v.norm_sq() - 3.0) * maxwellian(v)),
        ] {
            assert!(inner_m(&grid, &perp, &phi).abs() < 1e-10);
        }
        let (pi2, perp2) = project_pi(&grid, &pi);
        for (a, b) in pi.iter().zip(&pi2) {
            assert!((a - b).abs() < 1e-12);
        }
        let sup = perp2.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(sup < 1e-12);
    }

    #[test]
    fn form_kills_conserved_modes_and_is_positive() {
        let grid = VelocityGrid::new(5.0, 8, QuadratureRule::Midpoint);
        let (residual, gap) = coercivity_sanity(&grid, 11, 3);
        assert!(residual < 1e-6, "kernel-mode residual {residual}");
        assert!(gap > 0.0, "gap estimate {gap}");
        assert!(gap.is_finite());
    }

    #[test]
    fn form_scales_quadratically() {
        let grid = VelocityGrid::new(5.0, 8, QuadratureRule::Midpoint);
        let f = grid.sample(|v| v.x * v.y * maxwellian(v));
        let f2: Vec<f64> = f.iter().map(|x| 3.0 * x).collect();
        let d1 = dirichlet_form(&grid, &f);
        let d2 = dirichlet_form(&grid, &f2);
        assert!((d2 - 9.0 * d1).abs() < 1e-9 * d1.max(1.0));
    }
}
