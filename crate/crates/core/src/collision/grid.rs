//! Uniform Cartesian velocity grid with midpoint or Gauss-Legendre
//! weights, plus the interpolation/deposit primitives used by the
//! collision operators.

use crate::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    /// Cell-centered nodes, weight dv³ each. Required by the operators
    /// that interpolate or deposit on the grid.
    Midpoint,
    /// Gauss-Legendre nodes per axis (non-uniform spacing); higher order
    /// for pure integration tasks.
    Gauss,
}

#[derive(Clone, Debug)]
pub struct VelocityGrid {
    pub v_max: f64,
    pub n_v: usize,
    pub rule: QuadratureRule,
    axis: Vec<f64>,
    axis_w: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(v_max: f64, n_v: usize, rule: QuadratureRule) -> Self {
        assert!(v_max > 0.0 && n_v >= 2);
        let (axis, axis_w) = match rule {
            QuadratureRule::Midpoint => {
                let dv = 2.0 * v_max / n_v as f64;
                (
                    (0..n_v).map(|i| -v_max + (i as f64 + 0.5) * dv).collect(),
                    vec![dv; n_v],
                )
            }
            QuadratureRule::Gauss => crate::quad::gauss_legendre_ab(n_v, -v_max, v_max),
        };
        VelocityGrid { v_max, n_v, rule, axis, axis_w }
    }

    pub fn len(&self) -> usize {
        self.n_v * self.n_v * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width (midpoint rule).
    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.n_v as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_v + j) * self.n_v + k
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let n = self.n_v;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        Vec3::new(self.axis[i], self.axis[j], self.axis[k])
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let n = self.n_v;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        self.axis_w[i] * self.axis_w[j] * self.axis_w[k]
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis
    }

    pub fn sample(&self, f: impl Fn(Vec3) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.node(i))).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.weight(i) * f[i]).sum()
    }

    pub fn inner_weighted(&self, f: &[f64], g: &[f64], w: impl Fn(Vec3) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weight(i) * f[i] * g[i] * w(self.node(i))).sum()
    }

    /// Weighted sup-norm max ω(v)|f(v)|.
    pub fn sup_weighted(&self, f: &[f64], omega: impl Fn(Vec3) -> f64) -> f64 {
        (0..self.len())
            .map(|i| omega(self.node(i)) * f[i].abs())
            .fold(0.0, f64::max)
    }

    /// Fractional grid coordinates of `v` in node units, or None if `v`
    /// lies outside the node hull (midpoint rule only).
    fn frac_coords(&self, v: Vec3) -> Option<[(usize, f64); 3]> {
        debug_assert_eq!(self.rule, QuadratureRule::Midpoint);
        let dv = self.dv();
        let mut out = [(0usize, 0.0f64); 3];
        for (a, &c) in [v.x, v.y, v.z].iter().enumerate() {
            // node i sits at -v_max + (i+1/2)dv
            let s = (c + self.v_max) / dv - 0.5;
            if s < 0.0 || s > (self.n_v - 1) as f64 {
                return None;
            }
            let i0 = (s.floor() as usize).min(self.n_v - 2);
            out[a] = (i0, s - i0 as f64);
        }
        Some(out)
    }

    /// Trilinear interpolation; None outside the node hull.
    pub fn interp_trilinear(&self, f: &[f64], v: Vec3) -> Option<f64> {
        let c = self.frac_coords(v)?;
        let mut acc = 0.0;
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    let w = wt(c[0].1, di) * wt(c[1].1, dj) * wt(c[2].1, dk);
                    acc += w * f[self.index(c[0].0 + di, c[1].0 + dj, c[2].0 + dk)];
                }
            }
        }
        Some(acc)
    }

    /// Triquadratic (3-point Lagrange per axis) interpolation; exact on
    /// quadratic polynomials. None near or outside the hull edge.
    pub fn interp_quadratic(&self, f: &[f64], v: Vec3) -> Option<f64> {
        debug_assert_eq!(self.rule, QuadratureRule::Midpoint);
        let dv = self.dv();
        let mut base = [0usize; 3];
        let mut lag = [[0.0f64; 3]; 3];
        for (a, &c) in [v.x, v.y, v.z].iter().enumerate() {
            let s = (c + self.v_max) / dv - 0.5;
            let ic = s.round() as isize; // nearest node
            if ic < 1 || ic > self.n_v as isize - 2 {
                return None;
            }
            let t = s - ic as f64; // in [-1/2, 1/2]
            base[a] = (ic - 1) as usize;
            lag[a] = [t * (t - 1.0) / 2.0, (1.0 - t) * (1.0 + t), t * (t + 1.0) / 2.0];
        }
        let mut acc = 0.0;
        for (di, li) in lag[0].iter().enumerate() {
            for (dj, lj) in lag[1].iter().enumerate() {
                for (dk, lk) in lag[2].iter().enumerate() {
                    acc += li * lj * lk * f[self.index(base[0] + di, base[1] + dj, base[2] + dk)];
                }
            }
        }
        Some(acc)
    }

    /// Triquadratic interpolation with the stencil clamped to the grid:
    /// outside the hull it extrapolates with the nearest interior
    /// 3-point stencil, so it remains exact on quadratic polynomials
    /// everywhere.
    pub fn interp_quadratic_clamped(&self, f: &[f64], v: Vec3) -> f64 {
        debug_assert_eq!(self.rule, QuadratureRule::Midpoint);
        let dv = self.dv();
        let mut base = [0usize; 3];
        let mut lag = [[0.0f64; 3]; 3];
        for (a, &c) in [v.x, v.y, v.z].iter().enumerate() {
            let s = (c + self.v_max) / dv - 0.5;
            let ic = (s.round() as isize).clamp(1, self.n_v as isize - 2);
            let t = s - ic as f64;
            base[a] = (ic - 1) as usize;
            lag[a] = [t * (t - 1.0) / 2.0, (1.0 - t) * (1.0 + t), t * (t + 1.0) / 2.0];
        }
        let mut acc = 0.0;
        for (di, li) in lag[0].iter().enumerate() {
            for (dj, lj) in lag[1].iter().enumerate() {
                for (dk, lk) in lag[2].iter().enumerate() {
                    acc += li * lj * lk * f[self.index(base[0] + di, base[1] + dj, base[2] + dk)];
                }
            }
        }
        acc
    }

    /// Deposit `mass` at off-grid velocity `v` onto the surrounding
    /// nodes so that the discrete moments {1, v, |v|²} of the deposit
    /// match exactly: trilinear weights reproduce mass and momentum; a
    /// zero-mass, zero-momentum second-difference correction removes the
    /// trilinear scheme's energy excess. Returns the clipped mass if `v`
    /// falls outside the depositable region.
    pub fn deposit_conservative(&self, out: &mut [f64], v: Vec3, mass: f64) -> f64 {
        let Some(c) = self.frac_coords(v) else { return mass };
        // energy correction needs interior second-difference stencils
        let near = |a: usize| -> Option<usize> {
            let i = if c[a].1 > 0.5 { c[a].0 + 1 } else { c[a].0 };
            (1..self.n_v - 1).contains(&i).then_some(i)
        };
        let (Some(ni), Some(nj), Some(nk)) = (near(0), near(1), near(2)) else { return mass };
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    let w = wt(c[0].1, di) * wt(c[1].1, dj) * wt(c[2].1, dk);
                    out[self.index(c[0].0 + di, c[1].0 + dj, c[2].0 + dk)] += mass * w;
                }
            }
        }
        // trilinear energy excess per unit mass: Σ_axis t(1−t)·dv²
        let dv2 = self.dv() * self.dv();
        let excess: f64 = c.iter().map(|&(_, t)| t * (1.0 - t) * dv2).sum();
        // pattern (1, −2, 1) along an axis adds 2dv² energy per unit
        let mu = mass * excess / (3.0 * 2.0 * dv2);
        for axis in 0..3 {
            for (d, s) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                let mut idx = [ni, nj, nk];
                idx[axis] = (idx[axis] as isize + d) as usize;
                out[self.index(idx[0], idx[1], idx[2])] -= mu * s;
            }
        }
        0.0
    }
}

fn wt(t: f64, d: usize) -> f64 {
    if d == 0 {
        1.0 - t
    } else {
        t
    }
}
