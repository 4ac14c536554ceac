//! Gauss-Legendre quadrature helpers.
//!
//! Used wherever midpoint rules are too crude: half-space flux integrals
//! (the integrand has a kink at n·u = 0) and the closed-form collision
//! frequency cross-checks.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
/// Newton iteration on the Legendre recurrence; accurate to ~1e-15 for
/// the moderate orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// n-point rule mapped to [a, b].
pub fn gauss_legendre_ab(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + c * t).collect(),
        w.iter().map(|&wi| wi * c).collect(),
    )
}

/// ∫_a^b f, composite over `panels` equal panels of an n-point rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (x, w) = gauss_legendre_ab(n, a + p as f64 * h, a + (p + 1) as f64 * h);
        total += x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules_are_exact_on_polynomials() {
        // 5-point rule integrates degree ≤ 9 exactly
        let val = integrate(|x| x.powi(8), -1.0, 1.0, 5, 1);
        assert!((val - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let val = integrate(|x| (-x * x / 2.0).exp(), -12.0, 12.0, 24, 8);
        assert!((val - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let (_, w) = gauss_legendre_ab(16, 2.0, 5.0);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-13);
    }
}
