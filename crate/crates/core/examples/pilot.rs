use std::sync::Arc;
use std::time::Instant;

use bte_core::collision::{
    maxwellian, measure_c_q, q_bilinear, BilinearScheme, CollisionKernel, QuadratureRule,
};
use bte_core::geometry::Domain;
use bte_core::rng::CounterRng;
use bte_core::transport::{
    solve_linear, solve_nonlinear, PhaseGridFunction, Scheme, SolverConfig, SpatialGrid,
};
use bte_core::Vec3;

fn main() {
    let kern = Arc::new(CollisionKernel::with_c_k(4.0, 6, QuadratureRule::Midpoint, 1.6));
    let km = kern.k_matrix();
    let omega = |v: Vec3| (1.0 + v.norm_sq()).powf(5.0);

    // C_Q over random smooth pairs
    let mut c_q: f64 = 0.0;
    for s in 0..5 {
        let mut rng = CounterRng::for_sample(7, "cq", s);
        let mk = |rng: &mut CounterRng| {
            let (a, b, c) = (
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
            );
            kern.grid
                .sample(|v| (a + b * v.x + c * v.y * v.z) * (-0.4 * v.norm_sq()).exp())
        };
        let g = mk(&mut rng);
        let h = mk(&mut rng);
        let q = q_bilinear(&kern.grid, &g, &h, BilinearScheme::ConservativeDeposit);
        c_q = c_q.max(measure_c_q(&kern.grid, &kern.nu, omega, &g, &h, &q.values));
    }
    println!("C_Q = {c_q:.4}");

    let eps = 0.5;
    let domain = Domain::cylinder(1.0, 1.0, eps).unwrap();
    let l = domain.half_length();
    let nx = (2.0 * l / 0.25).round() as usize;
    let grid = Arc::new(SpatialGrid::axial(domain, nx).unwrap());
    let cfg = SolverConfig {
        alpha: 1.0,
        a_radius: 6.0,
        tol: 1e-7,
        max_iter: 30,
        dt: 0.02,
        horizon: 15.0,
        scheme: Scheme::MildDuhamel,
    };

    // pilot linear run for C0 (triple-norm constant)
    let f0 = PhaseGridFunction::sample(Arc::clone(&grid), Arc::clone(&kern), |x, v| {
        (std::f64::consts::PI * x.x / l).sin() * maxwellian(v)
    });
    let t0 = Instant::now();
    let rep = solve_linear(&f0, None, &km, &cfg, &omega).unwrap();
    let theta = 0.9 * rep.decay_rate;
    let n0 = f0.sup_weighted(omega);
    let c0 = rep
        .trace
        .sup_norms
        .iter()
        .zip(&rep.trace.times)
        .map(|(n, t)| n * (theta * t).exp() / n0)
        .fold(0.0f64, f64::max)
        .max(1.0);
    println!(
        "linear pilot: rate={:.4} C0={c0:.4} elapsed={:.1}s",
        rep.decay_rate,
        t0.elapsed().as_secs_f64()
    );

    let lambda = (1.0 / (c0 * (1.0 + c_q))).min(1.0 / (4.0 * c0 * c_q)).min(1.0);
    let amp = 0.5 * lambda * lambda / (f0.sup_weighted(omega) / 1.0);
    println!("lambda = {lambda:.4}, amplitude = {amp:.3e}");
    let small0 = PhaseGridFunction::sample(Arc::clone(&grid), Arc::clone(&kern), |x, v| {
        amp * (std::f64::consts::PI * x.x / l).sin() * maxwellian(v)
    });
    let t0 = Instant::now();
    match solve_nonlinear(&small0, &km, &cfg, &omega, c0, c_q) {
        Ok(nl) => println!(
            "nonlinear: outer={} factors={:?} lambda={:.4} rate={:.4} elapsed={:.1}s",
            nl.outer_iterations,
            nl.contraction_factors,
            nl.lambda,
            nl.linear.decay_rate,
            t0.elapsed().as_secs_f64()
        ),
        Err(e) => println!("nonlinear failed: {e}"),
    }
}
