//! Discrete-to-continuum convergence of the (k,p)-Laplacian.
//!
//! Samples point clouds of increasing size from the unit torus, applies the
//! discrete operator with bandwidth eps = n^{-1/6} to a smooth test function,
//! and compares pointwise against the limiting differential operator. The
//! median error should shrink as n grows.
//!
//! Run with: cargo run --release --example consistency_trend

use hohl::consistency::{
    pointwise_consistency_experiment, ConsistencyConstants, ContinuumProblem, SineTestFunction,
    UniformDensity,
};
use hohl::geometry::Domain;
use hohl::kernels::Kernel;

fn main() -> Result<(), hohl::Error> {
    let d = 1;
    let (k, p) = (1usize, 2.0f64);
    let density = UniformDensity;
    let u = SineTestFunction::axis(d);
    let problem = ContinuumProblem {
        density: &density,
        u: &u,
        domain: Domain::Torus,
        d,
    };
    let constants = ConsistencyConstants::exact_k1(Kernel::Indicator, d, 2)?;

    let runs: Vec<(usize, f64)> = [500usize, 1000, 2000, 4000]
        .iter()
        .map(|&n| (n, (n as f64).powf(-1.0 / 6.0)))
        .collect();
    let rows =
        pointwise_consistency_experiment(&problem, Kernel::Indicator, k, p, &runs, &constants, 0)?;
    println!("{:>6} {:>10} {:>14} {:>14}", "n", "eps", "median err", "p90 err");
    for r in &rows {
        println!(
            "{:>6} {:>10.5} {:>14.6e} {:>14.6e}",
            r.n, r.eps, r.median_err, r.p90_err
        );
    }
    Ok(())
}
