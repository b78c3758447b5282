//! Degenerate versus well-posed label interpolation.
//!
//! Minimizes the order-1 energy with p = 4 on a 1-d sample under two
//! bandwidth regimes. A spike of height h at a labeled point costs on the
//! order of h^p / (n eps^p), so when n eps^p grows the constraint is
//! absorbed by a free spike and the minimizer collapses to a constant, while
//! when n eps^p vanishes spikes are ruled out and the labels propagate. The
//! diagnostic reports how far the solution strays from its own median away
//! from the label neighborhoods.
//!
//! Run with: cargo run --release --example spikes

use hohl::consistency::spike_diagnostic;
use hohl::geometry::{sample_uniform, Domain};
use hohl::kernels::Kernel;
use hohl::solvers::minimize_hypergraph_energy;

fn main() -> Result<(), hohl::Error> {
    let n = 1000;
    let p = 4.0;
    let cloud = sample_uniform(n, 1, Domain::Cube, 11)?;

    // Label the extreme points with values 0 and 1.
    let mut lo = 0;
    let mut hi = 0;
    for i in 1..n {
        if cloud.point(i)[0] < cloud.point(lo)[0] {
            lo = i;
        }
        if cloud.point(i)[0] > cloud.point(hi)[0] {
            hi = i;
        }
    }
    let labeled = [lo, hi];
    let values = [0.0, 1.0];

    for (name, eps) in [
        ("well-posed (n eps^p -> 0)  ", (n as f64).powf(-1.0 / 3.0)),
        ("ill-posed  (n eps^p -> inf)", (n as f64).powf(-1.0 / 8.0)),
    ] {
        let u = minimize_hypergraph_energy(
            &cloud,
            &[(1, 1.0)],
            p,
            eps,
            Kernel::Indicator,
            &labeled,
            &values,
            1,
        )?;
        let diag = spike_diagnostic(&cloud, &u, &labeled, 2.0 * eps);
        println!(
            "{}: eps = {:.4}, n eps^4 = {:.2}, median = {:.4}, max dev outside = {:.4e}, spikes = {}",
            name,
            eps,
            n as f64 * eps.powi(4),
            diag.median,
            diag.max_dev_outside,
            diag.spike_count
        );
    }
    Ok(())
}
