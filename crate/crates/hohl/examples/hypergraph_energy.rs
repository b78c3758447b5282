//! Hypergraph energies and the discrete (k,p)-Laplacian.
//!
//! Walks through a worked three-point instance with known values, checks the
//! pruned evaluation against full enumeration on a random cloud, and verifies
//! the variational identity linking the energy to the operator.
//!
//! Run with: cargo run --release --example hypergraph_energy

use hohl::geometry::{sample_uniform, Domain, PointCloud};
use hohl::hypergraph::{
    hypergraph_energy, hypergraph_energy_bruteforce, kp_laplacian_apply, HypergraphParams,
    HypergraphStencil,
};
use hohl::kernels::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), hohl::Error> {
    // Three collinear points at 0, 0.5, 1.2 with u = (0, 1, 0). Only the
    // first two are within eps = 1 of each other, and the energy works out
    // to 4/9 while the operator reads (1/3, -2/3, 1/3).
    let cloud = PointCloud::new(vec![0.0, 0.5, 1.2], 1, None, Domain::Cube)?;
    let params = HypergraphParams::new(1, 1.0, Kernel::Indicator)?;
    let u = [0.0, 1.0, 0.0];
    let e = hypergraph_energy(&u, &cloud, &params, 2.0)?;
    let lap = kp_laplacian_apply(&u, &cloud, &params, 2.0)?;
    println!("toy energy   = {:.12}  (4/9 = {:.12})", e, 4.0 / 9.0);
    println!("toy operator = [{:.4}, {:.4}, {:.4}]", lap[0], lap[1], lap[2]);

    // Pruned enumeration against the O(n^{k+1}) oracle on a random cloud.
    let n = 25;
    let cloud = sample_uniform(n, 1, Domain::Cube, 9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    for k in 1..=3usize {
        let params = HypergraphParams::new(k, 0.4, Kernel::TruncatedExpGaussian)?;
        let pruned = hypergraph_energy(&u, &cloud, &params, 3.0)?;
        let brute = hypergraph_energy_bruteforce(&u, &cloud, &params, 3.0)?;
        println!(
            "k = {}: pruned = {:.10e}, brute = {:.10e}, rel err = {:.2e}",
            k,
            pruned,
            brute,
            (pruned - brute).abs() / brute.abs()
        );
    }

    // d/dt E(u + t v) at t = 0 equals -2p <Delta u, v> in the empirical
    // inner product (1/n) sum_i.
    let p = 3.0;
    let params = HypergraphParams::new(2, 0.4, Kernel::Indicator)?;
    let stencil = HypergraphStencil::new(&cloud, params)?;
    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let h = 1e-4;
    let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
    let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
    let fd = (stencil.energy(&up, p)? - stencil.energy(&um, p)?) / (2.0 * h);
    let lap = stencil.laplacian_apply(&u, p)?;
    let inner: f64 = lap.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    println!(
        "directional derivative = {:.10e}, -2p<Delta u, v> = {:.10e}",
        fd,
        -2.0 * p * inner
    );
    Ok(())
}
