//! Nondegeneracy constants of the hypergraph model.
//!
//! Estimates the sigma constants for a kernel by Monte Carlo, prints the
//! sandwich bounds that pin the first-order constant, and checks the exact
//! Gamma-function evaluation available at k = 1.
//!
//! Run with: cargo run --release --example constants

use hohl::kernels::{
    kernel_constants, ratio_bounds, sigma_k1_quadrature, sigma_kp_bounds, Kernel,
};

fn main() -> Result<(), hohl::Error> {
    let kernel = Kernel::Indicator;
    let (d, k, p) = (2usize, 1usize, 3u32);
    let samples = 400_000;

    let c = kernel_constants(kernel, d, k, p, samples, 7)?;
    println!("kernel = {}, d = {}, k = {}, p = {}", kernel.name(), d, k, p);
    println!("sigma_eta        = {:.12}", c.sigma_eta);
    println!(
        "sigma_k          = {:.6} +- {:.6}",
        c.sigma_k.value, c.sigma_k.std_err
    );
    println!(
        "sigma_kp         = {:.6} +- {:.6}",
        c.sigma_kp.value, c.sigma_kp.std_err
    );
    println!(
        "sigma_kp1        = {:.6} +- {:.6}",
        c.sigma_kp1.value, c.sigma_kp1.std_err
    );
    println!(
        "sigma_kp2        = {:.6} +- {:.6}",
        c.sigma_kp2.value, c.sigma_kp2.std_err
    );
    println!(
        "ratio kp / kp1   = {:.6}  (p - 1 = {})",
        c.sigma_kp.value / c.sigma_kp1.value,
        p - 1
    );

    // At k = 1 the angular integrals reduce to Gamma functions, so the
    // Monte Carlo estimate can be checked against an exact value.
    let (exact_kp, exact_kp1) = sigma_k1_quadrature(kernel, d, p)?;
    println!("exact sigma_kp   = {:.12}", exact_kp);
    println!("exact sigma_kp1  = {:.12}", exact_kp1);

    // The same constants, boxed by closed-form bounds that hold for all k.
    let (lo, hi) = sigma_kp_bounds(kernel, d, k, p)?;
    println!("sigma_kp bounds  = [{:.6}, {:.6}]", lo, hi);
    let (rlo, rhi) = ratio_bounds(kernel, d, k, p)?;
    println!("ratio bounds     = [{:.6}, {:.6}]", rlo, rhi);
    Ok(())
}
