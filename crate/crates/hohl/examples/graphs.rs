//! Geometric graph construction on a random point cloud.
//!
//! Builds an epsilon-neighborhood graph and a self-tuning kNN graph over the
//! same sample, and shows the two Laplacian scalings side by side.
//!
//! Run with: cargo run --release --example graphs

use hohl::geometry::{sample_uniform, Domain};
use hohl::graph::{
    build_eps_graph, build_knn_graph, connected_components, laplacian, LaplacianMode, ScaleParams,
};
use hohl::kernels::{sigma_eta, Kernel};

fn main() -> Result<(), hohl::Error> {
    let n = 500;
    let d = 2;
    let cloud = sample_uniform(n, d, Domain::Cube, 42)?;

    // Epsilon graph with the indicator kernel: every pair within eps gets
    // weight one.
    let eps = 0.12;
    let kernel = Kernel::Indicator;
    let w_eps = build_eps_graph(&cloud, eps, kernel)?;
    let comps = connected_components(&w_eps);
    let n_comp = comps.iter().max().map_or(0, |m| m + 1);
    println!(
        "eps graph: n = {}, edges = {}, components = {}",
        n,
        w_eps.iter_upper().count(),
        n_comp
    );

    // Raw D - W, and the normalized variant whose spectrum is calibrated for
    // the continuum limit.
    let raw = laplacian(&w_eps, LaplacianMode::Raw, None)?;
    let params = ScaleParams {
        sigma_eta: sigma_eta(kernel, d)?,
        n,
        eps,
        d,
    };
    let scaled = laplacian(&w_eps, LaplacianMode::PaperNormalized, Some(params))?;
    let ones = vec![1.0; n];
    let r1 = raw.apply_alloc(&ones);
    println!(
        "raw Laplacian: factor = {:.3e}, max |L 1| = {:.3e}",
        raw.factor(),
        r1.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
    println!("normalized Laplacian: factor = {:.6}", scaled.factor());

    // Self-tuning kNN graph: Gaussian weights with per-point bandwidth set by
    // the distance to the 7th neighbor, symmetrized by max.
    let w_knn = build_knn_graph(&cloud, 7)?;
    println!(
        "knn graph: edges = {}, components = {}",
        w_knn.iter_upper().count(),
        connected_components(&w_knn)
            .iter()
            .max()
            .map_or(0, |m| m + 1)
    );
    Ok(())
}
