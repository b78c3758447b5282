//! Multiscale semi-supervised classification on the iris dataset.
//!
//! Builds epsilon graphs at three dyadic scales, combines their Laplacians
//! with quadratically growing coefficients and increasing powers, and solves
//! the constrained quadratic problem from a 50 percent label sample.
//!
//! Run with: cargo run --release --example multiscale_ssl

use hohl::graph::{build_eps_graph, laplacian, LaplacianMode};
use hohl::harness::{expand_scheme, LambdaScheme, PowerScheme};
use hohl::io::load_dataset;
use hohl::kernels::Kernel;
use hohl::solvers::solve_constrained_quadratic;
use hohl::ssl::{accuracy, assemble_model, predict, sample_labels, EvalMode, LabelRate};
use std::path::Path;

fn main() -> Result<(), hohl::Error> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv");
    let cloud = load_dataset(&data)?;
    println!("iris: n = {}, d = {}", cloud.n, cloud.d);

    // Scales 4, 2, 1; coefficients l^2 with power l at level l.
    let scales = [4.0, 2.0, 1.0];
    let q = scales.len();
    let (lambdas, powers) = expand_scheme(LambdaScheme::QC, PowerScheme::IP, q, None)?;
    let laplacians: Vec<_> = scales
        .iter()
        .map(|&eps| {
            let w = build_eps_graph(&cloud, eps, Kernel::ExpGaussian)?;
            laplacian(&w, LaplacianMode::Raw, None)
        })
        .collect::<Result<_, _>>()?;
    let model = assemble_model(&laplacians, &lambdas, &powers)?;

    let labels = sample_labels(&cloud, LabelRate::Fraction(0.5), 0)?;
    println!("labeled {} of {} points", labels.labeled.len(), cloud.n);

    let scores = solve_constrained_quadratic(&model, &labels.labeled, &labels.one_hot, labels.classes)?;
    let pred = predict(&scores, labels.classes)?;
    let truth = cloud.labels.as_ref().expect("iris has labels");
    let acc = accuracy(&pred, truth, &labels.labeled, EvalMode::UnlabeledOnly)?;
    println!("accuracy on unlabeled points = {:.2}%", acc);
    Ok(())
}
