//! Trial-averaged benchmark over random label draws.
//!
//! Runs the full harness on iris: graph construction, model assembly, and a
//! batch of independent labeling trials per rate, with a fixed-level Laplace
//! baseline alongside the multiscale method. Prints the result table as CSV.
//!
//! Run with: cargo run --release --example benchmark

use hohl::harness::{
    run_experiment, ExperimentConfig, GraphConfig, GraphKind, LambdaScheme, PowerScheme,
    SchemeConfig,
};
use hohl::io::results_to_csv;
use hohl::kernels::Kernel;
use hohl::ssl::{EvalMode, LabelRate};
use std::path::Path;

fn main() -> Result<(), hohl::Error> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv");
    let config = ExperimentConfig {
        experiment: "iris-demo".into(),
        dataset: data.to_string_lossy().into_owned(),
        graph: GraphConfig {
            kind: GraphKind::Eps,
            scales: vec![4.0, 2.0, 1.0],
        },
        kernel: Kernel::ExpGaussian,
        scheme: SchemeConfig {
            lambda: LambdaScheme::QC,
            power: PowerScheme::IP,
            j: None,
        },
        q: 3,
        rates: vec![LabelRate::Fraction(0.1), LabelRate::Fraction(0.5)],
        trials: 20,
        master_seed: 0,
        eval_mode: EvalMode::UnlabeledOnly,
        laplacian_mode: Default::default(),
        fl_power: None,
    };
    let rows = run_experiment(&config)?;
    print!("{}", results_to_csv(&rows)?);
    Ok(())
}
