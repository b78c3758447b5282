//! Declarative benchmark runner: builds the graphs once per configuration,
//! resamples labels per trial, and aggregates accuracy statistics.
//!
//! Determinism contract: per-trial seeds are derived from the master seed,
//! the rate index, and the trial index, so results are independent of thread
//! count and trial execution order.

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::graph::{
    build_eps_graph, build_knn_graph, laplacian, Laplacian, LaplacianMode, ScaleParams,
};
use crate::io::load_dataset;
use crate::kernels::{sigma_eta, Kernel};
use crate::solvers::solve_constrained_quadratic;
use crate::ssl::{accuracy, assemble_model, predict, sample_labels, EvalMode, LabelRate, ModelOperator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Graph family used for the multiscale levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Eps,
    Knn,
}

/// Graph construction block of a configuration: the family and the ordered
/// scale list (epsilons for `eps`, neighbor counts for `knn`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphConfig {
    #[serde(rename = "type")]
    pub kind: GraphKind,
    pub scales: Vec<f64>,
}

/// Coefficient schedule across levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LambdaScheme {
    CC,
    SC,
    QC,
    VQC,
}

impl LambdaScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            LambdaScheme::CC => "CC",
            LambdaScheme::SC => "SC",
            LambdaScheme::QC => "QC",
            LambdaScheme::VQC => "VQC",
        }
    }
}

/// Power schedule across levels: constant powers or increasing powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PowerScheme {
    CP,
    IP,
}

impl PowerScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            PowerScheme::CP => "CP",
            PowerScheme::IP => "IP",
        }
    }
}

/// Scheme block: which lambda and power schedules to use, with the j
/// parameter required by VQC.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub lambda: LambdaScheme,
    pub power: PowerScheme,
    #[serde(default)]
    pub j: Option<usize>,
}

impl SchemeConfig {
    pub fn tag(&self) -> String {
        format!("{}-{}", self.power.tag(), self.lambda.tag())
    }
}

/// Full experiment description; the JSON form mirrors the field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub dataset: String,
    pub graph: GraphConfig,
    pub kernel: Kernel,
    pub scheme: SchemeConfig,
    pub q: usize,
    pub rates: Vec<LabelRate>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub eval_mode: EvalMode,
    #[serde(default)]
    pub laplacian_mode: LaplacianMode,
    /// Optional power for an additional fixed-level baseline row with q = 1,
    /// lambda = 1, and this power.
    #[serde(default)]
    pub fl_power: Option<u32>,
}

/// One aggregated result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub experiment: String,
    pub dataset: String,
    pub rate: String,
    pub method: String,
    pub q: usize,
    pub j: Option<usize>,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub seconds: f64,
}

/// Expands a scheme into per-level weights and powers for q levels.
pub fn expand_scheme(
    lambda: LambdaScheme,
    power: PowerScheme,
    q: usize,
    j: Option<usize>,
) -> Result<(Vec<f64>, Vec<u32>)> {
    if q < 1 {
        return Err(Error::invalid("need at least one level"));
    }
    let lambdas = match lambda {
        LambdaScheme::CC => vec![1.0; q],
        LambdaScheme::SC => (1..=q).map(|l| l as f64).collect(),
        LambdaScheme::QC => (1..=q).map(|l| (l * l) as f64).collect(),
        LambdaScheme::VQC => {
            let j = j.ok_or_else(|| Error::invalid("VQC requires the j parameter"))?;
            if j < 1 {
                return Err(Error::invalid("VQC j must be at least 1"));
            }
            if !(2..=3).contains(&q) {
                return Err(Error::invalid("VQC is defined for q in {2, 3}"));
            }
            let full = [1.0, (j * j) as f64, ((j + 1) * (j + 1)) as f64];
            full[..q].to_vec()
        }
    };
    let powers = match power {
        PowerScheme::CP => vec![1; q],
        PowerScheme::IP => (1..=q as u32).collect(),
    };
    Ok((lambdas, powers))
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.q < 1 {
        return Err(Error::invalid("q must be at least 1"));
    }
    if config.q > config.graph.scales.len() {
        return Err(Error::invalid(format!(
            "q = {} exceeds the {} provided scales",
            config.q,
            config.graph.scales.len()
        )));
    }
    for w in config.graph.scales.windows(2) {
        if !(w[0] > w[1]) {
            return Err(Error::invalid("scales must be strictly decreasing"));
        }
    }
    if config
        .graph
        .scales
        .iter()
        .any(|&s| !(s > 0.0) || !s.is_finite())
    {
        return Err(Error::invalid("scales must be positive and finite"));
    }
    if config.graph.kind == GraphKind::Knn
        && config.graph.scales.iter().any(|&s| s.fract() != 0.0)
    {
        return Err(Error::invalid("knn scales must be integer neighbor counts"));
    }
    if config.trials < 1 {
        return Err(Error::invalid("need at least one trial"));
    }
    if config.rates.is_empty() {
        return Err(Error::invalid("need at least one labeling rate"));
    }
    for rate in &config.rates {
        match *rate {
            LabelRate::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::invalid(
                        "fraction rates must lie strictly between 0 and 1",
                    ));
                }
            }
            LabelRate::PerClass { per_class } => {
                if per_class == 0 {
                    return Err(Error::invalid("per-class rates must be at least 1"));
                }
            }
        }
    }
    Ok(())
}

/// Builds the Laplacians for the first q scales of a configuration.
pub fn build_laplacians(config: &ExperimentConfig, cloud: &PointCloud) -> Result<Vec<Laplacian>> {
    config.graph.scales[..config.q]
        .iter()
        .map(|&scale| {
            let (w, params) = match config.graph.kind {
                GraphKind::Eps => {
                    let w = build_eps_graph(cloud, scale, config.kernel)?;
                    let params = ScaleParams {
                        sigma_eta: sigma_eta(config.kernel, cloud.d)?,
                        n: cloud.n,
                        eps: scale,
                        d: cloud.d,
                    };
                    (w, Some(params))
                }
                GraphKind::Knn => {
                    if config.laplacian_mode == LaplacianMode::PaperNormalized {
                        return Err(Error::invalid(
                            "the calibrated Laplacian scaling needs an eps graph",
                        ));
                    }
                    (build_knn_graph(cloud, scale as usize)?, None)
                }
            };
            laplacian(&w, config.laplacian_mode, params)
        })
        .collect()
}

fn run_single_trial(
    op: &ModelOperator,
    cloud: &PointCloud,
    truth: &[usize],
    rate: LabelRate,
    seed: u64,
    eval_mode: EvalMode,
) -> Result<f64> {
    let labels = sample_labels(cloud, rate, seed)?;
    let sol = solve_constrained_quadratic(op, &labels.labeled, &labels.one_hot, labels.classes)?;
    let pred = predict(&sol, labels.classes)?;
    accuracy(&pred, truth, &labels.labeled, eval_mode)
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the configured scheme plus the Laplace baseline (q = 1, lambda = 1,
/// power = 1 on the first scale) for every rate. Trials resample labels only;
/// the graphs are built once. A rate row fails the whole run if more than
/// 10 percent of its trials fail.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    validate(config)?;
    let cloud = load_dataset(&config.dataset)?;
    let truth = cloud
        .labels
        .clone()
        .ok_or_else(|| Error::invalid("benchmark dataset must carry labels"))?;
    let laplacians = build_laplacians(config, &cloud)?;

    // method table: tag, level count, weights, powers, j column
    let (lambdas, powers) =
        expand_scheme(config.scheme.lambda, config.scheme.power, config.q, config.scheme.j)?;
    let mut methods: Vec<(String, usize, Vec<f64>, Vec<u32>, Option<usize>)> = vec![(
        config.scheme.tag(),
        config.q,
        lambdas,
        powers,
        match config.scheme.lambda {
            LambdaScheme::VQC => config.scheme.j,
            _ => None,
        },
    )];
    methods.push(("Laplace".to_string(), 1, vec![1.0], vec![1], None));
    if let Some(s) = config.fl_power {
        if s < 1 {
            return Err(Error::invalid("fl_power must be a positive integer"));
        }
        methods.push((format!("FL({})", s), 1, vec![1.0], vec![s], None));
    }

    let models: Vec<ModelOperator> = methods
        .iter()
        .map(|(_, q_m, lambdas, powers, _)| {
            assemble_model(&laplacians[..*q_m], lambdas, powers)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (rate_idx, &rate) in config.rates.iter().enumerate() {
        for (method_idx, (tag, q_m, _, _, j)) in methods.iter().enumerate() {
            let start = Instant::now();
            let op = &models[method_idx];
            let outcomes: Vec<Result<f64>> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed =
                        derive_seed(config.master_seed, &[rate_idx as u64, trial as u64]);
                    run_single_trial(op, &cloud, &truth, rate, seed, config.eval_mode)
                })
                .collect();
            let mut accs = Vec::with_capacity(config.trials);
            let mut failed = 0usize;
            for outcome in outcomes {
                match outcome {
                    Ok(acc) => accs.push(acc),
                    Err(_) => failed += 1,
                }
            }
            if failed as f64 > 0.1 * config.trials as f64 {
                return Err(Error::TooManyFailures {
                    failed,
                    total: config.trials,
                });
            }
            let (mean, std) = mean_and_std(&accs);
            debug_assert!((0.0..=100.0).contains(&mean) && std >= 0.0);
            rows.push(TrialResult {
                experiment: config.experiment.clone(),
                dataset: config.dataset.clone(),
                rate: rate.csv_field(),
                method: tag.clone(),
                q: *q_m,
                j: *j,
                mean_acc: mean,
                std_acc: std,
                trials: accs.len(),
                master_seed: config.master_seed,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}
