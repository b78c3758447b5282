//! Semi-supervised problem assembly: one-hot label encoding, the multiscale
//! higher-order model operator, prediction, and accuracy scoring.
//!
//! The model operator is `sum_k lambda_k L_k^{p_k}`. Below a dimension
//! threshold it is materialized densely so that trial solves reuse cheap
//! applies and an exact diagonal; above it the powers stay matrix-free.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::graph::Laplacian;
use crate::solvers::{DenseOperator, LinearOperator};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest dimension at which the model operator is materialized densely.
pub const DENSE_THRESHOLD: usize = 2048;

/// One level of the multiscale model: a Laplacian raised to an integer
/// power, weighted by a positive coefficient.
#[derive(Debug, Clone)]
pub struct MultiscaleLevel {
    pub lambda: f64,
    pub power: u32,
    pub laplacian: Laplacian,
}

/// Validated multiscale model `sum_k lambda_k L_k^{p_k}` with q levels.
/// Scale ordering across levels is enforced where the scales are declared,
/// at experiment-configuration time.
#[derive(Debug, Clone)]
pub struct MultiscaleModel {
    levels: Vec<MultiscaleLevel>,
}

impl MultiscaleModel {
    pub fn new(levels: Vec<MultiscaleLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("model needs at least one level"));
        }
        let n = levels[0].laplacian.n();
        for level in &levels {
            if !(level.lambda > 0.0) {
                return Err(Error::invalid("level weights must be positive"));
            }
            if level.power < 1 {
                return Err(Error::invalid("level powers must be positive integers"));
            }
            if level.laplacian.n() != n {
                return Err(Error::invalid(format!(
                    "level dimension {} does not match {}",
                    level.laplacian.n(),
                    n
                )));
            }
        }
        Ok(MultiscaleModel { levels })
    }

    pub fn q(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].laplacian.n()
    }

    pub fn operator(&self) -> ModelOperator<'_> {
        let laplacians: Vec<&Laplacian> = self.levels.iter().map(|l| &l.laplacian).collect();
        let lambdas: Vec<f64> = self.levels.iter().map(|l| l.lambda).collect();
        let powers: Vec<u32> = self.levels.iter().map(|l| l.power).collect();
        ModelOperator::build(&laplacians, &lambdas, &powers)
    }
}

/// The assembled operator. Dense below [`DENSE_THRESHOLD`], matrix-free
/// (power applies by successive sparse multiplies) above.
pub enum ModelOperator<'a> {
    Dense(DenseOperator),
    MatrixFree {
        levels: Vec<(f64, u32, &'a Laplacian)>,
        n: usize,
    },
}

/// Row-parallel dense multiply `a * b`, both n x n row-major. Each output
/// row is accumulated sequentially so results do not depend on thread count.
fn dense_matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    c.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                let brow = &b[k * n..(k + 1) * n];
                for (cj, bj) in row.iter_mut().zip(brow) {
                    *cj += aik * bj;
                }
            }
        }
    });
    c
}

impl<'a> ModelOperator<'a> {
    fn build(laplacians: &[&'a Laplacian], lambdas: &[f64], powers: &[u32]) -> Self {
        let n = laplacians[0].n();
        if n <= DENSE_THRESHOLD {
            let mut a = vec![0.0; n * n];
            for ((l, &lambda), &p) in laplacians.iter().zip(lambdas).zip(powers) {
                let base = l.matrix.to_dense();
                let mut m = base.clone();
                for _ in 1..p {
                    m = dense_matmul(&base, &m, n);
                }
                for (ai, mi) in a.iter_mut().zip(&m) {
                    *ai += lambda * mi;
                }
            }
            ModelOperator::Dense(DenseOperator::new(n, a).expect("square by construction"))
        } else {
            let levels = lambdas
                .iter()
                .zip(powers)
                .zip(laplacians)
                .map(|((&lambda, &p), &l)| (lambda, p, l))
                .collect();
            ModelOperator::MatrixFree { levels, n }
        }
    }
}

impl LinearOperator for ModelOperator<'_> {
    fn dim(&self) -> usize {
        match self {
            ModelOperator::Dense(d) => d.dim(),
            ModelOperator::MatrixFree { n, .. } => *n,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            ModelOperator::Dense(d) => d.apply(x, y),
            ModelOperator::MatrixFree { levels, n } => {
                y.fill(0.0);
                let mut cur = vec![0.0; *n];
                let mut next = vec![0.0; *n];
                for &(lambda, p, l) in levels {
                    cur.copy_from_slice(x);
                    for _ in 0..p {
                        l.apply(&cur, &mut next);
                        std::mem::swap(&mut cur, &mut next);
                    }
                    for (yi, ci) in y.iter_mut().zip(&cur) {
                        *yi += lambda * ci;
                    }
                }
            }
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        match self {
            ModelOperator::Dense(d) => Some(d.diagonal()),
            ModelOperator::MatrixFree { .. } => None,
        }
    }
}

/// Assembles `sum_k lambda_k L_k^{p_k}` as a symmetric PSD operator.
pub fn assemble_model<'a>(
    laplacians: &'a [Laplacian],
    lambdas: &[f64],
    powers: &[u32],
) -> Result<ModelOperator<'a>> {
    if laplacians.is_empty() || laplacians.len() != lambdas.len() || lambdas.len() != powers.len()
    {
        return Err(Error::invalid(
            "need equally many Laplacians, weights, and powers (at least one)",
        ));
    }
    let n = laplacians[0].n();
    for l in laplacians {
        if l.n() != n {
            return Err(Error::invalid(format!(
                "Laplacian dimensions disagree: {} vs {}",
                l.n(),
                n
            )));
        }
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("lambda weights must be positive"));
    }
    if powers.iter().any(|&p| p < 1) {
        return Err(Error::invalid("powers must be positive integers"));
    }
    let refs: Vec<&Laplacian> = laplacians.iter().collect();
    Ok(ModelOperator::build(&refs, lambdas, powers))
}

/// Argmax prediction per row of an n x C score matrix; ties resolve to the
/// lowest class index.
pub fn predict(scores: &[f64], classes: usize) -> Result<Vec<usize>> {
    if classes == 0 || scores.len() % classes != 0 {
        return Err(Error::invalid("score matrix shape does not match class count"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("scores contain non-finite entries"));
    }
    Ok(scores
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Which vertices accuracy is scored over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    #[default]
    UnlabeledOnly,
    All,
}

/// Percentage of agreement between predictions and ground truth over the
/// selected index set.
pub fn accuracy(
    pred: &[usize],
    truth: &[usize],
    labeled: &[usize],
    mode: EvalMode,
) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid("prediction and truth lengths differ"));
    }
    let mut is_labeled = vec![false; pred.len()];
    for &i in labeled {
        if i >= pred.len() {
            return Err(Error::invalid(format!("labeled index {} out of range", i)));
        }
        is_labeled[i] = true;
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for i in 0..pred.len() {
        if mode == EvalMode::UnlabeledOnly && is_labeled[i] {
            continue;
        }
        total += 1;
        if pred[i] == truth[i] {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("evaluation set is empty"));
    }
    Ok(100.0 * hits as f64 / total as f64)
}

/// Labeling budget: a global fraction of each class, or a flat per-class
/// count. In JSON a bare number is a fraction and `{"per_class": m}` is a
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRate {
    Fraction(f64),
    PerClass { per_class: usize },
}

impl LabelRate {
    /// Short form used in result tables: the fraction as printed, or
    /// `pc{m}` for per-class counts.
    pub fn csv_field(&self) -> String {
        match self {
            LabelRate::Fraction(f) => format!("{}", f),
            LabelRate::PerClass { per_class } => format!("pc{}", per_class),
        }
    }
}

/// A sampled constraint set: sorted labeled indices with their one-hot rows.
#[derive(Debug, Clone)]
pub struct LabelSet {
    pub labeled: Vec<usize>,
    pub classes: usize,
    /// Row-major `labeled.len() x classes`, rows in `labeled` order.
    pub one_hot: Vec<f64>,
}

/// Samples labels class by class without replacement: a fraction rate takes
/// `max(1, round(rate * class size))` from each class, a per-class count
/// takes exactly that many. Every class is therefore represented at least
/// once. Deterministic in the seed.
pub fn sample_labels(cloud: &PointCloud, rate: LabelRate, seed: u64) -> Result<LabelSet> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("dataset has no labels to sample from"))?;
    let classes = cloud.num_classes().expect("labels present");
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled = Vec::new();
    for class_indices in by_class.iter_mut() {
        let size = class_indices.len();
        let budget = match rate {
            LabelRate::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::invalid("fraction rate must lie in (0, 1]"));
                }
                ((f * size as f64).round() as usize).clamp(1, size)
            }
            LabelRate::PerClass { per_class } => {
                if per_class == 0 {
                    return Err(Error::invalid("per-class budget must be at least 1"));
                }
                if per_class > size {
                    return Err(Error::invalid(format!(
                        "per-class budget {} exceeds a class of size {}",
                        per_class, size
                    )));
                }
                per_class
            }
        };
        let (chosen, _) = class_indices.partial_shuffle(&mut rng, budget);
        labeled.extend_from_slice(chosen);
    }
    labeled.sort_unstable();
    let mut one_hot = vec![0.0; labeled.len() * classes];
    for (row, &i) in labeled.iter().enumerate() {
        one_hot[row * classes + labels[i]] = 1.0;
    }
    Ok(LabelSet {
        labeled,
        classes,
        one_hot,
    })
}
