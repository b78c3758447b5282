//! Sparse symmetric graphs and graph Laplacians.
//!
//! Graphs are stored in compressed row format and are always structurally
//! symmetric: entry (i, j) exists iff (j, i) does, with bitwise equal value.
//! Construction is parallel over rows; once built, matrices are immutable
//! and safe to share across threads.

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud};
use crate::kernels::Kernel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Symmetric sparse matrix in compressed row storage. Used both for weighted
/// adjacency (weights >= 0) and for Laplacians (entries of either sign).
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from per-row entry lists. Rows are sorted by column; entries
    /// must be finite, within bounds, unique per row, and globally symmetric
    /// with exactly equal transposed values.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::invalid(format!(
                "{} rows for a matrix of dimension {}",
                rows.len(),
                n
            )));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invalid(format!(
                        "duplicate entry ({}, {})",
                        i, w[0].0
                    )));
                }
            }
            for &(j, v) in row.iter() {
                if j >= n {
                    return Err(Error::invalid(format!(
                        "column {} out of bounds in row {}",
                        j, i
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite weight at ({}, {})", i, j)));
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in &rows {
            for &(j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let m = SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        };
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if m.get(j, i).map(|t| t.to_bits()) != Some(v.to_bits()) {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({}, {})",
                        i, j
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Entry (i, j) if stored.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// y = M x. Parallel over rows; each row reduces sequentially, so the
    /// result does not depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = s;
        });
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Row sums; for an adjacency matrix these are the vertex degrees.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    /// Dense row-major copy, for small-n direct solvers and test oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                a[i * self.n + j] = v;
            }
        }
        a
    }

    /// Upper-triangle entries (i < j), row by row.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Scales every entry by `c`, preserving symmetry.
    pub fn scaled(&self, c: f64) -> SparseSymMatrix {
        SparseSymMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Laplacian normalization: `raw` is D - W; `paper-normalized` multiplies by
/// the calibration factor 2/(sigma_eta n eps^{d+2}) under which the operator
/// converges to its continuum limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianMode {
    #[default]
    Raw,
    PaperNormalized,
}

/// Parameters of the paper-normalized scaling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScaleParams {
    pub sigma_eta: f64,
    pub n: usize,
    pub eps: f64,
    pub d: usize,
}

/// A graph Laplacian `c (D - W)`. The stored matrix already carries the
/// factor, so `apply` is a plain matvec.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub matrix: SparseSymMatrix,
    pub mode: LaplacianMode,
    pub scale_params: Option<ScaleParams>,
    factor: f64,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.n
    }

    /// The scalar `c` with which `D - W` was multiplied.
    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
    }

    pub fn apply_alloc(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec_alloc(x)
    }
}

/// Assembles `c (D - W)` from a weighted adjacency matrix. `W` must have a
/// zero diagonal (no stored diagonal entries) and nonnegative weights; the
/// paper-normalized mode requires `scale_params`.
pub fn laplacian(
    w: &SparseSymMatrix,
    mode: LaplacianMode,
    scale_params: Option<ScaleParams>,
) -> Result<Laplacian> {
    for i in 0..w.n {
        let (cols, vals) = w.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                return Err(Error::invalid("adjacency matrix must have a zero diagonal"));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!(
                    "negative adjacency weight at ({}, {})",
                    i, j
                )));
            }
        }
    }
    let factor = match mode {
        LaplacianMode::Raw => 1.0,
        LaplacianMode::PaperNormalized => {
            let sp = scale_params.ok_or_else(|| {
                Error::invalid("paper-normalized mode requires scale_params")
            })?;
            2.0 / (sp.sigma_eta * sp.n as f64 * sp.eps.powi(sp.d as i32 + 2))
        }
    };
    let degrees = w.degrees();
    let rows: Vec<Vec<(usize, f64)>> = (0..w.n)
        .map(|i| {
            let (cols, vals) = w.row(i);
            let mut row = Vec::with_capacity(cols.len() + 1);
            let mut placed = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if !placed && j > i {
                    row.push((i, factor * degrees[i]));
                    placed = true;
                }
                row.push((j, -factor * v));
            }
            if !placed {
                row.push((i, factor * degrees[i]));
            }
            row
        })
        .collect();
    Ok(Laplacian {
        matrix: SparseSymMatrix::from_rows(w.n, rows)?,
        mode,
        scale_params,
        factor,
    })
}

/// Epsilon-graph: `w_ij = eta(|x_i - x_j| / eps)` for `i != j`, keeping only
/// nonzero weights. A compactly supported kernel restricts candidates to the
/// ball of radius `eps * support`; the unbounded exponential kernel connects
/// every pair whose weight does not underflow to zero.
pub fn build_eps_graph(cloud: &PointCloud, eps: f64, kernel: Kernel) -> Result<SparseSymMatrix> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("eps must be positive and finite"));
    }
    let rows: Vec<Vec<(usize, f64)>> = match kernel.support_radius() {
        Some(r) => {
            let index = NeighborIndex::new(cloud);
            (0..cloud.n)
                .into_par_iter()
                .map(|i| {
                    index
                        .range_neighbors(i, eps * r)
                        .into_iter()
                        .map(|j| (j, kernel.eval(cloud.dist(i, j) / eps)))
                        .filter(|&(_, w)| w > 0.0)
                        .collect()
                })
                .collect()
        }
        None => (0..cloud.n)
            .into_par_iter()
            .map(|i| {
                (0..cloud.n)
                    .filter(|&j| j != i)
                    .map(|j| (j, kernel.eval(cloud.dist(i, j) / eps)))
                    .filter(|&(_, w)| w > 0.0)
                    .collect()
            })
            .collect(),
    };
    SparseSymMatrix::from_rows(cloud.n, rows)
}

/// Self-tuning kNN graph: `w_ij = exp(-4 |x_i - x_j|^2 / d_k(x_i)^2)` for j
/// among the k nearest neighbors of i, symmetrized by keeping the larger of
/// the two directed weights. Coincident points (d_k = 0) get weight 1, the
/// limit of the weight along coincident scales.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<SparseSymMatrix> {
    let index = NeighborIndex::new(cloud);
    let directed: Vec<Vec<(usize, f64)>> = (0..cloud.n)
        .into_par_iter()
        .map(|i| -> Result<Vec<(usize, f64)>> {
            let (ids, dists) = index.knn(i, k)?;
            let dk = *dists.last().expect("k >= 1");
            Ok(ids
                .iter()
                .zip(&dists)
                .map(|(&j, &dist)| {
                    let w = if dist == 0.0 {
                        1.0
                    } else {
                        (-4.0 * dist * dist / (dk * dk)).exp()
                    };
                    (j, w)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    // merge (i -> j) and (j -> i) taking the max weight
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cloud.n];
    for (i, out) in directed.iter().enumerate() {
        for &(j, w) in out {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
    }
    for row in rows.iter_mut() {
        row.sort_unstable_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(j, w) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 = last.1.max(w),
                _ => merged.push((j, w)),
            }
        }
        *row = merged;
    }
    SparseSymMatrix::from_rows(cloud.n, rows)
}

/// Skeleton graph of a hypergraph: every pair of vertices that co-occur in a
/// hyperedge of size k+1 is joined by an edge of weight 1.
pub fn skeleton_graph(hyperedges: &[Vec<usize>], k: usize, n: usize) -> Result<SparseSymMatrix> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e_id, e) in hyperedges.iter().enumerate() {
        if e.len() != k + 1 {
            return Err(Error::invalid(format!(
                "hyperedge {} has {} vertices, expected {}",
                e_id,
                e.len(),
                k + 1
            )));
        }
        let mut sorted = e.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "hyperedge {} has repeated vertices",
                e_id
            )));
        }
        if *sorted.last().expect("size k+1 >= 2") >= n {
            return Err(Error::invalid(format!(
                "hyperedge {} references a vertex >= n = {}",
                e_id, n
            )));
        }
        for a in 0..e.len() {
            for b in a + 1..e.len() {
                rows[sorted[a]].push(sorted[b]);
                rows[sorted[b]].push(sorted[a]);
            }
        }
    }
    let rows = rows
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            r.dedup();
            r.into_iter().map(|j| (j, 1.0)).collect()
        })
        .collect();
    SparseSymMatrix::from_rows(n, rows)
}

/// Component labels via union-find over nonzero edges, renumbered in order
/// of first appearance so vertex 0 is always in component 0.
pub fn connected_components(w: &SparseSymMatrix) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..w.n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, v) in w.iter_upper() {
        if v != 0.0 {
            let a = find(&mut parent, i);
            let b = find(&mut parent, j);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![usize::MAX; w.n];
    let mut next = 0;
    for i in 0..w.n {
        let root = find(&mut parent, i);
        if labels[root] == usize::MAX {
            labels[root] = next;
            next += 1;
        }
        labels[i] = labels[root];
    }
    labels
}

/// Writes the graph as text triplets: a `n m sym` header line, then one
/// `i j w` line per upper-triangle edge with 17 significant digits.
pub fn dump_graph(w: &SparseSymMatrix, out: &mut impl Write) -> Result<()> {
    let m = w.iter_upper().count();
    writeln!(out, "{} {} sym", w.n, m)?;
    for (i, j, v) in w.iter_upper() {
        writeln!(out, "{} {} {:.16e}", i, j, v)?;
    }
    Ok(())
}
