//! Linear-algebra kernels: conjugate gradients, Laplacian powers, constrained
//! quadratic minimization, and gradient descent for p > 2 hypergraph energies.
//!
//! Operators are exposed through the [`LinearOperator`] apply contract since
//! power sums are never materialized sparsely; the Jacobi preconditioner
//! therefore estimates the diagonal by probing.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::graph::Laplacian;
use crate::hypergraph::{HypergraphParams, HypergraphStencil};
use crate::kernels::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A symmetric positive semidefinite operator available as an apply.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn is_symmetric(&self) -> bool {
        true
    }

    fn is_psd(&self) -> bool {
        true
    }

    fn apply_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// The exact diagonal when the representation makes it directly
    /// readable; `None` means the preconditioner must probe for it.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Dense symmetric operator, row-major storage. Used when an operator is
/// cheap enough to materialize; the apply is parallel over rows.
pub struct DenseOperator {
    pub n: usize,
    a: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::invalid("dense operator buffer must be n*n"));
        }
        Ok(DenseOperator { n, a })
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.a[i * self.n + i]).collect()
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            *yi = s;
        });
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(DenseOperator::diagonal(self))
    }
}

impl LinearOperator for Laplacian {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        Laplacian::apply(self, x, y);
    }
}

/// `L^p v` by p successive sparse multiplies.
pub fn apply_power(l: &Laplacian, p: u32, v: &[f64]) -> Result<Vec<f64>> {
    if p < 1 {
        return Err(Error::invalid("power must be a positive integer"));
    }
    let mut x = v.to_vec();
    let mut y = vec![0.0; l.n()];
    for _ in 0..p {
        l.apply(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients. `diag` is the Jacobi preconditioner
/// (entries clamped away from zero); pass `None` for the unpreconditioned
/// method. Returns the solution and the iteration count.
fn cg_core(
    a: &dyn LinearOperator,
    b: &[f64],
    diag: Option<&[f64]>,
    tol: f64,
    maxiter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::invalid("rhs length does not match operator dimension"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("rhs contains non-finite entries"));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let inv_diag: Option<Vec<f64>> = diag.map(|d| {
        d.iter()
            .map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 })
            .collect()
    });
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(m) => r.iter().zip(m).map(|(x, y)| x * y).collect(),
            None => r.to_vec(),
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let threshold = tol * b_norm;

    for iter in 0..maxiter {
        if norm(&r) <= threshold {
            // confirm with the true residual before declaring victory
            a.apply(&x, &mut ap);
            let true_res: f64 = r
                .iter()
                .zip(b.iter().zip(&ap))
                .map(|(_, (bi, ai))| (bi - ai) * (bi - ai))
                .sum::<f64>()
                .sqrt();
            if true_res <= 10.0 * threshold {
                return Ok((x, iter));
            }
            // recursive residual drifted; continue with the true one
            for (ri, (bi, ai)) in r.iter_mut().zip(b.iter().zip(&ap)) {
                *ri = bi - ai;
            }
            z = precondition(&r);
            p = z.clone();
            rz = dot(&r, &z);
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Breakdown { iter });
        }
        let alpha = rz / pap;
        for ((xi, pi), (ri, api)) in x
            .iter_mut()
            .zip(&p)
            .zip(r.iter_mut().zip(&ap))
        {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if norm(&r) <= threshold {
        return Ok((x, maxiter));
    }
    Err(Error::NoConvergence {
        iters: maxiter,
        residual: norm(&r) / b_norm,
    })
}

/// Solves `A x = b` for a symmetric PSD operator by conjugate gradients with
/// relative residual `tol` and at most `maxiter` iterations. Breakdown on a
/// direction of non-positive curvature is reported distinctly from running
/// out of iterations.
pub fn cg_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    maxiter: usize,
) -> Result<Vec<f64>> {
    cg_core(a, b, None, tol, maxiter).map(|(x, _)| x)
}

/// Default CG settings used by the constrained solver.
pub const CG_TOL: f64 = 1e-8;

/// Estimates the operator diagonal for Jacobi preconditioning: exact unit
/// probes up to dimension 2000, a Hutchinson sketch with Rademacher probes
/// above (the operator is only available as an apply).
pub fn estimate_diagonal(a: &dyn LinearOperator) -> Vec<f64> {
    if let Some(d) = a.diagonal() {
        return d;
    }
    let n = a.dim();
    if n <= 2000 {
        let mut diag = vec![0.0; n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            a.apply(&e, &mut col);
            diag[i] = col[i];
            e[i] = 0.0;
        }
        diag
    } else {
        let probes = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a6e_17c3);
        let mut diag = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut az = vec![0.0; n];
        for _ in 0..probes {
            for zi in z.iter_mut() {
                *zi = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
            a.apply(&z, &mut az);
            for ((di, zi), ai) in diag.iter_mut().zip(&z).zip(&az) {
                *di += zi * ai;
            }
        }
        for di in diag.iter_mut() {
            *di /= probes as f64;
        }
        diag
    }
}

/// Restriction of an operator to the free (unlabeled) coordinates, with the
/// labeled ones held at zero: `x_f -> (A E x_f)_f`.
struct ReducedOperator<'a> {
    a: &'a dyn LinearOperator,
    free: &'a [usize],
}

impl LinearOperator for ReducedOperator<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.a.dim();
        let mut full = vec![0.0; n];
        for (&i, &v) in self.free.iter().zip(x) {
            full[i] = v;
        }
        let mut out = vec![0.0; n];
        self.a.apply(&full, &mut out);
        for (yi, &i) in y.iter_mut().zip(self.free) {
            *yi = out[i];
        }
    }
}

/// Minimizes `v^T A v` column-wise subject to `v = values` on the labeled
/// indices, by eliminating the labeled coordinates and CG-solving
/// `A_ff u_f = -A_fl y_l` for each of the `classes` right-hand sides.
///
/// `values` is row-major `labeled.len() x classes`; the result is row-major
/// `n x classes` and restates the labeled rows verbatim.
pub fn solve_constrained_quadratic(
    a: &dyn LinearOperator,
    labeled: &[usize],
    values: &[f64],
    classes: usize,
) -> Result<Vec<f64>> {
    let n = a.dim();
    if labeled.is_empty() {
        return Err(Error::invalid("labeled index set must be nonempty"));
    }
    if classes == 0 {
        return Err(Error::invalid("need at least one label column"));
    }
    if values.len() != labeled.len() * classes {
        return Err(Error::invalid(format!(
            "values buffer has {} entries, expected {} x {}",
            values.len(),
            labeled.len(),
            classes
        )));
    }
    let mut is_labeled = vec![false; n];
    for &i in labeled {
        if i >= n {
            return Err(Error::invalid(format!("labeled index {} out of range", i)));
        }
        if std::mem::replace(&mut is_labeled[i], true) {
            return Err(Error::invalid(format!("labeled index {} repeated", i)));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();

    let mut out = vec![0.0; n * classes];
    for (row, &i) in labeled.iter().enumerate() {
        out[i * classes..(i + 1) * classes]
            .copy_from_slice(&values[row * classes..(row + 1) * classes]);
    }
    if free.is_empty() {
        return Ok(out);
    }

    let reduced = ReducedOperator { a, free: &free };
    let full_diag = estimate_diagonal(a);
    let diag: Vec<f64> = free.iter().map(|&i| full_diag[i]).collect();
    let maxiter = 10 * n;

    let columns: Vec<Result<Vec<f64>>> = (0..classes)
        .into_par_iter()
        .map(|c| {
            // rhs_f = -(A E y)_f where y holds the labeled column values
            let mut y_full = vec![0.0; n];
            for (row, &i) in labeled.iter().enumerate() {
                y_full[i] = values[row * classes + c];
            }
            let ay = a.apply_alloc(&y_full);
            let rhs: Vec<f64> = free.iter().map(|&i| -ay[i]).collect();
            let (x_f, _) = cg_core(&reduced, &rhs, Some(&diag), CG_TOL, maxiter)?;
            Ok(x_f)
        })
        .collect();

    for (c, col) in columns.into_iter().enumerate() {
        let x_f = col?;
        for (&i, &v) in free.iter().zip(&x_f) {
            out[i * classes + c] = v;
        }
    }
    Ok(out)
}

/// Quadratic form of the p = 2 multiscale hypergraph energy: the PSD
/// operator Q with `u^T Q u = sum_k lambda_k E^{(k,2)}(u)`, namely
/// `Q u = -(2/n) sum_k lambda_k Lap^{(k,2)} u`.
struct HypergraphQuadraticOperator<'a> {
    stencils: &'a [(f64, HypergraphStencil<'a>)],
    n: usize,
}

impl LinearOperator for HypergraphQuadraticOperator<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (lambda, stencil) in self.stencils {
            let lap = stencil
                .laplacian_apply(x, 2.0)
                .expect("validated at construction");
            let c = -2.0 * lambda / self.n as f64;
            for (yi, li) in y.iter_mut().zip(&lap) {
                *yi += c * li;
            }
        }
    }
}

/// Minimizes `sum_k lambda_k E^{(k,p)}(u)` over label-constrained u, one
/// column per class. For p = 2 the energy is quadratic and the constrained
/// CG path applies; for p >= 3 projected gradient descent runs on the free
/// coordinates with the exact gradient `-2p/n sum_k lambda_k Lap^{(k,p)} u`,
/// Armijo backtracking, and the p = 2 solution as the starting point.
pub fn minimize_hypergraph_energy(
    cloud: &PointCloud,
    orders: &[(usize, f64)],
    p: f64,
    eps: f64,
    kernel: Kernel,
    labeled: &[usize],
    values: &[f64],
    classes: usize,
) -> Result<Vec<f64>> {
    if orders.is_empty() {
        return Err(Error::invalid("need at least one (k, lambda) term"));
    }
    if orders.iter().any(|&(_, l)| !(l > 0.0)) {
        return Err(Error::invalid("all lambda weights must be positive"));
    }
    if !(p == 2.0 || p >= 3.0) {
        return Err(Error::invalid("p must be 2 or at least 3"));
    }
    let stencils: Vec<(f64, HypergraphStencil)> = orders
        .iter()
        .map(|&(k, lambda)| {
            let params = HypergraphParams::new(k, eps, kernel)?;
            Ok((lambda, HypergraphStencil::new(cloud, params)?))
        })
        .collect::<Result<_>>()?;

    let quad = HypergraphQuadraticOperator {
        stencils: &stencils,
        n: cloud.n,
    };
    let init = solve_constrained_quadratic(&quad, labeled, values, classes)?;
    if p == 2.0 {
        return Ok(init);
    }

    let n = cloud.n;
    let mut is_labeled = vec![false; n];
    for &i in labeled {
        is_labeled[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();
    if free.is_empty() {
        return Ok(init);
    }

    let energy = |u: &[f64]| -> f64 {
        stencils
            .iter()
            .map(|(lambda, s)| lambda * s.energy(u, p).expect("validated inputs"))
            .sum()
    };
    let gradient = |u: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (lambda, s) in &stencils {
            let lap = s.laplacian_apply(u, p).expect("validated inputs");
            let c = -2.0 * p * lambda / n as f64;
            for (gi, li) in g.iter_mut().zip(&lap) {
                *gi += c * li;
            }
        }
        g
    };
    let sup_free = |g: &[f64]| -> f64 {
        free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max)
    };

    let columns: Vec<Result<Vec<f64>>> = (0..classes)
        .into_par_iter()
        .map(|c| {
            let mut u: Vec<f64> = (0..n).map(|i| init[i * classes + c]).collect();
            let mut f_u = energy(&u);
            let mut g = gradient(&u);
            let g0_sup = sup_free(&g);
            if g0_sup == 0.0 {
                return Ok(u);
            }
            let target = 1e-6 * g0_sup;
            let max_iters = 10_000;
            let mut alpha = 1.0;
            let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
            for _ in 0..max_iters {
                if sup_free(&g) <= target {
                    return Ok(u);
                }
                // Barzilai-Borwein step guess from the previous move, then
                // Armijo backtracking to guarantee strict energy decrease
                if let Some((u_prev, g_prev)) = &prev {
                    let mut sy = 0.0;
                    let mut yy = 0.0;
                    for &i in &free {
                        let s = u[i] - u_prev[i];
                        let yv = g[i] - g_prev[i];
                        sy += s * yv;
                        yy += yv * yv;
                    }
                    if sy > 0.0 && yy > 0.0 {
                        alpha = (sy / yy).clamp(1e-12, 1e12);
                    }
                }
                let g_norm2: f64 = free.iter().map(|&i| g[i] * g[i]).sum();
                let mut step = alpha;
                let mut accepted = false;
                for _ in 0..60 {
                    let mut u_try = u.clone();
                    for &i in &free {
                        u_try[i] -= step * g[i];
                    }
                    let f_try = energy(&u_try);
                    if f_try <= f_u - 1e-4 * step * g_norm2 {
                        prev = Some((std::mem::take(&mut u), std::mem::replace(&mut g, Vec::new())));
                        u = u_try;
                        f_u = f_try;
                        g = gradient(&u);
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    // the line search stalled at numerical precision; accept
                    // the point if the gradient target is effectively met
                    let sup = sup_free(&g);
                    if sup <= 10.0 * target {
                        return Ok(u);
                    }
                    return Err(Error::NoConvergence {
                        iters: max_iters,
                        residual: sup / g0_sup,
                    });
                }
            }
            let sup = sup_free(&g);
            if sup <= target {
                Ok(u)
            } else {
                Err(Error::NoConvergence {
                    iters: max_iters,
                    residual: sup / g0_sup,
                })
            }
        })
        .collect();

    let mut out = init;
    for (c, col) in columns.into_iter().enumerate() {
        let u = col?;
        for i in 0..n {
            out[i * classes + c] = u[i];
        }
    }
    Ok(out)
}
