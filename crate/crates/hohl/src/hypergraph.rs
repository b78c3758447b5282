//! Random geometric hypergraph energies and their (k,p)-Laplacian operators.
//!
//! A hyperedge over k+1 vertices carries the product of all t_k = k(k+1)/2
//! pairwise kernel factors. The energy sums over every ordered (k+1)-tuple of
//! vertex indices, repeats included; the enumeration prunes through the
//! epsilon-graph so only tuples with nonzero weight are visited, which is why
//! the untruncated exponential kernel is refused here.

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud};
use crate::kernels::Kernel;
use rayon::prelude::*;

/// Parameters of the order-k hypergraph model.
#[derive(Debug, Clone, Copy)]
pub struct HypergraphParams {
    /// Hyperedge order: hyperedges have k+1 vertices.
    pub k: usize,
    /// Interaction length scale.
    pub eps: f64,
    pub kernel: Kernel,
    /// Number of pairwise kernel factors in one hyperedge weight, k(k+1)/2.
    pub t_k: usize,
}

impl HypergraphParams {
    pub fn new(k: usize, eps: f64, kernel: Kernel) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("hyperedge order k must be at least 1"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("eps must be positive and finite"));
        }
        Ok(HypergraphParams {
            k,
            eps,
            kernel,
            t_k: k * (k + 1) / 2,
        })
    }
}

/// Weight of one ordered hyperedge: the product of eta(|x_a - x_b| / eps)
/// over all t_k vertex pairs in the tuple. Repeated indices are allowed and
/// contribute eta(0) = 1 factors.
pub fn hyperedge_weight(
    cloud: &PointCloud,
    tuple: &[usize],
    params: &HypergraphParams,
) -> Result<f64> {
    if tuple.len() != params.k + 1 {
        return Err(Error::invalid(format!(
            "tuple has {} vertices, expected k + 1 = {}",
            tuple.len(),
            params.k + 1
        )));
    }
    if let Some(&bad) = tuple.iter().find(|&&i| i >= cloud.n) {
        return Err(Error::invalid(format!("vertex {} out of range", bad)));
    }
    let mut w = 1.0;
    for j in 1..tuple.len() {
        for r in 0..j {
            w *= params
                .kernel
                .eval(cloud.dist(tuple[j], tuple[r]) / params.eps);
        }
    }
    Ok(w)
}

/// `|t|^p` with an exact product path for small integer p.
fn abs_pow(t: f64, p: f64) -> f64 {
    let a = t.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else if p.fract() == 0.0 && (1.0..=16.0).contains(&p) {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `|t|^{p-2} t`, the odd power appearing in the operator. Zero stays zero
/// for every p, and p = 2 reduces to the identity with no rounding.
fn signed_pow(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 2.0 {
        t
    } else {
        abs_pow(t, p - 2.0) * t
    }
}

/// Reusable enumeration state for one (cloud, params) pair: the pruning
/// adjacency (vertices within the kernel support, self included, with the
/// kernel factor to the base vertex cached). Build once and evaluate the
/// energy or the operator many times, as the descent solver does.
pub struct HypergraphStencil<'a> {
    cloud: &'a PointCloud,
    pub params: HypergraphParams,
    /// adj[i] = sorted (j, eta(|x_i - x_j| / eps)) for every j (including i)
    /// within the support radius.
    adj: Vec<Vec<(usize, f64)>>,
}

impl<'a> HypergraphStencil<'a> {
    pub fn new(cloud: &'a PointCloud, params: HypergraphParams) -> Result<Self> {
        let support = params.kernel.support_radius().ok_or_else(|| {
            Error::invalid(
                "hypergraph enumeration needs a compactly supported kernel; the untruncated \
                 exp-gaussian admits no pruning radius",
            )
        })?;
        let index = NeighborIndex::new(cloud);
        let radius = params.eps * support;
        let adj: Vec<Vec<(usize, f64)>> = (0..cloud.n)
            .into_par_iter()
            .map(|i| {
                let mut row: Vec<(usize, f64)> = index
                    .range_neighbors(i, radius)
                    .into_iter()
                    .map(|j| (j, params.kernel.eval(cloud.dist(i, j) / params.eps)))
                    .collect();
                let pos = row.partition_point(|&(j, _)| j < i);
                row.insert(pos, (i, 1.0));
                row
            })
            .collect();
        Ok(HypergraphStencil { cloud, params, adj })
    }

    /// Walks every ordered tuple (i_0, ..., i_k) with nonzero weight whose
    /// first vertex is `i0`, calling `leaf(i1, total_weight)` once per tuple.
    /// Tuples are extended through common neighbors of the chosen prefix, so
    /// the work is proportional to the surviving tuples only.
    fn for_each_tuple(&self, i0: usize, leaf: &mut impl FnMut(usize, f64)) {
        let mut chosen = Vec::with_capacity(self.params.k + 1);
        chosen.push(i0);
        self.extend_tuple(&mut chosen, &self.adj[i0], 1.0, leaf);
    }

    /// `chosen` is the current prefix, `cands` the sorted common neighbors of
    /// every chosen vertex (with the kernel factor to i0 cached), and `w` the
    /// product of all pairwise factors inside the prefix.
    fn extend_tuple(
        &self,
        chosen: &mut Vec<usize>,
        cands: &[(usize, f64)],
        w: f64,
        leaf: &mut impl FnMut(usize, f64),
    ) {
        let depth = chosen.len();
        for &(cand, base_w) in cands {
            let mut w_new = w * base_w;
            for r in 1..depth {
                w_new *= self
                    .params
                    .kernel
                    .eval(self.cloud.dist(cand, chosen[r]) / self.params.eps);
            }
            if w_new <= 0.0 {
                continue;
            }
            chosen.push(cand);
            if depth == self.params.k {
                leaf(chosen[1], w_new);
            } else {
                let next = intersect(cands, &self.adj[cand]);
                self.extend_tuple(chosen, &next, w_new, leaf);
            }
            chosen.pop();
        }
    }

    /// The energy `(1/(n^{k+1} eps^{p+kd})) sum_tuples w |u(i1) - u(i0)|^p`.
    pub fn energy(&self, u: &[f64], p: f64) -> Result<f64> {
        self.check_input(u, p)?;
        let n = self.cloud.n;
        let scale = 1.0
            / ((n as f64).powi(self.params.k as i32 + 1)
                * self
                    .params
                    .eps
                    .powf(p + (self.params.k * self.cloud.d) as f64));
        let partials: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i0| {
                let mut s = 0.0;
                self.for_each_tuple(i0, &mut |i1, w| {
                    if i1 != i0 {
                        s += w * abs_pow(u[i1] - u[i0], p);
                    }
                });
                s
            })
            .collect();
        Ok(partials.iter().sum::<f64>() * scale)
    }

    /// The (k,p)-Laplacian: component i0 is
    /// `(1/(n^k eps^{p+kd})) sum_{i1..ik} w |u(i1) - u(i0)|^{p-2} (u(i1) - u(i0))`.
    pub fn laplacian_apply(&self, u: &[f64], p: f64) -> Result<Vec<f64>> {
        self.check_input(u, p)?;
        if !(p == 2.0 || p >= 3.0) {
            eprintln!(
                "warning: kp_laplacian_apply with p = {} is outside the analyzed range \
                 {{2}} u [3, inf); proceeding",
                p
            );
        }
        let n = self.cloud.n;
        let scale = 1.0
            / ((n as f64).powi(self.params.k as i32)
                * self
                    .params
                    .eps
                    .powf(p + (self.params.k * self.cloud.d) as f64));
        Ok((0..n)
            .into_par_iter()
            .map(|i0| {
                let mut s = 0.0;
                self.for_each_tuple(i0, &mut |i1, w| {
                    if i1 != i0 {
                        s += w * signed_pow(u[i1] - u[i0], p);
                    }
                });
                s * scale
            })
            .collect())
    }

    fn check_input(&self, u: &[f64], p: f64) -> Result<()> {
        if u.len() != self.cloud.n {
            return Err(Error::invalid(format!(
                "u has length {}, cloud has {} points",
                u.len(),
                self.cloud.n
            )));
        }
        if !(p > 1.0) {
            return Err(Error::invalid("exponent p must exceed 1"));
        }
        Ok(())
    }
}

/// Sorted-list intersection keeping the cached factor of the left list.
fn intersect(a: &[(usize, f64)], b: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let mut ib = 0;
    for &(j, w) in a {
        while ib < b.len() && b[ib].0 < j {
            ib += 1;
        }
        if ib == b.len() {
            break;
        }
        if b[ib].0 == j {
            out.push((j, w));
        }
    }
    out
}

/// Energy of the order-k hypergraph model, by pruned enumeration.
pub fn hypergraph_energy(
    u: &[f64],
    cloud: &PointCloud,
    params: &HypergraphParams,
    p: f64,
) -> Result<f64> {
    HypergraphStencil::new(cloud, *params)?.energy(u, p)
}

/// Direct O(n^{k+1}) evaluation of the energy with no pruning; the oracle
/// the pruned path is tested against. Guarded to small instances.
pub fn hypergraph_energy_bruteforce(
    u: &[f64],
    cloud: &PointCloud,
    params: &HypergraphParams,
    p: f64,
) -> Result<f64> {
    let n = cloud.n;
    if u.len() != n {
        return Err(Error::invalid("u length must equal the number of points"));
    }
    if !(p > 1.0) {
        return Err(Error::invalid("exponent p must exceed 1"));
    }
    if (n as f64).powi(params.k as i32 + 1) > 1e7 {
        return Err(Error::invalid(
            "brute-force enumeration guard: n^(k+1) exceeds 1e7",
        ));
    }
    let scale = 1.0
        / ((n as f64).powi(params.k as i32 + 1)
            * params.eps.powf(p + (params.k * cloud.d) as f64));
    let mut tuple = vec![0usize; params.k + 1];
    let mut total = 0.0;
    loop {
        let w = hyperedge_weight(cloud, &tuple, params)?;
        if w > 0.0 && tuple[1] != tuple[0] {
            total += w * abs_pow(u[tuple[1]] - u[tuple[0]], p);
        }
        // odometer increment over [n]^{k+1}
        let mut pos = tuple.len();
        loop {
            if pos == 0 {
                return Ok(total * scale);
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

/// The discrete (k,p)-Laplacian applied to u, by pruned enumeration.
pub fn kp_laplacian_apply(
    u: &[f64],
    cloud: &PointCloud,
    params: &HypergraphParams,
    p: f64,
) -> Result<Vec<f64>> {
    HypergraphStencil::new(cloud, *params)?.laplacian_apply(u, p)
}

/// Direct O(n^{k+1}) evaluation of the (k,p)-Laplacian with no pruning; the
/// oracle the pruned path is tested against. Guarded to small instances.
pub fn kp_laplacian_apply_bruteforce(
    u: &[f64],
    cloud: &PointCloud,
    params: &HypergraphParams,
    p: f64,
) -> Result<Vec<f64>> {
    let n = cloud.n;
    if u.len() != n {
        return Err(Error::invalid("u length must equal the number of points"));
    }
    if !(p > 1.0) {
        return Err(Error::invalid("exponent p must exceed 1"));
    }
    if (n as f64).powi(params.k as i32 + 1) > 1e7 {
        return Err(Error::invalid(
            "brute-force enumeration guard: n^(k+1) exceeds 1e7",
        ));
    }
    let scale = 1.0
        / ((n as f64).powi(params.k as i32)
            * params.eps.powf(p + (params.k * cloud.d) as f64));
    let mut out = vec![0.0; n];
    let mut tuple = vec![0usize; params.k + 1];
    for (i0, slot) in out.iter_mut().enumerate() {
        tuple[0] = i0;
        for t in tuple.iter_mut().skip(1) {
            *t = 0;
        }
        let mut s = 0.0;
        loop {
            let w = hyperedge_weight(cloud, &tuple, params)?;
            if w > 0.0 && tuple[1] != i0 {
                s += w * signed_pow(u[tuple[1]] - u[i0], p);
            }
            // odometer increment over the trailing k slots
            let mut pos = tuple.len();
            loop {
                if pos == 1 {
                    pos = 0;
                    break;
                }
                pos -= 1;
                tuple[pos] += 1;
                if tuple[pos] < n {
                    break;
                }
                tuple[pos] = 0;
            }
            if pos == 0 {
                break;
            }
        }
        *slot = s * scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_uniform, Domain};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_cloud(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.to_vec(), 1, None, Domain::Cube).unwrap()
    }

    fn toy() -> (PointCloud, HypergraphParams) {
        let cloud = line_cloud(&[0.0, 0.5, 1.2]);
        let params = HypergraphParams::new(1, 1.0, Kernel::Indicator).unwrap();
        (cloud, params)
    }

    #[test]
    fn params_validate() {
        assert!(HypergraphParams::new(0, 1.0, Kernel::Indicator).is_err());
        assert!(HypergraphParams::new(1, 0.0, Kernel::Indicator).is_err());
        assert_eq!(HypergraphParams::new(3, 1.0, Kernel::Indicator).unwrap().t_k, 6);
        assert_eq!(HypergraphParams::new(1, 1.0, Kernel::Indicator).unwrap().t_k, 1);
    }

    #[test]
    fn hyperedge_weight_examples() {
        let cloud = line_cloud(&[0.0, 0.1, 0.2, 5.0]);
        let params = HypergraphParams::new(2, 1.0, Kernel::Indicator).unwrap();
        // three points pairwise within eps
        assert_eq!(hyperedge_weight(&cloud, &[0, 1, 2], &params).unwrap(), 1.0);
        // any pair beyond eps kills the product
        assert_eq!(hyperedge_weight(&cloud, &[0, 1, 3], &params).unwrap(), 0.0);
        // repeated indices contribute eta(0) factors
        let pg = HypergraphParams::new(2, 1.0, Kernel::ExpGaussian).unwrap();
        assert_eq!(hyperedge_weight(&cloud, &[1, 1, 1], &pg).unwrap(), 1.0);
        assert!(hyperedge_weight(&cloud, &[0, 1], &params).is_err());
        assert!(hyperedge_weight(&cloud, &[0, 1, 9], &params).is_err());
    }

    #[test]
    fn toy_energy_is_4_over_9() {
        let (cloud, params) = toy();
        let u = [0.0, 1.0, 0.0];
        let e = hypergraph_energy(&u, &cloud, &params, 2.0).unwrap();
        assert_relative_eq!(e, 4.0 / 9.0, max_relative = 1e-14);
        let eb = hypergraph_energy_bruteforce(&u, &cloud, &params, 2.0).unwrap();
        assert_relative_eq!(eb, 4.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn constant_u_has_zero_energy_and_operator() {
        let (cloud, params) = toy();
        let u = [3.0, 3.0, 3.0];
        assert_eq!(hypergraph_energy(&u, &cloud, &params, 2.0).unwrap(), 0.0);
        let dv = kp_laplacian_apply(&u, &cloud, &params, 2.0).unwrap();
        assert_eq!(dv, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn toy_operator_value() {
        let (cloud, params) = toy();
        let u = [0.0, 1.0, 0.0];
        let dv = kp_laplacian_apply(&u, &cloud, &params, 2.0).unwrap();
        assert_relative_eq!(dv[0], 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(dv[1], -2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(dv[2], 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn untruncated_gaussian_is_refused() {
        let cloud = line_cloud(&[0.0, 0.5]);
        let params = HypergraphParams::new(1, 1.0, Kernel::ExpGaussian).unwrap();
        assert!(hypergraph_energy(&[0.0, 1.0], &cloud, &params, 2.0).is_err());
        assert!(kp_laplacian_apply(&[0.0, 1.0], &cloud, &params, 2.0).is_err());
    }

    #[test]
    fn brute_force_guard() {
        let cloud = sample_uniform(500, 1, Domain::Cube, 0).unwrap();
        let params = HypergraphParams::new(2, 0.2, Kernel::Indicator).unwrap();
        let u = vec![0.0; 500];
        assert!(hypergraph_energy_bruteforce(&u, &cloud, &params, 2.0).is_err());
    }

    #[test]
    fn scale_equivariance_is_exact_for_power_of_two() {
        let cloud = sample_uniform(15, 2, Domain::Cube, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..15).map(|_| rng.gen::<f64>() - 0.5).collect();
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        for p in [2.0, 3.0] {
            let params = HypergraphParams::new(2, 0.5, Kernel::Indicator).unwrap();
            let e = hypergraph_energy(&u, &cloud, &params, p).unwrap();
            let e2 = hypergraph_energy(&u2, &cloud, &params, p).unwrap();
            assert_eq!(e2, 2f64.powf(p) * e);
        }
    }

    #[test]
    fn energy_positive_iff_nonconstant_on_connected_graph() {
        // three points forming a connected epsilon-graph
        let cloud = line_cloud(&[0.0, 0.5, 1.0]);
        let params = HypergraphParams::new(1, 0.6, Kernel::Indicator).unwrap();
        assert!(hypergraph_energy(&[0.0, 0.0, 1.0], &cloud, &params, 2.0).unwrap() > 0.0);
        assert_eq!(
            hypergraph_energy(&[1.0, 1.0, 1.0], &cloud, &params, 2.0).unwrap(),
            0.0
        );
    }

    /// The operator sums to zero against constants: the tuple summand is
    /// antisymmetric under swapping i0 and i1, so the total over all tuples
    /// cancels pair by pair.
    #[test]
    fn operator_is_orthogonal_to_constants() {
        let cloud = sample_uniform(25, 2, Domain::Cube, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..25).map(|_| rng.gen::<f64>() - 0.5).collect();
        for k in [1usize, 2] {
            let params = HypergraphParams::new(k, 0.4, Kernel::TruncatedExpGaussian).unwrap();
            for p in [2.0, 3.0] {
                let dv = kp_laplacian_apply(&u, &cloud, &params, p).unwrap();
                let total: f64 = dv.iter().sum();
                let scale: f64 = dv.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
                assert!(total.abs() <= 1e-12 * scale, "k={} p={}: {}", k, p, total);
            }
        }
    }

    /// Finite-difference check of the Euler-Lagrange identity
    /// dE(u + t v)/dt at t = 0 equals -2p (1/n) sum_i Lap(u)_i v_i.
    #[test]
    fn directional_derivative_matches_operator() {
        let cloud = sample_uniform(20, 1, Domain::Cube, 14).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u: Vec<f64> = (0..20).map(|_| rng.gen::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..20).map(|_| rng.gen::<f64>() - 0.5).collect();
        let n = cloud.n as f64;
        for (k, p, tol) in [(1usize, 2.0, 1e-10), (2, 2.0, 1e-10), (1, 3.0, 1e-6)] {
            let params = HypergraphParams::new(k, 0.4, Kernel::Indicator).unwrap();
            let stencil = HypergraphStencil::new(&cloud, params).unwrap();
            let h = 1e-4;
            let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let fd = (stencil.energy(&up, p).unwrap() - stencil.energy(&um, p).unwrap())
                / (2.0 * h);
            let lap = stencil.laplacian_apply(&u, p).unwrap();
            let inner: f64 = lap.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / n;
            let analytic = -2.0 * p * inner;
            assert_relative_eq!(fd, analytic, max_relative = tol);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn pruned_matches_brute_force(
            seed in 0u64..10_000,
            n in 3usize..30,
            k in 1usize..4,
            p_int in 2u32..4,
            kernel_idx in 0usize..2,
            eps in 0.2f64..0.8,
        ) {
            let kernel = [Kernel::Indicator, Kernel::TruncatedExpGaussian][kernel_idx];
            let cloud = sample_uniform(n, 1, Domain::Cube, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let params = HypergraphParams::new(k, eps, kernel).unwrap();
            let p = p_int as f64;
            let pruned = hypergraph_energy(&u, &cloud, &params, p).unwrap();
            let brute = hypergraph_energy_bruteforce(&u, &cloud, &params, p).unwrap();
            let denom = brute.abs().max(1e-300);
            prop_assert!(
                (pruned - brute).abs() / denom <= 1e-10,
                "pruned {} vs brute {}", pruned, brute
            );
            let lap = kp_laplacian_apply(&u, &cloud, &params, p).unwrap();
            let lap_brute = kp_laplacian_apply_bruteforce(&u, &cloud, &params, p).unwrap();
            let sup = lap_brute.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (a, b) in lap.iter().zip(&lap_brute) {
                prop_assert!(
                    (a - b).abs() / sup <= 1e-10,
                    "operator pruned {} vs brute {}", a, b
                );
            }
        }
    }
}
