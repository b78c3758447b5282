//! Point clouds, domains, distances, and neighbor queries.
//!
//! Neighbor search uses a kd-tree for Euclidean clouds up to dimension 16 and
//! falls back to a brute-force scan above that and on the torus, where the
//! wrap-around metric breaks axis-aligned pruning. The brute-force scan is
//! also the correctness oracle in the tests.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest dimension for which the kd-tree is used; above this the curse of
/// dimensionality makes pruning useless and a linear scan is faster.
pub const KDTREE_MAX_DIM: usize = 16;

/// Sampling domain. `Torus` identifies opposite faces of the unit cube, so
/// distances wrap around; it only affects distance computations and is used
/// by the consistency experiments to remove boundary effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cube,
    Torus,
}

/// A finite point cloud in `R^d`, optionally labelled for classification.
/// Points are stored row-major: point `i` occupies `points[i*d..(i+1)*d]`.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<f64>,
    pub n: usize,
    pub d: usize,
    /// Class labels in `0..num_classes`, present for benchmark datasets and
    /// absent for sampled clouds.
    pub labels: Option<Vec<usize>>,
    pub domain: Domain,
}

impl PointCloud {
    pub fn new(
        points: Vec<f64>,
        d: usize,
        labels: Option<Vec<usize>>,
        domain: Domain,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if points.len() % d != 0 {
            return Err(Error::invalid(format!(
                "coordinate buffer length {} is not a multiple of d = {}",
                points.len(),
                d
            )));
        }
        let n = points.len() / d;
        if n == 0 {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "coordinate {} of point {} is not finite",
                bad % d,
                bad / d
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::invalid(format!(
                    "{} labels for {} points",
                    l.len(),
                    n
                )));
            }
            let c = l.iter().max().map(|&m| m + 1).unwrap_or(0);
            if c < 2 {
                return Err(Error::invalid(
                    "labelled cloud must contain at least two classes",
                ));
            }
        }
        Ok(PointCloud {
            points,
            n,
            d,
            labels,
            domain,
        })
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Number of classes, `max(label) + 1`, when labels are present.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map(|&m| m + 1).unwrap_or(0))
    }

    /// Distance between points `i` and `j` under the cloud's domain metric.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist_points(self.point(i), self.point(j), self.domain)
    }
}

/// Distance between two coordinate slices under the given domain metric.
/// On the torus each coordinate difference wraps: `min(|a-b|, 1-|a-b|)`.
pub fn dist_points(a: &[f64], b: &[f64], domain: Domain) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    match domain {
        Domain::Cube => {
            for (x, y) in a.iter().zip(b) {
                let t = x - y;
                s += t * t;
            }
        }
        Domain::Torus => {
            for (x, y) in a.iter().zip(b) {
                let t = (x - y).abs();
                let t = t.min(1.0 - t);
                s += t * t;
            }
        }
    }
    s.sqrt()
}

/// Samples `n` points uniformly from `[0,1)^d`. The same seed always yields
/// the same cloud, independent of thread count.
pub fn sample_uniform(n: usize, d: usize, domain: Domain, seed: u64) -> Result<PointCloud> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("need n >= 1 and d >= 1 to sample a cloud"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        points.push(rng.gen::<f64>());
    }
    PointCloud::new(points, d, None, domain)
}

struct KdNode {
    point: usize,
    dim: usize,
    left: Option<usize>,
    right: Option<usize>,
}

struct KdTree {
    nodes: Vec<KdNode>,
    root: usize,
}

impl KdTree {
    fn build(cloud: &PointCloud) -> KdTree {
        let mut indices: Vec<usize> = (0..cloud.n).collect();
        let mut nodes = Vec::with_capacity(cloud.n);
        let root = Self::build_rec(cloud, &mut indices, &mut nodes).expect("non-empty cloud");
        KdTree { nodes, root }
    }

    fn build_rec(
        cloud: &PointCloud,
        indices: &mut [usize],
        nodes: &mut Vec<KdNode>,
    ) -> Option<usize> {
        if indices.is_empty() {
            return None;
        }
        // split along the coordinate with the widest spread; ties go to the
        // lowest dimension so the tree is deterministic
        let mut dim = 0;
        let mut best_spread = -1.0;
        for dd in 0..cloud.d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in indices.iter() {
                let v = cloud.point(i)[dd];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let spread = hi - lo;
            if spread > best_spread {
                best_spread = spread;
                dim = dd;
            }
        }
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            let ca = cloud.point(a)[dim];
            let cb = cloud.point(b)[dim];
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        let point = indices[mid];
        let node_id = nodes.len();
        nodes.push(KdNode {
            point,
            dim,
            left: None,
            right: None,
        });
        let (low, rest) = indices.split_at_mut(mid);
        let high = &mut rest[1..];
        let left = Self::build_rec(cloud, low, nodes);
        let right = Self::build_rec(cloud, high, nodes);
        nodes[node_id].left = left;
        nodes[node_id].right = right;
        Some(node_id)
    }

    fn range(&self, cloud: &PointCloud, query: &[f64], r: f64, out: &mut Vec<usize>) {
        self.range_rec(cloud, self.root, query, r, out);
    }

    fn range_rec(
        &self,
        cloud: &PointCloud,
        node_id: usize,
        query: &[f64],
        r: f64,
        out: &mut Vec<usize>,
    ) {
        let node = &self.nodes[node_id];
        let p = cloud.point(node.point);
        if dist_points(query, p, Domain::Cube) <= r {
            out.push(node.point);
        }
        let diff = query[node.dim] - p[node.dim];
        let (near, far) = if diff <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(nid) = near {
            self.range_rec(cloud, nid, query, r, out);
        }
        if let Some(fid) = far {
            if diff.abs() <= r {
                self.range_rec(cloud, fid, query, r, out);
            }
        }
    }

    fn knn(
        &self,
        cloud: &PointCloud,
        query: &[f64],
        skip: Option<usize>,
        k: usize,
        heap: &mut Vec<(f64, usize)>,
    ) {
        heap.clear();
        self.knn_rec(cloud, self.root, query, skip, k, heap);
    }

    fn knn_rec(
        &self,
        cloud: &PointCloud,
        node_id: usize,
        query: &[f64],
        skip: Option<usize>,
        k: usize,
        heap: &mut Vec<(f64, usize)>,
    ) {
        let node = &self.nodes[node_id];
        if Some(node.point) != skip {
            let dist = dist_points(query, cloud.point(node.point), Domain::Cube);
            push_candidate(heap, k, (dist, node.point));
        }
        let p = cloud.point(node.point);
        let diff = query[node.dim] - p[node.dim];
        let (near, far) = if diff <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(nid) = near {
            self.knn_rec(cloud, nid, query, skip, k, heap);
        }
        if let Some(fid) = far {
            // visit the far side unless it is strictly beyond the current
            // worst candidate; on equality a lower-index point could still
            // displace the worst one, so the comparison stays non-strict
            if heap.len() < k || diff.abs() <= worst(heap).0 {
                self.knn_rec(cloud, fid, query, skip, k, heap);
            }
        }
    }
}

/// Candidates are ordered by `(distance, index)` so equal distances resolve
/// to the lower vertex index. The heap is a plain vector with a linear worst
/// scan; k is small in every caller.
fn push_candidate(heap: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    if heap.len() < k {
        heap.push(cand);
        return;
    }
    let (wi, &w) = heap
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| cmp_cand(a, b))
        .expect("heap non-empty");
    if cmp_cand(&cand, &w) == std::cmp::Ordering::Less {
        heap[wi] = cand;
    }
}

fn worst(heap: &[(f64, usize)]) -> (f64, usize) {
    *heap
        .iter()
        .max_by(|a, b| cmp_cand(a, b))
        .expect("heap non-empty")
}

fn cmp_cand(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
}

/// Neighbor lookup structure over a borrowed cloud. Build once, query from
/// many threads; queries never mutate.
pub struct NeighborIndex<'a> {
    cloud: &'a PointCloud,
    tree: Option<KdTree>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        let tree = if cloud.domain == Domain::Cube && cloud.d <= KDTREE_MAX_DIM {
            Some(KdTree::build(cloud))
        } else {
            None
        };
        NeighborIndex { cloud, tree }
    }

    /// All `j != i` with `dist(i, j) <= r`, ascending by index. Radius zero
    /// returns exact duplicates of point `i`.
    pub fn range_neighbors(&self, i: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        match &self.tree {
            Some(tree) => {
                tree.range(self.cloud, self.cloud.point(i), r, &mut out);
                out.retain(|&j| j != i);
                out.sort_unstable();
            }
            None => {
                for j in 0..self.cloud.n {
                    if j != i && self.cloud.dist(i, j) <= r {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// The `k` nearest neighbors of point `i` (excluding `i` itself) in
    /// non-decreasing distance order, ties broken by lower vertex index.
    /// Returns the neighbor indices and their distances.
    pub fn knn(&self, i: usize, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        if k == 0 || k > self.cloud.n - 1 {
            return Err(Error::invalid(format!(
                "k = {} is outside 1..={} for a cloud of {} points",
                k,
                self.cloud.n - 1,
                self.cloud.n
            )));
        }
        let mut heap = Vec::with_capacity(k + 1);
        match &self.tree {
            Some(tree) => {
                tree.knn(self.cloud, self.cloud.point(i), Some(i), k, &mut heap);
            }
            None => {
                for j in 0..self.cloud.n {
                    if j != i {
                        push_candidate(&mut heap, k, (self.cloud.dist(i, j), j));
                    }
                }
            }
        }
        heap.sort_by(|a, b| cmp_cand(a, b));
        let (indices, dists): (Vec<usize>, Vec<f64>) =
            heap.into_iter().map(|(d, j)| (j, d)).unzip();
        Ok((indices, dists))
    }

    /// Distance to the `k`-th nearest neighbor of point `i`.
    pub fn knn_distance(&self, i: usize, k: usize) -> Result<f64> {
        let (_, dists) = self.knn(i, k)?;
        Ok(*dists.last().expect("k >= 1"))
    }
}
