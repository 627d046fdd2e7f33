//! Weighted k-nearest-neighbor graphs and their Laplacians.
//!
//! Neighbor search is exact. A blocked O(N^2) scan is the baseline; for
//! low-dimensional Euclidean data a kd-tree answers the same queries faster
//! and returns identical neighbor sets (ties broken by vertex index in both
//! paths). Edge weights use a Gaussian kernel with one global bandwidth:
//! the mean k-th neighbor distance.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{fmt_g9, DenseDataset};
use crate::{Error, Result};

/// Smallest admissible edge weight; keeps far pairs strictly positive.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Bandwidth floor for degenerate (all-identical) datasets.
const SIGMA_FLOOR: f64 = 1e-12;

/// Distance metric for neighbor search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cosine,
}

/// A weighted graph edge. Directed graphs read this as `u -> v`;
/// symmetrized graphs keep `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Weighted k-NN graph, directed right after construction and undirected
/// (canonical `u < v` edges) after [`symmetrize`].
#[derive(Debug, Clone)]
pub struct KnnGraph {
    n_vertices: usize,
    k: usize,
    edges: Vec<Edge>,
    symmetric: bool,
}

impl KnnGraph {
    /// Directed graph from explicit arcs (used by construction and tests).
    pub fn new_directed(n_vertices: usize, k: usize, edges: Vec<Edge>) -> Result<Self> {
        validate_edges(n_vertices, &edges, false)?;
        Ok(Self {
            n_vertices,
            k,
            edges,
            symmetric: false,
        })
    }

    /// Undirected graph from canonical `u < v` edges.
    pub fn new_symmetric(n_vertices: usize, k: usize, edges: Vec<Edge>) -> Result<Self> {
        validate_edges(n_vertices, &edges, true)?;
        Ok(Self {
            n_vertices,
            k,
            edges,
            symmetric: true,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Number of connected components and a component id per vertex.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        connected_components(self.n_vertices, &self.edges)
    }

    /// Writes the edge list as `u v w` lines, sorted by (u, v), weights with
    /// 9 significant digits.
    pub fn write_edge_list(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.u, e.v));
        for e in &edges {
            writeln!(out, "{} {} {}", e.u, e.v, fmt_g9(e.w))?;
        }
        Ok(())
    }
}

fn validate_edges(n: usize, edges: &[Edge], canonical: bool) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for e in edges {
        if e.u >= n || e.v >= n {
            return Err(Error::param(format!("edge ({},{}) out of range n={}", e.u, e.v, n)));
        }
        if e.u == e.v {
            return Err(Error::param(format!("self-loop at vertex {}", e.u)));
        }
        if e.w <= 0.0 || !e.w.is_finite() {
            return Err(Error::param(format!(
                "edge ({},{}) has non-positive or non-finite weight {}",
                e.u, e.v, e.w
            )));
        }
        if canonical && e.u > e.v {
            return Err(Error::param(format!("edge ({},{}) not canonical (u < v)", e.u, e.v)));
        }
        if !seen.insert((e.u, e.v)) {
            return Err(Error::param(format!("duplicate edge ({},{})", e.u, e.v)));
        }
    }
    Ok(())
}

fn connected_components(n: usize, edges: &[Edge]) -> (usize, Vec<usize>) {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        let root = find(&mut parent, v);
        if ids[root] == usize::MAX {
            ids[root] = count;
            count += 1;
        }
        ids[v] = ids[root];
    }
    (count, ids)
}

/// Candidate neighbor ordered by (distance, index); the total order makes
/// tie-breaking by lower vertex index deterministic everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine distance 1 - cos(a, b); two zero vectors count as identical.
fn cosine_distance(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if na <= EPS && nb <= EPS {
        return 0.0;
    }
    if na <= EPS || nb <= EPS {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Exact k nearest neighbors of every point (self excluded), each row
/// sorted ascending by (distance, index). Dispatches to the kd-tree for
/// low-dimensional Euclidean data, otherwise scans all pairs.
pub fn knn_search(
    data: &DenseDataset,
    k: usize,
    metric: Metric,
    threads: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = data.n_samples();
    if k == 0 || k >= n {
        return Err(Error::param(format!("need 1 <= k < N, got k={} with N={}", k, n)));
    }
    if metric == Metric::Euclidean && data.n_features() <= 16 && n >= 256 {
        let tree = KdTree::build(data);
        let query = |i: usize| tree.query(data, i, k);
        Ok(run_queries(n, threads, query))
    } else {
        Ok(knn_search_brute(data, k, metric, threads)?)
    }
}

/// Baseline O(N^2) exact search; the accelerated path must match it.
pub fn knn_search_brute(
    data: &DenseDataset,
    k: usize,
    metric: Metric,
    threads: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = data.n_samples();
    if k == 0 || k >= n {
        return Err(Error::param(format!("need 1 <= k < N, got k={} with N={}", k, n)));
    }
    let norms: Option<Vec<f64>> = match metric {
        Metric::Cosine => Some((0..n).map(|i| norm(data.row(i))).collect()),
        Metric::Euclidean => None,
    };
    let query = |i: usize| {
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2 = match metric {
                Metric::Euclidean => squared_euclidean(data.row(i), data.row(j)),
                Metric::Cosine => {
                    let ns = norms.as_ref().unwrap();
                    cosine_distance(data.row(i), data.row(j), ns[i], ns[j])
                }
            };
            let cand = Cand { d2, idx: j };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().unwrap() {
                heap.pop();
                heap.push(cand);
            }
        }
        finish_row(heap, metric)
    };
    Ok(run_queries(n, threads, query))
}

fn finish_row(heap: std::collections::BinaryHeap<Cand>, metric: Metric) -> Vec<(usize, f64)> {
    let mut row: Vec<Cand> = heap.into_vec();
    row.sort();
    row.into_iter()
        .map(|c| {
            let dist = match metric {
                Metric::Euclidean => c.d2.sqrt(),
                Metric::Cosine => c.d2,
            };
            (c.idx, dist)
        })
        .collect()
}

fn run_queries<F>(n: usize, threads: usize, query: F) -> Vec<Vec<(usize, f64)>>
where
    F: Fn(usize) -> Vec<(usize, f64)> + Sync + Send,
{
    if threads <= 1 {
        (0..n).map(query).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| (0..n).into_par_iter().map(query).collect())
    }
}

/// kd-tree over all points; exact queries with strict-inequality pruning so
/// equal-distance candidates are still visited and index ties resolve the
/// same way as the brute scan.
struct KdTree {
    idx: Vec<usize>,
    nodes: Vec<KdNode>,
}

enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

const KD_LEAF: usize = 32;

impl KdTree {
    fn build(data: &DenseDataset) -> Self {
        let mut idx: Vec<usize> = (0..data.n_samples()).collect();
        let mut nodes = Vec::new();
        let n = idx.len();
        build_node(data, &mut idx, 0, n, &mut nodes);
        KdTree { idx, nodes }
    }

    fn query(&self, data: &DenseDataset, i: usize, k: usize) -> Vec<(usize, f64)> {
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        self.search(data, self.nodes.len() - 1, data.row(i), i, k, &mut heap);
        finish_row(heap, Metric::Euclidean)
    }

    fn search(
        &self,
        data: &DenseDataset,
        node: usize,
        q: &[f64],
        skip: usize,
        k: usize,
        heap: &mut std::collections::BinaryHeap<Cand>,
    ) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &j in &self.idx[start..end] {
                    if j == skip {
                        continue;
                    }
                    let cand = Cand {
                        d2: squared_euclidean(q, data.row(j)),
                        idx: j,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = q[dim] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search(data, near, q, skip, k, heap);
                let must_visit = heap.len() < k || delta * delta <= heap.peek().unwrap().d2;
                if must_visit {
                    self.search(data, far, q, skip, k, heap);
                }
            }
        }
    }
}

/// Builds the subtree over `idx[start..end]`, returns its node id.
fn build_node(
    data: &DenseDataset,
    idx: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<KdNode>,
) -> usize {
    let len = end - start;
    if len <= KD_LEAF {
        nodes.push(KdNode::Leaf { start, end });
        return nodes.len() - 1;
    }
    // Split along the widest dimension of this subset.
    let d = data.n_features();
    let mut best_dim = 0;
    let mut best_spread = -1.0;
    for dim in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in &idx[start..end] {
            let v = data.row(p)[dim];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_dim = dim;
        }
    }
    let mid = len / 2;
    idx[start..end].select_nth_unstable_by(mid, |&a, &b| {
        data.row(a)[best_dim]
            .total_cmp(&data.row(b)[best_dim])
            .then_with(|| a.cmp(&b))
    });
    let value = data.row(idx[start + mid])[best_dim];
    let left = build_node(data, idx, start, start + mid, nodes);
    let right = build_node(data, idx, start + mid, end, nodes);
    nodes.push(KdNode::Split {
        dim: best_dim,
        value,
        left,
        right,
    });
    nodes.len() - 1
}

/// Builds the directed k-NN graph: arcs from each vertex to its k nearest
/// neighbors, Gaussian weights `exp(-d^2 / sigma^2)` with the global
/// bandwidth `sigma` set to the mean k-th neighbor distance.
pub fn build_knn_graph(
    data: &DenseDataset,
    k: usize,
    metric: Metric,
    threads: usize,
) -> Result<KnnGraph> {
    let neighbors = knn_search(data, k, metric, threads)?;
    let n = data.n_samples();

    // Sorted summation keeps the bandwidth identical under row permutations.
    let mut kth: Vec<f64> = neighbors.iter().map(|row| row[k - 1].1).collect();
    kth.sort_by(f64::total_cmp);
    let sigma = (kth.iter().sum::<f64>() / n as f64).max(SIGMA_FLOOR);
    let inv_sigma2 = 1.0 / (sigma * sigma);

    let mut edges = Vec::with_capacity(n * k);
    for (u, row) in neighbors.iter().enumerate() {
        for &(v, dist) in row {
            let w = (-dist * dist * inv_sigma2).exp().max(WEIGHT_FLOOR);
            edges.push(Edge { u, v, w });
        }
    }
    KnnGraph::new_directed(n, k, edges)
}

/// Collapses directed arcs into undirected edges: an edge exists if either
/// direction existed, with the larger of the two directed weights.
pub fn symmetrize(graph: &KnnGraph) -> KnnGraph {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in graph.edges() {
        let key = (e.u.min(e.v), e.u.max(e.v));
        let w = merged.entry(key).or_insert(f64::NEG_INFINITY);
        if e.w > *w {
            *w = e.w;
        }
    }
    let edges = merged
        .into_iter()
        .map(|((u, v), w)| Edge { u, v, w })
        .collect();
    KnnGraph {
        n_vertices: graph.n_vertices,
        k: graph.k,
        edges,
        symmetric: true,
    }
}

/// Sparse symmetric diagonally dominant graph Laplacian: off-diagonal
/// entries `-w(p,q)`, diagonal the weighted degree.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

/// Assembles the Laplacian of a symmetrized graph.
pub fn laplacian_from_graph(graph: &KnnGraph) -> Result<LaplacianMatrix> {
    if !graph.is_symmetric() {
        return Err(Error::param("laplacian requires a symmetrized graph"));
    }
    let n = graph.n_vertices();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in graph.edges() {
        adjacency[e.u].push((e.v, e.w));
        adjacency[e.v].push((e.u, e.w));
    }
    for row in &mut adjacency {
        row.sort_by_key(|&(q, _)| q);
    }
    // Degree summed in the sorted row order, so row sums cancel exactly.
    let degree: Vec<f64> = adjacency
        .iter()
        .map(|row| row.iter().map(|&(_, w)| w).sum())
        .collect();
    Ok(LaplacianMatrix {
        n,
        edges: graph.edges().to_vec(),
        adjacency,
        degree,
    })
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Positive off-diagonal weights of row p, sorted by neighbor index.
    pub fn neighbors(&self, p: usize) -> &[(usize, f64)] {
        &self.adjacency[p]
    }

    pub fn degree(&self, p: usize) -> f64 {
        self.degree[p]
    }

    /// Entry L(p, q) of the dense form.
    pub fn entry(&self, p: usize, q: usize) -> f64 {
        if p == q {
            return self.degree[p];
        }
        match self.adjacency[p].binary_search_by_key(&q, |&(j, _)| j) {
            Ok(pos) => -self.adjacency[p][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, p: usize) -> f64 {
        self.degree[p] - self.adjacency[p].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// y = L x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|p| {
                let mut acc = self.degree[p] * x[p];
                for &(q, w) in &self.adjacency[p] {
                    acc -= w * x[q];
                }
                acc
            })
            .collect()
    }

    /// x^T L x computed as the weighted edge-difference sum.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        self.edges
            .iter()
            .map(|e| {
                let d = x[e.u] - x[e.v];
                e.w * d * d
            })
            .sum()
    }

    /// Dense row-major copy (oracle-scale n only).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n * self.n];
        for p in 0..self.n {
            m[p * self.n + p] = self.degree[p];
        }
        for e in &self.edges {
            m[e.u * self.n + e.v] = -e.w;
            m[e.v * self.n + e.u] = -e.w;
        }
        m
    }

    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        connected_components(self.n, &self.edges)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticKind};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: Vec<Vec<f64>>) -> DenseDataset {
        DenseDataset::from_rows(rows, None).unwrap()
    }

    /// Random dataset in [-1, 1]^d.
    fn random_dataset(n: usize, d: usize, seed: u64) -> DenseDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        dataset(rows)
    }

    /// Random connected-ish weighted graph for Laplacian checks.
    pub(crate) fn random_graph(n: usize, seed: u64) -> KnnGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_range(0.0..1.0) < 0.3 {
                    edges.push(Edge {
                        u,
                        v,
                        w: rng.random_range(0.05..2.0),
                    });
                }
            }
        }
        KnnGraph::new_symmetric(n, 0, edges).unwrap()
    }

    #[test]
    fn collinear_points_nearest_neighbors() {
        let d = dataset(vec![vec![0.0], vec![1.0], vec![3.0]]);
        let g = build_knn_graph(&d, 1, Metric::Euclidean, 1).unwrap();
        let arcs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(arcs, vec![(0, 1), (1, 0), (2, 1)]);
    }

    #[test]
    fn duplicate_points_weight_one() {
        let d = dataset(vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        let g = build_knn_graph(&d, 1, Metric::Euclidean, 1).unwrap();
        for e in g.edges() {
            assert_eq!(e.w, 1.0);
        }
    }

    #[test]
    fn blobs_graph_splits_into_label_components() {
        let d = generate_synthetic(SyntheticKind::Blobs, 100, 0.1, 1).unwrap();
        let g = symmetrize(&build_knn_graph(&d, 10, Metric::Euclidean, 1).unwrap());
        let (count, comp) = g.connected_components();
        assert_eq!(count, 2);
        let labels = d.labels().unwrap();
        // every component holds exactly one label class
        for i in 0..100 {
            for j in 0..100 {
                assert_eq!(comp[i] == comp[j], labels[i] == labels[j]);
            }
        }
    }

    #[test]
    fn k_out_of_range_is_error() {
        let d = dataset(vec![vec![0.0], vec![1.0]]);
        assert!(build_knn_graph(&d, 2, Metric::Euclidean, 1).is_err());
        assert!(build_knn_graph(&d, 0, Metric::Euclidean, 1).is_err());
    }

    #[test]
    fn symmetrize_takes_max_weight() {
        let g = KnnGraph::new_directed(
            2,
            1,
            vec![Edge { u: 0, v: 1, w: 0.5 }, Edge { u: 1, v: 0, w: 0.7 }],
        )
        .unwrap();
        let s = symmetrize(&g);
        assert_eq!(s.edges().len(), 1);
        assert_eq!(s.edges()[0], Edge { u: 0, v: 1, w: 0.7 });
    }

    #[test]
    fn symmetrize_keeps_one_sided_arcs() {
        let g = KnnGraph::new_directed(2, 1, vec![Edge { u: 0, v: 1, w: 0.5 }]).unwrap();
        let s = symmetrize(&g);
        assert_eq!(s.edges(), &[Edge { u: 0, v: 1, w: 0.5 }]);
    }

    #[test]
    fn symmetrize_empty_stays_empty() {
        let g = KnnGraph::new_directed(3, 1, vec![]).unwrap();
        assert!(symmetrize(&g).edges().is_empty());
    }

    #[test]
    fn laplacian_path_graph_matches_hand_computation() {
        let g = KnnGraph::new_symmetric(
            3,
            1,
            vec![Edge { u: 0, v: 1, w: 1.0 }, Edge { u: 1, v: 2, w: 1.0 }],
        )
        .unwrap();
        let l = laplacian_from_graph(&g).unwrap();
        let want = [
            [1.0, -1.0, 0.0],
            [-1.0, 2.0, -1.0],
            [0.0, -1.0, 1.0],
        ];
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(l.entry(p, q), want[p][q]);
            }
        }
    }

    #[test]
    fn laplacian_single_weighted_edge() {
        let g = KnnGraph::new_symmetric(2, 1, vec![Edge { u: 0, v: 1, w: 2.0 }]).unwrap();
        let l = laplacian_from_graph(&g).unwrap();
        assert_eq!(l.entry(0, 0), 2.0);
        assert_eq!(l.entry(0, 1), -2.0);
        assert_eq!(l.entry(1, 0), -2.0);
        assert_eq!(l.entry(1, 1), 2.0);
    }

    #[test]
    fn laplacian_rejects_directed_graph() {
        let g = KnnGraph::new_directed(2, 1, vec![Edge { u: 1, v: 0, w: 1.0 }]).unwrap();
        assert!(laplacian_from_graph(&g).is_err());
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        for seed in 0..5 {
            let l = laplacian_from_graph(&random_graph(30, seed)).unwrap();
            for p in 0..30 {
                assert!(l.row_sum(p).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_form_matches_matvec_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let l = laplacian_from_graph(&random_graph(40, seed)).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
                let via_edges = l.quadratic_form(&x);
                let via_matvec: f64 = l.matvec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
                let scale = via_edges.abs().max(1.0);
                assert!((via_edges - via_matvec).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn zero_eigenvalues_count_components() {
        for seed in 0..5 {
            // sparse graph so several components appear
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 60;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_range(0.0..1.0) < 0.02 {
                        edges.push(Edge { u, v, w: rng.random_range(0.1..1.0) });
                    }
                }
            }
            let g = KnnGraph::new_symmetric(n, 0, edges).unwrap();
            let l = laplacian_from_graph(&g).unwrap();
            let (count, _) = l.connected_components();
            let (eigenvalues, _) = crate::eigen::symmetric_eigen_ascending(&l.to_dense(), n);
            let zeros = eigenvalues.iter().filter(|&&v| v.abs() <= 1e-9).count();
            assert_eq!(zeros, count);
        }
    }

    #[test]
    fn graph_invariant_under_row_permutation() {
        let d = random_dataset(80, 3, 11);
        let g = symmetrize(&build_knn_graph(&d, 5, Metric::Euclidean, 1).unwrap());

        // permute rows with a fixed shuffle
        let mut perm: Vec<usize> = (0..80).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in (1..80).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| d.row(i).to_vec()).collect();
        let dp = dataset(rows);
        let gp = symmetrize(&build_knn_graph(&dp, 5, Metric::Euclidean, 1).unwrap());

        // map permuted-graph edges back to original labels and compare multisets
        let mut inv = vec![0usize; 80];
        for (new, &old) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let canon = |edges: &[Edge], map: Option<&[usize]>| -> Vec<(usize, usize, u64)> {
            let mut v: Vec<(usize, usize, u64)> = edges
                .iter()
                .map(|e| {
                    let (mut a, mut b) = match map {
                        Some(m) => (m[e.u], m[e.v]),
                        None => (e.u, e.v),
                    };
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    (a, b, e.w.to_bits())
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(canon(g.edges(), None), canon(gp.edges(), Some(&inv)));
    }

    #[test]
    fn brute_and_tree_paths_agree_exactly() {
        for (n, d, seed) in [(300usize, 2usize, 1u64), (500, 3, 2), (400, 8, 3), (2000, 2, 4)] {
            let data = random_dataset(n, d, seed);
            let brute = knn_search_brute(&data, 7, Metric::Euclidean, 1).unwrap();
            let tree = KdTree::build(&data);
            for i in 0..n {
                let t = tree.query(&data, i, 7);
                assert_eq!(brute[i], t, "query {} differs", i);
            }
        }
    }

    #[test]
    fn brute_and_tree_break_ties_identically() {
        // integer grid: every point has many exactly equidistant neighbors
        let rows: Vec<Vec<f64>> = (0..20)
            .flat_map(|x| (0..20).map(move |y| vec![x as f64, y as f64]))
            .collect();
        let data = dataset(rows);
        let brute = knn_search_brute(&data, 8, Metric::Euclidean, 1).unwrap();
        let tree = KdTree::build(&data);
        for i in 0..400 {
            assert_eq!(brute[i], tree.query(&data, i, 8), "query {} differs", i);
        }
    }

    #[test]
    fn threads_do_not_change_results() {
        let data = random_dataset(300, 4, 21);
        let seq = knn_search(&data, 6, Metric::Euclidean, 1).unwrap();
        let par = knn_search(&data, 6, Metric::Euclidean, 4).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn cosine_metric_handles_zero_vectors() {
        let d = dataset(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]);
        let g = build_knn_graph(&d, 1, Metric::Cosine, 1).unwrap();
        // the two zero vectors are identical under the convention
        let e01 = g.edges().iter().find(|e| e.u == 0).unwrap();
        assert_eq!(e01.v, 1);
        assert_eq!(e01.w, 1.0);
    }

    #[test]
    fn edge_list_dump_is_sorted_and_stable() {
        let g = KnnGraph::new_symmetric(
            3,
            1,
            vec![Edge { u: 1, v: 2, w: 0.25 }, Edge { u: 0, v: 2, w: 0.5 }],
        )
        .unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "0 2 5.00000000e-1\n1 2 2.50000000e-1\n");
    }
}
