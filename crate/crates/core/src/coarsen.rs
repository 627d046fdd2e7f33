//! Spectrum-preserving dataset compression.
//!
//! A coarsening level scores every graph edge with the spectral affinity of
//! its endpoints, then greedily merges aggregates along edges in descending
//! affinity order (heavy-edge style) until the level's target count is
//! reached. Pseudo-samples are member means in the original feature space.
//! [`compress`] repeats the whole graph/smooth/aggregate cycle on the
//! pseudo-samples until the requested ratio is achieved.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::dataset::DenseDataset;
use crate::knn_graph::{build_knn_graph, laplacian_from_graph, symmetrize, KnnGraph, Metric};
use crate::spectral::{edge_affinities, smoothed_test_vectors, SpectralEmbedding};
use crate::umap::Embedding;
use crate::{Error, Result};

/// Compression stops once the achieved ratio reaches this fraction of the
/// requested one; exact targets are unreachable with integer counts.
const RATIO_TOLERANCE: f64 = 0.9;

/// Largest single-level ratio; larger requests iterate.
const MAX_LEVEL_RATIO: f64 = 4.0;

/// Assignment of every fine point to an aggregate id in `[0, n_coarse)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseningMap {
    n_fine: usize,
    n_coarse: usize,
    assignment: Vec<usize>,
}

impl CoarseningMap {
    /// Checked constructor: the assignment must be total and surjective.
    pub fn new(assignment: Vec<usize>, n_coarse: usize) -> Result<Self> {
        let n_fine = assignment.len();
        if n_fine == 0 || n_coarse == 0 {
            return Err(Error::param("coarsening map must be non-empty"));
        }
        let mut hit = vec![false; n_coarse];
        for (i, &a) in assignment.iter().enumerate() {
            if a >= n_coarse {
                return Err(Error::param(format!(
                    "fine index {} maps to {} outside [0, {})",
                    i, a, n_coarse
                )));
            }
            hit[a] = true;
        }
        if let Some(id) = hit.iter().position(|h| !h) {
            return Err(Error::param(format!("aggregate {} has no members", id)));
        }
        Ok(Self {
            n_fine,
            n_coarse,
            assignment,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_fine: n,
            n_coarse: n,
            assignment: (0..n).collect(),
        }
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Achieved compression ratio N / P.
    pub fn achieved_ratio(&self) -> f64 {
        self.n_fine as f64 / self.n_coarse as f64
    }

    /// Members per aggregate.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_coarse];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Writes a map as `fine_index,aggregate_id` CSV rows.
pub fn save_map_csv(map: &CoarseningMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (i, &a) in map.assignment().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, a));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a `fine_index,aggregate_id` CSV back into a checked map.
pub fn load_map_csv(path: impl AsRef<Path>) -> Result<CoarseningMap> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |s: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("cannot parse index from {:?}", s),
            })
        };
        let mut it = line.split(',');
        let fine = parse(it.next().unwrap_or(""))?;
        let agg = parse(it.next().unwrap_or(""))?;
        pairs.push((fine, agg));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    let n = pairs.len();
    let mut assignment = vec![usize::MAX; n];
    for (fine, agg) in pairs {
        if fine >= n || assignment[fine] != usize::MAX {
            return Err(Error::param(format!(
                "map rows do not form a total function (fine index {})",
                fine
            )));
        }
        assignment[fine] = agg;
    }
    let n_coarse = assignment.iter().max().map_or(0, |m| m + 1);
    CoarseningMap::new(assignment, n_coarse)
}

/// The compressed dataset: one pseudo-sample per aggregate, in the original
/// feature space, with member counts and (when the fine data was labeled)
/// majority labels carried on the embedded dataset.
#[derive(Debug, Clone)]
pub struct CoarseDataset {
    data: DenseDataset,
    sizes: Vec<usize>,
}

impl CoarseDataset {
    pub fn data(&self) -> &DenseDataset {
        &self.data
    }

    pub fn into_data(self) -> DenseDataset {
        self.data
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn majority_labels(&self) -> Option<&[i64]> {
        self.data.labels()
    }

    pub fn n_coarse(&self) -> usize {
        self.sizes.len()
    }
}

/// Writes the sizes sidecar as `aggregate_id,size,majority_label` rows;
/// the label field is left empty for unlabeled data.
pub fn save_sizes_csv(coarse: &CoarseDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (j, &s) in coarse.sizes().iter().enumerate() {
        match coarse.majority_labels() {
            Some(labels) => out.push_str(&format!("{},{},{}\n", j, s, labels[j])),
            None => out.push_str(&format!("{},{},\n", j, s)),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Group means, sizes, and majority labels of `data` under `map`.
fn aggregate_dataset(data: &DenseDataset, map: &CoarseningMap) -> Result<CoarseDataset> {
    let d = data.n_features();
    let p = map.n_coarse();
    let mut sums = vec![0.0; p * d];
    let sizes = map.sizes();
    for (i, &a) in map.assignment().iter().enumerate() {
        let row = data.row(i);
        for (acc, v) in sums[a * d..(a + 1) * d].iter_mut().zip(row) {
            *acc += v;
        }
    }
    for (j, &s) in sizes.iter().enumerate() {
        let inv = 1.0 / s as f64;
        for v in sums[j * d..(j + 1) * d].iter_mut() {
            *v *= inv;
        }
    }
    let majority = data.labels().map(|labels| {
        let mut counts: Vec<BTreeMap<i64, usize>> = vec![BTreeMap::new(); p];
        for (i, &a) in map.assignment().iter().enumerate() {
            *counts[a].entry(labels[i]).or_insert(0) += 1;
        }
        counts
            .into_iter()
            .map(|c| {
                // ascending label order, strict improvement: ties keep the
                // smaller label
                let mut best = (i64::MIN, 0usize);
                for (label, count) in c {
                    if count > best.1 {
                        best = (label, count);
                    }
                }
                best.0
            })
            .collect::<Vec<i64>>()
    });
    let coarse = DenseDataset::new(sums, p, d, majority)?;
    Ok(CoarseDataset {
        data: coarse,
        sizes,
    })
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        debug_assert_ne!(a, b);
        let (root, child) = if a < b { (a, b) } else { (b, a) };
        self.parent[child] = root;
        self.size[root] += self.size[child];
    }
}

/// One greedy aggregation pass over the graph edges in descending affinity
/// order. Returns the fine-to-aggregate map together with the pseudo-sample
/// dataset (member means of `data`).
pub fn coarsen_level(
    data: &DenseDataset,
    graph: &KnnGraph,
    spectral: &SpectralEmbedding,
    target_ratio_level: f64,
    min_affinity: Option<f64>,
    threads: usize,
) -> Result<(CoarseningMap, CoarseDataset)> {
    if target_ratio_level.is_nan() || target_ratio_level <= 1.0 {
        return Err(Error::param(format!(
            "per-level ratio must exceed 1, got {}",
            target_ratio_level
        )));
    }
    let n = data.n_samples();
    if graph.n_vertices() != n || spectral.n() != n {
        return Err(Error::param("graph/spectral size mismatch with dataset"));
    }
    if !graph.is_symmetric() {
        return Err(Error::param("coarsening requires a symmetrized graph"));
    }

    let affinities = edge_affinities(spectral, graph.edges(), threads);
    let mut order: Vec<usize> = (0..graph.edges().len()).collect();
    order.sort_by(|&a, &b| {
        affinities[b]
            .total_cmp(&affinities[a])
            .then_with(|| {
                let ea = &graph.edges()[a];
                let eb = &graph.edges()[b];
                (ea.u, ea.v).cmp(&(eb.u, eb.v))
            })
    });

    let cap = target_ratio_level.ceil() as usize;
    let max_merged = 2 * cap;
    let target = n as f64 / target_ratio_level;
    let mut uf = UnionFind::new(n);
    let mut count = n;

    for &ei in &order {
        if count as f64 <= target {
            break;
        }
        if let Some(floor) = min_affinity {
            if affinities[ei] < floor {
                break;
            }
        }
        let e = &graph.edges()[ei];
        let (ru, rv) = (uf.find(e.u), uf.find(e.v));
        if ru == rv {
            continue;
        }
        let (su, sv) = (uf.size[ru], uf.size[rv]);
        if su < cap && sv < cap && su + sv <= max_merged {
            uf.union(ru, rv);
            count -= 1;
        }
    }

    // aggregate ids in order of each group's smallest member
    let mut id_of_root = vec![usize::MAX; n];
    let mut assignment = vec![0usize; n];
    let mut next = 0usize;
    for (i, slot) in assignment.iter_mut().enumerate() {
        let root = uf.find(i);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = next;
            next += 1;
        }
        *slot = id_of_root[root];
    }
    debug_assert_eq!(next, count);

    let map = CoarseningMap::new(assignment, count)?;
    let coarse = aggregate_dataset(data, &map)?;
    Ok((map, coarse))
}

/// Parameters of the iterated compression pipeline.
#[derive(Debug, Clone)]
pub struct CompressParams {
    /// Neighbor count of the coarsening k-NN graph.
    pub k: usize,
    pub metric: Metric,
    /// Number of smoothed spectral test vectors.
    pub spectral_k: usize,
    /// Gauss-Seidel sweeps per test vector.
    pub sweeps: usize,
    pub seed: u64,
    /// Requested overall compression ratio N / P.
    pub ratio: f64,
    pub max_levels: usize,
    /// Optional affinity floor below which edges never merge.
    pub min_affinity: Option<f64>,
    pub threads: usize,
}

impl Default for CompressParams {
    fn default() -> Self {
        Self {
            k: 10,
            metric: Metric::Euclidean,
            spectral_k: 10,
            sweeps: 10,
            seed: 1,
            ratio: 1.0,
            max_levels: 10,
            min_affinity: None,
            threads: 1,
        }
    }
}

/// Iterated spectrum-preserving compression: rebuild the k-NN graph on the
/// current pseudo-samples, smooth test vectors, aggregate, and repeat with
/// per-level ratio `min(4, remaining)` until `N/P >= 0.9 * ratio` or the
/// level budget is exhausted. Deterministic for fixed parameters.
pub fn compress(
    data: &DenseDataset,
    params: &CompressParams,
) -> Result<(CoarseDataset, CoarseningMap)> {
    let n = data.n_samples();
    if params.ratio.is_nan() || params.ratio < 1.0 {
        return Err(Error::param(format!("ratio must be >= 1, got {}", params.ratio)));
    }
    if params.ratio > n as f64 {
        return Err(Error::param(format!(
            "ratio {} exceeds sample count {}",
            params.ratio, n
        )));
    }
    if params.max_levels == 0 {
        return Err(Error::param("need max_levels >= 1"));
    }
    if params.k == 0 {
        return Err(Error::param("need k >= 1"));
    }

    let mut map = CoarseningMap::identity(n);
    let mut current = aggregate_dataset(data, &map)?;

    for level in 0..params.max_levels {
        let p = map.n_coarse();
        let achieved = map.achieved_ratio();
        if achieved >= RATIO_TOLERANCE * params.ratio || p <= 1 {
            break;
        }
        let remaining = params.ratio / achieved;
        let level_ratio = remaining.min(MAX_LEVEL_RATIO);
        let k = params.k.min(p - 1);

        let graph = symmetrize(&build_knn_graph(current.data(), k, params.metric, params.threads)?);
        let laplacian = laplacian_from_graph(&graph)?;
        let vectors = smoothed_test_vectors(
            &laplacian,
            params.spectral_k,
            params.sweeps,
            params.seed.wrapping_add(level as u64),
        )?;
        let (level_map, _) = coarsen_level(
            current.data(),
            &graph,
            &vectors,
            level_ratio,
            params.min_affinity,
            params.threads,
        )?;
        if level_map.n_coarse() == p {
            break; // no edge could merge; further levels would spin
        }
        map = compose_maps(&level_map, &map)?;
        // pseudo-samples recomputed from the original rows so every level's
        // output is an exact group mean of original feature vectors
        current = aggregate_dataset(data, &map)?;
    }

    Ok((current, map))
}

/// Composes two maps: `inner` (fine -> mid) then `outer` (mid -> coarse).
pub fn compose_maps(outer: &CoarseningMap, inner: &CoarseningMap) -> Result<CoarseningMap> {
    if inner.n_coarse() != outer.n_fine() {
        return Err(Error::param(format!(
            "map composition mismatch: inner has {} aggregates, outer expects {}",
            inner.n_coarse(),
            outer.n_fine()
        )));
    }
    let assignment = inner
        .assignment()
        .iter()
        .map(|&mid| outer.assignment()[mid])
        .collect();
    CoarseningMap::new(assignment, outer.n_coarse())
}

/// Gives every fine point the embedding row of its aggregate.
pub fn lift_embedding(map: &CoarseningMap, coarse: &Embedding) -> Result<Embedding> {
    if coarse.n() != map.n_coarse() {
        return Err(Error::param(format!(
            "embedding has {} rows, map has {} aggregates",
            coarse.n(),
            map.n_coarse()
        )));
    }
    let m = coarse.dim();
    let mut coords = Vec::with_capacity(map.n_fine() * m);
    for &a in map.assignment() {
        coords.extend_from_slice(coarse.row(a));
    }
    Embedding::new(coords, map.n_fine(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticKind};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pipeline_level(
        data: &DenseDataset,
        k: usize,
        ratio: f64,
    ) -> (CoarseningMap, CoarseDataset) {
        let graph = symmetrize(&build_knn_graph(data, k, Metric::Euclidean, 1).unwrap());
        let lap = laplacian_from_graph(&graph).unwrap();
        let vectors = smoothed_test_vectors(&lap, 4, 4, 7).unwrap();
        coarsen_level(data, &graph, &vectors, ratio, None, 1).unwrap()
    }

    #[test]
    fn duplicated_pair_collapses_to_its_point() {
        let data =
            DenseDataset::from_rows(vec![vec![2.0, -1.0], vec![2.0, -1.0]], None).unwrap();
        let (map, coarse) = pipeline_level(&data, 1, 2.0);
        assert_eq!(map.n_coarse(), 1);
        assert_eq!(coarse.data().row(0), &[2.0, -1.0]);
        assert_eq!(coarse.sizes(), &[2]);
    }

    #[test]
    fn five_separated_pairs_become_their_midpoints() {
        let mut rows = Vec::new();
        for c in 0..5 {
            let cx = 10.0 * c as f64;
            rows.push(vec![cx, 0.0]);
            rows.push(vec![cx + 0.2, 0.0]);
        }
        let data = DenseDataset::from_rows(rows, None).unwrap();
        let (map, coarse) = pipeline_level(&data, 1, 2.0);
        assert_eq!(map.n_coarse(), 5);
        for c in 0..5 {
            let a = map.assignment()[2 * c];
            assert_eq!(a, map.assignment()[2 * c + 1]);
            let mid = 10.0 * c as f64 + 0.1;
            assert!((coarse.data().row(a)[0] - mid).abs() <= 1e-12);
            assert!(coarse.data().row(a)[1].abs() <= 1e-12);
        }
    }

    #[test]
    fn edgeless_graph_yields_identity() {
        let data = DenseDataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            None,
        )
        .unwrap();
        let graph = KnnGraph::new_symmetric(4, 0, vec![]).unwrap();
        let lap = laplacian_from_graph(&graph).unwrap();
        let vectors = smoothed_test_vectors(&lap, 2, 2, 1).unwrap();
        let (map, coarse) = coarsen_level(&data, &graph, &vectors, 3.0, None, 1).unwrap();
        assert_eq!(map.n_coarse(), 4);
        assert_eq!(map.assignment(), &[0, 1, 2, 3]);
        assert_eq!(coarse.data().values(), data.values());
    }

    #[test]
    fn ratio_at_or_below_one_is_error() {
        let data = DenseDataset::from_rows(vec![vec![0.0], vec![1.0]], None).unwrap();
        let graph = KnnGraph::new_symmetric(2, 0, vec![]).unwrap();
        let lap = laplacian_from_graph(&graph).unwrap();
        let vectors = smoothed_test_vectors(&lap, 1, 1, 1).unwrap();
        assert!(coarsen_level(&data, &graph, &vectors, 1.0, None, 1).is_err());
    }

    #[test]
    fn compose_with_identity_on_either_side() {
        let inner = CoarseningMap::new(vec![0, 0, 1, 1], 2).unwrap();
        let id4 = CoarseningMap::identity(4);
        let id2 = CoarseningMap::identity(2);
        assert_eq!(compose_maps(&inner, &id4).unwrap(), inner);
        assert_eq!(compose_maps(&id2, &inner).unwrap(), inner);
    }

    #[test]
    fn compose_hand_example() {
        let inner = CoarseningMap::new(vec![0, 0, 1, 1], 2).unwrap();
        let outer = CoarseningMap::new(vec![0, 0], 1).unwrap();
        let composed = compose_maps(&outer, &inner).unwrap();
        assert_eq!(composed.assignment(), &[0, 0, 0, 0]);
    }

    #[test]
    fn compose_dimension_mismatch_is_error() {
        let inner = CoarseningMap::new(vec![0, 1], 2).unwrap();
        let outer = CoarseningMap::new(vec![0, 1, 2], 3).unwrap();
        assert!(compose_maps(&outer, &inner).is_err());
    }

    #[test]
    fn lift_identity_and_fan_out() {
        let emb = Embedding::new(vec![1.0, 2.0], 1, 2).unwrap();
        let map = CoarseningMap::new(vec![0, 0], 1).unwrap();
        let lifted = lift_embedding(&map, &emb).unwrap();
        assert_eq!(lifted.row(0), &[1.0, 2.0]);
        assert_eq!(lifted.row(1), &[1.0, 2.0]);

        let id = CoarseningMap::identity(1);
        let same = lift_embedding(&id, &emb).unwrap();
        assert_eq!(same.row(0), emb.row(0));

        let bad = CoarseningMap::identity(3);
        assert!(lift_embedding(&bad, &emb).is_err());
    }

    #[test]
    fn compress_ratio_one_is_identity() {
        let data = generate_synthetic(SyntheticKind::Blobs, 50, 0.2, 3).unwrap();
        let params = CompressParams {
            ratio: 1.0,
            ..Default::default()
        };
        let (coarse, map) = compress(&data, &params).unwrap();
        assert_eq!(map.n_coarse(), 50);
        assert_eq!(coarse.data().values(), data.values());
        assert_eq!(coarse.majority_labels(), data.labels());
    }

    #[test]
    fn compress_blobs_ratio_five_hits_target_and_purity() {
        let data = generate_synthetic(SyntheticKind::Blobs, 1000, 0.3, 3).unwrap();
        let params = CompressParams {
            ratio: 5.0,
            ..Default::default()
        };
        let (coarse, map) = compress(&data, &params).unwrap();
        let p = map.n_coarse();
        assert!((180..=223).contains(&p), "P = {}", p);

        // brute-force purity against the generator labels
        let labels = data.labels().unwrap();
        let mut majority = 0usize;
        for agg in 0..p {
            let mut count0 = 0usize;
            let mut count1 = 0usize;
            for i in 0..1000 {
                if map.assignment()[i] == agg {
                    if labels[i] == 0 {
                        count0 += 1;
                    } else {
                        count1 += 1;
                    }
                }
            }
            majority += count0.max(count1);
        }
        let purity = majority as f64 / 1000.0;
        assert!(purity >= 0.99, "purity = {}", purity);
        assert_eq!(coarse.n_coarse(), p);
    }

    #[test]
    fn compress_is_deterministic() {
        let data = generate_synthetic(SyntheticKind::TwoMoons, 300, 0.1, 9).unwrap();
        let params = CompressParams {
            ratio: 4.0,
            ..Default::default()
        };
        let (a, ma) = compress(&data, &params).unwrap();
        let (b, mb) = compress(&data, &params).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(a.data().values(), b.data().values());
    }

    #[test]
    fn unreachable_affinity_floor_terminates_without_merging() {
        let data = generate_synthetic(SyntheticKind::Blobs, 40, 0.2, 6).unwrap();
        let params = CompressParams {
            ratio: 4.0,
            min_affinity: Some(2.0), // above the affinity range, nothing merges
            max_levels: 50,
            ..Default::default()
        };
        let (coarse, map) = compress(&data, &params).unwrap();
        assert_eq!(map.n_coarse(), 40);
        assert_eq!(coarse.data().values(), data.values());
    }

    #[test]
    fn compress_rejects_bad_ratio() {
        let data = generate_synthetic(SyntheticKind::Blobs, 20, 0.1, 1).unwrap();
        let mut params = CompressParams::default();
        params.ratio = 0.5;
        assert!(compress(&data, &params).is_err());
        params.ratio = 21.0;
        assert!(compress(&data, &params).is_err());
    }

    #[test]
    fn map_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.csv");
        let map = CoarseningMap::new(vec![1, 0, 1, 2, 0], 3).unwrap();
        save_map_csv(&map, &p).unwrap();
        let back = load_map_csv(&p).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn sizes_csv_has_majority_labels() {
        let data = DenseDataset::from_rows(
            vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]],
            Some(vec![0, 1, 1, 1]),
        )
        .unwrap();
        let map = CoarseningMap::new(vec![0, 0, 1, 1], 2).unwrap();
        let coarse = aggregate_dataset(&data, &map).unwrap();
        // tie in aggregate 0 resolves to the smaller label
        assert_eq!(coarse.majority_labels(), Some(&[0i64, 1][..]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sizes.csv");
        save_sizes_csv(&coarse, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "0,2,0\n1,2,1\n");
    }

    proptest! {
        /// Random valid maps: group means match a brute-force recompute and
        /// the weighted pseudo-sample sum conserves the dataset centroid.
        #[test]
        fn aggregate_mean_and_mass_conservation(
            n in 2usize..40,
            d in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let data = DenseDataset::from_rows(rows, None).unwrap();

            let p = rng.random_range(1..=n);
            let mut assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..p)).collect();
            for a in 0..p {
                assignment[a % n] = a; // force surjectivity
            }
            let p = *assignment.iter().max().unwrap() + 1;
            let map = CoarseningMap::new(assignment, p).unwrap();
            let coarse = aggregate_dataset(&data, &map).unwrap();

            // brute-force group means
            for agg in 0..p {
                let members: Vec<usize> =
                    (0..n).filter(|&i| map.assignment()[i] == agg).collect();
                for c in 0..d {
                    let mean: f64 = members.iter().map(|&i| data.row(i)[c]).sum::<f64>()
                        / members.len() as f64;
                    let got = coarse.data().row(agg)[c];
                    let scale = mean.abs().max(1.0);
                    prop_assert!((got - mean).abs() <= 1e-9 * scale);
                }
            }

            // centroid conservation
            for c in 0..d {
                let total: f64 = (0..n).map(|i| data.row(i)[c]).sum();
                let weighted: f64 = (0..p)
                    .map(|j| coarse.sizes()[j] as f64 * coarse.data().row(j)[c])
                    .sum();
                let scale = total.abs().max(1.0);
                prop_assert!((total - weighted).abs() <= 1e-6 * scale);
            }
        }

        #[test]
        fn composed_maps_stay_total_and_surjective(
            n in 4usize..40,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mid = rng.random_range(2..=n);
            let mut a1: Vec<usize> = (0..n).map(|_| rng.random_range(0..mid)).collect();
            for a in 0..mid { a1[a % n] = a; }
            let mid = *a1.iter().max().unwrap() + 1;
            let inner = CoarseningMap::new(a1, mid).unwrap();

            let pc = rng.random_range(1..=mid);
            let mut a2: Vec<usize> = (0..mid).map(|_| rng.random_range(0..pc)).collect();
            for a in 0..pc { a2[a % mid] = a; }
            let pc = *a2.iter().max().unwrap() + 1;
            let outer = CoarseningMap::new(a2, pc).unwrap();

            // the checked constructor re-validates totality and surjectivity
            let composed = compose_maps(&outer, &inner).unwrap();
            prop_assert_eq!(composed.n_fine(), n);
            prop_assert_eq!(composed.n_coarse(), pc);
        }
    }
}
