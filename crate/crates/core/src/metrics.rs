//! Embedding fidelity and compression quality measures.
//!
//! Everything here is exact brute force over pairwise distances; these run
//! on desk-scale data where correctness beats speed. Neighbor ranks break
//! distance ties by index, matching the graph construction convention.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::coarsen::CoarseningMap;
use crate::dataset::DenseDataset;
use crate::umap::Embedding;
use crate::{Error, Result};

/// Quality report of one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub trustworthiness: f64,
    pub knn_preservation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate_purity: Option<f64>,
    pub achieved_ratio: f64,
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

impl EvalReport {
    /// Flat `key=value` rendering, stable key order.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("trustworthiness={}\n", self.trustworthiness));
        out.push_str(&format!("knn_preservation={}\n", self.knn_preservation));
        if let Some(p) = self.aggregate_purity {
            out.push_str(&format!("aggregate_purity={}\n", p));
        }
        out.push_str(&format!("achieved_ratio={}\n", self.achieved_ratio));
        for (stage, secs) in &self.wall_clock_seconds {
            out.push_str(&format!("wall_clock_seconds.{}={}\n", stage, secs));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Runs `thunk`, recording its wall-clock duration under `stage`.
pub fn stage_timer<T>(
    times: &mut BTreeMap<String, f64>,
    stage: &str,
    thunk: impl FnOnce() -> T,
) -> T {
    let start = Instant::now();
    let value = thunk();
    times.insert(stage.to_string(), start.elapsed().as_secs_f64());
    value
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All other points sorted by (distance, index) from point `i`.
fn ranked_neighbors(rows: &[&[f64]], i: usize) -> Vec<usize> {
    let dists: Vec<f64> = rows.iter().map(|r| squared_dist(rows[i], r)).collect();
    let mut order: Vec<usize> = (0..rows.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then_with(|| a.cmp(&b)));
    order
}

fn embedding_rows(e: &Embedding) -> Vec<&[f64]> {
    (0..e.n()).map(|i| e.row(i)).collect()
}

fn dataset_rows(d: &DenseDataset) -> Vec<&[f64]> {
    (0..d.n_samples()).map(|i| d.row(i)).collect()
}

/// Trustworthiness T(k): one minus the normalized rank penalty of
/// embedding neighbors that are not original-space neighbors.
pub fn trustworthiness(original: &DenseDataset, embedding: &Embedding, k: usize) -> Result<f64> {
    let n = original.n_samples();
    if embedding.n() != n {
        return Err(Error::param("original and embedding row counts differ"));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::param(format!("need 1 <= k < n/2, got k={} n={}", k, n)));
    }
    let orig = dataset_rows(original);
    let emb = embedding_rows(embedding);

    let mut penalty: u64 = 0;
    for i in 0..n {
        let orig_order = ranked_neighbors(&orig, i);
        let emb_order = ranked_neighbors(&emb, i);
        let orig_knn: std::collections::HashSet<usize> =
            orig_order[..k].iter().copied().collect();
        // original-space rank of every point, 1-based
        let mut rank = vec![0usize; n];
        for (pos, &j) in orig_order.iter().enumerate() {
            rank[j] = pos + 1;
        }
        for &j in &emb_order[..k] {
            if !orig_knn.contains(&j) {
                penalty += (rank[j] - k) as u64;
            }
        }
    }
    let norm = 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0));
    Ok(1.0 - norm * penalty as f64)
}

/// Mean fraction of each point's k nearest original-space neighbors that
/// stay among its k nearest embedding neighbors.
pub fn knn_preservation(original: &DenseDataset, embedding: &Embedding, k: usize) -> Result<f64> {
    let n = original.n_samples();
    if embedding.n() != n {
        return Err(Error::param("original and embedding row counts differ"));
    }
    if k == 0 || k >= n {
        return Err(Error::param(format!("need 1 <= k < n, got k={} n={}", k, n)));
    }
    let orig = dataset_rows(original);
    let emb = embedding_rows(embedding);
    let mut total = 0usize;
    for i in 0..n {
        let a: std::collections::HashSet<usize> =
            ranked_neighbors(&orig, i)[..k].iter().copied().collect();
        let overlap = ranked_neighbors(&emb, i)[..k]
            .iter()
            .filter(|j| a.contains(j))
            .count();
        total += overlap;
    }
    Ok(total as f64 / (n * k) as f64)
}

/// Fraction of fine points whose label matches their aggregate's majority.
pub fn aggregate_purity(map: &CoarseningMap, labels: &[i64]) -> Result<f64> {
    if labels.len() != map.n_fine() {
        return Err(Error::param(format!(
            "label vector has length {}, map covers {} points",
            labels.len(),
            map.n_fine()
        )));
    }
    let mut counts: Vec<BTreeMap<i64, usize>> = vec![BTreeMap::new(); map.n_coarse()];
    for (i, &a) in map.assignment().iter().enumerate() {
        *counts[a].entry(labels[i]).or_insert(0) += 1;
    }
    let majority: usize = counts
        .iter()
        .map(|c| c.values().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / map.n_fine() as f64)
}

/// Mean silhouette coefficient of the embedding under the given labels.
/// Points in singleton clusters score zero.
pub fn silhouette_score(embedding: &Embedding, labels: &[i64]) -> Result<f64> {
    let n = embedding.n();
    if labels.len() != n {
        return Err(Error::param("label vector length differs from embedding rows"));
    }
    let distinct: std::collections::BTreeSet<i64> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::param("silhouette needs at least two clusters"));
    }
    let rows = embedding_rows(embedding);
    let mut total = 0.0;
    for i in 0..n {
        // mean distance to every cluster
        let mut sum: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = sum.entry(labels[j]).or_insert((0.0, 0));
            e.0 += squared_dist(rows[i], rows[j]).sqrt();
            e.1 += 1;
        }
        let own = labels[i];
        let a = match sum.get(&own) {
            Some(&(s, c)) if c > 0 => s / c as f64,
            _ => {
                continue; // singleton cluster contributes 0
            }
        };
        let b = sum
            .iter()
            .filter(|(&l, _)| l != own)
            .map(|(_, &(s, c))| s / c as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    Ok(total / n as f64)
}
