//! Self-contained UMAP: fuzzy simplicial set construction and stochastic
//! gradient descent embedding optimization.
//!
//! The kernel forms follow the standard construction: per-point smooth-kNN
//! calibration against a log2(k) target, probabilistic t-conorm
//! symmetrization, the low-dimensional curve `psi(x) = 1 / (1 + a x^(2b))`
//! fitted to (min_dist, spread), and edge-sampled SGD with negative
//! sampling on an epochs-per-sample schedule. Single-threaded runs are
//! bit-deterministic per seed; multi-threaded runs trade determinism for
//! speed with unsynchronized last-writer-wins coordinate updates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{fmt_g9, DenseDataset};
use crate::eigen;
use crate::knn_graph::{knn_search, Metric};
use crate::{Error, Result};

/// Epsilon regularizer in repulsive-gradient denominators.
const REPULSION_EPS: f64 = 1e-3;

/// Per-coordinate gradient clip bound.
const GRAD_CLIP: f64 = 4.0;

/// Bisection bracket for the smooth-kNN bandwidth.
const SIGMA_LO: f64 = 1e-12;
const SIGMA_HI: f64 = 1e6;
const SIGMA_ITERS: usize = 64;

/// Largest fuzzy graph handed to the dense eigensolver for spectral init.
const SPECTRAL_INIT_MAX_N: usize = 4000;

/// Embedding initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Bottom eigenvectors of the fuzzy graph's normalized Laplacian,
    /// falling back to random when the eigensolve is unavailable.
    Spectral,
    /// i.i.d. uniform(-10, 10) coordinates.
    Random,
}

/// UMAP hyperparameters.
#[derive(Debug, Clone)]
pub struct UmapParams {
    pub n_neighbors: usize,
    /// Output dimension m (2 or 3).
    pub out_dim: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// Defaults to 500 for fewer than 10k points, otherwise 200.
    pub n_epochs: Option<usize>,
    /// Initial learning rate, decayed linearly to zero.
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    /// Curve parameters; fitted from (min_dist, spread) when absent.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub seed: u64,
    pub init: InitStrategy,
    pub metric: Metric,
    pub threads: usize,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            out_dim: 2,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: None,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            a: None,
            b: None,
            seed: 1,
            init: InitStrategy::Spectral,
            metric: Metric::Euclidean,
            threads: 1,
        }
    }
}

impl UmapParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::param("need n_neighbors >= 2"));
        }
        if !(self.out_dim == 2 || self.out_dim == 3) {
            return Err(Error::param(format!(
                "output dimension {} unsupported (2 or 3)",
                self.out_dim
            )));
        }
        if !(self.min_dist > 0.0 && self.min_dist < self.spread) {
            return Err(Error::param(format!(
                "need 0 < min_dist < spread, got min_dist={} spread={}",
                self.min_dist, self.spread
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::param("learning rate must be positive"));
        }
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if let Some(v) = v {
                if v <= 0.0 || !v.is_finite() {
                    return Err(Error::param(format!("curve parameter {} must be positive", name)));
                }
            }
        }
        Ok(())
    }

    fn resolved_epochs(&self, n: usize) -> usize {
        self.n_epochs.unwrap_or(if n < 10_000 { 500 } else { 200 })
    }
}

/// Sparse symmetric fuzzy membership graph; entries keep `i < j` and
/// memberships in (0, 1].
#[derive(Debug, Clone)]
pub struct FuzzyGraph {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    pub fn new(n: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(i, j, mu) in &entries {
            if i >= j || j >= n {
                return Err(Error::param(format!("fuzzy entry ({},{}) not canonical", i, j)));
            }
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(Error::param(format!("membership {} outside (0, 1]", mu)));
            }
            if !seen.insert((i, j)) {
                return Err(Error::param(format!("duplicate fuzzy entry ({},{})", i, j)));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

/// Low-dimensional coordinates, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    m: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn new(coords: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if coords.len() != n * m {
            return Err(Error::param(format!(
                "coordinate buffer has {} entries, expected {}x{}",
                coords.len(),
                n,
                m
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("embedding has non-finite coordinates"));
        }
        Ok(Self { n, m, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Writes an embedding as `y1,...,ym[,label]` CSV rows, 9 significant
/// digits per coordinate.
pub fn save_embedding_csv(
    embedding: &Embedding,
    labels: Option<&[i64]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(l) = labels {
        if l.len() != embedding.n() {
            return Err(Error::param(format!(
                "label vector has length {}, embedding has {} rows",
                l.len(),
                embedding.n()
            )));
        }
    }
    let mut out = String::new();
    for i in 0..embedding.n() {
        let mut first = true;
        for v in embedding.row(i) {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_g9(*v));
            first = false;
        }
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-point smooth-kNN calibration: `rho` is the nearest-neighbor
/// distance and `sigma` solves
/// `sum_i exp(-max(0, d_i - rho) / sigma) = log2(k)` by bisection. When the
/// sum already meets the target at the lower bracket (all-equal distances,
/// or the first term alone reaches it) sigma clamps to 1e-12.
pub fn smooth_knn_calibration(dists: &[f64]) -> Result<(f64, f64)> {
    let k = dists.len();
    if k < 2 {
        return Err(Error::param("calibration needs at least 2 neighbor distances"));
    }
    for w in dists.windows(2) {
        if w[1] < w[0] {
            return Err(Error::param("neighbor distances must be sorted ascending"));
        }
    }
    if dists[0] < 0.0 {
        return Err(Error::param("neighbor distances must be non-negative"));
    }

    let rho = dists[0];
    let target = (k as f64).log2();
    let sum_at = |sigma: f64| -> f64 {
        dists
            .iter()
            .map(|&d| (-( (d - rho).max(0.0) / sigma)).exp())
            .sum()
    };

    if sum_at(SIGMA_LO) >= target {
        return Ok((rho, SIGMA_LO));
    }
    let mut lo = SIGMA_LO;
    let mut hi = SIGMA_HI;
    for _ in 0..SIGMA_ITERS {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((rho, hi))
}

/// Probabilistic t-conorm used to symmetrize directed memberships.
fn t_conorm(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Builds the fuzzy simplicial set: directed memberships
/// `exp(-max(0, d - rho_i) / sigma_i)` over each point's neighbors,
/// symmetrized with the probabilistic t-conorm.
pub fn fuzzy_simplicial_set(
    data: &DenseDataset,
    n_neighbors: usize,
    metric: Metric,
    threads: usize,
) -> Result<FuzzyGraph> {
    let n = data.n_samples();
    let neighbors = knn_search(data, n_neighbors, metric, threads)?;

    let mut directed: std::collections::BTreeMap<(usize, usize), [f64; 2]> =
        std::collections::BTreeMap::new();
    for (i, row) in neighbors.iter().enumerate() {
        let dists: Vec<f64> = row.iter().map(|&(_, d)| d).collect();
        let (rho, sigma) = smooth_knn_calibration(&dists)?;
        for &(j, d) in row {
            let mu = (-((d - rho).max(0.0) / sigma)).exp();
            if mu <= 0.0 {
                continue;
            }
            let key = (i.min(j), i.max(j));
            let slot = usize::from(i > j);
            directed.entry(key).or_insert([0.0, 0.0])[slot] = mu;
        }
    }

    let entries: Vec<(usize, usize, f64)> = directed
        .into_iter()
        .filter_map(|((i, j), [mu_ij, mu_ji])| {
            let mu = t_conorm(mu_ij, mu_ji);
            (mu > 0.0).then_some((i, j, mu.min(1.0)))
        })
        .collect();
    FuzzyGraph::new(n, entries)
}

/// The low-dimensional kernel `psi(x) = 1 / (1 + a x^(2b))`.
pub fn psi(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

/// Fits (a, b) so `psi` least-squares matches the target curve: 1 below
/// `min_dist`, `exp(-(x - min_dist) / spread)` beyond it, sampled at 300
/// uniform points on [0, 3 * spread]. Levenberg-Marquardt from (1, 1);
/// deterministic.
pub fn fit_ab(min_dist: f64, spread: f64) -> Result<(f64, f64)> {
    if !(min_dist > 0.0 && min_dist < spread) {
        return Err(Error::param(format!(
            "need 0 < min_dist < spread, got {} and {}",
            min_dist, spread
        )));
    }
    const SAMPLES: usize = 300;
    let xs: Vec<f64> = (0..SAMPLES)
        .map(|i| 3.0 * spread * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x <= min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();

    let cost = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = psi(x, a, b) - y;
                r * r
            })
            .sum()
    };

    let mut a = 1.0;
    let mut b = 1.0;
    let mut lambda = 1e-3;
    let mut current = cost(a, b);
    for _ in 0..200 {
        // residuals and Jacobian of psi w.r.t. (a, b)
        let mut jtj = [0.0f64; 4]; // [aa, ab, ab, bb]
        let mut jtr = [0.0f64; 2];
        for (&x, &y) in xs.iter().zip(&ys) {
            let xp = x.powf(2.0 * b);
            let den = 1.0 + a * xp;
            let r = 1.0 / den - y;
            let da = -xp / (den * den);
            let db = if x > 0.0 {
                -2.0 * a * xp * x.ln() / (den * den)
            } else {
                0.0
            };
            jtj[0] += da * da;
            jtj[1] += da * db;
            jtj[3] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        jtj[2] = jtj[1];

        // damped 2x2 solve: (JtJ + lambda diag(JtJ)) delta = -Jtr
        let m00 = jtj[0] * (1.0 + lambda);
        let m11 = jtj[3] * (1.0 + lambda);
        let m01 = jtj[1];
        let det = m00 * m11 - m01 * m01;
        if det.abs() < 1e-30 {
            break;
        }
        let d0 = (-jtr[0] * m11 + jtr[1] * m01) / det;
        let d1 = (jtr[0] * m01 - jtr[1] * m00) / det;

        let na = (a + d0).max(1e-6);
        let nb = (b + d1).max(1e-6);
        let next = cost(na, nb);
        if next < current {
            a = na;
            b = nb;
            current = next;
            lambda = (lambda / 3.0).max(1e-12);
            if d0.abs() + d1.abs() < 1e-12 {
                break;
            }
        } else {
            lambda *= 3.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    Ok((a, b))
}

/// Initial coordinates: uniform(-10, 10) for random init; for spectral
/// init, the bottom nontrivial eigenvectors of the fuzzy graph's symmetric
/// normalized Laplacian (the global constant direction deflated by a
/// rank-one shift), rescaled so the largest coordinate magnitude is 10.
/// Falls back to random when the eigensolve is out of reach.
pub fn initialize_embedding(
    fuzzy: &FuzzyGraph,
    m: usize,
    init: InitStrategy,
    seed: u64,
) -> Result<Embedding> {
    if m == 0 {
        return Err(Error::param("embedding dimension must be >= 1"));
    }
    let n = fuzzy.n();
    if init == InitStrategy::Spectral {
        if let Some(e) = spectral_init(fuzzy, m) {
            return Ok(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * m).map(|_| rng.random_range(-10.0..10.0)).collect();
    Embedding::new(coords, n, m)
}

fn spectral_init(fuzzy: &FuzzyGraph, m: usize) -> Option<Embedding> {
    let n = fuzzy.n();
    if n > SPECTRAL_INIT_MAX_N || m + 1 >= n || fuzzy.entries().is_empty() {
        return None;
    }
    let mut weights = vec![0.0; n * n];
    let mut degree = vec![0.0; n];
    for &(i, j, mu) in fuzzy.entries() {
        weights[i * n + j] = mu;
        weights[j * n + i] = mu;
        degree[i] += mu;
        degree[j] += mu;
    }
    let dinv: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    // L_sym = I - D^{-1/2} W D^{-1/2}, then deflate the trivial direction
    // D^{1/2} 1 with a rank-one shift so the component contrasts stay at
    // the bottom of the spectrum.
    let mut lap = vec![0.0; n * n];
    for i in 0..n {
        lap[i * n + i] = 1.0;
        for j in 0..n {
            if weights[i * n + j] > 0.0 {
                lap[i * n + j] -= dinv[i] * weights[i * n + j] * dinv[j];
            }
        }
    }
    let mut trivial: Vec<f64> = degree.iter().map(|&d| d.sqrt()).collect();
    let tnorm: f64 = trivial.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tnorm <= 0.0 {
        return None;
    }
    for v in trivial.iter_mut() {
        *v /= tnorm;
    }
    for i in 0..n {
        for j in 0..n {
            lap[i * n + j] += 3.0 * trivial[i] * trivial[j];
        }
    }

    let (_, vectors) = eigen::symmetric_eigen_ascending(&lap, n);
    let mut coords = vec![0.0; n * m];
    for c in 0..m {
        for i in 0..n {
            coords[i * m + c] = vectors[c][i];
        }
    }
    let max_abs = coords.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs <= 1e-12 || coords.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let scale = 10.0 / max_abs;
    for v in coords.iter_mut() {
        *v *= scale;
    }
    Embedding::new(coords, n, m).ok()
}

/// d/dy_i of `log psi(||y_i - y_j||)`, the on-edge attraction term.
pub fn attractive_gradient(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let d2: f64 = yi.iter().zip(yj).map(|(p, q)| (p - q) * (p - q)).sum();
    let coeff = attractive_coeff(d2, a, b);
    yi.iter().zip(yj).map(|(p, q)| coeff * (p - q)).collect()
}

/// d/dy_i of `log(1 - psi(||y_i - y_j||))` with the epsilon-regularized
/// denominator used by the optimizer.
pub fn repulsive_gradient(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let d2: f64 = yi.iter().zip(yj).map(|(p, q)| (p - q) * (p - q)).sum();
    let coeff = repulsive_coeff(d2, a, b);
    yi.iter().zip(yj).map(|(p, q)| coeff * (p - q)).collect()
}

#[inline]
fn attractive_coeff(d2: f64, a: f64, b: f64) -> f64 {
    if d2 <= 0.0 {
        return 0.0;
    }
    (-2.0 * a * b * d2.powf(b - 1.0)) / (1.0 + a * d2.powf(b))
}

#[inline]
fn repulsive_coeff(d2: f64, a: f64, b: f64) -> f64 {
    (2.0 * b) / ((REPULSION_EPS + d2) * (1.0 + a * d2.powf(b)))
}

/// Epochs-per-sample schedule of one edge: fires at epoch 0 and then every
/// `max_mu / mu` epochs on average, so the strongest edge fires every epoch.
#[derive(Debug, Clone, Copy)]
struct EdgeSchedule {
    epochs_per_sample: f64,
    next: f64,
}

impl EdgeSchedule {
    fn new(epochs_per_sample: f64) -> Self {
        Self {
            epochs_per_sample,
            next: 0.0,
        }
    }

    fn due(&self, epoch: usize) -> bool {
        self.next <= epoch as f64
    }

    fn advance(&mut self) {
        self.next += self.epochs_per_sample;
    }
}

struct EdgeTask {
    i: usize,
    j: usize,
    id: u64,
    schedule: EdgeSchedule,
}

/// Edge-sampled SGD over the fuzzy graph. Attraction moves both endpoints
/// along the clipped gradient of `log psi`; each attraction triggers
/// `negative_sample_rate` uniformly sampled repulsions on the head vertex.
/// With `threads <= 1` the run is bit-deterministic for a fixed seed; with
/// more threads, edges are processed concurrently and coordinate updates
/// are unsynchronized (last writer wins).
pub fn optimize_embedding(
    init: Embedding,
    fuzzy: &FuzzyGraph,
    params: &UmapParams,
) -> Result<Embedding> {
    params.validate()?;
    if init.n() != fuzzy.n() {
        return Err(Error::param(format!(
            "embedding has {} rows, fuzzy graph has {}",
            init.n(),
            fuzzy.n()
        )));
    }
    if init.dim() != params.out_dim {
        return Err(Error::param(format!(
            "initial embedding has dimension {}, params request {}",
            init.dim(),
            params.out_dim
        )));
    }
    let n = init.n();
    let m = init.dim();
    let n_epochs = params.resolved_epochs(n);
    if fuzzy.entries().is_empty() || n_epochs == 0 {
        return Ok(init);
    }
    let (a, b) = match (params.a, params.b) {
        (Some(a), Some(b)) => (a, b),
        _ => fit_ab(params.min_dist, params.spread)?,
    };

    let max_mu = fuzzy
        .entries()
        .iter()
        .map(|&(_, _, mu)| mu)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut tasks: Vec<EdgeTask> = fuzzy
        .entries()
        .iter()
        .enumerate()
        .map(|(id, &(i, j, mu))| EdgeTask {
            i,
            j,
            id: id as u64,
            schedule: EdgeSchedule::new(max_mu / mu),
        })
        .collect();

    let mut coords = init.coords;
    if params.threads <= 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for epoch in 0..n_epochs {
            let alpha = params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
            for t in tasks.iter_mut() {
                if !t.schedule.due(epoch) {
                    continue;
                }
                t.schedule.advance();
                apply_attraction(&mut coords, m, t.i, t.j, a, b, alpha);
                for _ in 0..params.negative_sample_rate {
                    let s = rng.random_range(0..n);
                    if s == t.i {
                        continue;
                    }
                    apply_repulsion(&mut coords, m, t.i, s, a, b, alpha);
                }
            }
        }
    } else {
        optimize_parallel(&mut coords, m, &mut tasks, n, n_epochs, a, b, params);
    }

    Embedding::new(coords, n, m)
}

fn apply_attraction(coords: &mut [f64], m: usize, i: usize, j: usize, a: f64, b: f64, alpha: f64) {
    let mut d2 = 0.0;
    for c in 0..m {
        let d = coords[i * m + c] - coords[j * m + c];
        d2 += d * d;
    }
    let coeff = attractive_coeff(d2, a, b);
    if coeff == 0.0 {
        return;
    }
    for c in 0..m {
        let diff = coords[i * m + c] - coords[j * m + c];
        let grad = (coeff * diff).clamp(-GRAD_CLIP, GRAD_CLIP);
        coords[i * m + c] += alpha * grad;
        coords[j * m + c] -= alpha * grad;
    }
}

fn apply_repulsion(coords: &mut [f64], m: usize, i: usize, s: usize, a: f64, b: f64, alpha: f64) {
    let mut d2 = 0.0;
    for c in 0..m {
        let d = coords[i * m + c] - coords[s * m + c];
        d2 += d * d;
    }
    if d2 > 0.0 {
        let coeff = repulsive_coeff(d2, a, b);
        for c in 0..m {
            let diff = coords[i * m + c] - coords[s * m + c];
            let grad = (coeff * diff).clamp(-GRAD_CLIP, GRAD_CLIP);
            coords[i * m + c] += alpha * grad;
        }
    } else {
        // coincident pair: push the head by the full clip in every axis
        for c in 0..m {
            coords[i * m + c] += alpha * GRAD_CLIP;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn optimize_parallel(
    coords: &mut [f64],
    m: usize,
    tasks: &mut [EdgeTask],
    n: usize,
    n_epochs: usize,
    a: f64,
    b: f64,
    params: &UmapParams,
) {
    let shared: Vec<AtomicU64> = coords.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads)
        .build()
        .expect("thread pool");
    let chunk = tasks.len() / (params.threads * 8) + 1;
    let seed = params.seed;
    let nsr = params.negative_sample_rate;

    pool.install(|| {
        for epoch in 0..n_epochs {
            let alpha = params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
            tasks.par_chunks_mut(chunk).for_each(|chunk_tasks| {
                let mut buf_i = [0.0f64; 3];
                let mut buf_o = [0.0f64; 3];
                for t in chunk_tasks {
                    if !t.schedule.due(epoch) {
                        continue;
                    }
                    t.schedule.advance();
                    // independent stream per (epoch, edge)
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ ((epoch as u64) << 32).wrapping_add(t.id.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                    );
                    atomic_pair_update(&shared, m, t.i, t.j, a, b, alpha, true, &mut buf_i, &mut buf_o);
                    for _ in 0..nsr {
                        let s = rng.random_range(0..n);
                        if s == t.i {
                            continue;
                        }
                        atomic_pair_update(&shared, m, t.i, s, a, b, alpha, false, &mut buf_i, &mut buf_o);
                    }
                }
            });
        }
    });

    for (v, atom) in coords.iter_mut().zip(&shared) {
        *v = f64::from_bits(atom.load(Ordering::Relaxed));
    }
}

#[allow(clippy::too_many_arguments)]
fn atomic_pair_update(
    shared: &[AtomicU64],
    m: usize,
    i: usize,
    other: usize,
    a: f64,
    b: f64,
    alpha: f64,
    attract: bool,
    buf_i: &mut [f64; 3],
    buf_o: &mut [f64; 3],
) {
    let mut d2 = 0.0;
    for c in 0..m {
        buf_i[c] = f64::from_bits(shared[i * m + c].load(Ordering::Relaxed));
        buf_o[c] = f64::from_bits(shared[other * m + c].load(Ordering::Relaxed));
        let d = buf_i[c] - buf_o[c];
        d2 += d * d;
    }
    if attract {
        let coeff = attractive_coeff(d2, a, b);
        if coeff == 0.0 {
            return;
        }
        for c in 0..m {
            let grad = (coeff * (buf_i[c] - buf_o[c])).clamp(-GRAD_CLIP, GRAD_CLIP);
            shared[i * m + c].store((buf_i[c] + alpha * grad).to_bits(), Ordering::Relaxed);
            shared[other * m + c].store((buf_o[c] - alpha * grad).to_bits(), Ordering::Relaxed);
        }
    } else if d2 > 0.0 {
        let coeff = repulsive_coeff(d2, a, b);
        for c in 0..m {
            let grad = (coeff * (buf_i[c] - buf_o[c])).clamp(-GRAD_CLIP, GRAD_CLIP);
            shared[i * m + c].store((buf_i[c] + alpha * grad).to_bits(), Ordering::Relaxed);
        }
    } else {
        for c in 0..m {
            shared[i * m + c].store((buf_i[c] + alpha * GRAD_CLIP).to_bits(), Ordering::Relaxed);
        }
    }
}

/// The full UMAP pipeline: fuzzy simplicial set, curve fit, initialization,
/// SGD optimization.
pub fn umap_embed(data: &DenseDataset, params: &UmapParams) -> Result<Embedding> {
    params.validate()?;
    let fuzzy = fuzzy_simplicial_set(data, params.n_neighbors, params.metric, params.threads)?;
    let (a, b) = match (params.a, params.b) {
        (Some(a), Some(b)) => (a, b),
        _ => fit_ab(params.min_dist, params.spread)?,
    };
    let init = initialize_embedding(&fuzzy, params.out_dim, params.init, params.seed)?;
    let mut resolved = params.clone();
    resolved.a = Some(a);
    resolved.b = Some(b);
    optimize_embedding(init, &fuzzy, &resolved)
}
