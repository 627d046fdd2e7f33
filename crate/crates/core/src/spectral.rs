//! Spectral feature vectors and the pairwise spectral affinity.
//!
//! Every point gets a K-dimensional feature row, either from the bottom
//! nontrivial Laplacian eigenvectors (exact, small-n oracle) or from random
//! test vectors smoothed by Gauss-Seidel sweeps on `L x = 0` (the cheap
//! surrogate used by the compression pipeline). The affinity of two points
//! is the squared cosine of their feature rows.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen;
use crate::knn_graph::{Edge, LaplacianMatrix};
use crate::{Error, Result};

/// Largest n accepted by the dense eigensolver path.
const ORACLE_MAX_N: usize = 5000;

/// Squared-norm threshold below which a feature row counts as vanished.
const ZERO_NORM_EPS: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralKind {
    Exact,
    Smoothed,
}

/// N x K matrix of per-point spectral feature vectors.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    n: usize,
    vector_count: usize,
    vectors: Vec<f64>,
    kind: SpectralKind,
    eigenvalues: Option<Vec<f64>>,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.n
    }

    /// K, the number of feature vectors (columns).
    pub fn vector_count(&self) -> usize {
        self.vector_count
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    /// Feature row X_u.
    pub fn row(&self, u: usize) -> &[f64] {
        &self.vectors[u * self.vector_count..(u + 1) * self.vector_count]
    }

    /// Column k as an owned vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|u| self.vectors[u * self.vector_count + k]).collect()
    }

    /// Ascending eigenvalues of the retained columns (exact kind only).
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }
}

/// Bottom K nontrivial eigenvectors of the Laplacian, skipping one
/// zero-eigenvalue direction per connected component.
pub fn exact_bottom_eigenvectors(l: &LaplacianMatrix, k: usize) -> Result<SpectralEmbedding> {
    let n = l.n();
    if k == 0 {
        return Err(Error::param("need K >= 1 spectral vectors"));
    }
    if n > ORACLE_MAX_N {
        return Err(Error::param(format!(
            "exact eigenvectors limited to n <= {}, got {}",
            ORACLE_MAX_N, n
        )));
    }
    let (components, _) = l.connected_components();
    if k + components > n {
        return Err(Error::param(format!(
            "K={} too large: graph has {} components and only {} vertices",
            k, components, n
        )));
    }

    let (values, columns) = eigen::symmetric_eigen_ascending(&l.to_dense(), n);
    let mut vectors = vec![0.0; n * k];
    let mut eigenvalues = Vec::with_capacity(k);
    for out in 0..k {
        let col = &columns[components + out];
        eigenvalues.push(values[components + out]);
        for u in 0..n {
            vectors[u * k + out] = col[u];
        }
    }
    Ok(SpectralEmbedding {
        n,
        vector_count: k,
        vectors,
        kind: SpectralKind::Exact,
        eigenvalues: Some(eigenvalues),
    })
}

/// One in-place Gauss-Seidel sweep for `L x = 0`, ascending vertex order.
/// Vertices with zero degree are skipped.
pub fn gauss_seidel_sweep(l: &LaplacianMatrix, x: &mut [f64]) {
    assert_eq!(x.len(), l.n());
    for p in 0..l.n() {
        let deg = l.degree(p);
        if deg <= 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for &(q, w) in l.neighbors(p) {
            acc += w * x[q];
        }
        x[p] = acc / deg;
    }
}

/// K random test vectors smoothed by `sweeps` Gauss-Seidel sweeps on
/// `L x = 0`, the vector mean subtracted after every sweep so the constant
/// nullspace component stays deflated. Deterministic for a fixed seed.
pub fn smoothed_test_vectors(
    l: &LaplacianMatrix,
    k: usize,
    sweeps: usize,
    seed: u64,
) -> Result<SpectralEmbedding> {
    if k == 0 {
        return Err(Error::param("need K >= 1 test vectors"));
    }
    if sweeps == 0 {
        return Err(Error::param("need sweeps >= 1"));
    }
    let n = l.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..sweeps {
            gauss_seidel_sweep(l, &mut x);
            let mean = x.iter().sum::<f64>() / n as f64;
            for v in x.iter_mut() {
                *v -= mean;
            }
        }
        columns.push(x);
    }

    let mut vectors = vec![0.0; n * k];
    for (j, col) in columns.iter().enumerate() {
        for u in 0..n {
            vectors[u * k + j] = col[u];
        }
    }
    Ok(SpectralEmbedding {
        n,
        vector_count: k,
        vectors,
        kind: SpectralKind::Smoothed,
        eigenvalues: None,
    })
}

/// Spectral affinity of two feature rows: squared inner product over the
/// product of squared norms, in [0, 1]. A vanished row contributes no
/// spectral evidence, so the affinity is 0 by convention.
pub fn spectral_affinity(xu: &[f64], xv: &[f64]) -> f64 {
    debug_assert_eq!(xu.len(), xv.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in xu.iter().zip(xv) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu < ZERO_NORM_EPS || nv < ZERO_NORM_EPS {
        return 0.0;
    }
    ((dot * dot) / (nu * nv)).clamp(0.0, 1.0)
}

/// Affinity of every edge's endpoint pair, in edge order.
pub fn edge_affinities(embedding: &SpectralEmbedding, edges: &[Edge], threads: usize) -> Vec<f64> {
    let score = |e: &Edge| spectral_affinity(embedding.row(e.u), embedding.row(e.v));
    if threads <= 1 {
        edges.iter().map(score).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| edges.par_iter().map(score).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn_graph::{laplacian_from_graph, KnnGraph};
    use proptest::prelude::*;

    fn path3() -> LaplacianMatrix {
        let g = KnnGraph::new_symmetric(
            3,
            1,
            vec![Edge { u: 0, v: 1, w: 1.0 }, Edge { u: 1, v: 2, w: 1.0 }],
        )
        .unwrap();
        laplacian_from_graph(&g).unwrap()
    }

    #[test]
    fn path3_bottom_eigenvector() {
        let emb = exact_bottom_eigenvectors(&path3(), 1).unwrap();
        let lambda = emb.eigenvalues().unwrap()[0];
        assert!((lambda - 1.0).abs() <= 1e-9);
        let v = emb.column(0);
        let s = 0.5f64.sqrt();
        assert!((v[0] - s).abs() <= 1e-9);
        assert!(v[1].abs() <= 1e-9);
        assert!((v[2] + s).abs() <= 1e-9);
    }

    #[test]
    fn disconnected_edges_skip_both_null_directions() {
        // two disconnected unit edges: spectrum {0, 0, 2, 2}
        let g = KnnGraph::new_symmetric(
            4,
            1,
            vec![Edge { u: 0, v: 1, w: 1.0 }, Edge { u: 2, v: 3, w: 1.0 }],
        )
        .unwrap();
        let l = laplacian_from_graph(&g).unwrap();
        let emb = exact_bottom_eigenvectors(&l, 1).unwrap();
        let lambda = emb.eigenvalues().unwrap()[0];
        assert!((lambda - 2.0).abs() <= 1e-9);
        let v = emb.column(0);
        // residual of the eigenpair
        let lv = l.matvec(&v);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for p in 0..4 {
            assert!((lv[p] - lambda * v[p]).abs() <= 1e-6 * norm);
        }
        // orthogonal to both component indicators
        assert!((v[0] + v[1]).abs() <= 1e-9);
        assert!((v[2] + v[3]).abs() <= 1e-9);
    }

    #[test]
    fn k_equal_n_is_error() {
        assert!(exact_bottom_eigenvectors(&path3(), 3).is_err());
    }

    #[test]
    fn eigenpair_residuals_on_random_graphs() {
        for seed in 0..3 {
            let g = crate::knn_graph::tests::random_graph(25, seed);
            let l = laplacian_from_graph(&g).unwrap();
            let emb = exact_bottom_eigenvectors(&l, 5).unwrap();
            let vals = emb.eigenvalues().unwrap().to_vec();
            for j in 0..5 {
                let v = emb.column(j);
                let lv = l.matvec(&v);
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for p in 0..25 {
                    assert!((lv[p] - vals[j] * v[p]).abs() <= 1e-6 * norm);
                }
            }
            // ascending order
            for j in 1..5 {
                assert!(vals[j] >= vals[j - 1] - 1e-12);
            }
        }
    }

    #[test]
    fn one_sweep_on_path3_cuts_energy() {
        let l = path3();
        let mut x = vec![1.0, 0.0, -1.0];
        let e0 = l.quadratic_form(&x);
        assert_eq!(e0, 2.0);
        gauss_seidel_sweep(&l, &mut x);
        // hand-executed sweep: p=0 -> 0, p=1 -> -0.5, p=2 -> -0.5
        assert_eq!(x, vec![0.0, -0.5, -0.5]);
        let e1 = l.quadratic_form(&x);
        assert_eq!(e1, 0.25);
        assert!(e1 < e0);
    }

    #[test]
    fn energy_never_increases_across_sweeps() {
        for seed in 0..5 {
            let g = crate::knn_graph::tests::random_graph(30, 100 + seed);
            let l = laplacian_from_graph(&g).unwrap();
            for t in 1..8 {
                let a = smoothed_test_vectors(&l, 3, t, seed).unwrap();
                let b = smoothed_test_vectors(&l, 3, t + 1, seed).unwrap();
                for j in 0..3 {
                    let ea = l.quadratic_form(&a.column(j));
                    let eb = l.quadratic_form(&b.column(j));
                    assert!(
                        eb <= ea * (1.0 + 1e-12) + 1e-12,
                        "energy rose from {} to {} at sweep {}",
                        ea,
                        eb,
                        t + 1
                    );
                }
            }
        }
    }

    #[test]
    fn smoothed_vectors_are_deterministic_and_zero_mean() {
        let g = crate::knn_graph::tests::random_graph(40, 7);
        let l = laplacian_from_graph(&g).unwrap();
        let a = smoothed_test_vectors(&l, 10, 10, 42).unwrap();
        let b = smoothed_test_vectors(&l, 10, 10, 42).unwrap();
        assert_eq!(a.vectors, b.vectors);
        for j in 0..10 {
            let mean: f64 = a.column(j).iter().sum::<f64>() / 40.0;
            assert!(mean.abs() <= 1e-12);
        }
    }

    #[test]
    fn affinity_examples() {
        assert_eq!(spectral_affinity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(spectral_affinity(&[1.0, 2.0], &[2.0, 4.0]), 1.0);
        assert_eq!(spectral_affinity(&[1.0, 0.0], &[1.0, 1.0]), 0.5);
    }

    #[test]
    fn affinity_zero_norm_convention() {
        assert_eq!(spectral_affinity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
        assert_eq!(spectral_affinity(&[1e-13, 0.0], &[1e-13, 0.0]), 0.0);
    }

    proptest! {
        #[test]
        fn affinity_bounds_symmetry_and_scale_invariance(
            xu in prop::collection::vec(-10.0f64..10.0, 4),
            xv in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 1.5, 8.0]),
            beta in prop::sample::select(vec![-2.0f64, -0.1, 0.75, 4.0]),
        ) {
            let s = spectral_affinity(&xu, &xv);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, spectral_affinity(&xv, &xu));

            let xua: Vec<f64> = xu.iter().map(|v| v * alpha).collect();
            let xvb: Vec<f64> = xv.iter().map(|v| v * beta).collect();
            let scaled = spectral_affinity(&xua, &xvb);
            // scale invariance, unless scaling crosses the vanished-norm cutoff
            let nu: f64 = xu.iter().map(|v| v * v).sum();
            let nv: f64 = xv.iter().map(|v| v * v).sum();
            if nu * alpha * alpha >= 1e-20 && nv * beta * beta >= 1e-20 {
                prop_assert!((s - scaled).abs() <= 1e-12);
            }
        }

        #[test]
        fn self_affinity_is_one(xu in prop::collection::vec(0.1f64..10.0, 3)) {
            prop_assert!((spectral_affinity(&xu, &xu) - 1.0).abs() <= 1e-12);
        }
    }
}
