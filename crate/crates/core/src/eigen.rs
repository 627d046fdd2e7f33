//! Dense symmetric eigensolver, the small-n oracle used for exact spectral
//! vectors and UMAP's spectral initialization. Not intended for large n.

use nalgebra::DMatrix;

/// Eigendecomposition of a symmetric matrix given in row-major order.
/// Returns eigenvalues in ascending order with matching eigenvectors,
/// each sign-fixed so its largest-magnitude entry is positive.
pub(crate) fn symmetric_eigen_ascending(dense: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(dense.len(), n * n);
    let m = DMatrix::from_row_slice(n, n, dense);
    let decomp = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &i in &order {
        values.push(decomp.eigenvalues[i]);
        let mut v: Vec<f64> = decomp.eigenvectors.column(i).iter().copied().collect();
        canonical_sign(&mut v);
        vectors.push(v);
    }
    (values, vectors)
}

/// Flips a vector so its largest-magnitude entry (lowest index on ties)
/// is positive; makes eigenvector output deterministic up to the solver.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
