//! Small dense helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Matrix with i.i.d. `N(0, std^2)` entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let g: f64 = rng.sample(StandardNormal);
            m[(i, j)] = std * g;
        }
    }
    m
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// A column is dropped when its norm after projection falls below
/// `drop_tol` times its original norm; the result has only the surviving
/// columns.
pub fn orthonormalize(mat: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let n = mat.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(mat.ncols());
    for j in 0..mat.ncols() {
        let mut v = mat.column(j).into_owned();
        let orig = v.norm();
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = v.norm();
        if nv > drop_tol * orig {
            kept.push(v / nv);
        }
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, q) in kept.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

/// `sum_i v_i^2 / d_i`, the squared `D^{-1}`-norm for a positive diagonal `d`.
pub fn dinv_norm_sq(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    v.iter().zip(d.iter()).map(|(x, di)| x * x / di).sum()
}

/// Maximum absolute deviation from symmetry, relative to the largest entry.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// `||a - b|| / max(||b||, tiny)` in the Euclidean norm.
pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
