//! Dense reference quantities for the condition-number results on
//! `H = D + VV'` preconditioned by `D + V Omega Omega' V'`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::{gaussian_matrix, orthonormalize};
use crate::symmat::eig_sym;

fn dinv_half(d: &DVector<f64>) -> Result<DVector<f64>> {
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Contract("diagonal must be positive".into()));
    }
    Ok(d.map(|v| 1.0 / v.sqrt()))
}

/// `D^{-1/2} V`.
fn scaled(d: &DVector<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("V rows", d.len(), v.nrows())?;
    let s = dinv_half(d)?;
    Ok(DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * s[i]))
}

/// Singular values (nonincreasing) and right singular vectors of
/// `D^{-1/2} V`, from the eigendecomposition of the `n x n` Gram matrix.
pub fn scaled_svd(d: &DVector<f64>, v: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let g = scaled(d, v)?;
    let mut gram = g.tr_mul(&g);
    crate::linalg::symmetrize(&mut gram);
    let e = eig_sym(&gram)?;
    Ok((e.values.map(|l| l.max(0.0).sqrt()), e.vectors))
}

/// The top `k` right singular directions of `D^{-1/2} V`.
pub fn svd_subspace(d: &DVector<f64>, v: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = v.ncols();
    if k >= n {
        return Err(Error::Contract(format!("subspace size {k} must be below the column count {n}")));
    }
    let (_, p) = scaled_svd(d, v)?;
    Ok(p.columns(0, k).into_owned())
}

/// Condition number of `G^{-1} H G^{-T}` with `G G' = D + V Omega Omega' V'`.
pub fn kappa_exact(d: &DVector<f64>, v: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    check_len("Omega rows", v.ncols(), omega.nrows())?;
    let m = d.len();
    let dm = DMatrix::from_diagonal(d);
    let h = &dm + v * v.transpose();
    let vo = v * omega;
    let h_omega = &dm + &vo * vo.transpose();
    let chol = h_omega.cholesky().ok_or(Error::NotPositiveDefinite {
        name: "preconditioner",
        min_eig: f64::NAN,
        max_eig: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let mut inner = &linv * h * linv.transpose();
    crate::linalg::symmetrize(&mut inner);
    let e = eig_sym(&inner)?;
    Ok(e.max() / e.min())
}

/// Condition number for the projector `P_Omega` in place of `Omega Omega'`.
pub fn kappa_projected(d: &DVector<f64>, v: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    kappa_exact(d, v, &orthonormalize(omega, 1e-12))
}

/// Largest eigenvalue of `(I + S^2)^{1/2} (I + S P_Omega S)^{-1} (I + S^2)^{1/2}`
/// in the coordinates of the right singular vectors.
pub fn projected_lambda_max(sigma: &DVector<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    let n = sigma.len();
    check_len("Omega rows", n, omega.nrows())?;
    let q = orthonormalize(omega, 1e-12);
    let proj = &q * q.transpose();
    let s = DMatrix::from_diagonal(sigma);
    let mid = DMatrix::identity(n, n) + &s * proj * &s;
    let root = DMatrix::from_diagonal(&sigma.map(|x| (1.0 + x * x).sqrt()));
    let mid_inv = mid
        .cholesky()
        .ok_or_else(|| Error::Solver("I + S P S is not positive definite".into()))?
        .inverse();
    let mut t = &root * mid_inv * &root;
    crate::linalg::symmetrize(&mut t);
    Ok(eig_sym(&t)?.max())
}

/// `2 + s_{k+1}^2 + |(I + S_2^2)^{1/2} Omega_2 Omega_1^+|^2`, where `Omega_1`
/// is the first `k` rows of `omega` (given in singular-vector
/// coordinates). Fails when `Omega_1` lacks full row rank.
pub fn det_bound(sigma: &DVector<f64>, omega: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = sigma.len();
    check_len("Omega rows", n, omega.nrows())?;
    if k > n || k > omega.ncols() {
        return Err(Error::Contract(format!("k = {k} exceeds the sketch dimensions")));
    }
    let s_next = if k < n { sigma[k] } else { 0.0 };
    if k == 0 || k == n {
        // the coupling term vanishes when Omega_1 or Sigma_2 is empty
        return Ok(2.0 + s_next * s_next);
    }
    let o1 = omega.rows(0, k).into_owned();
    let o2 = omega.rows(k, n - k).into_owned();
    let svd = o1.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Contract("first k rows of Omega are not linearly independent".into()));
    }
    let gram = &o1 * o1.transpose();
    let pinv = o1.transpose()
        * gram
            .cholesky()
            .ok_or_else(|| Error::Contract("first k rows of Omega are not linearly independent".into()))?
            .inverse();
    let root = DMatrix::from_diagonal(&sigma.rows(k, n - k).map(|x| (1.0 + x * x).sqrt()));
    let f = root * o2 * pinv;
    let nrm = f.svd(false, false).singular_values.max();
    Ok(2.0 + s_next * s_next + nrm * nrm)
}

/// `1 + sum_{i not in l} lambda_i |B' p_i|^2_{D^{-1}}` for the eigenpairs
/// `(lambda_i, p_i)` of `X` (nonincreasing order) outside the index set `l`.
/// The matching preconditioner uses `V = B' X^{1/2}` and `P_l = [p_i]_{i in l}`.
pub fn spec_bound(d: &DVector<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>, l: &[usize]) -> Result<f64> {
    check_len("B columns", d.len(), b.ncols())?;
    check_len("X order", b.nrows(), x.nrows())?;
    let e = eig_sym(x)?;
    let mut total = 1.0;
    for i in 0..e.values.len() {
        if l.contains(&i) {
            continue;
        }
        let btp = b.tr_mul(&e.vectors.column(i).into_owned());
        total += e.values[i].max(0.0) * crate::linalg::dinv_norm_sq(&btp, d);
    }
    Ok(total)
}

/// `V = B' X^{1/2}` and the eigenvectors of `X` selected by `l`, for use with
/// [`kappa_exact`] alongside [`spec_bound`].
pub fn spec_split(b: &DMatrix<f64>, x: &DMatrix<f64>, l: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let e = eig_sym(x)?;
    let root = e.map(|v| v.max(0.0).sqrt());
    let v = b.transpose() * root;
    let mut p = DMatrix::zeros(x.nrows(), l.len());
    for (c, &i) in l.iter().enumerate() {
        p.set_column(c, &e.vectors.column(i));
    }
    Ok((v, p))
}

/// `1 + |D^{-1/2} V (I - P_Omega)|^2` in the spectral norm.
pub fn proj_bound(d: &DVector<f64>, v: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    check_len("Omega rows", v.ncols(), omega.nrows())?;
    let g = scaled(d, v)?;
    let q = orthonormalize(omega, 1e-12);
    let n = v.ncols();
    let comp = DMatrix::identity(n, n) - &q * q.transpose();
    let r = g * comp;
    let nrm = r.svd(false, false).singular_values.max();
    Ok(1.0 + nrm * nrm)
}

/// Threshold of the tail bound for `Omega` with `k + p` standard Gaussian
/// columns: exceeded with probability at most `2 t^{-p} + exp(-u^2/2)`.
pub fn prob_bound(sigma: &DVector<f64>, k: usize, p: usize, t: f64, u: f64) -> f64 {
    let n = sigma.len();
    let s1 = if k < n { 1.0 + sigma[k] * sigma[k] } else { 1.0 };
    let frob: f64 = (k..n).map(|i| 1.0 + sigma[i] * sigma[i]).sum::<f64>().sqrt();
    let e = std::f64::consts::E;
    let kp = ((k + p) as f64).sqrt();
    let pf = (p + 1) as f64;
    let inner = t * ((3.0 * k as f64 / pf).sqrt() + u * e * kp / pf) * s1 + t * e * kp / pf * frob;
    2.0 + (s1 - 1.0) + inner * inner
}

/// Sample mean and unbiased sample variance of
/// `q(x) = x'(I + S^2)^{-1/2}(I + S Omega Omega' S)(I + S^2)^{-1/2} x`
/// over `trials` draws of `Omega` (`n x k`, entries `N(0, 1/k)`).
pub fn moments_mc<R: Rng + ?Sized>(
    sigma: &DVector<f64>,
    x: &DVector<f64>,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let n = sigma.len();
    check_len("moment vector", n, x.len())?;
    if k == 0 || trials < 2 {
        return Err(Error::Contract("moments need k >= 1 and at least two trials".into()));
    }
    let base: f64 = (0..n).map(|i| x[i] * x[i] / (1.0 + sigma[i] * sigma[i])).sum();
    let y = DVector::from_fn(n, |i, _| sigma[i] / (1.0 + sigma[i] * sigma[i]).sqrt() * x[i]);
    let std = 1.0 / (k as f64).sqrt();
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let omega = gaussian_matrix(rng, n, k, std);
        samples.push(base + omega.tr_mul(&y).norm_squared());
    }
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok((mean, var))
}

/// Predicted variance `(2/k) (sum_i s_i^2 x_i^2 / (1 + s_i^2))^2`.
pub fn moments_variance(sigma: &DVector<f64>, x: &DVector<f64>, k: usize) -> f64 {
    let s: f64 = (0..sigma.len()).map(|i| sigma[i].powi(2) * x[i].powi(2) / (1.0 + sigma[i].powi(2))).sum();
    2.0 / k as f64 * s * s
}
