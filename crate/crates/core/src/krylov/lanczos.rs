use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::error::{check_len, Result};
use crate::symmat::eig_sym;

/// Seed of the Gaussian start vector; fixed so estimates are reproducible.
pub const LANCZOS_SEED: u64 = 0x6c61_6e63;

/// Ritz values of the `pc`-preconditioned operator after at most `iters`
/// Lanczos steps with full reorthogonalization, sorted nonincreasingly.
///
/// The basis `q_j` is orthonormal in the inner product induced by `pc`;
/// `z_j = pc q_j` is kept alongside so no inverse of `pc` is needed.
pub fn lanczos_ritz_values(op: &dyn LinearOperator, pc: &dyn LinearOperator, iters: usize) -> Result<DVector<f64>> {
    let n = op.dim();
    check_len("lanczos preconditioner", n, pc.dim())?;
    let iters = iters.min(n);
    if iters == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut r = crate::linalg::gaussian_vector(&mut rng, n);
    let mut qs: Vec<DVector<f64>> = Vec::with_capacity(iters);
    let mut zs: Vec<DVector<f64>> = Vec::with_capacity(iters);
    let mut alpha = Vec::with_capacity(iters);
    let mut beta: Vec<f64> = Vec::with_capacity(iters);

    let mut z = pc.apply(&r)?;
    let mut b = r.dot(&z).max(0.0).sqrt();
    let b0 = b;
    for k in 0..iters {
        if !(b > 1e-14 * b0) {
            break;
        }
        if k > 0 {
            beta.push(b);
        }
        qs.push(&r / b);
        zs.push(&z / b);
        let u = op.apply(&zs[k])?;
        let a = zs[k].dot(&u);
        alpha.push(a);
        r = u - &qs[k] * a;
        if k > 0 {
            r.axpy(-beta[k - 1], &qs[k - 1], 1.0);
        }
        for _ in 0..2 {
            for j in 0..qs.len() {
                let c = zs[j].dot(&r);
                r.axpy(-c, &qs[j], 1.0);
            }
        }
        z = pc.apply(&r)?;
        // scale-aware cutoff: a tiny residual means the Krylov space is invariant
        let rz = r.dot(&z);
        b = if rz > 0.0 { rz.sqrt() } else { 0.0 };
        if b <= 1e-12 * a.abs().max(b0 * f64::EPSILON) {
            break;
        }
    }
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i + 1, i)] = beta[i];
            t[(i, i + 1)] = beta[i];
        }
    }
    Ok(eig_sym(&t)?.values)
}

/// `max |theta| / min |theta|` over the Ritz values; `iters` defaults to
/// `min(N, 100)`.
pub fn lanczos_cond_estimate(op: &dyn LinearOperator, pc: &dyn LinearOperator, iters: Option<usize>) -> Result<f64> {
    let iters = iters.unwrap_or_else(|| op.dim().min(100));
    let ritz = lanczos_ritz_values(op, pc, iters)?;
    if ritz.is_empty() {
        return Ok(1.0);
    }
    let hi = ritz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lo = ritz.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}
