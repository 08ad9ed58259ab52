use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_len, Result};
use crate::linalg::{gaussian_matrix, orthonormalize};
use crate::symmat::eig_sym;

/// Column drop tolerance of the orthonormalization, relative to the column
/// norm.
pub const ORTH_DROP_TOL: f64 = 1e-12;
/// Eigenvalues at or below this fraction of the largest one are treated as
/// zero when forming the retention threshold.
pub const EIG_FLOOR: f64 = 1e-14;

/// State carried between consecutive solves of one subproblem.
#[derive(Debug, Clone)]
pub struct SelectionState {
    /// Orthonormal basis of the retained subspace, `n x k_lo`.
    pub p_old: DMatrix<f64>,
    /// Matrix-vector products used by the previous solve.
    pub n_mult: usize,
    /// Kept rank of the previous preconditioner.
    pub khat_prev: usize,
}

impl SelectionState {
    pub fn new(n: usize) -> Self {
        SelectionState {
            p_old: DMatrix::zeros(n, 0),
            n_mult: 0,
            khat_prev: 0,
        }
    }

    /// Records the outcome of the solve that used the last selection.
    pub fn record_solve(&mut self, matvecs: usize, khat: usize) {
        self.n_mult = matvecs;
        self.khat_prev = khat;
    }
}

/// Number of Gaussian columns on a fresh start:
/// `min{n, 3 + 2 khat, ceil(sqrt(n_mult (n_mult + n) / 4) - n_mult / 2)}`.
pub fn initial_sketch_size(n: usize, n_mult: usize, khat_prev: usize) -> usize {
    let nm = n_mult as f64;
    let grow = ((nm * (nm + n as f64) / 4.0).sqrt() - nm / 2.0).ceil().max(0.0) as usize;
    n.min(3 + 2 * khat_prev).min(grow)
}

/// Number of new Gaussian columns when a retained subspace exists:
/// `max{3, floor(sqrt(n_mult)/2) - k_lo}`.
pub fn extension_size(n_mult: usize, k_lo: usize) -> usize {
    let half = ((n_mult as f64).sqrt() / 2.0).floor() as i64;
    (half - k_lo as i64).max(3) as usize
}

/// Number of leading directions to retain given the eigenvalues of
/// `V^' D^{-1} V^` (nonincreasing).
pub fn retained_count(eigs: &DVector<f64>) -> usize {
    let k = eigs.len();
    if k == 0 || !(eigs[0] > 0.0) {
        return 0;
    }
    let floor = EIG_FLOOR * eigs[0];
    let kk = eigs.iter().take_while(|&&l| l > floor).count();
    let (l1, lk) = (eigs[0], eigs[kk - 1]);
    let lbar = (0.1 * l1.ln() - 0.9 * lk.ln()).exp().max(10.0);
    let above = eigs.iter().take_while(|&&l| l > lbar).count();
    k.min(above.max(3))
}

/// Randomized subspace selection. `apply_v` multiplies the Gram factor
/// `V` (`m x n`) with a vector of length `n`. Returns `V^ = V P_Omega` and
/// updates the retained subspace in `state`.
pub fn random_subspace<R, F>(
    n: usize,
    d: &DVector<f64>,
    apply_v: F,
    state: &mut SelectionState,
    rng: &mut R,
) -> Result<DMatrix<f64>>
where
    R: Rng + ?Sized,
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_len("retained subspace rows", n, state.p_old.nrows())?;
    let m = d.len();
    let k_lo = state.p_old.ncols();
    let p_omega = if k_lo == 0 {
        let k = initial_sketch_size(n, state.n_mult, state.khat_prev);
        gaussian_matrix(rng, n, k, 1.0)
    } else {
        let kp = extension_size(state.n_mult, k_lo);
        let omega = gaussian_matrix(rng, n, kp, 1.0);
        let mut joined = DMatrix::zeros(n, k_lo + kp);
        joined.columns_mut(0, k_lo).copy_from(&state.p_old);
        joined.columns_mut(k_lo, kp).copy_from(&omega);
        joined
    };
    let p_omega = orthonormalize(&p_omega, ORTH_DROP_TOL);
    let k = p_omega.ncols();
    let mut vhat = DMatrix::zeros(m, k);
    for j in 0..k {
        let col = apply_v(&p_omega.column(j).into_owned())?;
        check_len("V column", m, col.len())?;
        vhat.set_column(j, &col);
    }
    if k == 0 {
        state.p_old = DMatrix::zeros(n, 0);
        return Ok(vhat);
    }
    let scaled = DMatrix::from_fn(m, k, |i, j| vhat[(i, j)] / d[i]);
    let mut gram = vhat.tr_mul(&scaled);
    crate::linalg::symmetrize(&mut gram);
    let eig = eig_sym(&gram)?;
    let keep = retained_count(&eig.values);
    state.p_old = &p_omega * eig.vectors.columns(0, keep);
    Ok(vhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_call_without_history_is_empty() {
        assert_eq!(initial_sketch_size(20, 0, 0), 0);
        let d = DVector::from_element(5, 1.0);
        let v = DMatrix::<f64>::identity(5, 4);
        let mut st = SelectionState::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vh = random_subspace(4, &d, |u| Ok(&v * u), &mut st, &mut rng).unwrap();
        assert_eq!(vh.ncols(), 0);
        assert_eq!(st.p_old.ncols(), 0);
    }

    #[test]
    fn sketch_sizes() {
        // ceil(sqrt(100 * 120 / 4) - 50) = ceil(4.77) = 5, capped by 3 + 2*2 = 7
        assert_eq!(initial_sketch_size(20, 100, 2), 5);
        // ceil(sqrt(100 * 103 / 4) - 50) = ceil(0.74) = 1
        assert_eq!(initial_sketch_size(3, 100, 2), 1);
        assert_eq!(initial_sketch_size(200, 10_000, 0), 3);
        assert_eq!(extension_size(100, 1), 4);
        assert_eq!(extension_size(100, 4), 3);
    }

    #[test]
    fn retention_threshold() {
        // lbar = max{10, exp(0.1 ln 1e4 - 0.9 ln 1)} = 10
        let e = DVector::from_vec(vec![1e4, 1e3, 500.0, 50.0, 20.0, 5.0, 1.0]);
        assert_eq!(retained_count(&e), 5);
        let flat = DVector::from_vec(vec![2.0, 1.5, 1.0, 1.0, 1.0]);
        assert_eq!(retained_count(&flat), 3);
        assert_eq!(retained_count(&DVector::from_vec(vec![2.0])), 1);
        assert_eq!(retained_count(&DVector::zeros(3)), 0);
    }

    #[test]
    fn deterministic_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = crate::linalg::gaussian_matrix(&mut rng, 30, 20, 3.0);
        let d = DVector::from_element(30, 1.0);
        let run = || {
            let mut st = SelectionState::new(20);
            st.record_solve(100, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let a = random_subspace(20, &d, |u| Ok(&v * u), &mut st, &mut rng).unwrap();
            st.record_solve(64, 3);
            let b = random_subspace(20, &d, |u| Ok(&v * u), &mut st, &mut rng).unwrap();
            (a, b, st.p_old.clone())
        };
        let (a1, b1, p1) = run();
        let (a2, b2, p2) = run();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(p1, p2);
        assert_eq!(a1.ncols(), 5);
        let g = p1.tr_mul(&p1);
        assert!((g - DMatrix::identity(p1.ncols(), p1.ncols())).norm() < 1e-10);
    }
}
