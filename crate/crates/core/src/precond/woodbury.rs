use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::krylov::LinearOperator;
use crate::symmat::eig_sym;

/// Inverse of the truncated low-rank approximation `D + (V^P^)(V^P^)'`,
/// applied through the Woodbury identity.
#[derive(Debug, Clone)]
pub struct LowRankPrecond {
    pub d: DVector<f64>,
    pub vhat: DMatrix<f64>,
    /// Eigenvectors of `V^' D^{-1} V^` for the kept eigenvalues.
    pub phat: DMatrix<f64>,
    /// Kept eigenvalues, all `>= 1`, nonincreasing.
    pub lhat: DVector<f64>,
    /// Every eigenvalue of `V^' D^{-1} V^`, kept or not.
    pub all_eigs: DVector<f64>,
    vp: DMatrix<f64>,
}

impl LowRankPrecond {
    pub fn khat(&self) -> usize {
        self.lhat.len()
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// `D + (V^P^)(V^P^)' v`, the operator this preconditioner inverts.
    pub fn apply_approx(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("preconditioner approximation", self.dim(), v.len())?;
        let mut out = self.d.component_mul(v);
        if self.khat() > 0 {
            out += &self.vp * self.vp.tr_mul(v);
        }
        Ok(out)
    }
}

/// Eigendecomposition of `V^' D^{-1} V^` truncated at eigenvalue one (ties
/// are kept).
pub fn precond_setup(d: &DVector<f64>, vhat: &DMatrix<f64>) -> Result<LowRankPrecond> {
    check_len("preconditioner V^ rows", d.len(), vhat.nrows())?;
    if let Some(i) = d.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Contract(format!("preconditioner diagonal entry {i} is {}", d[i])));
    }
    let k = vhat.ncols();
    let m = d.len();
    if k == 0 {
        return Ok(LowRankPrecond {
            d: d.clone(),
            vhat: vhat.clone(),
            phat: DMatrix::zeros(0, 0),
            lhat: DVector::zeros(0),
            all_eigs: DVector::zeros(0),
            vp: DMatrix::zeros(m, 0),
        });
    }
    let dinv = d.map(|v| 1.0 / v);
    let scaled = DMatrix::from_fn(m, k, |i, j| vhat[(i, j)] * dinv[i]);
    let mut gram = vhat.tr_mul(&scaled);
    crate::linalg::symmetrize(&mut gram);
    let eig = eig_sym(&gram)?;
    let khat = eig.values.iter().take_while(|&&l| l >= 1.0).count();
    let phat = eig.vectors.columns(0, khat).into_owned();
    let lhat = eig.values.rows(0, khat).into_owned();
    let vp = vhat * &phat;
    Ok(LowRankPrecond {
        d: d.clone(),
        vhat: vhat.clone(),
        phat,
        lhat,
        all_eigs: eig.values,
        vp,
    })
}

/// `D^{-1} v - D^{-1} V^P^ (I + L^)^{-1} P^'V^' D^{-1} v`.
pub fn precond_apply(p: &LowRankPrecond, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("preconditioner apply", p.dim(), v.len())?;
    let mut u = v.component_div(&p.d);
    if p.khat() > 0 {
        let mut t = p.vp.tr_mul(&u);
        for i in 0..t.len() {
            t[i] /= 1.0 + p.lhat[i];
        }
        u -= (&p.vp * t).component_div(&p.d);
    }
    Ok(u)
}

impl LinearOperator for LowRankPrecond {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        precond_apply(self, v)
    }
}

/// Safeguard multiplier for the relative tolerance:
/// `sqrt( prod_i (1 + l_i)^{-1/m} * min_i 1/D_i )`, evaluated in log space.
pub fn termination_factor(p: &LowRankPrecond, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let log_prod: f64 = -p.lhat.iter().map(|l| l.ln_1p()).sum::<f64>() / m as f64;
    let dmax = p.d.iter().cloned().fold(0.0f64, f64::max);
    (0.5 * (log_prod - dmax.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, gaussian_vector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_is_diagonal_inverse() {
        let d = DVector::from_vec(vec![2.0, 4.0]);
        let p = precond_setup(&d, &DMatrix::zeros(2, 0)).unwrap();
        assert_eq!(p.khat(), 0);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(precond_apply(&p, &v).unwrap(), DVector::from_vec(vec![0.5, 0.25]));
        assert!((termination_factor(&p, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_column_on_threshold_is_kept() {
        let d = DVector::from_element(3, 1.0);
        let mut v = DMatrix::zeros(3, 1);
        v[(0, 0)] = 1.0;
        let p = precond_setup(&d, &v).unwrap();
        assert_eq!(p.khat(), 1);
        assert_eq!(p.lhat[0], 1.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let u = precond_apply(&p, &e1).unwrap();
        assert!((u - e1 * 0.5).norm() < 1e-15);
    }

    #[test]
    fn termination_factor_direct() {
        let d = DVector::from_element(2, 1.0);
        let mut v = DMatrix::zeros(2, 1);
        v[(0, 0)] = 3f64.sqrt();
        let p = precond_setup(&d, &v).unwrap();
        assert!((p.lhat[0] - 3.0).abs() < 1e-14);
        assert!((termination_factor(&p, 2) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_diagonal() {
        let d = DVector::from_vec(vec![1.0, 0.0]);
        assert!(precond_setup(&d, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn eigenpairs_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DVector::from_fn(50, |_, _| rng.random_range(0.5..3.0));
        let v = gaussian_matrix(&mut rng, 50, 8, 1.0);
        let p = precond_setup(&d, &v).unwrap();
        let dinv = DMatrix::from_diagonal(&d.map(|x| 1.0 / x));
        let g = v.transpose() * dinv * &v;
        let mut dense = g.symmetric_eigenvalues().iter().copied().collect::<Vec<_>>();
        dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in p.all_eigs.iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-10 * dense[0]);
        }
        for j in 0..p.khat() {
            let c = p.phat.column(j);
            assert!((&g * c - c * p.lhat[j]).norm() <= 1e-9 * dense[0]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn woodbury_inverts_truncated_operator(m in 1usize..120, k in 0usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = DVector::from_fn(m, |_, _| rng.random_range(0.1..5.0));
            let scale = rng.random_range(0.1..3.0);
            let v = gaussian_matrix(&mut rng, m, k, scale);
            let p = precond_setup(&d, &v).unwrap();
            let x = gaussian_vector(&mut rng, m);
            let back = precond_apply(&p, &p.apply_approx(&x).unwrap()).unwrap();
            prop_assert!((back - &x).norm() <= 1e-9 * x.norm());
            let ptp = p.phat.tr_mul(&p.phat);
            prop_assert!((ptp - DMatrix::identity(p.khat(), p.khat())).norm() <= 1e-10);
        }
    }
}
