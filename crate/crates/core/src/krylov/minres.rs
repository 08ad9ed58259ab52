use std::time::Instant;

use nalgebra::DVector;

use super::{LinearOperator, SolveReport, SolveStatus};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MinresConfig {
    pub rel_tol: f64,
    /// Multiplies `rel_tol`; see [`crate::precond::termination_factor`].
    pub safeguard: f64,
    /// Defaults to `5 N`.
    pub maxit: Option<usize>,
}

impl MinresConfig {
    pub fn new(rel_tol: f64) -> Self {
        MinresConfig {
            rel_tol,
            safeguard: 1.0,
            maxit: None,
        }
    }
}

/// Preconditioned MINRES from a zero initial guess.
///
/// `pc` applies the inverse of a symmetric positive definite
/// preconditioner. Termination is on the residual measured in the norm
/// induced by `pc`, which MINRES updates for free.
pub fn minres(
    op: &dyn LinearOperator,
    pc: &dyn LinearOperator,
    b: &DVector<f64>,
    cfg: &MinresConfig,
) -> Result<(DVector<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    check_len("minres rhs", n, b.len())?;
    check_len("minres preconditioner", n, pc.dim())?;
    let maxit = cfg.maxit.unwrap_or(5 * n.max(1));
    let effective_tol = cfg.rel_tol * cfg.safeguard;
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    let mut report = SolveReport {
        status: SolveStatus::Converged,
        iterations: 0,
        matvecs: 0,
        precond_residual: 0.0,
        true_residual: 0.0,
        cond_estimate: None,
        precond_columns: 0,
        wall_seconds: 0.0,
        effective_tol,
        history: Vec::new(),
    };
    if bnorm == 0.0 {
        report.wall_seconds = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }

    let mut r1 = b.clone();
    let mut y = pc.apply(&r1)?;
    let ry = r1.dot(&y);
    if !(ry > 0.0) {
        return Err(Error::Solver(format!("preconditioner is not positive definite (r'Mr = {ry:e})")));
    }
    let beta1 = ry.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = DVector::zeros(n);
    let mut w2 = DVector::zeros(n);
    let target = effective_tol * beta1;
    let mut status = SolveStatus::Maxit;

    for itn in 1..=maxit {
        let v = &y / beta;
        y = op.apply(&v)?;
        report.matvecs += 1;
        if itn >= 2 {
            y.axpy(-beta / oldb, &r1, 1.0);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2, 1.0);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = pc.apply(&r2)?;
        oldb = beta;
        let ry = r2.dot(&y);
        let indefinite_pc = ry < 0.0;
        beta = ry.max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (&v - &w1 * oldeps - &w2 * delta) / gamma;
        x.axpy(phi, &w, 1.0);

        report.iterations = itn;
        report.history.push(phibar / beta1);
        if phibar <= target {
            status = SolveStatus::Converged;
            break;
        }
        if indefinite_pc || beta < 1e-15 * bnorm {
            status = SolveStatus::Breakdown;
            break;
        }
    }
    let res = op.apply(&x)?;
    report.matvecs += 1;
    report.true_residual = (res - b).norm() / bnorm;
    report.precond_residual = phibar / beta1;
    report.status = status;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{FnOperator, Identity};
    use crate::linalg::{gaussian_matrix, gaussian_vector};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::Cell;

    #[test]
    fn identity_converges_in_one_step() {
        let b = DVector::from_vec(vec![1.0, 2.0, -3.0]);
        let (x, rep) = minres(&Identity(3), &Identity(3), &b, &MinresConfig::new(1e-12)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations, 1);
        assert!((x - b).norm() < 1e-14);
    }

    #[test]
    fn exact_inverse_preconditioner() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = gaussian_matrix(&mut rng, 30, 30, 1.0);
        let a = &g * g.transpose() + DMatrix::identity(30, 30);
        let inv = a.clone().try_inverse().unwrap();
        let b = gaussian_vector(&mut rng, 30);
        let (x, rep) = minres(&a, &inv, &b, &MinresConfig::new(1e-12)).unwrap();
        assert!(rep.iterations <= 2);
        assert!((&a * x - b).norm() <= 1e-10 * 30.0);
    }

    #[test]
    fn counts_every_operator_call() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = gaussian_matrix(&mut rng, 20, 20, 1.0);
        let a = &g * g.transpose() + DMatrix::identity(20, 20);
        let calls = Cell::new(0usize);
        let op = FnOperator::new(20, |v: &DVector<f64>| {
            calls.set(calls.get() + 1);
            Ok(&a * v)
        });
        let b = gaussian_vector(&mut rng, 20);
        let (_, rep) = minres(&op, &Identity(20), &b, &MinresConfig::new(1e-10)).unwrap();
        assert_eq!(rep.matvecs, calls.get());
        assert!(rep.matvecs >= rep.iterations);
    }

    #[test]
    fn augmented_indefinite_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (n, p) = (25, 2);
        let g = gaussian_matrix(&mut rng, n, n, 1.0);
        let h = &g * g.transpose() + DMatrix::identity(n, n);
        let c = gaussian_matrix(&mut rng, p, n, 1.0);
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        k.view_mut((n, 0), (p, n)).copy_from(&c);
        k.view_mut((0, n), (n, p)).copy_from(&c.transpose());
        let hinv = DMatrix::from_diagonal(&h.diagonal().map(|d| 1.0 / d));
        let mut pc = DMatrix::identity(n + p, n + p);
        pc.view_mut((0, 0), (n, n)).copy_from(&hinv);
        let b = gaussian_vector(&mut rng, n + p);
        let (x, rep) = minres(&k, &pc, &b, &MinresConfig::new(1e-12)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let exact = k.clone().lu().solve(&b).unwrap();
        assert!((x - &exact).norm() <= 1e-7 * exact.norm());
    }

    #[test]
    fn maxit_is_reported() {
        let d = DMatrix::from_diagonal(&DVector::from_fn(50, |i, _| (i + 1) as f64));
        let b = DVector::from_element(50, 1.0);
        let cfg = MinresConfig {
            rel_tol: 1e-14,
            safeguard: 1.0,
            maxit: Some(3),
        };
        let (_, rep) = minres(&d, &Identity(50), &b, &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Maxit);
        assert_eq!(rep.iterations, 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn agrees_with_dense_solve(n in 2usize..200, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = gaussian_matrix(&mut rng, n, 5.min(n), 1.0);
            let dvec = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64);
            let a = DMatrix::from_diagonal(&dvec) + &g * g.transpose();
            let pc = DMatrix::from_diagonal(&dvec.map(|d| 1.0 / d));
            let b = gaussian_vector(&mut rng, n);
            let tol = 1e-10;
            let (x, rep) = minres(&a, &pc, &b, &MinresConfig::new(tol)).unwrap();
            prop_assert_eq!(rep.status, SolveStatus::Converged);
            for pair in rep.history.windows(2) {
                prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
            }
            let exact = a.clone().cholesky().unwrap().solve(&b);
            let cond = {
                let e = crate::symmat::eig_sym(&a).unwrap();
                e.max() / e.min()
            };
            prop_assert!((x - &exact).norm() <= 10.0 * tol * cond * exact.norm());
        }
    }
}
