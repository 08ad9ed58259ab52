//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use kktprecond::bench::{records_to_csv, replay, trace_instance, ReplayConfig, RunRecord, SolverKind};
use kktprecond::cones::ConeSpec;
use kktprecond::directsolve::{dense_assemble, dense_solve};
use kktprecond::instances::{gen_maxcut_like, gen_random, random_interior_state, RandomParams};
use kktprecond::ipm::{solver_tol, IPMConfig};
use kktprecond::kkt::{build_context, reduce_and_backsolve, DenseYSolver, KktRhs, TraceMode};
use kktprecond::linalg::{gaussian_matrix, gaussian_vector, orthonormalize, rel_diff};
use kktprecond::precond::bounds::{
    det_bound, kappa_exact, moments_mc, moments_variance, prob_bound, proj_bound, projected_lambda_max, scaled_svd,
    spec_bound, spec_split, svd_subspace,
};
use kktprecond::precond::{precond_apply, precond_setup};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_dv(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let d = DVector::from_fn(m, |_, _| 10f64.powf(rng.random_range(-2.0..1.0)));
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let mut v = gaussian_matrix(rng, m, n, scale);
    // spread the column scales so the spectrum is not flat
    for j in 0..n {
        let f = 10f64.powf(rng.random_range(-1.5..1.5));
        v.column_mut(j).scale_mut(f);
    }
    (d, v)
}

fn svd_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let (d, v) = random_dv(&mut rng, 60, 15);
        let k = case % 15;
        let (sigma, _) = match scaled_svd(&d, &v) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        let omega = svd_subspace(&d, &v, k).unwrap();
        let kappa = match kappa_exact(&d, &v, &omega) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        let want = 1.0 + sigma[k] * sigma[k];
        worst = worst.max((kappa - want).abs() / want);
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8)"))
}

fn woodbury_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let m = rng.random_range(1..=300);
        let k = rng.random_range(0..=m.min(20));
        let d = DVector::from_fn(m, |_, _| 10f64.powf(rng.random_range(-1.0..1.0)));
        let scale = rng.random_range(0.1..3.0);
        let v = gaussian_matrix(&mut rng, m, k, scale);
        let p = match precond_setup(&d, &v) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        let vp = &v * &p.phat;
        let dense = DMatrix::from_diagonal(&d) + &vp * vp.transpose();
        let inv = dense.cholesky().expect("truncated approximation is positive definite").inverse();
        let x = gaussian_vector(&mut rng, m);
        let got = precond_apply(&p, &x).unwrap();
        let want = &inv * &x;
        worst = worst.max((got - &want).norm() / want.norm());
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.2e} (tol 1e-9)"))
}

fn moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (n, k, trials) = (10, 4, 20_000);
    let mut notes = Vec::new();
    let mut pass = true;
    for case in 0..5 {
        let mut s: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sigma = DVector::from_vec(s);
        let x = gaussian_vector(&mut rng, n);
        let (mean, var) = moments_mc(&sigma, &x, k, trials, &mut rng).unwrap();
        let pred = moments_variance(&sigma, &x, k);
        let z = (mean - x.norm_squared()).abs() / (pred / trials as f64).sqrt();
        let vrel = (var - pred).abs() / pred;
        if z > 4.0 || vrel > 0.1 {
            pass = false;
        }
        notes.push(format!("case {case}: mean z {z:.2}, variance rel {vrel:.3}"));
    }
    outcome(pass, notes.join("; "))
}

/// Psd-like `X` with a spread spectrum and a Gaussian `B`.
fn spec_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let q = orthonormalize(&gaussian_matrix(rng, n, n, 1.0), 1e-12);
    let lam = DVector::from_fn(n, |_, _| 10f64.powf(rng.random_range(-4.0..2.0)));
    let x = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    let x = (&x + x.transpose()) * 0.5;
    let b = gaussian_matrix(rng, n, m, 1.0);
    let d = DVector::from_fn(m, |_, _| 10f64.powf(rng.random_range(-1.0..1.0)));
    (d, b, x)
}

/// Relative accuracy of the dense condition number, the same level the
/// exactness check demands. Bounds that are tight (projector equal to the
/// identity) are otherwise "violated" by rounding alone.
const KAPPA_RTOL: f64 = 1e-8;

fn bound_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut viol = [0usize; 3];
    let mut errors = Vec::new();
    for case in 0..200 {
        // sketch bound with a Gaussian n x (k+p) sketch
        let n = rng.random_range(4..=20);
        let m = n + rng.random_range(1..=30);
        let (d, v) = random_dv(&mut rng, m, n);
        let k = rng.random_range(1..n);
        let p = rng.random_range(0..=(n - k));
        let omega = gaussian_matrix(&mut rng, n, k + p, 1.0);
        let (sigma, pmat) = scaled_svd(&d, &v).unwrap();
        let q = orthonormalize(&omega, 1e-12);
        let kappa = match kappa_exact(&d, &v, &q) {
            Ok(x) => x,
            Err(e) => {
                errors.push(format!("case {case}: {e}"));
                continue;
            }
        };
        match det_bound(&sigma, &(pmat.transpose() * &omega), k) {
            Ok(b) if kappa > b * (1.0 + KAPPA_RTOL) => viol[0] += 1,
            Ok(_) => {}
            Err(e) => errors.push(format!("det case {case}: {e}")),
        }
        match proj_bound(&d, &v, &omega) {
            Ok(b) if kappa > b * (1.0 + KAPPA_RTOL) => viol[2] += 1,
            Ok(_) => {}
            Err(e) => errors.push(format!("proj case {case}: {e}")),
        }
        // spectral bound with V = B' X^{1/2} and leading eigenvectors of X
        let nx = rng.random_range(3..=15);
        let mx = nx + rng.random_range(1..=30);
        let (d, b, x) = spec_instance(&mut rng, nx, mx);
        let kk = rng.random_range(0..nx);
        let l: Vec<usize> = (0..kk).collect();
        let (vx, px) = spec_split(&b, &x, &l).unwrap();
        let bound = spec_bound(&d, &b, &x, &l).unwrap();
        match kappa_exact(&d, &vx, &px) {
            Ok(kx) if kx > bound * (1.0 + KAPPA_RTOL) => viol[1] += 1,
            Ok(_) => {}
            Err(e) => errors.push(format!("spec case {case}: {e}")),
        }
    }
    let pass = viol.iter().all(|&c| c == 0) && errors.is_empty();
    let mut detail = format!("violations det {} spec {} proj {} of 200 each", viol[0], viol[1], viol[2]);
    if !errors.is_empty() {
        detail.push_str(&format!("; {} errors, first: {}", errors.len(), errors[0]));
    }
    outcome(pass, detail)
}

fn kkt_variants() -> Vec<RandomParams> {
    let mut out = Vec::new();
    let specs = [ConeSpec::new(3, vec![]), ConeSpec::new(1, vec![3]), ConeSpec::new(2, vec![2, 3])];
    for i in 0..20 {
        let (n_ineq, n_eq) = match i % 4 {
            0 => (0, 0),
            1 => (3, 0),
            2 => (0, 1),
            _ => (2, 1),
        };
        out.push(RandomParams {
            m: 8 + 3 * (i % 5),
            spec: specs[i % 3].clone(),
            n_ineq,
            n_eq,
            box_fraction: if (i / 2) % 2 == 0 { 0.0 } else { 0.4 },
            trace_mode: if (i / 4) % 2 == 0 {
                TraceMode::Equality
            } else {
                TraceMode::UpperBound
            },
            with_vh: (i / 3) % 2 == 1,
        });
    }
    out
}

/// Returns the agreement check and a textual fingerprint of every step.
fn kkt_consistency() -> (Outcome, String) {
    let mut worst = 0.0f64;
    let mut fingerprint = String::new();
    for (i, params) in kkt_variants().iter().enumerate() {
        let mut run = || -> kktprecond::Result<f64> {
            let data = gen_random(params, 500 + i as u64)?;
            let mut rng = ChaCha8Rng::seed_from_u64(900 + i as u64);
            let mu = 10f64.powf(rng.random_range(-6.0..1.0));
            let st = random_interior_state(&mut rng, &data, mu);
            let ctx = build_context(&data, &st)?;
            let rhs_vec = gaussian_vector(&mut rng, data.kkt_order());
            let rhs = KktRhs::from_vector(&data, &rhs_vec)?;
            let dense = dense_solve(&dense_assemble(&ctx, &data)?, &rhs_vec)?;
            let (step, _) = reduce_and_backsolve(&ctx, &data, &st, &rhs, &mut DenseYSolver)?;
            let reduced = step.kkt_vector();
            fingerprint.push_str(&format!("{i}:{:?}\n", reduced.as_slice()));
            Ok(rel_diff(&reduced, &dense))
        };
        match run() {
            Ok(e) => worst = worst.max(e),
            Err(e) => return (outcome(false, format!("instance {i}: {e}")), fingerprint),
        }
    }
    (
        outcome(worst <= 1e-8, format!("max relative difference {worst:.2e} over 20 instances (tol 1e-8)")),
        fingerprint,
    )
}

const SUITE: [(f64, u64); 3] = [(0.1, 0), (0.3, 1), (0.5, 2)];

fn suite_records() -> kktprecond::Result<Vec<RunRecord>> {
    let ipm = IPMConfig {
        mu_min: Some(1e-6),
        ..IPMConfig::default()
    };
    let cfg = ReplayConfig {
        seed: 7,
        ..ReplayConfig::default()
    };
    let mut records = Vec::new();
    for (p, seed) in SUITE {
        let data = gen_maxcut_like(120, p, 10, seed)?;
        let trace = trace_instance(&format!("mc120_p{p}_s{seed}"), data, &ipm)?;
        records.extend(replay(&trace, &cfg));
    }
    Ok(records)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kktprecond::bench::quantile(&v, 0.5)
}

fn dp_efficacy(records: &[RunRecord]) -> Outcome {
    let small: Vec<&RunRecord> = records.iter().filter(|r| r.mu < 0.01).collect();
    let find = |r: &RunRecord, kind: SolverKind| {
        small
            .iter()
            .find(|o| o.instance == r.instance && o.snapshot == r.snapshot && o.solver == kind)
            .copied()
    };
    let mut worse = 0;
    let mut systems = 0;
    let mut dp_cond = Vec::new();
    let mut dp_mv = Vec::new();
    let mut it_mv = Vec::new();
    for r in small.iter().filter(|r| r.solver == SolverKind::DP) {
        systems += 1;
        let it = match find(r, SolverKind::IT) {
            Some(it) => it,
            None => return outcome(false, format!("no IT record for snapshot {}", r.snapshot)),
        };
        match (r.cond_estimate, it.cond_estimate) {
            (Some(a), Some(b)) => {
                if a > b {
                    worse += 1;
                }
                dp_cond.push(a);
            }
            _ => return outcome(false, format!("missing condition estimate at snapshot {}", r.snapshot)),
        }
        dp_mv.push(r.matvecs as f64);
        it_mv.push(it.matvecs as f64);
    }
    if systems == 0 {
        return outcome(false, "no snapshots with mu < 0.01".into());
    }
    let med_cond = median(dp_cond);
    let (med_dp, med_it) = (median(dp_mv), median(it_mv));
    let pass = worse == 0 && med_cond <= 25.0 && med_dp <= 0.5 * med_it;
    outcome(
        pass,
        format!(
            "{systems} systems with mu < 0.01: DP estimate above IT on {worse}; median DP estimate {med_cond:.2} (<= 25); median matvecs DP {med_dp} vs IT {med_it} (ratio {:.3}, <= 0.5)",
            med_dp / med_it
        ),
    )
}

fn solver_agreement(records: &[RunRecord]) -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    let mut count = 0;
    for r in records.iter().filter(|r| r.solver != SolverKind::DS) {
        count += 1;
        let limit = 100.0 * solver_tol(r.mu);
        let ratio = if r.error.is_empty() {
            r.dy_deviation / limit
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if ratio.is_nan() || ratio > 1.0 {
            bad.push(format!(
                "{} #{} {} mu {:.1e} dev {:.2e} status {}",
                r.instance, r.snapshot, r.solver, r.mu, r.dy_deviation, r.status
            ));
        }
    }
    let mut detail = format!("{count} iterative solves, worst deviation/limit {worst:.3}");
    if !bad.is_empty() {
        detail.push_str(&format!("; {} over the limit, first: {}", bad.len(), bad[0]));
    }
    outcome(bad.is_empty(), detail)
}

fn prob_frequency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (p, t, u, trials) = (4usize, 1.5, 1.5, 2000usize);
    let mut violations = 0usize;
    for _ in 0..trials {
        let n = rng.random_range(10..=30);
        let k = rng.random_range(1..=(n - p - 1));
        let mut s: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sigma = DVector::from_vec(s);
        let omega = gaussian_matrix(&mut rng, n, k + p, 1.0);
        let kappa = projected_lambda_max(&sigma, &omega).expect("projected eigenvalue");
        if kappa > prob_bound(&sigma, k, p, t, u) {
            violations += 1;
        }
    }
    let nominal = 2.0 * t.powi(-(p as i32)) + (-u * u / 2.0).exp();
    let se = (nominal * (1.0 - nominal.min(1.0)) / trials as f64).sqrt();
    let rate = violations as f64 / trials as f64;
    outcome(
        rate <= nominal + 3.0 * se,
        format!("violation rate {rate:.4} vs allowed {:.4} (nominal {nominal:.4})", nominal + 3.0 * se),
    )
}

fn report(id: usize, name: &str, start: Instant, o: &Outcome, failures: &mut usize) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    if !o.pass {
        *failures += 1;
    }
    println!(
        "{tag} criterion {id} {name} [{:.1}s]: {}",
        start.elapsed().as_secs_f64(),
        o.detail
    );
}

fn main() -> ExitCode {
    let mut failures = 0;

    let t = Instant::now();
    report(1, "svd-exactness", t, &svd_exactness(), &mut failures);
    let t = Instant::now();
    report(2, "woodbury-oracle", t, &woodbury_oracle(), &mut failures);
    let t = Instant::now();
    report(3, "moment-reproduction", t, &moments(), &mut failures);
    let t = Instant::now();
    report(4, "bound-verification", t, &bound_checks(), &mut failures);

    let t = Instant::now();
    let (c5, fp1) = kkt_consistency();
    report(5, "kkt-consistency", t, &c5, &mut failures);

    let t = Instant::now();
    let first = suite_records();
    let (c6, c7, csv1) = match &first {
        Ok(recs) => (dp_efficacy(recs), solver_agreement(recs), records_to_csv(recs, false).ok()),
        Err(e) => (
            outcome(false, format!("suite failed: {e}")),
            outcome(false, format!("suite failed: {e}")),
            None,
        ),
    };
    report(6, "dp-efficacy", t, &c6, &mut failures);
    report(7, "solver-agreement", t, &c7, &mut failures);

    let t = Instant::now();
    report(8, "probabilistic-bound-frequency", t, &prob_frequency(), &mut failures);

    let t = Instant::now();
    let (_, fp2) = kkt_consistency();
    let csv2 = suite_records().ok().and_then(|r| records_to_csv(&r, false).ok());
    let c9 = match (csv1, csv2) {
        (Some(a), Some(b)) => outcome(
            fp1 == fp2 && a == b,
            format!(
                "kkt steps identical: {}; replay CSV identical: {} ({} bytes)",
                fp1 == fp2,
                a == b,
                a.len()
            ),
        ),
        _ => outcome(false, "suite did not produce records".into()),
    };
    report(9, "determinism", t, &c9, &mut failures);

    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
