use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace_io::Trace;
use crate::directsolve::{dense_assemble, dense_solve};
use crate::error::{Error, Result};
use crate::ipm::solver_tol;
use crate::kkt::{
    apply_schur_h, apply_v, build_context, reduce_and_backsolve, v_cols, KKTContext, KktRhs, SubproblemData,
    YSolution, YSolver,
};
use crate::krylov::{lanczos_cond_estimate, minres, FnOperator, LinearOperator, MinresConfig, SolveReport};
use crate::linalg::rel_diff;
use crate::precond::{
    deterministic_subspace, precond_setup, random_subspace, termination_factor, DeterministicConfig, LowRankPrecond,
    SelectionState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    /// Dense factorization of the full Newton system.
    DS,
    /// MINRES without preconditioner.
    IT,
    /// MINRES with the randomized subspace preconditioner.
    RP,
    /// MINRES with the deterministic subspace preconditioner.
    DP,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::DS, SolverKind::IT, SolverKind::RP, SolverKind::DP];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::DS => "DS",
            SolverKind::IT => "IT",
            SolverKind::RP => "RP",
            SolverKind::DP => "DP",
        }
    }

    /// Parses a comma separated list such as `DS,IT,RP,DP`.
    pub fn parse_list(s: &str) -> Result<Vec<SolverKind>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DS" => Ok(SolverKind::DS),
            "IT" => Ok(SolverKind::IT),
            "RP" => Ok(SolverKind::RP),
            "DP" => Ok(SolverKind::DP),
            other => Err(Error::Contract(format!("unknown solver '{other}' (expected DS, IT, RP or DP)"))),
        }
    }
}

/// MINRES on the reduced system. Without equality rows this is `H~ dy = r`;
/// with them the augmented `[H~ A_E'; A_E 0]`, preconditioned by the
/// `H~`-preconditioner on the first block and the identity on the rest.
pub struct MinresYSolver<'a> {
    pub precond: Option<&'a LowRankPrecond>,
    pub rel_tol: f64,
    pub safeguard: f64,
    pub maxit: Option<usize>,
    /// Lanczos steps for the condition estimate; `None` skips it.
    pub cond_iters: Option<usize>,
}

struct BlockPrecond<'a> {
    m: usize,
    ne: usize,
    inner: Option<&'a LowRankPrecond>,
}

impl LinearOperator for BlockPrecond<'_> {
    fn dim(&self) -> usize {
        self.m + self.ne
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let Some(p) = self.inner else {
            return Ok(v.clone());
        };
        if self.ne == 0 {
            return p.apply(v);
        }
        let mut out = v.clone();
        out.rows_mut(0, self.m).copy_from(&p.apply(&v.rows(0, self.m).into_owned())?);
        Ok(out)
    }
}

/// `[H~ A_E'; A_E 0]`, or just `H~` when `ae` has no rows.
fn reduced_operator<'a>(
    ctx: &'a KKTContext,
    data: &'a SubproblemData,
    ae: &'a DMatrix<f64>,
) -> impl LinearOperator + 'a {
    let m = data.m;
    let ne = ae.nrows();
    FnOperator::new(m + ne, move |v: &DVector<f64>| {
        if ne == 0 {
            return apply_schur_h(ctx, data, v);
        }
        let v1 = v.rows(0, m).into_owned();
        let mut out = DVector::zeros(m + ne);
        out.rows_mut(0, m).copy_from(&(apply_schur_h(ctx, data, &v1)? + ae.tr_mul(&v.rows(m, ne))));
        out.rows_mut(m, ne).copy_from(&(ae * &v1));
        Ok(out)
    })
}

impl YSolver for MinresYSolver<'_> {
    fn solve(
        &mut self,
        ctx: &KKTContext,
        data: &SubproblemData,
        rhs_y: &DVector<f64>,
        rhs_eq: &DVector<f64>,
    ) -> Result<YSolution> {
        let m = data.m;
        let ne = ctx.eq_rows.len();
        let ae = data.a.select_rows(ctx.eq_rows.iter());
        let op = reduced_operator(ctx, data, &ae);
        let pc = BlockPrecond {
            m,
            ne,
            inner: self.precond,
        };
        let mut b = DVector::zeros(m + ne);
        b.rows_mut(0, m).copy_from(rhs_y);
        b.rows_mut(m, ne).copy_from(rhs_eq);
        let cfg = MinresConfig {
            rel_tol: self.rel_tol,
            safeguard: self.safeguard,
            maxit: self.maxit,
        };
        let (x, mut report) = minres(&op, &pc, &b, &cfg)?;
        report.precond_columns = self.precond.map_or(0, |p| p.khat());
        if let Some(iters) = self.cond_iters {
            report.cond_estimate = Some(cond_estimate(ctx, data, self.precond, iters)?);
        }
        Ok(YSolution {
            dy: x.rows(0, m).into_owned(),
            ds_eq: x.rows(m, ne).into_owned(),
            report: Some(report),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub solvers: Vec<SolverKind>,
    /// Seed of the Gaussian sketches of the randomized preconditioner.
    pub seed: u64,
    /// Lanczos steps for condition estimates; `Some(0)` means
    /// `min(N, 100)`, `None` disables the estimate.
    pub cond_iters: Option<usize>,
    pub deterministic: DeterministicConfig,
    /// MINRES iteration cap; `None` means `5 N`.
    pub maxit: Option<usize>,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            solvers: SolverKind::ALL.to_vec(),
            seed: 0,
            cond_iters: Some(0),
            deterministic: DeterministicConfig::default(),
            maxit: None,
        }
    }
}

/// Outcome of one solver on one Newton system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub snapshot: usize,
    pub mu: f64,
    pub solver: SolverKind,
    /// Dimension of the cone, the size of the cutting model.
    pub bundle_size: usize,
    pub status: String,
    pub iterations: usize,
    pub matvecs: usize,
    pub precond_residual: f64,
    pub true_residual: f64,
    pub cond_estimate: Option<f64>,
    pub precond_columns: usize,
    /// `||dy - dy_DS|| / ||dy_DS||`.
    pub dy_deviation: f64,
    pub tolerance: f64,
    pub safeguard: f64,
    pub wall_seconds: f64,
    pub error: String,
}

impl RunRecord {
    fn new(trace: &Trace, snapshot: usize, mu: f64, solver: SolverKind) -> Self {
        RunRecord {
            instance: trace.id.clone(),
            snapshot,
            mu,
            solver,
            bundle_size: trace.data.cone_dim(),
            status: String::new(),
            iterations: 0,
            matvecs: 0,
            precond_residual: 0.0,
            true_residual: 0.0,
            cond_estimate: None,
            precond_columns: 0,
            dy_deviation: 0.0,
            tolerance: solver_tol(mu),
            safeguard: 1.0,
            wall_seconds: 0.0,
            error: String::new(),
        }
    }

    fn fill(&mut self, rep: &SolveReport) {
        self.status = rep.status.as_str().to_string();
        self.iterations = rep.iterations;
        self.matvecs = rep.matvecs;
        self.precond_residual = rep.precond_residual;
        self.true_residual = rep.true_residual;
        self.cond_estimate = rep.cond_estimate;
        self.precond_columns = rep.precond_columns;
    }
}

fn solve_direct(trace: &Trace, idx: usize, rec: &mut RunRecord) -> Result<()> {
    let snap = &trace.snapshots[idx];
    let data = &trace.data;
    let start = Instant::now();
    let ctx = build_context(data, &snap.state)?;
    let rhs = DVector::from_column_slice(&snap.rhs);
    let k = dense_assemble(&ctx, data)?;
    let sol = dense_solve(&k, &rhs)?;
    rec.wall_seconds = start.elapsed().as_secs_f64();
    rec.status = "CONVERGED".into();
    let rnorm = rhs.norm();
    rec.true_residual = if rnorm > 0.0 {
        (&k.matrix * &sol - &rhs).norm() / rnorm
    } else {
        0.0
    };
    Ok(())
}

fn solve_iterative(
    trace: &Trace,
    idx: usize,
    kind: SolverKind,
    cfg: &ReplayConfig,
    rp_state: &mut SelectionState,
    rng: &mut ChaCha8Rng,
    rec: &mut RunRecord,
) -> Result<()> {
    let snap = &trace.snapshots[idx];
    let data = &trace.data;
    let start = Instant::now();
    let ctx = build_context(data, &snap.state)?;
    let rhs = KktRhs::from_vector(data, &DVector::from_column_slice(&snap.rhs))?;
    let precond = match kind {
        SolverKind::IT => None,
        SolverKind::RP => {
            let vhat = random_subspace(v_cols(data), &ctx.d, |u| apply_v(&ctx, data, u), rp_state, rng)?;
            Some(precond_setup(&ctx.d, &vhat)?)
        }
        SolverKind::DP => {
            let vhat = deterministic_subspace(&ctx, data, &cfg.deterministic)?;
            Some(precond_setup(&ctx.d, &vhat)?)
        }
        SolverKind::DS => unreachable!("direct solver handled separately"),
    };
    let safeguard = precond.as_ref().map_or(1.0, |p| termination_factor(p, data.m));
    let mut ys = MinresYSolver {
        precond: precond.as_ref(),
        rel_tol: rec.tolerance,
        safeguard,
        maxit: cfg.maxit,
        cond_iters: None,
    };
    let (step, report) = reduce_and_backsolve(&ctx, data, &snap.state, &rhs, &mut ys)?;
    rec.wall_seconds = start.elapsed().as_secs_f64();
    let mut report = report.ok_or_else(|| Error::Solver("MINRES returned no report".into()))?;
    rec.safeguard = safeguard;
    if kind == SolverKind::RP {
        rp_state.record_solve(report.matvecs, report.precond_columns);
    }
    if let Some(iters) = cfg.cond_iters {
        let n = data.m + ctx.eq_rows.len();
        let iters = if iters == 0 { n.min(100) } else { iters };
        report.cond_estimate = Some(cond_estimate(&ctx, data, precond.as_ref(), iters)?);
    }
    rec.fill(&report);
    rec.dy_deviation = rel_diff(&step.dy, &snap.dy(data.m));
    Ok(())
}

/// Lanczos condition estimate of the preconditioned reduced system.
pub fn cond_estimate(
    ctx: &KKTContext,
    data: &SubproblemData,
    precond: Option<&LowRankPrecond>,
    iters: usize,
) -> Result<f64> {
    let m = data.m;
    let ne = ctx.eq_rows.len();
    let ae = data.a.select_rows(ctx.eq_rows.iter());
    let op = reduced_operator(ctx, data, &ae);
    let pc = BlockPrecond { m, ne, inner: precond };
    lanczos_cond_estimate(&op, &pc, Some(iters))
}

/// Solves every snapshot of `trace` with every requested solver, in
/// snapshot order. The randomized preconditioner keeps its selection state
/// across the snapshots of the trace; the deterministic one is rebuilt for
/// each system. Solver failures are recorded, not returned.
pub fn replay(trace: &Trace, cfg: &ReplayConfig) -> Vec<RunRecord> {
    let mut rp_state = SelectionState::new(v_cols(&trace.data));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(trace.snapshots.len() * cfg.solvers.len());
    for (idx, snap) in trace.snapshots.iter().enumerate() {
        for &kind in &cfg.solvers {
            let mut rec = RunRecord::new(trace, snap.index, snap.mu, kind);
            let res = match kind {
                SolverKind::DS => solve_direct(trace, idx, &mut rec),
                _ => solve_iterative(trace, idx, kind, cfg, &mut rp_state, &mut rng, &mut rec),
            };
            if let Err(e) = res {
                rec.status = "ERROR".into();
                rec.error = e.to_string();
            }
            out.push(rec);
        }
    }
    out
}
