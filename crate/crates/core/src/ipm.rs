//! A minimal primal-dual path-following loop for one bundle subproblem. It
//! takes one centering Newton step per barrier value and records every
//! Newton system together with its direct solution, so the sequence can be
//! replayed by the iterative solvers.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cones::{cone_trace, max_step};
use crate::directsolve::{dense_assemble, dense_solve};
use crate::error::{Error, Result};
use crate::kkt::{
    build_context, complete_step, kkt_rhs, reduce_and_backsolve, DenseYSolver, IterateState, KktRhs, NewtonStep,
    SubproblemData, TraceMode,
};

/// Relative precision requested from iterative solvers at barrier value `mu`.
pub fn solver_tol(mu: f64) -> f64 {
    (0.01 * mu).min(1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IPMConfig {
    /// Target barrier value is this factor times the complementarity average.
    pub mu_reduction: f64,
    /// Fraction of the step to the boundary that is taken.
    pub step_fraction: f64,
    /// Stop once the barrier value drops to this level; `None` means
    /// `1e-8 mu_0`.
    pub mu_min: Option<f64>,
    pub max_newton: usize,
}

impl Default for IPMConfig {
    fn default() -> Self {
        IPMConfig {
            mu_reduction: 0.2,
            step_fraction: 0.95,
            mu_min: None,
            max_newton: 200,
        }
    }
}

impl IPMConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.mu_reduction) || !open_unit(self.step_fraction) {
            return Err(Error::Contract(format!(
                "mu_reduction {} and step_fraction {} must lie in (0, 1)",
                self.mu_reduction, self.step_fraction
            )));
        }
        if let Some(v) = self.mu_min {
            if !(v > 0.0) {
                return Err(Error::Contract(format!("mu_min must be positive, got {v}")));
            }
        }
        if self.max_newton == 0 {
            return Err(Error::Contract("max_newton must be positive".into()));
        }
        Ok(())
    }
}

/// Which route computes the step that is actually taken. The direct
/// solution of the full system is recorded in either case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSolver {
    /// Factor the full Newton system.
    #[default]
    Direct,
    /// Reduce to `y` and solve the Schur complement densely.
    Reduced,
}

/// One Newton system of the trace. The state carries the target barrier
/// value in `mu`, so `kkt_rhs(build_context(data, state), data, state)`
/// reproduces `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KKTSnapshot {
    pub index: usize,
    pub mu: f64,
    pub state: IterateState,
    /// `(r_y, r_s, r_x, r_zeta)` stacked.
    pub rhs: Vec<f64>,
    /// Direct solution `(dy, ds, dx, dzeta)` of the full system.
    pub solution: Vec<f64>,
    /// `||K sol - rhs|| / ||rhs||` of the direct solution.
    pub residual: f64,
}

impl KKTSnapshot {
    pub fn dy(&self, m: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.solution[..m])
    }
}

/// Sum and number of the complementarity products of the state.
pub fn complementarity(data: &SubproblemData, st: &IterateState) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = data.spec.rank();
    sum += st.x.iter().zip(&st.z).map(|(a, b)| a * b).sum::<f64>();
    for i in 0..data.m {
        if data.y_lo[i].is_finite() {
            sum += st.s_ylo[i] * (st.y[i] - data.y_lo[i]);
            count += 1;
        }
        if data.y_hi[i].is_finite() {
            sum += st.s_yhi[i] * (data.y_hi[i] - st.y[i]);
            count += 1;
        }
    }
    for i in 0..data.h_a() {
        if data.is_eq_row(i) {
            continue;
        }
        if data.a_lo[i].is_finite() {
            sum += st.s_alo[i] * (st.w[i] - data.a_lo[i]);
            count += 1;
        }
        if data.a_hi[i].is_finite() {
            sum += st.s_ahi[i] * (data.a_hi[i] - st.w[i]);
            count += 1;
        }
    }
    if data.trace_mode == TraceMode::UpperBound {
        sum += st.sigma * st.zeta;
        count += 1;
    }
    (sum, count)
}

pub fn complementarity_avg(data: &SubproblemData, st: &IterateState) -> f64 {
    let (sum, count) = complementarity(data, st);
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Point strictly inside `(lo, hi)`: the midpoint when both ends are
/// finite, otherwise `v` pushed at least one unit away from the finite end.
fn inside(v: f64, lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => v.max(lo + 1.0),
        (false, true) => v.min(hi - 1.0),
        (false, false) => v,
    }
}

/// Strictly interior starting point with all complementarity products equal.
///
/// `x` is a multiple `c` of the trace vector with `tr x = tau/2` in upper
/// bound mode and `tr x = tau` otherwise; `z` is a multiple of the trace
/// vector large enough to dominate `B0 + By`; every bound multiplier is set
/// so that its product with the slack equals `mu_0 = c * scale(z)`.
pub fn ipm_initialize(data: &SubproblemData) -> Result<IterateState> {
    data.validate()?;
    let m = data.m;
    let ha = data.h_a();
    let y: Vec<f64> = (0..m).map(|i| inside(0.0, data.y_lo[i], data.y_hi[i])).collect();
    let yv = DVector::from_column_slice(&y);
    let ay = &data.a * &yv;
    let w: Vec<f64> = (0..ha)
        .map(|i| {
            if data.is_eq_row(i) {
                data.a_lo[i]
            } else {
                inside(ay[i], data.a_lo[i], data.a_hi[i])
            }
        })
        .collect();

    let rank = data.spec.rank();
    let unit = data.spec.unit();
    let share = match data.trace_mode {
        TraceMode::UpperBound => 0.5 * data.tau,
        TraceMode::Equality => data.tau,
    };
    let c = if rank > 0 { share / rank as f64 } else { 1.0 };
    let x = &unit * c;
    let zscale = if data.cone_dim() > 0 {
        (data.bmat.apply(&yv) + &data.b0).amax().max(1.0)
    } else {
        1.0
    };
    let z = &unit * zscale;
    let mu0 = c * zscale;
    let (sigma, zeta) = match data.trace_mode {
        TraceMode::UpperBound => {
            let sigma = data.tau - cone_trace(&data.spec, &x)?;
            (sigma, mu0 / sigma)
        }
        TraceMode::Equality => (0.0, 1.0),
    };

    let dual = |gap: f64| mu0 / gap;
    let mut s_ylo = vec![0.0; m];
    let mut s_yhi = vec![0.0; m];
    for i in 0..m {
        if data.y_lo[i].is_finite() {
            s_ylo[i] = dual(y[i] - data.y_lo[i]);
        }
        if data.y_hi[i].is_finite() {
            s_yhi[i] = dual(data.y_hi[i] - y[i]);
        }
    }
    let mut s_alo = vec![0.0; ha];
    let mut s_ahi = vec![0.0; ha];
    for i in 0..ha {
        if data.is_eq_row(i) {
            continue;
        }
        if data.a_lo[i].is_finite() {
            s_alo[i] = dual(w[i] - data.a_lo[i]);
        }
        if data.a_hi[i].is_finite() {
            s_ahi[i] = dual(data.a_hi[i] - w[i]);
        }
    }
    Ok(IterateState {
        y,
        w,
        x: x.iter().copied().collect(),
        sigma,
        s: vec![0.0; ha],
        z: z.iter().copied().collect(),
        zeta,
        s_alo,
        s_ahi,
        s_ylo,
        s_yhi,
        mu: mu0,
    })
}

/// Largest step in `[0, 1]` keeping every slack and multiplier nonnegative.
fn max_step_to_boundary(data: &SubproblemData, st: &IterateState, d: &NewtonStep) -> Result<f64> {
    let mut a: f64 = 1.0;
    let mut pos = |v: f64, dv: f64| {
        if dv < 0.0 {
            a = a.min(-v / dv);
        }
    };
    for i in 0..data.m {
        if data.y_lo[i].is_finite() {
            pos(st.y[i] - data.y_lo[i], d.dy[i]);
            pos(st.s_ylo[i], d.ds_ylo[i]);
        }
        if data.y_hi[i].is_finite() {
            pos(data.y_hi[i] - st.y[i], -d.dy[i]);
            pos(st.s_yhi[i], d.ds_yhi[i]);
        }
    }
    for i in 0..data.h_a() {
        if data.is_eq_row(i) {
            continue;
        }
        if data.a_lo[i].is_finite() {
            pos(st.w[i] - data.a_lo[i], d.dw[i]);
            pos(st.s_alo[i], d.ds_alo[i]);
        }
        if data.a_hi[i].is_finite() {
            pos(data.a_hi[i] - st.w[i], -d.dw[i]);
            pos(st.s_ahi[i], d.ds_ahi[i]);
        }
    }
    if data.trace_mode == TraceMode::UpperBound {
        pos(st.sigma, d.dsigma);
        pos(st.zeta, d.dzeta);
    }
    if data.cone_dim() > 0 {
        let x = DVector::from_column_slice(&st.x);
        let z = DVector::from_column_slice(&st.z);
        a = a.min(max_step(&data.spec, &x, &d.dx, 1.0)?);
        a = a.min(max_step(&data.spec, &z, &d.dz, 1.0)?);
    }
    Ok(a)
}

fn axpy(v: &mut [f64], a: f64, d: &DVector<f64>) {
    for (vi, di) in v.iter_mut().zip(d.iter()) {
        *vi += a * di;
    }
}

fn take_step(st: &mut IterateState, a: f64, d: &NewtonStep) {
    axpy(&mut st.y, a, &d.dy);
    axpy(&mut st.w, a, &d.dw);
    axpy(&mut st.x, a, &d.dx);
    axpy(&mut st.s, a, &d.ds);
    axpy(&mut st.z, a, &d.dz);
    axpy(&mut st.s_alo, a, &d.ds_alo);
    axpy(&mut st.s_ahi, a, &d.ds_ahi);
    axpy(&mut st.s_ylo, a, &d.ds_ylo);
    axpy(&mut st.s_yhi, a, &d.ds_yhi);
    st.sigma += a * d.dsigma;
    st.zeta += a * d.dzeta;
}

/// Runs centering steps from [`ipm_initialize`] until the barrier value
/// reaches `mu_min` or `max_newton` steps were taken. Returns every Newton
/// system that was solved and the final iterate.
pub fn ipm_run(
    data: &SubproblemData,
    cfg: &IPMConfig,
    step_solver: StepSolver,
) -> Result<(Vec<KKTSnapshot>, IterateState)> {
    cfg.validate()?;
    let mut st = ipm_initialize(data)?;
    let mu0 = complementarity_avg(data, &st);
    let mu_min = cfg.mu_min.unwrap_or(1e-8 * mu0);
    let (m, ha, nt) = (data.m, data.h_a(), data.cone_dim());
    let mut snaps = Vec::new();
    let mut mu_prev = f64::INFINITY;
    for iter in 0..cfg.max_newton {
        let avg = complementarity_avg(data, &st);
        if avg <= mu_min && mu_prev <= mu_min {
            break;
        }
        let mut mu = cfg.mu_reduction * avg;
        if mu >= mu_prev {
            // keep the barrier sequence strictly decreasing
            mu = mu_prev * (1.0 - cfg.mu_reduction);
        }
        st.mu = mu;
        let ctx = build_context(data, &st)?;
        let rhs = kkt_rhs(&ctx, data, &st)?;
        let rv = rhs.to_vector();
        let k = dense_assemble(&ctx, data)?;
        let sol = dense_solve(&k, &rv)?;
        let rnorm = rv.norm();
        let residual = if rnorm > 0.0 {
            (&k.matrix * &sol - &rv).norm() / rnorm
        } else {
            0.0
        };
        let step = match step_solver {
            StepSolver::Direct => {
                let parts = KktRhs::from_vector(data, &sol)?;
                complete_step(&ctx, data, &st, parts.r_y, parts.r_s, parts.r_x, parts.r_zeta)?
            }
            StepSolver::Reduced => reduce_and_backsolve(&ctx, data, &st, &rhs, &mut DenseYSolver)?.0,
        };
        debug_assert_eq!(sol.len(), m + ha + nt + 1);
        snaps.push(KKTSnapshot {
            index: iter,
            mu,
            state: st.clone(),
            rhs: rv.iter().copied().collect(),
            solution: sol.iter().copied().collect(),
            residual,
        });
        let amax = max_step_to_boundary(data, &st, &step)?;
        let a = (cfg.step_fraction * amax).min(1.0);
        if a < 1e-10 {
            return Err(Error::StepCollapse { iter, step: a, mu });
        }
        take_step(&mut st, a, &step);
        mu_prev = mu;
        if mu <= mu_min {
            break;
        }
    }
    st.mu = mu_prev.min(st.mu);
    Ok((snaps, st))
}
