use nalgebra::{DMatrix, DVector};

use super::context::{apply_rank1_scaling, apply_schur_h, KKTContext, KktRhs};
use super::data::{IterateState, SubproblemData, TraceMode};
use crate::cones::cone_inverse;
use crate::directsolve::ldlt::Ldlt;
use crate::error::{check_len, Error, Result};
use crate::krylov::SolveReport;

/// Complete Newton direction, including the eliminated variables.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub dy: DVector<f64>,
    pub ds: DVector<f64>,
    pub dx: DVector<f64>,
    pub dzeta: f64,
    pub dw: DVector<f64>,
    pub dz: DVector<f64>,
    pub dsigma: f64,
    pub ds_alo: DVector<f64>,
    pub ds_ahi: DVector<f64>,
    pub ds_ylo: DVector<f64>,
    pub ds_yhi: DVector<f64>,
}

impl NewtonStep {
    /// The `(dy, ds, dx, dzeta)` part that solves the Newton system.
    pub fn kkt_vector(&self) -> DVector<f64> {
        KktRhs {
            r_y: self.dy.clone(),
            r_s: self.ds.clone(),
            r_x: self.dx.clone(),
            r_zeta: self.dzeta,
        }
        .to_vector()
    }
}

/// Solution of the reduced system `[H~ A_E'; A_E 0] (dy, ds_E) = (r, r_E)`.
#[derive(Debug, Clone)]
pub struct YSolution {
    pub dy: DVector<f64>,
    pub ds_eq: DVector<f64>,
    pub report: Option<SolveReport>,
}

/// Solver for the reduced system in `dy` (augmented by the equality rows
/// of `A` when there are any).
pub trait YSolver {
    fn solve(
        &mut self,
        ctx: &KKTContext,
        data: &SubproblemData,
        rhs_y: &DVector<f64>,
        rhs_eq: &DVector<f64>,
    ) -> Result<YSolution>;
}

/// Dense Schur complement assembled by probing `H~` with unit vectors.
pub fn dense_schur(ctx: &KKTContext, data: &SubproblemData) -> Result<DMatrix<f64>> {
    let m = data.m;
    let mut h = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut e = DVector::zeros(m);
        e[j] = 1.0;
        h.set_column(j, &apply_schur_h(ctx, data, &e)?);
    }
    crate::linalg::symmetrize(&mut h);
    Ok(h)
}

/// Reduced system matrix including equality rows.
pub fn dense_reduced(ctx: &KKTContext, data: &SubproblemData) -> Result<DMatrix<f64>> {
    let m = data.m;
    let ne = ctx.eq_rows.len();
    let h = dense_schur(ctx, data)?;
    let mut k = DMatrix::zeros(m + ne, m + ne);
    k.view_mut((0, 0), (m, m)).copy_from(&h);
    for (r, &i) in ctx.eq_rows.iter().enumerate() {
        for j in 0..m {
            k[(m + r, j)] = data.a[(i, j)];
            k[(j, m + r)] = data.a[(i, j)];
        }
    }
    Ok(k)
}

/// Exact dense solve of the reduced system.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseYSolver;

impl YSolver for DenseYSolver {
    fn solve(
        &mut self,
        ctx: &KKTContext,
        data: &SubproblemData,
        rhs_y: &DVector<f64>,
        rhs_eq: &DVector<f64>,
    ) -> Result<YSolution> {
        let m = data.m;
        let ne = ctx.eq_rows.len();
        if ne == 0 {
            let h = dense_schur(ctx, data)?;
            let chol = h.cholesky().ok_or(Error::NotPositiveDefinite {
                name: "Schur complement",
                min_eig: f64::NAN,
                max_eig: f64::NAN,
            })?;
            return Ok(YSolution {
                dy: chol.solve(rhs_y),
                ds_eq: DVector::zeros(0),
                report: None,
            });
        }
        let k = dense_reduced(ctx, data)?;
        let mut rhs = DVector::zeros(m + ne);
        rhs.rows_mut(0, m).copy_from(rhs_y);
        rhs.rows_mut(m, ne).copy_from(rhs_eq);
        let sol = Ldlt::factor(&k)?.solve_refined(&k, &rhs);
        Ok(YSolution {
            dy: sol.rows(0, m).into_owned(),
            ds_eq: sol.rows(m, ne).into_owned(),
            report: None,
        })
    }
}

/// Right-hand side of the reduced system: `(r~, r_s restricted to equality rows)`.
pub fn reduced_rhs(ctx: &KKTContext, data: &SubproblemData, rhs: &KktRhs) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("reduced_rhs r_y", data.m, rhs.r_y.len())?;
    check_len("reduced_rhs r_s", data.h_a(), rhs.r_s.len())?;
    check_len("reduced_rhs r_x", data.cone_dim(), rhs.r_x.len())?;
    let sc = &ctx.scaling;
    let mut r = rhs.r_y.clone();
    if data.cone_dim() > 0 {
        // <X1, r_x> taken as <1, X r_x> so the rank-one projection removes
        // the rounding of X r_x along X1 as well
        let xr = sc.apply_scaling(&rhs.r_x)?;
        let coef = (rhs.r_zeta - data.spec.unit().dot(&xr)) / sc.eta;
        let u = xr + &sc.trace_vec_x * coef;
        r += data.bmat.apply_t(&u);
    }
    if !ctx.ineq_rows.is_empty() {
        let mut t = DVector::zeros(data.h_a());
        for &i in &ctx.ineq_rows {
            t[i] = ctx.d_w[i] * rhs.r_s[i];
        }
        r += data.a.tr_mul(&t);
    }
    let r_eq = DVector::from_iterator(ctx.eq_rows.len(), ctx.eq_rows.iter().map(|&i| rhs.r_s[i]));
    Ok((r, r_eq))
}

/// Eliminates `dx`, `dzeta` and the inequality part of `ds`, solves for `dy`
/// with `y_solver`, and recovers every other component of the step.
pub fn reduce_and_backsolve(
    ctx: &KKTContext,
    data: &SubproblemData,
    st: &IterateState,
    rhs: &KktRhs,
    y_solver: &mut dyn YSolver,
) -> Result<(NewtonStep, Option<SolveReport>)> {
    let (r, r_eq) = reduced_rhs(ctx, data, rhs)?;
    let sol = y_solver.solve(ctx, data, &r, &r_eq)?;
    check_len("y solver output", data.m, sol.dy.len())?;
    check_len("y solver equality output", ctx.eq_rows.len(), sol.ds_eq.len())?;
    let dy = sol.dy;

    let mut ds = DVector::zeros(data.h_a());
    if data.h_a() > 0 {
        let ady = &data.a * &dy;
        for &i in &ctx.ineq_rows {
            ds[i] = ctx.d_w[i] * (ady[i] - rhs.r_s[i]);
        }
        for (k, &i) in ctx.eq_rows.iter().enumerate() {
            ds[i] = sol.ds_eq[k];
        }
    }
    let sc = &ctx.scaling;
    let (dx, dzeta) = if data.cone_dim() > 0 {
        let t = data.bmat.apply(&dy) - &rhs.r_x;
        let xt = sc.apply_scaling(&t)?;
        let dzeta = (rhs.r_zeta + data.spec.unit().dot(&xt)) / sc.eta;
        let dx = xt - &sc.trace_vec_x * dzeta;
        (dx, dzeta)
    } else {
        (DVector::zeros(0), rhs.r_zeta / sc.eta)
    };
    let step = complete_step(ctx, data, st, dy, ds, dx, dzeta)?;
    Ok((step, sol.report))
}

/// Recovers `dw`, `dz`, `dsigma` and the bound multiplier steps from the
/// Newton system solution `(dy, ds, dx, dzeta)`.
pub fn complete_step(
    ctx: &KKTContext,
    data: &SubproblemData,
    st: &IterateState,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dx: DVector<f64>,
    dzeta: f64,
) -> Result<NewtonStep> {
    let v = st.vecs();
    let mu = st.mu;
    let ha = data.h_a();
    let mut dw = DVector::zeros(ha);
    let mut ds_alo = DVector::zeros(ha);
    let mut ds_ahi = DVector::zeros(ha);
    for &i in &ctx.ineq_rows {
        dw[i] = (ds[i] + v.s[i] + mu * ctx.c_w[i]) / ctx.d_w[i];
        if data.a_lo[i].is_finite() {
            let gap = v.w[i] - data.a_lo[i];
            ds_alo[i] = mu / gap - v.s_alo[i] - dw[i] * v.s_alo[i] / gap;
        }
        if data.a_hi[i].is_finite() {
            let gap = data.a_hi[i] - v.w[i];
            ds_ahi[i] = mu / gap - v.s_ahi[i] + dw[i] * v.s_ahi[i] / gap;
        }
    }
    let m = data.m;
    let mut ds_ylo = DVector::zeros(m);
    let mut ds_yhi = DVector::zeros(m);
    for i in 0..m {
        if data.y_lo[i].is_finite() {
            let gap = v.y[i] - data.y_lo[i];
            ds_ylo[i] = mu / gap - v.s_ylo[i] - dy[i] * v.s_ylo[i] / gap;
        }
        if data.y_hi[i].is_finite() {
            let gap = data.y_hi[i] - v.y[i];
            ds_yhi[i] = mu / gap - v.s_yhi[i] + dy[i] * v.s_yhi[i] / gap;
        }
    }
    let dz = if data.cone_dim() > 0 {
        -ctx.scaling.apply_scaling_inv(&dx)? + cone_inverse(&data.spec, &v.x)? * mu - &v.z
    } else {
        DVector::zeros(0)
    };
    let dsigma = match data.trace_mode {
        TraceMode::Equality => 0.0,
        TraceMode::UpperBound => -ctx.scaling.sigma_over_zeta * dzeta + mu / st.zeta - st.sigma,
    };
    Ok(NewtonStep {
        dy,
        ds,
        dx,
        dzeta,
        dw,
        dz,
        dsigma,
        ds_alo,
        ds_ahi,
        ds_ylo,
        ds_yhi,
    })
}

/// `(X - (X1)(X1)'/eta)` applied on cone space; exposed for dense oracles.
pub fn apply_cone_schur(ctx: &KKTContext, u: &DVector<f64>) -> Result<DVector<f64>> {
    apply_rank1_scaling(ctx, u)
}
