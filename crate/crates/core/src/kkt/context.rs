use nalgebra::DVector;

use super::data::{BundleMatrix, IterateState, SubproblemData, TraceMode};
use crate::cones::{build_scaling, cone_inverse, BlockScaling};
use crate::error::{check_len, Error, Result};

/// Coefficient data of one Newton system.
#[derive(Debug, Clone)]
pub struct KKTContext {
    pub d_y: DVector<f64>,
    pub c_y: DVector<f64>,
    /// Zero on equality rows.
    pub d_w: DVector<f64>,
    pub c_w: DVector<f64>,
    pub scaling: BlockScaling,
    /// `B' X 1`, formed once per system.
    pub bt_x_one: DVector<f64>,
    /// Squared `D^{-1}`-norms of the columns of `B'`, one per cone coordinate.
    pub col_norms_sq: DVector<f64>,
    /// `D = D_H + d_y`.
    pub d: DVector<f64>,
    pub eq_rows: Vec<usize>,
    pub ineq_rows: Vec<usize>,
    /// Coefficient `(1 - sqrt(sigma/(zeta eta))) / ||F'1||^2` of the rank-one
    /// square root `I - c f f'`.
    pub rank1_coef: f64,
}

fn interior_gap(name: &str, idx: usize, gap: f64, dual: f64) -> Result<()> {
    if !(gap > 0.0) {
        return Err(Error::NotInterior(format!("{name} slack at index {idx} is {gap:e}")));
    }
    if !(dual > 0.0) {
        return Err(Error::NotInterior(format!("{name} multiplier at index {idx} is {dual:e}")));
    }
    Ok(())
}

/// Diagonal and linear coefficients from a two-sided bound pair; infinite
/// bounds contribute nothing.
fn bound_terms(
    name: &str,
    idx: usize,
    v: f64,
    lo: f64,
    hi: f64,
    s_lo: f64,
    s_hi: f64,
) -> Result<(f64, f64)> {
    let (mut d, mut c) = (0.0, 0.0);
    if lo.is_finite() {
        let gap = v - lo;
        interior_gap(&format!("{name} lower"), idx, gap, s_lo)?;
        d += s_lo / gap;
        c += 1.0 / gap;
    }
    if hi.is_finite() {
        let gap = hi - v;
        interior_gap(&format!("{name} upper"), idx, gap, s_hi)?;
        d += s_hi / gap;
        c -= 1.0 / gap;
    }
    Ok((d, c))
}

pub fn build_context(data: &SubproblemData, st: &IterateState) -> Result<KKTContext> {
    st.check_dims(data)?;
    let m = data.m;
    let ha = data.h_a();
    let mut d_y = DVector::zeros(m);
    let mut c_y = DVector::zeros(m);
    for i in 0..m {
        let (d, c) = bound_terms("y", i, st.y[i], data.y_lo[i], data.y_hi[i], st.s_ylo[i], st.s_yhi[i])?;
        d_y[i] = d;
        c_y[i] = c;
    }
    let mut d_w = DVector::zeros(ha);
    let mut c_w = DVector::zeros(ha);
    let mut eq_rows = Vec::new();
    let mut ineq_rows = Vec::new();
    for i in 0..ha {
        if data.is_eq_row(i) {
            eq_rows.push(i);
            continue;
        }
        ineq_rows.push(i);
        let (d, c) = bound_terms("w", i, st.w[i], data.a_lo[i], data.a_hi[i], st.s_alo[i], st.s_ahi[i])?;
        d_w[i] = d;
        c_w[i] = c;
    }
    let sigma = match data.trace_mode {
        TraceMode::Equality => 0.0,
        TraceMode::UpperBound => {
            if !(st.sigma > 0.0) || !(st.zeta > 0.0) {
                return Err(Error::NotInterior(format!(
                    "trace slack sigma = {:e}, zeta = {:e}",
                    st.sigma, st.zeta
                )));
            }
            st.sigma
        }
    };
    let x = DVector::from_column_slice(&st.x);
    let z = DVector::from_column_slice(&st.z);
    let scaling = build_scaling(&data.spec, &x, &z, st.zeta, sigma)?;
    let bt_x_one = data.bmat.apply_t(&scaling.trace_vec_x);
    let d = &data.d_h + &d_y;
    let col_norms_sq = column_norms_sq(&data.bmat, &d);
    let fnorm2 = scaling.trace_vec_f.norm_squared();
    let rank1_coef = if fnorm2 > 0.0 {
        (1.0 - (scaling.sigma_over_zeta / scaling.eta).sqrt()) / fnorm2
    } else {
        0.0
    };
    Ok(KKTContext {
        d_y,
        c_y,
        d_w,
        c_w,
        scaling,
        bt_x_one,
        col_norms_sq,
        d,
        eq_rows,
        ineq_rows,
        rank1_coef,
    })
}

/// `||(B')_{.,j}||^2_{D^{-1}}` for every cone coordinate `j`.
pub fn column_norms_sq(bmat: &BundleMatrix, d: &DVector<f64>) -> DVector<f64> {
    match bmat {
        BundleMatrix::Dense(b) => DVector::from_fn(b.nrows(), |j, _| {
            b.row(j).iter().zip(d.iter()).map(|(v, di)| v * v / di).sum()
        }),
        BundleMatrix::Oracle(o) => {
            let n = o.nrows();
            DVector::from_fn(n, |j, _| {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                crate::linalg::dinv_norm_sq(&o.apply_t(&e), d)
            })
        }
    }
}

/// Right-hand side blocks of the Newton system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktRhs {
    pub r_y: DVector<f64>,
    pub r_s: DVector<f64>,
    pub r_x: DVector<f64>,
    pub r_zeta: f64,
}

impl KktRhs {
    pub fn to_vector(&self) -> DVector<f64> {
        let (m, ha, nt) = (self.r_y.len(), self.r_s.len(), self.r_x.len());
        let mut v = DVector::zeros(m + ha + nt + 1);
        v.rows_mut(0, m).copy_from(&self.r_y);
        v.rows_mut(m, ha).copy_from(&self.r_s);
        v.rows_mut(m + ha, nt).copy_from(&self.r_x);
        v[m + ha + nt] = self.r_zeta;
        v
    }

    pub fn from_vector(data: &SubproblemData, v: &DVector<f64>) -> Result<Self> {
        let (m, ha, nt) = (data.m, data.h_a(), data.cone_dim());
        check_len("kkt rhs", m + ha + nt + 1, v.len())?;
        Ok(KktRhs {
            r_y: v.rows(0, m).into_owned(),
            r_s: v.rows(m, ha).into_owned(),
            r_x: v.rows(m + ha, nt).into_owned(),
            r_zeta: v[m + ha + nt],
        })
    }

    pub fn zeros(data: &SubproblemData) -> Self {
        KktRhs {
            r_y: DVector::zeros(data.m),
            r_s: DVector::zeros(data.h_a()),
            r_x: DVector::zeros(data.cone_dim()),
            r_zeta: 0.0,
        }
    }
}

/// Product of the full Newton matrix with `(dy, ds, dx, dzeta)`.
pub fn apply_full_kkt(ctx: &KKTContext, data: &SubproblemData, delta: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, ha, nt) = (data.m, data.h_a(), data.cone_dim());
    check_len("apply_full_kkt", m + ha + nt + 1, delta.len())?;
    let dy = delta.rows(0, m).into_owned();
    let ds = delta.rows(m, ha).into_owned();
    let dx = delta.rows(m + ha, nt).into_owned();
    let dzeta = delta[m + ha + nt];
    let mut out = DVector::zeros(delta.len());

    let row1 = data.apply_h(&dy) + ctx.d_y.component_mul(&dy) + data.a.tr_mul(&ds) + data.bmat.apply_t(&dx);
    out.rows_mut(0, m).copy_from(&row1);

    let mut row2 = &data.a * &dy;
    for &i in &ctx.ineq_rows {
        row2[i] -= ds[i] / ctx.d_w[i];
    }
    out.rows_mut(m, ha).copy_from(&row2);

    let one = data.spec.unit();
    let row3 = data.bmat.apply(&dy) - ctx.scaling.apply_scaling_inv(&dx)? - &one * dzeta;
    out.rows_mut(m + ha, nt).copy_from(&row3);

    out[m + ha + nt] = -one.dot(&dx) + ctx.scaling.sigma_over_zeta * dzeta;
    Ok(out)
}

pub fn kkt_rhs(ctx: &KKTContext, data: &SubproblemData, st: &IterateState) -> Result<KktRhs> {
    st.check_dims(data)?;
    let v = st.vecs();
    let mu = st.mu;
    let r_y = -(data.apply_h(&v.y) + data.bmat.apply_t(&v.x) + data.a.tr_mul(&v.s) + &data.b) + &ctx.c_y * mu;
    let mut r_s = -(&data.a * &v.y - &v.w);
    for &i in &ctx.ineq_rows {
        r_s[i] += (v.s[i] + mu * ctx.c_w[i]) / ctx.d_w[i];
    }
    let one = data.spec.unit();
    let x_inv = cone_inverse(&data.spec, &v.x)?;
    let r_x = -(data.bmat.apply(&v.y) + &data.b0 - &one * st.zeta) - x_inv * mu;
    let mut r_zeta = -(data.tau - one.dot(&v.x));
    if data.trace_mode == TraceMode::UpperBound {
        r_zeta += mu / st.zeta;
    }
    Ok(KktRhs { r_y, r_s, r_x, r_zeta })
}

/// `(X - (X1)(X1)'/eta) u` on cone space.
pub(crate) fn apply_rank1_scaling(ctx: &KKTContext, u: &DVector<f64>) -> Result<DVector<f64>> {
    let sc = &ctx.scaling;
    let xu = sc.apply_scaling(u)?;
    let coef = sc.spec.unit().dot(&xu) / sc.eta;
    Ok(xu - &sc.trace_vec_x * coef)
}

/// The Schur complement operator `H~ v`; uses one product with `B` and one
/// with `B'`.
pub fn apply_schur_h(ctx: &KKTContext, data: &SubproblemData, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("apply_schur_h", data.m, v.len())?;
    let mut out = data.apply_h(v) + ctx.d_y.component_mul(v);
    if data.cone_dim() > 0 {
        let bv = data.bmat.apply(v);
        out += data.bmat.apply_t(&apply_rank1_scaling(ctx, &bv)?);
    }
    if data.h_a() > 0 {
        let av = (&data.a * v).component_mul(&ctx.d_w);
        out += data.a.tr_mul(&av);
    }
    Ok(out)
}

/// Number of columns of the Gram factor `V = [V_H | A'D_w^{1/2} | B'F(I - c f f')]`.
pub fn v_cols(data: &SubproblemData) -> usize {
    data.v_h.ncols() + data.h_a() + data.cone_dim()
}

/// `(I - c f f') u` with the rank-one coefficient of the context.
fn rank1_sqrt(ctx: &KKTContext, u: &DVector<f64>) -> DVector<f64> {
    let f = &ctx.scaling.trace_vec_f;
    u - f * (ctx.rank1_coef * f.dot(u))
}

pub fn apply_v(ctx: &KKTContext, data: &SubproblemData, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("apply_v", v_cols(data), u.len())?;
    let (hh, ha, nt) = (data.v_h.ncols(), data.h_a(), data.cone_dim());
    let mut out = DVector::zeros(data.m);
    if hh > 0 {
        out += &data.v_h * u.rows(0, hh);
    }
    if ha > 0 {
        let ua = u.rows(hh, ha).component_mul(&ctx.d_w.map(f64::sqrt));
        out += data.a.tr_mul(&ua);
    }
    if nt > 0 {
        let ub = u.rows(hh + ha, nt).into_owned();
        let fu = ctx.scaling.apply_factor(&rank1_sqrt(ctx, &ub))?;
        out += data.bmat.apply_t(&fu);
    }
    Ok(out)
}

pub fn apply_vt(ctx: &KKTContext, data: &SubproblemData, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("apply_vt", data.m, v.len())?;
    let (hh, ha, nt) = (data.v_h.ncols(), data.h_a(), data.cone_dim());
    let mut out = DVector::zeros(hh + ha + nt);
    if hh > 0 {
        out.rows_mut(0, hh).copy_from(&data.v_h.tr_mul(v));
    }
    if ha > 0 {
        let av = (&data.a * v).component_mul(&ctx.d_w.map(f64::sqrt));
        out.rows_mut(hh, ha).copy_from(&av);
    }
    if nt > 0 {
        let ftb = ctx.scaling.apply_factor_t(&data.bmat.apply(v))?;
        out.rows_mut(hh + ha, nt).copy_from(&rank1_sqrt(ctx, &ftb));
    }
    Ok(out)
}
