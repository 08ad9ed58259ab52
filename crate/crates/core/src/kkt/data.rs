use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::ConeSpec;
use crate::error::{check_len, Error, Result};

/// Matrix-vector oracle for the bundle matrix `B` (rows indexed by cone
/// coordinates, columns by the design variables).
pub trait MatVecOracle: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    fn apply_t(&self, u: &DVector<f64>) -> DVector<f64>;
}

#[derive(Clone)]
pub enum BundleMatrix {
    Dense(DMatrix<f64>),
    Oracle(Arc<dyn MatVecOracle>),
}

impl fmt::Debug for BundleMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BundleMatrix::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            BundleMatrix::Oracle(o) => write!(f, "Oracle({}x{})", o.nrows(), o.ncols()),
        }
    }
}

impl BundleMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            BundleMatrix::Dense(m) => m.nrows(),
            BundleMatrix::Oracle(o) => o.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            BundleMatrix::Dense(m) => m.ncols(),
            BundleMatrix::Oracle(o) => o.ncols(),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            BundleMatrix::Dense(m) => m * v,
            BundleMatrix::Oracle(o) => o.apply(v),
        }
    }

    pub fn apply_t(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            BundleMatrix::Dense(m) => m.tr_mul(u),
            BundleMatrix::Oracle(o) => o.apply_t(u),
        }
    }

    /// Dense copy; oracles are probed column by column.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            BundleMatrix::Dense(m) => m.clone(),
            BundleMatrix::Oracle(o) => {
                let mut out = DMatrix::zeros(o.nrows(), o.ncols());
                for j in 0..o.ncols() {
                    let mut e = DVector::zeros(o.ncols());
                    e[j] = 1.0;
                    out.set_column(j, &o.apply(&e));
                }
                out
            }
        }
    }
}

/// Whether the trace constraint `<1, x> + sigma = tau` has `sigma >= 0`
/// (upper bound) or `sigma = 0` (equality).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceMode {
    Equality,
    UpperBound,
}

/// One bundle subproblem: the saddle problem
/// `min_y max_x 1/2 y'Hy + b'y + <B0 + By, x> + delta`
/// with `H = D_H + V_H V_H'`, `x` in the cone with `<1, x> <= tau`
/// (or `= tau`), and `a_lo <= Ay <= a_hi`, `y_lo <= y <= y_hi`.
#[derive(Debug, Clone)]
pub struct SubproblemData {
    pub m: usize,
    pub d_h: DVector<f64>,
    pub v_h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub delta: f64,
    pub spec: ConeSpec,
    pub b0: DVector<f64>,
    pub bmat: BundleMatrix,
    pub a: DMatrix<f64>,
    pub a_lo: DVector<f64>,
    pub a_hi: DVector<f64>,
    pub y_lo: DVector<f64>,
    pub y_hi: DVector<f64>,
    pub tau: f64,
    pub trace_mode: TraceMode,
}

impl SubproblemData {
    /// Problem without side constraints or bounds.
    #[allow(clippy::too_many_arguments)]
    pub fn unconstrained(
        d_h: DVector<f64>,
        v_h: DMatrix<f64>,
        b: DVector<f64>,
        delta: f64,
        spec: ConeSpec,
        b0: DVector<f64>,
        bmat: BundleMatrix,
        tau: f64,
        trace_mode: TraceMode,
    ) -> Result<Self> {
        let m = d_h.len();
        let data = SubproblemData {
            m,
            d_h,
            v_h,
            b,
            delta,
            spec,
            b0,
            bmat,
            a: DMatrix::zeros(0, m),
            a_lo: DVector::zeros(0),
            a_hi: DVector::zeros(0),
            y_lo: DVector::from_element(m, f64::NEG_INFINITY),
            y_hi: DVector::from_element(m, f64::INFINITY),
            tau,
            trace_mode,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn h_a(&self) -> usize {
        self.a.nrows()
    }

    pub fn cone_dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn is_eq_row(&self, i: usize) -> bool {
        self.a_lo[i] == self.a_hi[i]
    }

    pub fn eq_rows(&self) -> Vec<usize> {
        (0..self.h_a()).filter(|&i| self.is_eq_row(i)).collect()
    }

    /// Order of the full Newton system: `m + h_A + n(t) + 1`.
    pub fn kkt_order(&self) -> usize {
        self.m + self.h_a() + self.cone_dim() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        self.spec.check_supported()?;
        let nt = self.cone_dim();
        check_len("D_H", m, self.d_h.len())?;
        check_len("V_H rows", m, self.v_h.nrows())?;
        check_len("b", m, self.b.len())?;
        check_len("B0", nt, self.b0.len())?;
        check_len("B rows", nt, self.bmat.nrows())?;
        check_len("B cols", m, self.bmat.ncols())?;
        check_len("A cols", m, self.a.ncols())?;
        check_len("a_lo", self.h_a(), self.a_lo.len())?;
        check_len("a_hi", self.h_a(), self.a_hi.len())?;
        check_len("y_lo", m, self.y_lo.len())?;
        check_len("y_hi", m, self.y_hi.len())?;
        if self.d_h.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Contract("D_H must be positive and finite".into()));
        }
        let finite = |s: &[f64]| s.iter().all(|v| v.is_finite());
        if !finite(self.v_h.as_slice()) || !finite(self.b.as_slice()) || !finite(self.b0.as_slice()) {
            return Err(Error::NonFinite("V_H, b or B0"));
        }
        if !finite(self.a.as_slice()) || !self.delta.is_finite() {
            return Err(Error::NonFinite("A or delta"));
        }
        if let BundleMatrix::Dense(bm) = &self.bmat {
            if !finite(bm.as_slice()) {
                return Err(Error::NonFinite("B"));
            }
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Contract(format!("trace value must be positive, got {}", self.tau)));
        }
        if nt == 0 && self.trace_mode == TraceMode::Equality {
            return Err(Error::Infeasible("empty cone cannot meet an equality trace constraint".into()));
        }
        for i in 0..self.h_a() {
            let (lo, hi) = (self.a_lo[i], self.a_hi[i]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Infeasible(format!("row bounds of A row {i}: [{lo}, {hi}]")));
            }
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                return Err(Error::Contract(format!("A row {i} has no finite bound")));
            }
        }
        for i in 0..m {
            let (lo, hi) = (self.y_lo[i], self.y_hi[i]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Infeasible(format!("box bounds of y[{i}]: [{lo}, {hi}]")));
            }
            if lo >= hi {
                return Err(Error::Contract(format!(
                    "y[{i}] has bounds [{lo}, {hi}]; fixed or empty coordinates are not supported"
                )));
            }
        }
        Ok(())
    }

    /// `H v = D_H v + V_H (V_H' v)`.
    pub fn apply_h(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.d_h.component_mul(v);
        if self.v_h.ncols() > 0 {
            out += &self.v_h * self.v_h.tr_mul(v);
        }
        out
    }

    /// Saddle function value at `(y, x)`.
    pub fn objective(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * y.dot(&self.apply_h(y)) + self.b.dot(y) + self.b0.dot(x) + self.bmat.apply(y).dot(x) + self.delta
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        file.into_data()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = InstanceFile::from_data(self)?;
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }
}

/// JSON layout of an instance. Matrices are nested row-major arrays and
/// `null` encodes an infinite bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    #[serde(rename = "D_H")]
    pub d_h: Vec<f64>,
    #[serde(rename = "V_H", default)]
    pub v_h: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub delta: f64,
    pub cone: ConeSpec,
    #[serde(rename = "B0")]
    pub b0: Vec<f64>,
    #[serde(rename = "B")]
    pub bmat: Vec<Vec<f64>>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub a_lo: Vec<Option<f64>>,
    #[serde(default)]
    pub a_hi: Vec<Option<f64>>,
    #[serde(default)]
    pub y_lo: Vec<Option<f64>>,
    #[serde(default)]
    pub y_hi: Vec<Option<f64>>,
    pub tau: f64,
    pub trace_mode: TraceMode,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, name: &'static str) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        check_len(name, ncols, r.len())?;
        for (j, v) in r.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

fn bound_out(v: &DVector<f64>) -> Vec<Option<f64>> {
    v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect()
}

fn bound_in(v: &[Option<f64>], len: usize, inf: f64, name: &'static str) -> Result<DVector<f64>> {
    if v.is_empty() {
        return Ok(DVector::from_element(len, inf));
    }
    check_len(name, len, v.len())?;
    Ok(DVector::from_iterator(len, v.iter().map(|x| x.unwrap_or(inf))))
}

impl InstanceFile {
    pub fn from_data(d: &SubproblemData) -> Result<Self> {
        let bmat = match &d.bmat {
            BundleMatrix::Dense(b) => rows_of(b),
            BundleMatrix::Oracle(_) => {
                return Err(Error::Contract("oracle-backed B cannot be written to an instance file".into()))
            }
        };
        Ok(InstanceFile {
            m: d.m,
            d_h: d.d_h.iter().copied().collect(),
            v_h: rows_of(&d.v_h),
            b: d.b.iter().copied().collect(),
            delta: d.delta,
            cone: d.spec.clone(),
            b0: d.b0.iter().copied().collect(),
            bmat,
            a: rows_of(&d.a),
            a_lo: bound_out(&d.a_lo),
            a_hi: bound_out(&d.a_hi),
            y_lo: bound_out(&d.y_lo),
            y_hi: bound_out(&d.y_hi),
            tau: d.tau,
            trace_mode: d.trace_mode,
        })
    }

    pub fn into_data(self) -> Result<SubproblemData> {
        let m = self.m;
        let h_h = self.v_h.first().map_or(0, |r| r.len());
        let v_h = if self.v_h.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            matrix_from_rows(&self.v_h, h_h, "V_H row")?
        };
        let bmat = matrix_from_rows(&self.bmat, m, "B row")?;
        let a = matrix_from_rows(&self.a, m, "A row")?;
        let h_a = a.nrows();
        let data = SubproblemData {
            m,
            d_h: DVector::from_vec(self.d_h),
            v_h,
            b: DVector::from_vec(self.b),
            delta: self.delta,
            spec: self.cone,
            b0: DVector::from_vec(self.b0),
            bmat: BundleMatrix::Dense(bmat),
            a,
            a_lo: bound_in(&self.a_lo, h_a, f64::NEG_INFINITY, "a_lo")?,
            a_hi: bound_in(&self.a_hi, h_a, f64::INFINITY, "a_hi")?,
            y_lo: bound_in(&self.y_lo, m, f64::NEG_INFINITY, "y_lo")?,
            y_hi: bound_in(&self.y_hi, m, f64::INFINITY, "y_hi")?,
            tau: self.tau,
            trace_mode: self.trace_mode,
        };
        data.validate()?;
        Ok(data)
    }
}

/// Primal-dual interior point iterate. Multipliers of infinite bounds are
/// kept at zero; `s_alo`/`s_ahi` are zero on equality rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateState {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub sigma: f64,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub zeta: f64,
    pub s_alo: Vec<f64>,
    pub s_ahi: Vec<f64>,
    pub s_ylo: Vec<f64>,
    pub s_yhi: Vec<f64>,
    pub mu: f64,
}

/// Borrowed vector views of an [`IterateState`].
pub struct StateVecs {
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub s_alo: DVector<f64>,
    pub s_ahi: DVector<f64>,
    pub s_ylo: DVector<f64>,
    pub s_yhi: DVector<f64>,
}

impl IterateState {
    pub fn vecs(&self) -> StateVecs {
        let v = |x: &Vec<f64>| DVector::from_column_slice(x);
        StateVecs {
            y: v(&self.y),
            w: v(&self.w),
            x: v(&self.x),
            s: v(&self.s),
            z: v(&self.z),
            s_alo: v(&self.s_alo),
            s_ahi: v(&self.s_ahi),
            s_ylo: v(&self.s_ylo),
            s_yhi: v(&self.s_yhi),
        }
    }

    pub fn check_dims(&self, data: &SubproblemData) -> Result<()> {
        let (m, ha, nt) = (data.m, data.h_a(), data.cone_dim());
        check_len("state y", m, self.y.len())?;
        check_len("state w", ha, self.w.len())?;
        check_len("state x", nt, self.x.len())?;
        check_len("state s", ha, self.s.len())?;
        check_len("state z", nt, self.z.len())?;
        check_len("state s_alo", ha, self.s_alo.len())?;
        check_len("state s_ahi", ha, self.s_ahi.len())?;
        check_len("state s_ylo", m, self.s_ylo.len())?;
        check_len("state s_yhi", m, self.s_yhi.len())?;
        Ok(())
    }
}
