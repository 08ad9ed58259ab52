//! Product cones of a nonnegative orthant and PSD blocks, their trace, and
//! the Nesterov-Todd scaling operator with its factor.
//!
//! A cone point is a flat vector: the orthant coordinates first, then the
//! second-order cone blocks (representable, never supported), then the svec
//! of every PSD block in order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::symmat::{self, eig_sym, nt_scaling, smat_unchecked, svec_unchecked, tri_len, EigDecomp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    #[serde(rename = "n")]
    pub nonneg: usize,
    #[serde(rename = "q", default)]
    pub soc: Vec<usize>,
    #[serde(rename = "s", default)]
    pub psd: Vec<usize>,
}

/// Location of one PSD block inside a cone vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdBlock {
    pub offset: usize,
    pub order: usize,
}

impl PsdBlock {
    pub fn len(&self) -> usize {
        tri_len(self.order)
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl ConeSpec {
    pub fn new(nonneg: usize, psd: Vec<usize>) -> Self {
        ConeSpec {
            nonneg,
            soc: Vec::new(),
            psd,
        }
    }

    pub fn dim(&self) -> usize {
        cone_dim(self)
    }

    pub fn check_supported(&self) -> Result<()> {
        if !self.soc.is_empty() {
            return Err(Error::UnsupportedSoc);
        }
        if self.psd.contains(&0) {
            return Err(Error::Contract("PSD block of order 0".into()));
        }
        Ok(())
    }

    pub fn psd_blocks(&self) -> Vec<PsdBlock> {
        let mut offset = self.nonneg + self.soc.iter().sum::<usize>();
        self.psd
            .iter()
            .map(|&order| {
                let b = PsdBlock { offset, order };
                offset += tri_len(order);
                b
            })
            .collect()
    }

    /// Number of complementarity products: `n + sum s_i`.
    pub fn rank(&self) -> usize {
        self.nonneg + self.psd.iter().sum::<usize>()
    }

    /// The trace vector: ones on the orthant, `svec(I)` on PSD blocks.
    pub fn unit(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, self.nonneg).fill(1.0);
        for b in self.psd_blocks() {
            for i in 0..b.order {
                v[b.offset + symmat::svec_index(b.order, i, i)] = 1.0;
            }
        }
        v
    }
}

pub fn cone_dim(spec: &ConeSpec) -> usize {
    spec.nonneg + spec.soc.iter().sum::<usize>() + spec.psd.iter().map(|&h| tri_len(h)).sum::<usize>()
}

/// `<1_t, x>`: orthant sum plus the traces of all PSD blocks.
pub fn cone_trace(spec: &ConeSpec, x: &DVector<f64>) -> Result<f64> {
    spec.check_supported()?;
    check_len("cone_trace", spec.dim(), x.len())?;
    Ok(spec.unit().dot(x))
}

fn block_mat(x: &DVector<f64>, b: &PsdBlock) -> DMatrix<f64> {
    smat_unchecked(&x.rows(b.offset, b.len()).into_owned(), b.order)
}

/// Membership with tolerance: orthant entries `>= -tol` and PSD blocks with
/// `lambda_min >= -tol * (1 + lambda_max)`.
pub fn in_cone(spec: &ConeSpec, x: &DVector<f64>, tol: f64) -> Result<bool> {
    spec.check_supported()?;
    check_len("in_cone", spec.dim(), x.len())?;
    if x.rows(0, spec.nonneg).iter().any(|&v| v < -tol) {
        return Ok(false);
    }
    for b in spec.psd_blocks() {
        let e = eig_sym(&block_mat(x, &b))?;
        if e.min() < -tol * (1.0 + e.max().abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strict interiority check used before forming scalings: orthant entries
/// `> 0` and PSD blocks with `lambda_min > 1e-13 lambda_max`.
pub fn check_interior(spec: &ConeSpec, x: &DVector<f64>, name: &str) -> Result<()> {
    spec.check_supported()?;
    check_len("check_interior", spec.dim(), x.len())?;
    for i in 0..spec.nonneg {
        if !(x[i] > 0.0) {
            return Err(Error::NotInterior(format!("{name}[{i}] = {:e}", x[i])));
        }
    }
    for (k, b) in spec.psd_blocks().iter().enumerate() {
        let e = eig_sym(&block_mat(x, b))?;
        if !(e.max() > 0.0) || e.min() <= 1e-13 * e.max() {
            return Err(Error::NotInterior(format!(
                "{name} PSD block {k}: eigenvalues in [{:e}, {:e}]",
                e.min(),
                e.max()
            )));
        }
    }
    Ok(())
}

/// Cone inverse: reciprocal on the orthant, `svec(X^{-1})` on PSD blocks.
pub fn cone_inverse(spec: &ConeSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_interior(spec, x, "x")?;
    let mut out = DVector::zeros(x.len());
    for i in 0..spec.nonneg {
        out[i] = 1.0 / x[i];
    }
    for b in spec.psd_blocks() {
        let e = eig_sym(&block_mat(x, &b))?;
        let inv = e.map(|l| 1.0 / l);
        out.rows_mut(b.offset, b.len()).copy_from(&svec_unchecked(&inv));
    }
    Ok(out)
}

/// Largest step `a` (capped at `cap`) with `x + a dx` in the closed cone.
pub fn max_step(spec: &ConeSpec, x: &DVector<f64>, dx: &DVector<f64>, cap: f64) -> Result<f64> {
    check_interior(spec, x, "x")?;
    check_len("max_step", x.len(), dx.len())?;
    let mut step = cap;
    for i in 0..spec.nonneg {
        if dx[i] < 0.0 {
            step = step.min(-x[i] / dx[i]);
        }
    }
    for b in spec.psd_blocks() {
        let xm = block_mat(x, &b);
        let dm = block_mat(dx, &b);
        let l = xm
            .cholesky()
            .ok_or_else(|| Error::NotInterior("PSD block has no Cholesky factor".into()))?
            .l();
        let linv = l
            .try_inverse()
            .ok_or_else(|| Error::NotInterior("singular Cholesky factor".into()))?;
        let mut m = &linv * dm * linv.transpose();
        crate::linalg::symmetrize(&mut m);
        let lmin = eig_sym(&m)?.min();
        if lmin < 0.0 {
            step = step.min(-1.0 / lmin);
        }
    }
    Ok(step)
}

/// Scaling data for one PSD block.
#[derive(Debug, Clone)]
pub struct PsdScaling {
    pub block: PsdBlock,
    pub w: DMatrix<f64>,
    pub w_inv: DMatrix<f64>,
    pub eig: EigDecomp,
    /// `P_W Lambda_W^{1/2}`, the nonsymmetric factor of `W`.
    pub v_w: DMatrix<f64>,
}

/// Block-diagonal scaling operator and its factor, together with the
/// trace-vector quantities needed for the rank-one correction.
#[derive(Debug, Clone)]
pub struct BlockScaling {
    pub spec: ConeSpec,
    pub nonneg_ratio: DVector<f64>,
    pub psd_blocks: Vec<PsdScaling>,
    pub trace_vec_x: DVector<f64>,
    pub trace_vec_f: DVector<f64>,
    pub trace_quad: f64,
    pub eta: f64,
    /// `sigma / zeta`; zero in equality trace mode.
    pub sigma_over_zeta: f64,
}

pub fn build_scaling(
    spec: &ConeSpec,
    x: &DVector<f64>,
    z: &DVector<f64>,
    zeta: f64,
    sigma: f64,
) -> Result<BlockScaling> {
    check_interior(spec, x, "x")?;
    check_interior(spec, z, "z")?;
    if !(sigma >= 0.0) || !zeta.is_finite() {
        return Err(Error::Contract(format!("invalid sigma {sigma:e} / zeta {zeta:e}")));
    }
    let sigma_over_zeta = if sigma == 0.0 {
        0.0
    } else if zeta > 0.0 {
        sigma / zeta
    } else {
        return Err(Error::NotInterior(format!("zeta = {zeta:e} with sigma = {sigma:e}")));
    };
    let n = spec.nonneg;
    let nonneg_ratio = DVector::from_fn(n, |i, _| x[i] / z[i]);
    let mut psd_blocks = Vec::with_capacity(spec.psd.len());
    for b in spec.psd_blocks() {
        let w = nt_scaling(&block_mat(x, &b), &block_mat(z, &b))?;
        let eig = eig_sym(&w)?;
        let w_inv = eig.map(|l| 1.0 / l);
        let v_w = &eig.vectors * DMatrix::from_diagonal(&eig.values.map(f64::sqrt));
        psd_blocks.push(PsdScaling {
            block: b,
            w,
            w_inv,
            eig,
            v_w,
        });
    }
    let dim = spec.dim();
    let mut trace_vec_x = DVector::zeros(dim);
    let mut trace_vec_f = DVector::zeros(dim);
    for i in 0..n {
        trace_vec_x[i] = nonneg_ratio[i];
        trace_vec_f[i] = nonneg_ratio[i].sqrt();
    }
    for p in &psd_blocks {
        let w2 = &p.w * &p.w;
        trace_vec_x.rows_mut(p.block.offset, p.block.len()).copy_from(&svec_unchecked(&w2));
        let lam = DMatrix::from_diagonal(&p.eig.values);
        trace_vec_f.rows_mut(p.block.offset, p.block.len()).copy_from(&svec_unchecked(&lam));
    }
    let trace_quad: f64 =
        nonneg_ratio.sum() + psd_blocks.iter().map(|p| p.eig.values.map(|l| l * l).sum()).sum::<f64>();
    let eta = sigma_over_zeta + trace_quad;
    Ok(BlockScaling {
        spec: spec.clone(),
        nonneg_ratio,
        psd_blocks,
        trace_vec_x,
        trace_vec_f,
        trace_quad,
        eta,
        sigma_over_zeta,
    })
}

enum BlockOp {
    Scale,
    ScaleInv,
    Factor,
    FactorT,
}

impl BlockScaling {
    pub fn dim(&self) -> usize {
        self.trace_vec_x.len()
    }

    fn apply(&self, v: &DVector<f64>, op: BlockOp) -> Result<DVector<f64>> {
        check_len("scaling apply", self.dim(), v.len())?;
        let mut out = DVector::zeros(v.len());
        for i in 0..self.nonneg_ratio.len() {
            let r = self.nonneg_ratio[i];
            out[i] = match op {
                BlockOp::Scale => r * v[i],
                BlockOp::ScaleInv => v[i] / r,
                BlockOp::Factor | BlockOp::FactorT => r.sqrt() * v[i],
            };
        }
        for p in &self.psd_blocks {
            let seg = v.rows(p.block.offset, p.block.len()).into_owned();
            let res = match op {
                BlockOp::Scale => eigen_congruence(&p.eig, &seg, false),
                BlockOp::ScaleInv => eigen_congruence(&p.eig, &seg, true),
                BlockOp::Factor => nonsym_congruence(&p.v_w, &seg),
                BlockOp::FactorT => nonsym_congruence(&p.v_w.transpose(), &seg),
            };
            out.rows_mut(p.block.offset, p.block.len()).copy_from(&res);
        }
        Ok(out)
    }

    pub fn apply_scaling(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(v, BlockOp::Scale)
    }

    pub fn apply_scaling_inv(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(v, BlockOp::ScaleInv)
    }

    pub fn apply_factor(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(v, BlockOp::Factor)
    }

    pub fn apply_factor_t(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(v, BlockOp::FactorT)
    }
}

/// `svec(W A W)` (or with `W^{-1}`) evaluated in the eigenbasis of `W`.
/// Rounding then stays proportional to `lambda_i lambda_j` per eigen
/// coordinate instead of `|W|^2 |A|` in every direction, which matters
/// once `W` spans many orders of magnitude near the end of a run.
fn eigen_congruence(eig: &EigDecomp, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
    let q = &eig.vectors;
    let a = smat_unchecked(v, q.ncols());
    let mut m = q.transpose() * a * q;
    let lam = &eig.values;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let s = lam[i] * lam[j];
            if inverse {
                m[(i, j)] /= s;
            } else {
                m[(i, j)] *= s;
            }
        }
    }
    let mut out = q * m * q.transpose();
    crate::linalg::symmetrize(&mut out);
    svec_unchecked(&out)
}

/// `svec(F A F^T)` for a general square `F`; this is `(F (x)s F) svec(A)`.
fn nonsym_congruence(f: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let a = smat_unchecked(v, f.ncols());
    let mut m = f * a * f.transpose();
    crate::linalg::symmetrize(&mut m);
    svec_unchecked(&m)
}
