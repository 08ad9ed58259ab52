//! Symmetric matrix algebra in svec coordinates.
//!
//! `svec` stacks the columns of the lower triangle and scales the
//! off-diagonal entries by `sqrt(2)`, so the trace inner product of two
//! symmetric matrices becomes the plain dot product of their svec vectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const ROOT_FLOOR: f64 = 1e-14;

/// A symmetric matrix stored in svec layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub order: usize,
    pub data: DVector<f64>,
}

impl SymMatrix {
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        Ok(SymMatrix {
            order: a.nrows(),
            data: svec(a)?,
        })
    }

    pub fn from_svec(data: DVector<f64>) -> Result<Self> {
        let order = tri_order(data.len())?;
        Ok(SymMatrix { order, data })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        smat_unchecked(&self.data, self.order)
    }

    /// Trace inner product.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.data.dot(&other.data)
    }
}

/// Eigendecomposition with eigenvalues sorted nonincreasingly.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl EigDecomp {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[0]
        }
    }

    pub fn min(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values[self.values.len() - 1]
        }
    }

    /// `P f(Lambda) P^T` for a scalar function applied to the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let fv = self.values.map(f);
        let scaled = &self.vectors * DMatrix::from_diagonal(&fv);
        let mut out = scaled * self.vectors.transpose();
        crate::linalg::symmetrize(&mut out);
        out
    }
}

/// Length of the svec vector of an order-`h` matrix.
pub fn tri_len(h: usize) -> usize {
    h * (h + 1) / 2
}

/// Inverse of [`tri_len`]; errors when `len` is not triangular.
pub fn tri_order(len: usize) -> Result<usize> {
    let h = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    for cand in h.saturating_sub(1)..=h + 1 {
        if tri_len(cand) == len {
            return Ok(cand);
        }
    }
    Err(Error::Contract(format!("svec length {len} is not triangular")))
}

/// Position of entry `(i, j)` with `i >= j` inside the svec vector.
pub fn svec_index(h: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // columns 0..j hold h + (h-1) + ... + (h-j+1) entries
    j * h - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn svec(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Contract(format!(
            "svec of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svec input"));
    }
    if crate::linalg::asymmetry(a) > 1e-12 {
        return Err(Error::Contract("svec input is not symmetric".into()));
    }
    Ok(svec_unchecked(a))
}

/// svec without the symmetry check; reads the lower triangle only.
pub fn svec_unchecked(a: &DMatrix<f64>) -> DVector<f64> {
    let h = a.nrows();
    let mut v = DVector::zeros(tri_len(h));
    let mut k = 0;
    for j in 0..h {
        v[k] = a[(j, j)];
        k += 1;
        for i in (j + 1)..h {
            v[k] = SQRT2 * a[(i, j)];
            k += 1;
        }
    }
    v
}

pub fn smat(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let h = tri_order(v.len())?;
    Ok(smat_unchecked(v, h))
}

pub(crate) fn smat_unchecked(v: &DVector<f64>, h: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(h, h);
    let mut k = 0;
    for j in 0..h {
        a[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..h {
            let x = v[k] / SQRT2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            k += 1;
        }
    }
    a
}

/// `(F (x)s G) svec(A) = 1/2 svec(F A G^T + G A F^T)`.
pub fn sym_kron_apply(f: &DMatrix<f64>, g: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if f.shape() != g.shape() {
        return Err(Error::Contract(format!(
            "symmetric Kronecker factors differ in shape: {:?} vs {:?}",
            f.shape(),
            g.shape()
        )));
    }
    let h = tri_order(v.len())?;
    crate::error::check_len("sym_kron_apply", f.ncols(), h)?;
    let a = smat_unchecked(v, h);
    let fag = f * &a * g.transpose();
    let sum = &fag + fag.transpose();
    Ok(svec_unchecked(&sum) * 0.5)
}

/// `svec(F A F^T)`, the special case `F = G` used for scaling blocks.
pub fn congruence_svec(f: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let a = smat_unchecked(v, f.ncols());
    let mut out = f * a * f.transpose();
    crate::linalg::symmetrize(&mut out);
    svec_unchecked(&out)
}

/// Symmetric eigendecomposition, values sorted nonincreasingly with ties
/// broken by the lower original index.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<EigDecomp> {
    if a.nrows() != a.ncols() {
        return Err(Error::Contract("eig_sym of a non-square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eig_sym input"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(EigDecomp {
            vectors: DMatrix::zeros(0, 0),
            values: DVector::zeros(0),
        });
    }
    let mut sym = a.clone();
    crate::linalg::symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        // fix the sign so the largest-magnitude entry is positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigDecomp { vectors, values })
}

fn spd_decomp(a: &DMatrix<f64>, name: &'static str) -> Result<EigDecomp> {
    let e = eig_sym(a)?;
    let (lmin, lmax) = (e.min(), e.max());
    if !(lmax > 0.0) || lmin <= ROOT_FLOOR * lmax {
        return Err(Error::NotPositiveDefinite {
            name,
            min_eig: lmin,
            max_eig: lmax,
        });
    }
    Ok(e)
}

/// Eigenvalues below `1e-14 * lambda_max` are lifted to that floor before
/// taking roots.
fn floored(e: &EigDecomp) -> impl Fn(f64) -> f64 {
    let floor = ROOT_FLOOR * e.max().max(0.0);
    move |l| l.max(floor)
}

/// Nesterov-Todd scaling: the SPD `W` with `W Z W = X`.
pub fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != z.shape() {
        return Err(Error::Contract("nt_scaling: X and Z differ in shape".into()));
    }
    let ex = spd_decomp(x, "X")?;
    let ez = spd_decomp(z, "Z")?;
    let _ = ex;
    let fz = floored(&ez);
    let z_half = ez.map(|l| fz(l).sqrt());
    let z_mhalf = ez.map(|l| 1.0 / fz(l).sqrt());
    let mut mid = &z_half * x * &z_half;
    crate::linalg::symmetrize(&mut mid);
    let em = eig_sym(&mid)?;
    let fm = floored(&em);
    let mid_half = em.map(|l| fm(l).sqrt());
    let mut w = &z_mhalf * mid_half * &z_mhalf;
    crate::linalg::symmetrize(&mut w);
    Ok(w)
}

/// One mixed eigenpair `lambda_i lambda_j` of `W (x)s W` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedPair {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Eigensystem of `W (x)s W - svec(W^2) svec(W^2)^T / eta`.
///
/// Returns the decomposition of the `h x h` matrix
/// `U = Lambda^2 - (Lambda^2 1)(Lambda^2 1)^T / eta` acting on the span of
/// the `svec(w_i w_i^T)` vectors, and the mixed eigenvalues, which are not
/// affected by the rank-one term.
pub fn kron_rank1_eigensystem(w: &EigDecomp, eta: f64) -> Result<(EigDecomp, Vec<MixedPair>)> {
    if !(eta > 0.0) {
        return Err(Error::Contract(format!("eta must be positive, got {eta}")));
    }
    let lam = &w.values;
    let h = lam.len();
    let sq: DVector<f64> = lam.map(|l| l * l);
    let total: f64 = sq.sum();
    if eta < total * (1.0 - 1e-10) {
        return Err(Error::Contract(format!(
            "eta = {eta:e} is below the squared eigenvalue sum {total:e} of the scaling block"
        )));
    }
    let mut u = DMatrix::from_diagonal(&sq);
    u -= (&sq * sq.transpose()) / eta;
    let ud = eig_sym(&u)?;
    let mut mixed = Vec::with_capacity(h * h.saturating_sub(1) / 2);
    for i in 0..h {
        for j in (i + 1)..h {
            mixed.push(MixedPair {
                i,
                j,
                value: lam[i] * lam[j],
            });
        }
    }
    Ok((ud, mixed))
}

/// `svec(w_i w_i^T)` for `i == j`, otherwise `svec(w_i w_j^T + w_j w_i^T)/sqrt(2)`.
pub fn kron_eigvec(p: &DMatrix<f64>, i: usize, j: usize) -> DVector<f64> {
    let wi = p.column(i);
    let wj = p.column(j);
    let m = if i == j {
        wi * wi.transpose()
    } else {
        (wi * wj.transpose() + wj * wi.transpose()) / SQRT2
    };
    svec_unchecked(&m)
}
