use nalgebra::{DMatrix, DVector};

use crate::cones::PsdScaling;
use crate::error::Result;
use crate::kkt::{BundleMatrix, KKTContext, SubproblemData};
use crate::linalg::dinv_norm_sq;
use crate::symmat::{kron_eigvec, kron_rank1_eigensystem, tri_len};

/// How the selected columns of `A'` are scaled by the row weights `d_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowColumnScaling {
    /// `sqrt(d_w[j]) A'_{.,j}`, the actual column of the Gram factor.
    #[default]
    SqrtWeight,
    /// `d_w[j] A'_{.,j}`.
    Weight,
}

#[derive(Debug, Clone, Copy)]
pub struct DeterministicConfig {
    /// The threshold is `rho_factor / m * tr D_H`.
    pub rho_factor: f64,
    pub row_scaling: RowColumnScaling,
}

impl Default for DeterministicConfig {
    fn default() -> Self {
        DeterministicConfig {
            rho_factor: 10.0,
            row_scaling: RowColumnScaling::SqrtWeight,
        }
    }
}

/// Growing list of selected columns.
#[derive(Debug, Clone)]
pub struct ColumnSet {
    m: usize,
    cols: Vec<DVector<f64>>,
}

impl ColumnSet {
    pub fn new(m: usize) -> Self {
        ColumnSet { m, cols: Vec::new() }
    }

    pub fn push(&mut self, c: DVector<f64>) {
        debug_assert_eq!(c.len(), self.m);
        self.cols.push(c);
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.cols.len());
        for (j, c) in self.cols.iter().enumerate() {
            out.set_column(j, c);
        }
        out
    }
}

/// `(1 / 1'X1) (1 - sqrt(sigma / (zeta eta)))`, the per-unit weight of the
/// trace correction `B'X1` in a selected column.
fn trace_correction_weight(ctx: &KKTContext) -> f64 {
    let sc = &ctx.scaling;
    if sc.trace_quad > 0.0 {
        (1.0 - (sc.sigma_over_zeta / sc.eta).sqrt()) / sc.trace_quad
    } else {
        0.0
    }
}

/// `B' u` for a cone-space vector supported on `offset..offset+len`.
fn bt_block(bmat: &BundleMatrix, dim: usize, offset: usize, local: &DVector<f64>) -> DVector<f64> {
    let mut u = DVector::zeros(dim);
    u.rows_mut(offset, local.len()).copy_from(local);
    bmat.apply_t(&u)
}

pub fn selection_threshold(data: &SubproblemData, cfg: &DeterministicConfig) -> f64 {
    cfg.rho_factor / data.m as f64 * data.d_h.sum()
}

/// Deterministic interior-point-aware selection of columns of the Gram
/// factor `V`. The columns are grouped as `V_H`, `A'`, then one group per
/// cone block in layout order.
pub fn deterministic_subspace(
    ctx: &KKTContext,
    data: &SubproblemData,
    cfg: &DeterministicConfig,
) -> Result<DMatrix<f64>> {
    let rho = selection_threshold(data, cfg);
    let d = &ctx.d;
    let mut out = ColumnSet::new(data.m);
    for j in 0..data.v_h.ncols() {
        let c = data.v_h.column(j).into_owned();
        if dinv_norm_sq(&c, d) >= rho {
            out.push(c);
        }
    }
    for &i in &ctx.ineq_rows {
        let a = data.a.row(i).transpose();
        let dw = ctx.d_w[i];
        if dw * dinv_norm_sq(&a, d) >= rho {
            let s = match cfg.row_scaling {
                RowColumnScaling::SqrtWeight => dw.sqrt(),
                RowColumnScaling::Weight => dw,
            };
            out.push(a * s);
        }
    }
    if data.cone_dim() > 0 {
        append_nonneg_columns(&mut out, ctx, data, rho);
        for p in &ctx.scaling.psd_blocks {
            append_psd_columns(&mut out, ctx, data, p, rho)?;
        }
    }
    Ok(out.to_matrix())
}

/// Orthant block: coordinate `i` is a candidate when
/// `(x_i/z_i - (x_i/z_i)^2/eta) |B'_{.,i}|^2_{D^{-1}} >= rho`; its column
/// `sqrt(x_i/z_i) B'_{.,i} - alpha B'X1` is kept when its squared
/// `D^{-1}`-norm exceeds `rho`.
pub fn append_nonneg_columns(out: &mut ColumnSet, ctx: &KKTContext, data: &SubproblemData, rho: f64) {
    let sc = &ctx.scaling;
    let weight = trace_correction_weight(ctx);
    let dim = data.cone_dim();
    for i in 0..sc.nonneg_ratio.len() {
        let r = sc.nonneg_ratio[i];
        if (r - r * r / sc.eta) * ctx.col_norms_sq[i] < rho {
            continue;
        }
        let root = r.sqrt();
        let mut e = DVector::zeros(1);
        e[0] = root;
        let col = bt_block(&data.bmat, dim, i, &e) - &ctx.bt_x_one * (root * weight);
        if dinv_norm_sq(&col, &ctx.d) > rho {
            out.push(col);
        }
    }
}

/// PSD block with NT matrix `W`. Candidates are the eigenvectors of the
/// block of `X - (X1)(X1)'/eta`: the `h` combinations of `svec(w_i w_i')`
/// from the small matrix `U`, then the mixed vectors `w_ij`.
pub fn append_psd_columns(
    out: &mut ColumnSet,
    ctx: &KKTContext,
    data: &SubproblemData,
    p: &PsdScaling,
    rho: f64,
) -> Result<()> {
    let sc = &ctx.scaling;
    let h = p.block.order;
    let off = p.block.offset;
    let len = tri_len(h);
    let dim = data.cone_dim();
    let norms = ctx.col_norms_sq.rows(off, len);
    let max_norm = norms.max();
    if !(max_norm > 0.0) {
        return Ok(());
    }
    let rho_hat = rho / max_norm;
    let lam = &p.eig.values;
    if lam[0] * lam[0] < rho_hat {
        return Ok(());
    }
    let (u, _) = kron_rank1_eigensystem(&p.eig, sc.eta)?;
    let weight = trace_correction_weight(ctx);
    let diag_vecs: Vec<DVector<f64>> = (0..h).map(|i| kron_eigvec(&p.eig.vectors, i, i)).collect();
    let lam_sq = lam.norm_squared();
    // coefficient of the rank-one square root restricted to this block
    let shrink = if lam_sq > 0.0 {
        let gap = (sc.eta - lam_sq).max(0.0);
        (sc.eta.sqrt() - gap.sqrt()) / (sc.eta.sqrt() * lam_sq)
    } else {
        0.0
    };
    let estimate = |v: &DVector<f64>| v.iter().zip(norms.iter()).map(|(a, n)| a * a * n).sum::<f64>();

    for ih in 0..h {
        let lu = u.values[ih];
        if lu < rho_hat {
            continue;
        }
        let uvec = u.vectors.column(ih);
        let mut what = DVector::zeros(len);
        for i in 0..h {
            what.axpy(uvec[i], &diag_vecs[i], 1.0);
        }
        if lu * estimate(&what) < rho {
            continue;
        }
        let lu_vec = lam.component_mul(&uvec);
        let uf = (&lu_vec - lam * (shrink * lam.dot(&lu_vec))) / lu.sqrt();
        let alpha = lam.dot(&uf) * weight;
        let mut comb = DVector::zeros(len);
        for i in 0..h {
            comb.axpy(uf[i] * lam[i], &diag_vecs[i], 1.0);
        }
        let col = bt_block(&data.bmat, dim, off, &comb) - &ctx.bt_x_one * alpha;
        if dinv_norm_sq(&col, &ctx.d) >= rho {
            out.push(col);
        }
    }

    for ih in 0..h {
        for jh in (ih + 1)..h {
            let prod = lam[ih] * lam[jh];
            if prod <= rho_hat {
                continue;
            }
            let wij = kron_eigvec(&p.eig.vectors, ih, jh);
            if prod * estimate(&wij) < rho {
                continue;
            }
            let col = bt_block(&data.bmat, dim, off, &wij) * prod.sqrt();
            if dinv_norm_sq(&col, &ctx.d) >= rho {
                out.push(col);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::ConeSpec;
    use crate::instances::{gen_random, random_interior_state, RandomParams};
    use crate::kkt::{apply_v, build_context, v_cols, IterateState, TraceMode};
    use crate::symmat::svec_index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TINY: DeterministicConfig = DeterministicConfig {
        rho_factor: 1e-12,
        row_scaling: RowColumnScaling::SqrtWeight,
    };

    fn setup(spec: ConeSpec, n_ineq: usize, with_vh: bool, seed: u64) -> (SubproblemData, IterateState) {
        let p = RandomParams {
            m: 14,
            spec,
            n_ineq,
            n_eq: 0,
            box_fraction: 0.0,
            trace_mode: TraceMode::UpperBound,
            with_vh,
        };
        let data = gen_random(&p, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let st = random_interior_state(&mut rng, &data, 0.5);
        (data, st)
    }

    fn unit(n: usize, i: usize) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    }

    fn close_up_to_sign(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        let scale = b.norm().max(1e-300);
        (a - b).norm() <= tol * scale || (a + b).norm() <= tol * scale
    }

    #[test]
    fn threshold_for_identity_prox_term() {
        let (mut data, _) = setup(ConeSpec::new(2, vec![]), 0, false, 1);
        data.d_h = DVector::from_element(data.m, 1.0);
        assert_eq!(selection_threshold(&data, &DeterministicConfig::default()), 10.0);
    }

    #[test]
    fn huge_threshold_selects_nothing() {
        let (data, st) = setup(ConeSpec::new(2, vec![3]), 2, true, 2);
        let ctx = build_context(&data, &st).unwrap();
        let cfg = DeterministicConfig {
            rho_factor: 1e12,
            ..Default::default()
        };
        assert_eq!(deterministic_subspace(&ctx, &data, &cfg).unwrap().ncols(), 0);
    }

    #[test]
    fn columns_are_gram_factor_columns_in_order() {
        let (data, st) = setup(ConeSpec::new(3, vec![]), 2, true, 3);
        let ctx = build_context(&data, &st).unwrap();
        let vhat = deterministic_subspace(&ctx, &data, &TINY).unwrap();
        let n = v_cols(&data);
        assert_eq!(vhat.ncols(), n);
        for j in 0..n {
            let want = apply_v(&ctx, &data, &unit(n, j)).unwrap();
            assert!((vhat.column(j) - &want).norm() <= 1e-12 * want.norm(), "column {j}");
        }
    }

    #[test]
    fn row_weight_scaling_variant() {
        let (data, st) = setup(ConeSpec::new(1, vec![]), 2, false, 4);
        let ctx = build_context(&data, &st).unwrap();
        let cfg = DeterministicConfig {
            rho_factor: 1e-12,
            row_scaling: RowColumnScaling::Weight,
        };
        let vhat = deterministic_subspace(&ctx, &data, &cfg).unwrap();
        for j in 0..2 {
            let want = data.a.row(j).transpose() * ctx.d_w[j];
            assert!((vhat.column(j) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn small_ratio_coordinate_is_skipped() {
        let (data, mut st) = setup(ConeSpec::new(3, vec![]), 0, false, 5);
        st.x[1] = 1e-12;
        let ctx = build_context(&data, &st).unwrap();
        let mut out = ColumnSet::new(data.m);
        let rho = selection_threshold(&data, &DeterministicConfig::default()) * 1e-6;
        append_nonneg_columns(&mut out, &ctx, &data, rho);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn psd_columns_match_dense_svd_of_factor() {
        let h = 4;
        let (data, st) = setup(ConeSpec::new(0, vec![h]), 0, false, 6);
        let ctx = build_context(&data, &st).unwrap();
        let vhat = deterministic_subspace(&ctx, &data, &TINY).unwrap();
        assert_eq!(vhat.ncols(), h * (h + 1) / 2);
        let n = v_cols(&data);
        let lam = &ctx.scaling.psd_blocks[0].eig.values;
        // with a single block the factor restricted to the diagonal
        // directions is Diag(lam) (I - c lam lam')
        let c = ctx.rank1_coef;
        let m_diag = DMatrix::from_diagonal(lam) * (DMatrix::identity(h, h) - lam * lam.transpose() * c);
        let svd = m_diag.svd(false, true);
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let vt = svd.v_t.unwrap();
        for (col, &k) in order.iter().enumerate() {
            let mut e = DVector::zeros(n);
            for i in 0..h {
                e[svec_index(h, i, i)] = vt[(k, i)];
            }
            let want = apply_v(&ctx, &data, &e).unwrap();
            assert!(close_up_to_sign(&vhat.column(col).into_owned(), &want, 1e-9), "diagonal candidate {col}");
        }
        let mut col = h;
        for i in 0..h {
            for j in (i + 1)..h {
                let want = apply_v(&ctx, &data, &unit(n, svec_index(h, j, i))).unwrap();
                assert!(close_up_to_sign(&vhat.column(col).into_owned(), &want, 1e-9), "mixed pair ({i},{j})");
                col += 1;
            }
        }
    }

    #[test]
    fn scalar_psd_block_matches_orthant_formula() {
        let (data, st) = setup(ConeSpec::new(1, vec![]), 0, false, 7);
        let mut psd = data.clone();
        psd.spec = ConeSpec::new(0, vec![1]);
        let a = build_context(&data, &st).unwrap();
        let b = build_context(&psd, &st).unwrap();
        let va = deterministic_subspace(&a, &data, &TINY).unwrap();
        let vb = deterministic_subspace(&b, &psd, &TINY).unwrap();
        assert_eq!(va.ncols(), 1);
        assert_eq!(vb.ncols(), 1);
        assert!(close_up_to_sign(&vb.column(0).into_owned(), &va.column(0).into_owned(), 1e-10));
    }

    #[test]
    fn tiny_scaling_block_exits_early() {
        let (data, mut st) = setup(ConeSpec::new(0, vec![3]), 0, false, 8);
        let eps = 1e-8;
        st.x = crate::symmat::svec_unchecked(&(DMatrix::identity(3, 3) * eps * eps)).iter().copied().collect();
        st.z = crate::symmat::svec_unchecked(&DMatrix::identity(3, 3)).iter().copied().collect();
        let ctx = build_context(&data, &st).unwrap();
        let mut out = ColumnSet::new(data.m);
        let rho = selection_threshold(&data, &DeterministicConfig::default());
        append_psd_columns(&mut out, &ctx, &data, &ctx.scaling.psd_blocks[0], rho).unwrap();
        assert!(out.is_empty());
    }
}
