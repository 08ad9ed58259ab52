//! Seeded generators for desk-scale subproblem instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cones::ConeSpec;
use crate::error::{Error, Result};
use crate::kkt::{BundleMatrix, IterateState, SubproblemData, TraceMode};
use crate::linalg::{gaussian_matrix, gaussian_vector, orthonormalize};
use crate::symmat::{svec_unchecked, tri_len};

/// Subproblem modelled on the spectral bundle method for the max-cut
/// relaxation.
///
/// The graph is `G(N, p)` with Laplacian `L` and cost `C = L/4`. The cutting
/// model uses a random orthonormal `P` of `h` columns plus one aggregate
/// `Xbar` (stored as the orthant coordinate): for design variable `i` the
/// PSD part of column `i` of `B` is `svec(N P'e_i e_i'P)`, and `B0` holds
/// `svec(N P'CP)`. The trace is fixed at one, `H = I`, and
/// `b = -yhat - 1`, `delta = |yhat|^2 / 2` for a random center `yhat`.
pub fn gen_maxcut_like(nodes: usize, density: f64, order: usize, seed: u64) -> Result<SubproblemData> {
    if nodes == 0 || nodes > 500 {
        return Err(Error::Contract(format!("nodes must be in 1..=500, got {nodes}")));
    }
    if order == 0 || order > 20 || order > nodes {
        return Err(Error::Contract(format!("model order must be in 1..=min(20, nodes), got {order}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Contract(format!("density must be in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = nodes;
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                lap[(i, j)] -= 1.0;
                lap[(j, i)] -= 1.0;
                lap[(i, i)] += 1.0;
                lap[(j, j)] += 1.0;
            }
        }
    }
    let cost = lap / 4.0;
    let p = orthonormalize(&gaussian_matrix(&mut rng, n, order, 1.0), 1e-12);
    if p.ncols() != order {
        return Err(Error::Contract("random subspace lost rank".into()));
    }
    let g = gaussian_matrix(&mut rng, order, order, 1.0);
    let mut xbar = &g * g.transpose();
    xbar /= xbar.trace();

    let scale = n as f64;
    let spec = ConeSpec::new(1, vec![order]);
    let nt = spec.dim();
    let pxp = &p * &xbar * p.transpose();
    let pcp = p.transpose() * &cost * &p * scale;
    let mut bmat = DMatrix::zeros(nt, n);
    for i in 0..n {
        bmat[(0, i)] = scale * pxp[(i, i)];
        let pi = p.row(i).transpose();
        let col = svec_unchecked(&(&pi * pi.transpose() * scale));
        bmat.view_mut((1, i), (tri_len(order), 1)).copy_from(&col);
    }
    let mut b0 = DVector::zeros(nt);
    b0[0] = pcp.component_mul(&xbar).sum();
    b0.rows_mut(1, tri_len(order)).copy_from(&svec_unchecked(&pcp));

    let yhat = gaussian_vector(&mut rng, n);
    let b = -&yhat - DVector::from_element(n, 1.0);
    let delta = 0.5 * yhat.norm_squared();
    SubproblemData::unconstrained(
        DVector::from_element(n, 1.0),
        DMatrix::zeros(n, 0),
        b,
        delta,
        spec,
        b0,
        BundleMatrix::Dense(bmat),
        1.0,
        TraceMode::Equality,
    )
}

/// Parameters of [`gen_random`].
#[derive(Debug, Clone)]
pub struct RandomParams {
    pub m: usize,
    pub spec: ConeSpec,
    pub n_ineq: usize,
    pub n_eq: usize,
    pub box_fraction: f64,
    pub trace_mode: TraceMode,
    pub with_vh: bool,
}

/// Dense Gaussian instance with side constraints built around a random
/// point `y*`: two-sided rows `A y* -/+ U(0.5, 1.5)`, equality rows
/// `A y* = a`, and boxes `y* -/+ U(1, 2)` on a random subset of
/// `floor(box_fraction m)` coordinates.
pub fn gen_random(params: &RandomParams, seed: u64) -> Result<SubproblemData> {
    let RandomParams {
        m,
        ref spec,
        box_fraction,
        ..
    } = *params;
    if m == 0 || m > 500 || spec.dim() > 300 {
        return Err(Error::Contract(format!(
            "desk-scale limits exceeded: m = {m}, cone dimension = {}",
            spec.dim()
        )));
    }
    if !(0.0..=1.0).contains(&box_fraction) {
        return Err(Error::Contract(format!("box fraction must be in [0, 1], got {box_fraction}")));
    }
    spec.check_supported()?;
    let mut last_err = None;
    for attempt in 0..10u64 {
        match try_gen_random(params, seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9))) {
            Ok(d) => return Ok(d),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible random instance after 10 seeds: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn try_gen_random(params: &RandomParams, seed: u64) -> Result<SubproblemData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = params.m;
    let spec = params.spec.clone();
    let nt = spec.dim();
    let ha = params.n_ineq + params.n_eq;
    let bmat = gaussian_matrix(&mut rng, nt, m, 1.0 / (m as f64).sqrt());
    let b0 = gaussian_vector(&mut rng, nt);
    let a = gaussian_matrix(&mut rng, ha, m, 1.0 / (m as f64).sqrt());
    let ystar = gaussian_vector(&mut rng, m);
    let ay = &a * &ystar;
    let mut a_lo = DVector::zeros(ha);
    let mut a_hi = DVector::zeros(ha);
    for i in 0..ha {
        if i < params.n_ineq {
            a_lo[i] = ay[i] - rng.random_range(0.5..1.5);
            a_hi[i] = ay[i] + rng.random_range(0.5..1.5);
        } else {
            a_lo[i] = ay[i];
            a_hi[i] = ay[i];
        }
    }
    let mut y_lo = DVector::from_element(m, f64::NEG_INFINITY);
    let mut y_hi = DVector::from_element(m, f64::INFINITY);
    let n_box = (params.box_fraction * m as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..m).collect();
    for i in 0..n_box {
        let j = rng.random_range(i..m);
        idx.swap(i, j);
        let c = idx[i];
        y_lo[c] = ystar[c] - rng.random_range(1.0..2.0);
        y_hi[c] = ystar[c] + rng.random_range(1.0..2.0);
    }
    let v_h = if params.with_vh {
        orthonormalize(&gaussian_matrix(&mut rng, m, 2, 1.0), 1e-12)
    } else {
        DMatrix::zeros(m, 0)
    };
    let d_h = DVector::from_fn(m, |_, _| rng.random_range(0.5..2.0));
    let b = gaussian_vector(&mut rng, m);
    let data = SubproblemData {
        m,
        d_h,
        v_h,
        b,
        delta: 0.0,
        spec,
        b0,
        bmat: BundleMatrix::Dense(bmat),
        a,
        a_lo,
        a_hi,
        y_lo,
        y_hi,
        tau: 1.0,
        trace_mode: params.trace_mode,
    };
    data.validate()?;
    for i in 0..m {
        if !(ystar[i] > data.y_lo[i] && ystar[i] < data.y_hi[i]) {
            return Err(Error::Infeasible(format!("y*[{i}] outside its box")));
        }
    }
    Ok(data)
}

/// Random strictly interior cone point with eigenvalues bounded below by
/// `floor`.
pub fn random_cone_point<R: Rng + ?Sized>(rng: &mut R, spec: &ConeSpec, floor: f64) -> DVector<f64> {
    let mut v = DVector::zeros(spec.dim());
    for i in 0..spec.nonneg {
        v[i] = floor + rng.random::<f64>() * 2.0;
    }
    for b in spec.psd_blocks() {
        let g = gaussian_matrix(rng, b.order, b.order, 1.0 / (b.order as f64).sqrt());
        let mat = &g * g.transpose() + DMatrix::identity(b.order, b.order) * floor;
        v.rows_mut(b.offset, b.len()).copy_from(&svec_unchecked(&mat));
    }
    v
}

/// Random strictly interior primal-dual state (not on the central path),
/// used to exercise the Newton system away from any particular trajectory.
pub fn random_interior_state<R: Rng + ?Sized>(rng: &mut R, data: &SubproblemData, mu: f64) -> IterateState {
    let m = data.m;
    let ha = data.h_a();
    let pos = |rng: &mut R| 0.2 + rng.random::<f64>() * 1.8;
    let mut y = vec![0.0; m];
    let mut s_ylo = vec![0.0; m];
    let mut s_yhi = vec![0.0; m];
    for i in 0..m {
        let (lo, hi) = (data.y_lo[i], data.y_hi[i]);
        let t: f64 = rng.random_range(0.2..0.8);
        y[i] = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => lo + t * (hi - lo),
            (true, false) => lo + 0.5 + t,
            (false, true) => hi - 0.5 - t,
            (false, false) => rng.random_range(-1.0..1.0),
        };
        if lo.is_finite() {
            s_ylo[i] = pos(rng);
        }
        if hi.is_finite() {
            s_yhi[i] = pos(rng);
        }
    }
    let mut w = vec![0.0; ha];
    let mut s = vec![0.0; ha];
    let mut s_alo = vec![0.0; ha];
    let mut s_ahi = vec![0.0; ha];
    for i in 0..ha {
        let (lo, hi) = (data.a_lo[i], data.a_hi[i]);
        s[i] = rng.random_range(-1.0..1.0);
        if lo == hi {
            w[i] = lo;
            continue;
        }
        let t: f64 = rng.random_range(0.2..0.8);
        w[i] = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => lo + t * (hi - lo),
            (true, false) => lo + 0.5 + t,
            _ => hi - 0.5 - t,
        };
        if lo.is_finite() {
            s_alo[i] = pos(rng);
        }
        if hi.is_finite() {
            s_ahi[i] = pos(rng);
        }
    }
    let x = random_cone_point(rng, &data.spec, 0.1);
    let z = random_cone_point(rng, &data.spec, 0.1);
    let (sigma, zeta) = match data.trace_mode {
        TraceMode::UpperBound => (pos(rng), pos(rng)),
        TraceMode::Equality => (0.0, rng.random_range(-1.0..1.0)),
    };
    IterateState {
        y,
        w,
        x: x.iter().copied().collect(),
        sigma,
        s,
        z: z.iter().copied().collect(),
        zeta,
        s_alo,
        s_ahi,
        s_ylo,
        s_yhi,
        mu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxcut_is_deterministic() {
        let a = gen_maxcut_like(30, 0.3, 4, 7).unwrap();
        let b = gen_maxcut_like(30, 0.3, 4, 7).unwrap();
        assert_eq!(a.bmat.to_dense(), b.bmat.to_dense());
        assert_eq!(a.b, b.b);
        assert_eq!(a.b0, b.b0);
        let c = gen_maxcut_like(30, 0.3, 4, 8).unwrap();
        assert_ne!(a.b, c.b);
    }

    #[test]
    fn maxcut_order_one_has_scalar_blocks() {
        let d = gen_maxcut_like(12, 0.5, 1, 1).unwrap();
        assert_eq!(d.cone_dim(), 2);
        assert_eq!(d.bmat.nrows(), 2);
        assert_eq!(d.bmat.ncols(), 12);
    }

    #[test]
    fn maxcut_parameter_checks() {
        assert!(gen_maxcut_like(600, 0.3, 4, 0).is_err());
        assert!(gen_maxcut_like(30, 0.0, 4, 0).is_err());
        assert!(gen_maxcut_like(30, 0.3, 21, 0).is_err());
    }

    #[test]
    fn random_instance_shapes() {
        let p = RandomParams {
            m: 20,
            spec: ConeSpec::new(3, vec![3]),
            n_ineq: 2,
            n_eq: 1,
            box_fraction: 0.25,
            trace_mode: TraceMode::UpperBound,
            with_vh: true,
        };
        let d = gen_random(&p, 3).unwrap();
        assert_eq!(d.h_a(), 3);
        assert_eq!(d.eq_rows(), vec![2]);
        assert_eq!(d.y_lo.iter().filter(|v| v.is_finite()).count(), 5);
        assert_eq!(d.v_h.ncols(), 2);
        let again = gen_random(&p, 3).unwrap();
        assert_eq!(again.a, d.a);
    }
}
