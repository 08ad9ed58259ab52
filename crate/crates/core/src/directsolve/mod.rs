//! Dense reference solver for the full Newton system.

pub mod ldlt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::kkt::{KKTContext, SubproblemData};

/// Largest system order `dense_assemble` accepts.
pub const DENSE_SIZE_CAP: usize = 3000;

/// Explicit Newton matrix with block offsets `(0, m, m + h_A, m + h_A + n(t))`.
#[derive(Debug, Clone)]
pub struct DenseKKT {
    pub matrix: DMatrix<f64>,
    pub offsets: [usize; 4],
}

pub fn dense_assemble(ctx: &KKTContext, data: &SubproblemData) -> Result<DenseKKT> {
    let (m, ha, nt) = (data.m, data.h_a(), data.cone_dim());
    let order = m + ha + nt + 1;
    if order > DENSE_SIZE_CAP {
        return Err(Error::TooLarge {
            order,
            cap: DENSE_SIZE_CAP,
        });
    }
    let (os, ox, oz) = (m, m + ha, m + ha + nt);
    let mut k = DMatrix::zeros(order, order);

    let mut h = DMatrix::from_diagonal(&(&data.d_h + &ctx.d_y));
    if data.v_h.ncols() > 0 {
        h += &data.v_h * data.v_h.transpose();
    }
    k.view_mut((0, 0), (m, m)).copy_from(&h);

    if ha > 0 {
        k.view_mut((os, 0), (ha, m)).copy_from(&data.a);
        k.view_mut((0, os), (m, ha)).copy_from(&data.a.transpose());
        for &i in &ctx.ineq_rows {
            k[(os + i, os + i)] = -1.0 / ctx.d_w[i];
        }
    }

    if nt > 0 {
        let b = data.bmat.to_dense();
        k.view_mut((ox, 0), (nt, m)).copy_from(&b);
        k.view_mut((0, ox), (m, nt)).copy_from(&b.transpose());
        for j in 0..nt {
            let mut e = DVector::zeros(nt);
            e[j] = 1.0;
            let col = ctx.scaling.apply_scaling_inv(&e)?;
            for i in 0..nt {
                k[(ox + i, ox + j)] = -col[i];
            }
        }
        let one = data.spec.unit();
        for i in 0..nt {
            k[(ox + i, oz)] = -one[i];
            k[(oz, ox + i)] = -one[i];
        }
    }
    k[(oz, oz)] = ctx.scaling.sigma_over_zeta;
    crate::linalg::symmetrize(&mut k);
    Ok(DenseKKT {
        matrix: k,
        offsets: [0, os, ox, oz],
    })
}

/// Bunch-Kaufman solve with one step of iterative refinement.
pub fn dense_solve(k: &DenseKKT, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("dense_solve", k.matrix.nrows(), rhs.len())?;
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(rhs.len()));
    }
    let f = ldlt::Ldlt::factor(&k.matrix)?;
    Ok(f.solve_refined(&k.matrix, rhs))
}
