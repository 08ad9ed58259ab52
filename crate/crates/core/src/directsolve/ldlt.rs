//! Symmetric indefinite `P A P' = L D L'` with Bunch-Kaufman partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pivot {
    One,
    Two,
}

/// Factorization of a dense symmetric matrix. Only the lower triangle of
/// the input is read.
#[derive(Debug, Clone)]
pub struct Ldlt {
    /// Unit lower triangular `L` below the diagonal, `D` on the diagonal and
    /// the first subdiagonal of 2x2 pivots.
    factor: DMatrix<f64>,
    pivots: Vec<Pivot>,
    /// Row `i` of `P A P'` is row `perm[i]` of `A`.
    perm: Vec<usize>,
}

fn swap_sym(a: &mut DMatrix<f64>, r1: usize, r2: usize) {
    if r1 == r2 {
        return;
    }
    // whole-row swap carries the computed columns of L along; the upper
    // parts of columns r1, r2 above the active block are zero
    a.swap_rows(r1, r2);
    a.swap_columns(r1, r2);
}

impl Ldlt {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Contract("LDL' of a non-square matrix".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LDL' input"));
        }
        // symmetric working copy built from the lower triangle
        let mut w = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                w[(i, j)] = a[(i, j)];
                w[(j, i)] = a[(i, j)];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut k = 0;
        while k < n {
            let absakk = w[(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0f64);
            for i in (k + 1)..n {
                if w[(i, k)].abs() > colmax {
                    colmax = w[(i, k)].abs();
                    imax = i;
                }
            }
            if absakk.max(colmax) == 0.0 {
                return Err(Error::Singular {
                    pivot: k,
                    diag: absakk,
                    colmax,
                });
            }
            let (kind, swap_with) = if absakk >= ALPHA * colmax {
                (Pivot::One, k)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(w[(imax, j)].abs());
                    }
                }
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (Pivot::One, k)
                } else if w[(imax, imax)].abs() >= ALPHA * rowmax {
                    (Pivot::One, imax)
                } else {
                    (Pivot::Two, imax)
                }
            };
            match kind {
                Pivot::One => {
                    swap_sym(&mut w, k, swap_with);
                    perm.swap(k, swap_with);
                    let d = w[(k, k)];
                    if d == 0.0 {
                        return Err(Error::Singular {
                            pivot: k,
                            diag: 0.0,
                            colmax,
                        });
                    }
                    let l: Vec<f64> = ((k + 1)..n).map(|i| w[(i, k)] / d).collect();
                    for j in (k + 1)..n {
                        let wjk = w[(j, k)];
                        for i in j..n {
                            let upd = w[(i, j)] - l[i - k - 1] * wjk;
                            w[(i, j)] = upd;
                            w[(j, i)] = upd;
                        }
                    }
                    for i in (k + 1)..n {
                        w[(i, k)] = l[i - k - 1];
                        w[(k, i)] = 0.0;
                    }
                    pivots.push(Pivot::One);
                    k += 1;
                }
                Pivot::Two => {
                    if k + 1 >= n {
                        return Err(Error::Singular {
                            pivot: k,
                            diag: absakk,
                            colmax,
                        });
                    }
                    swap_sym(&mut w, k + 1, swap_with);
                    perm.swap(k + 1, swap_with);
                    let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                    let det = d11 * d22 - d21 * d21;
                    if det == 0.0 || !det.is_finite() {
                        return Err(Error::Singular {
                            pivot: k,
                            diag: absakk,
                            colmax,
                        });
                    }
                    let mut l1 = vec![0.0; n];
                    let mut l2 = vec![0.0; n];
                    for i in (k + 2)..n {
                        let (a1, a2) = (w[(i, k)], w[(i, k + 1)]);
                        l1[i] = (a1 * d22 - a2 * d21) / det;
                        l2[i] = (a2 * d11 - a1 * d21) / det;
                    }
                    for j in (k + 2)..n {
                        let (wj1, wj2) = (w[(j, k)], w[(j, k + 1)]);
                        for i in j..n {
                            let upd = w[(i, j)] - l1[i] * wj1 - l2[i] * wj2;
                            w[(i, j)] = upd;
                            w[(j, i)] = upd;
                        }
                    }
                    for i in (k + 2)..n {
                        w[(i, k)] = l1[i];
                        w[(i, k + 1)] = l2[i];
                        w[(k, i)] = 0.0;
                        w[(k + 1, i)] = 0.0;
                    }
                    w[(k, k + 1)] = 0.0;
                    pivots.push(Pivot::Two);
                    pivots.push(Pivot::Two);
                    k += 2;
                }
            }
        }
        Ok(Ldlt {
            factor: w,
            pivots,
            perm,
        })
    }

    pub fn order(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.order();
        let f = &self.factor;
        let mut y = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        // forward: L y = P b, skipping the coupled entry of 2x2 blocks
        let mut k = 0;
        while k < n {
            let width = if self.pivots[k] == Pivot::Two { 2 } else { 1 };
            for c in k..k + width {
                let yc = y[c];
                for i in (k + width)..n {
                    y[i] -= f[(i, c)] * yc;
                }
            }
            k += width;
        }
        // diagonal blocks
        let mut k = 0;
        while k < n {
            if self.pivots[k] == Pivot::Two {
                let (d11, d21, d22) = (f[(k, k)], f[(k + 1, k)], f[(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                let (r1, r2) = (y[k], y[k + 1]);
                y[k] = (d22 * r1 - d21 * r2) / det;
                y[k + 1] = (d11 * r2 - d21 * r1) / det;
                k += 2;
            } else {
                y[k] /= f[(k, k)];
                k += 1;
            }
        }
        // backward: L' x = y
        let mut k = n;
        while k > 0 {
            let width = if k >= 2 && self.pivots[k - 1] == Pivot::Two { 2 } else { 1 };
            let start = k - width;
            for c in start..k {
                let mut acc = y[c];
                for i in k..n {
                    acc -= f[(i, c)] * y[i];
                }
                y[c] = acc;
            }
            k = start;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let x = self.solve(b);
        let r = b - a * &x;
        x + self.solve(&r)
    }
}
