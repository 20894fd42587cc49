//! Small dense linear-algebra kernels used throughout the crate.
//!
//! Factor dimensions are small (K, R in the tens at most), so plain
//! Cholesky / LU / Jacobi implementations on `ndarray` types are enough;
//! no external LAPACK backend is required.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::LinearSolve(format!(
                        "matrix not positive definite (pivot {sum:.3e} at {i})"
                    )));
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves L L^T x = b given the lower Cholesky factor.
pub fn chol_solve(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let t = y[k];
            y[i] -= l[[i, k]] * t;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = y[k];
            y[i] -= l[[k, i]] * t;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Solves A X = B column by column via Cholesky (A symmetric positive definite).
pub fn chol_solve_mat(l: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros(b.dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let sol = chol_solve(l, &col);
        x.column_mut(j).assign(&sol);
    }
    x
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let eye = Array2::<f64>::eye(a.nrows());
    Ok(chol_solve_mat(&l.view(), &eye.view()))
}

/// Compact LU decomposition with partial pivoting.
pub struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn decompose(a: &ArrayView2<f64>) -> Result<Lu> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut max = lu[[k, k]].abs();
            for i in (k + 1)..n {
                if lu[[i, k]].abs() > max {
                    max = lu[[i, k]].abs();
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[[k, k]];
            if piv == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[[i, k]] / piv;
                lu[[i, k]] = f;
                for j in (k + 1)..n {
                    lu[[i, j]] -= f * lu[[k, j]];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        let mut d = self.sign;
        for i in 0..self.lu.nrows() {
            d *= self.lu[[i, i]];
        }
        d
    }

    /// Magnitude of the smallest pivot, a cheap singularity indicator.
    pub fn min_pivot(&self) -> f64 {
        (0..self.lu.nrows())
            .map(|i| self.lu[[i, i]].abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, b: &ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.lu.nrows();
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            y[i] = b[self.perm[i]];
            for k in 0..i {
                let t = y[k];
                y[i] -= self.lu[[i, k]] * t;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = y[k];
                y[i] -= self.lu[[i, k]] * t;
            }
            let piv = self.lu[[i, i]];
            if piv == 0.0 {
                return Err(Error::LinearSolve("singular matrix in LU solve".into()));
            }
            y[i] /= piv;
        }
        Ok(y)
    }

    pub fn solve_mat(&self, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = Array2::<f64>::zeros(b.dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            x.column_mut(j).assign(&self.solve(&col)?);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Array2<f64>> {
        let eye = Array2::<f64>::eye(self.lu.nrows());
        self.solve_mat(&eye.view())
    }
}

/// Determinant via LU with partial pivoting.
pub fn det(a: &ArrayView2<f64>) -> Result<f64> {
    Ok(Lu::decompose(a)?.det())
}

/// Singular values of a general matrix via one-sided Jacobi rotations,
/// sorted in descending order.
pub fn singular_values(a: &ArrayView2<f64>) -> Vec<f64> {
    // Work on the transpose when there are more columns than rows so the
    // rotated matrix always has at least as many rows as columns.
    let mut u = if a.nrows() >= a.ncols() {
        a.to_owned()
    } else {
        a.t().to_owned()
    };
    let n = u.ncols();
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..u.nrows() {
                    app += u[[i, p]] * u[[i, p]];
                    aqq += u[[i, q]] * u[[i, q]];
                    apq += u[[i, p]] * u[[i, q]];
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                off = off.max(apq.abs());
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.nrows() {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
            }
        }
        if off == 0.0 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| u.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Householder QR with column pivoting: A P = Q R.
///
/// Returns (Q with `min(M,N)` columns, R upper-trapezoidal, pivot order),
/// where `pivots[j]` is the original column index placed at position j.
pub fn pivoted_qr(a: &ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let m = a.nrows();
    let n = a.ncols();
    let k = m.min(n);
    let mut r = a.to_owned();
    let mut q = Array2::<f64>::eye(m);
    let mut pivots: Vec<usize> = (0..n).collect();
    let mut col_norms: Vec<f64> = (0..n)
        .map(|j| r.column(j).iter().map(|v| v * v).sum())
        .collect();

    for step in 0..k {
        let mut p = step;
        let mut best = -1.0f64;
        for j in step..n {
            let norm: f64 = r.slice(s![step.., j]).iter().map(|v| v * v).sum();
            col_norms[j] = norm;
            if norm > best {
                best = norm;
                p = j;
            }
        }
        if p != step {
            for i in 0..m {
                r.swap([i, step], [i, p]);
            }
            pivots.swap(step, p);
            col_norms.swap(step, p);
        }
        let alpha: f64 = r.slice(s![step.., step]).iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let alpha = if r[[step, step]] > 0.0 { -alpha } else { alpha };
        let mut v = Array1::<f64>::zeros(m - step);
        for i in step..m {
            v[i - step] = r[[i, step]];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in step..n {
            let dot: f64 = (step..m).map(|i| v[i - step] * r[[i, j]]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in step..m {
                r[[i, j]] -= f * v[i - step];
            }
        }
        for jq in 0..m {
            let dot: f64 = (step..m).map(|i| v[i - step] * q[[jq, i]]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in step..m {
                q[[jq, i]] -= f * v[i - step];
            }
        }
    }
    (q.slice(s![.., ..k]).to_owned(), r.slice(s![..k, ..]).to_owned(), pivots)
}

/// Rank decomposition A = D F with D of full column rank and F of full row
/// rank, both with `rank` columns/rows, built from a pivoted QR.
pub fn rank_decomposition(a: &ArrayView2<f64>, rank: usize) -> (Array2<f64>, Array2<f64>) {
    let (q, r, pivots) = pivoted_qr(a);
    let n = a.ncols();
    let d = q.slice(s![.., ..rank]).to_owned();
    // Undo the column permutation: F[:, pivots[j]] = R[:rank, j].
    let mut f = Array2::<f64>::zeros((rank, n));
    for (j, &orig) in pivots.iter().enumerate() {
        for i in 0..rank {
            f[[i, orig]] = r[[i, j]];
        }
    }
    (d, f)
}
