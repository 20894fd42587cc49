//! Exact column interpolative decomposition via exhaustive determinant
//! maximization and Cramer's rule, plus the skeleton/CUR verification.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{det, rank_decomposition, singular_values, Lu};

/// Exhaustive search cap: C(N, R) combinations beyond this are refused.
const SEARCH_LIMIT: u128 = 100_000;

/// Relative singular-value threshold for rank detection.
const RANK_TOL: f64 = 1e-8;

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Expansion coefficients by Cramer's rule: e_kl is the determinant of
/// `ctil` with column k replaced by column l of `mblk`, divided by
/// det(ctil). Equals the column-wise linear solve of ctil E = mblk.
pub fn cramer_expansion(ctil: &ArrayView2<f64>, mblk: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let r = ctil.nrows();
    if ctil.ncols() != r {
        return Err(Error::DimensionMismatch(
            "basis block must be square".into(),
        ));
    }
    if mblk.nrows() != r {
        return Err(Error::DimensionMismatch(format!(
            "basis block has {r} rows but expansion block has {}",
            mblk.nrows()
        )));
    }
    let den = det(ctil)?;
    if den == 0.0 {
        return Err(Error::LinearSolve("singular basis block".into()));
    }
    let cols = mblk.ncols();
    let mut e = Array2::<f64>::zeros((r, cols));
    let mut replaced = ctil.to_owned();
    for l in 0..cols {
        for k in 0..r {
            for i in 0..r {
                replaced[[i, k]] = mblk[[i, l]];
            }
            e[[k, l]] = det(&replaced.view())? / den;
            for i in 0..r {
                replaced[[i, k]] = ctil[[i, k]];
            }
        }
    }
    Ok(e)
}

/// Enumerates R-subsets of 0..n in lexicographic order, keeping the subset
/// with the largest absolute determinant of F[:, J]. Ties (within 1e-12
/// relative) keep the earlier subset, which pins the output deterministically.
fn best_determinant_subset(f: &ArrayView2<f64>, r: usize) -> Result<Vec<usize>> {
    let n = f.ncols();
    let count = binomial(n, r);
    if count > SEARCH_LIMIT {
        return Err(Error::SearchInfeasible {
            n,
            r,
            count,
            limit: SEARCH_LIMIT,
        });
    }
    let mut subset: Vec<usize> = (0..r).collect();
    let mut best: Vec<usize> = subset.clone();
    let mut best_det = -1.0f64;
    let mut block = Array2::<f64>::zeros((r, r));
    loop {
        for (j, &col) in subset.iter().enumerate() {
            block.column_mut(j).assign(&f.column(col));
        }
        let d = det(&block.view())?.abs();
        if d > best_det * (1.0 + 1e-12) {
            best_det = d;
            best = subset.clone();
        }
        // next lexicographic combination
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if subset[i] != i + n - r {
                break;
            }
            if i == 0 {
                return Ok(best);
            }
        }
        subset[i] += 1;
        for j in i + 1..r {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Exact column ID of a rank-R matrix: A = C W with C = A[:, J],
/// W[:, J] = I_R, and max |W| <= 1.
///
/// The skeleton indices J maximize |det| over all R-subsets of columns of
/// the row-basis factor, searched exhaustively (error when C(N, R) exceeds
/// the limit). The numeric rank must equal R within the singular-value gap.
pub fn exact_column_id(
    a: &ArrayView2<f64>,
    rank: usize,
) -> Result<(Array2<f64>, Array2<f64>, Vec<usize>)> {
    let (m, n) = (a.nrows(), a.ncols());
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} out of range for a {m}x{n} matrix"
        )));
    }
    let sv = singular_values(a);
    let detected = sv.iter().filter(|&&x| x > RANK_TOL * sv[0]).count();
    if detected != rank {
        return Err(Error::RankMismatch {
            expected: rank,
            detected,
        });
    }
    let (_, f) = rank_decomposition(a, rank);
    let j = best_determinant_subset(&f.view(), rank)?;
    let i: Vec<usize> = (0..n).filter(|c| !j.contains(c)).collect();

    let mut ctil = Array2::<f64>::zeros((rank, rank));
    for (col, &orig) in j.iter().enumerate() {
        ctil.column_mut(col).assign(&f.column(orig));
    }
    let mut mblk = Array2::<f64>::zeros((rank, i.len()));
    for (col, &orig) in i.iter().enumerate() {
        mblk.column_mut(col).assign(&f.column(orig));
    }
    let e = cramer_expansion(&ctil.view(), &mblk.view())?;

    let mut w = Array2::<f64>::zeros((rank, n));
    for (row, &orig) in j.iter().enumerate() {
        w[[row, orig]] = 1.0;
    }
    for (col, &orig) in i.iter().enumerate() {
        for row in 0..rank {
            w[[row, orig]] = e[[row, col]];
        }
    }
    let mut c = Array2::<f64>::zeros((m, rank));
    for (col, &orig) in j.iter().enumerate() {
        c.column_mut(col).assign(&a.column(orig));
    }
    Ok((c, w, j))
}

/// Row ID by transposition: A = Z R with R = A[S, :] and Z[S, :] = I.
pub fn transpose_row_id(
    a: &ArrayView2<f64>,
    rank: usize,
) -> Result<(Array2<f64>, Array2<f64>, Vec<usize>)> {
    let at = a.t().to_owned();
    let (c0, w0, s_rows) = exact_column_id(&at.view(), rank)?;
    Ok((w0.t().to_owned(), c0.t().to_owned(), s_rows))
}

/// Relative skeleton reconstruction error ||A - C U^{-1} R||_F / ||A||_F
/// with C = A[:, J], R = A[I, :], U = A[I, J]. A singular intersection is
/// an error.
pub fn skeleton_check(a: &ArrayView2<f64>, i_rows: &[usize], j_cols: &[usize]) -> Result<f64> {
    if i_rows.len() != j_cols.len() {
        return Err(Error::DimensionMismatch(
            "row and column index sets must have equal size".into(),
        ));
    }
    let r = i_rows.len();
    let mut u = Array2::<f64>::zeros((r, r));
    for (ri, &row) in i_rows.iter().enumerate() {
        for (ci, &col) in j_cols.iter().enumerate() {
            u[[ri, ci]] = a[[row, col]];
        }
    }
    let scale = u.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1.0);
    let lu = Lu::decompose(&u.view())?;
    if lu.min_pivot() < 1e-12 * scale {
        return Err(Error::SingularIntersection);
    }
    let mut c = Array2::<f64>::zeros((a.nrows(), r));
    for (ci, &col) in j_cols.iter().enumerate() {
        c.column_mut(ci).assign(&a.column(col));
    }
    let mut rmat = Array2::<f64>::zeros((r, a.ncols()));
    for (ri, &row) in i_rows.iter().enumerate() {
        rmat.row_mut(ri).assign(&a.row(row));
    }
    let u_inv_r = lu.solve_mat(&rmat.view())?;
    let recon = c.dot(&u_inv_r);
    let num: f64 = (a.to_owned() - &recon).iter().map(|v| v * v).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(num / den.max(1e-300))
}
