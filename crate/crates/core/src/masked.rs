//! Dense matrix with an observation mask, plus the factor-state container
//! shared by every fitter in the crate.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Dense M x N matrix paired with a boolean observation mask.
///
/// Everything labelled "masked" touches only entries where the mask is true,
/// so unobserved positions may hold arbitrary values (even NaN).
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
}

impl MaskedMatrix {
    pub fn new(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::DimensionMismatch(format!(
                "values {:?} vs mask {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        Ok(Self { values, mask })
    }

    /// Fully observed matrix.
    pub fn full(values: Array2<f64>) -> Self {
        let mask = Array2::from_elem(values.dim(), true);
        Self { values, mask }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Number of observed entries.
    pub fn nobs(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn observed(&self, m: usize, n: usize) -> bool {
        self.mask[[m, n]]
    }

    /// Observed column indices of row `m`.
    pub fn row_observed(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.ncols()).filter(move |&n| self.mask[[m, n]])
    }

    /// Observed row indices of column `n`.
    pub fn col_observed(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nrows()).filter(move |&m| self.mask[[m, n]])
    }

    /// Mean over observed entries.
    pub fn observed_mean(&self) -> Result<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for ((_, v), &obs) in self.values.indexed_iter().zip(self.mask.iter()) {
            if obs {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(sum / count as f64)
    }
}

/// Factor pair W (M x K) and Z (K x N), optional middle factor F for
/// tri-factorization (then W is M x K, F is K x L, Z is L x N), and the
/// noise variance sigma^2.
#[derive(Debug, Clone)]
pub struct FactorState {
    pub w: Array2<f64>,
    pub z: Array2<f64>,
    pub f: Option<Array2<f64>>,
    pub sigma2: f64,
}

impl FactorState {
    pub fn new(w: Array2<f64>, z: Array2<f64>, sigma2: f64) -> Result<Self> {
        Self::with_middle(w, None, z, sigma2)
    }

    pub fn with_middle(
        w: Array2<f64>,
        f: Option<Array2<f64>>,
        z: Array2<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        if sigma2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        match &f {
            None => {
                if w.ncols() != z.nrows() || w.ncols() == 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "W is {}x{} but Z is {}x{}",
                        w.nrows(),
                        w.ncols(),
                        z.nrows(),
                        z.ncols()
                    )));
                }
            }
            Some(fm) => {
                if w.ncols() != fm.nrows() || fm.ncols() != z.nrows() || w.ncols() == 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "W is {}x{}, F is {}x{}, Z is {}x{}",
                        w.nrows(),
                        w.ncols(),
                        fm.nrows(),
                        fm.ncols(),
                        z.nrows(),
                        z.ncols()
                    )));
                }
            }
        }
        Ok(Self { w, z, f, sigma2 })
    }

    pub fn nrows(&self) -> usize {
        self.w.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.z.ncols()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// Predicted value for entry (m, n): w_m' z_n, or w_m' F z_n with a
    /// middle factor.
    pub fn predict(&self, m: usize, n: usize) -> f64 {
        match &self.f {
            None => dot(self.w.row(m), self.z.column(n)),
            Some(fm) => {
                let mut acc = 0.0;
                for k in 0..self.w.ncols() {
                    let mut inner = 0.0;
                    for l in 0..fm.ncols() {
                        inner += fm[[k, l]] * self.z[[l, n]];
                    }
                    acc += self.w[[m, k]] * inner;
                }
                acc
            }
        }
    }

    /// Full reconstruction W Z (or W F Z).
    pub fn reconstruct(&self) -> Array2<f64> {
        match &self.f {
            None => self.w.dot(&self.z),
            Some(fm) => self.w.dot(fm).dot(&self.z),
        }
    }
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn check_shapes(a: &MaskedMatrix, s: &FactorState) -> Result<()> {
    if a.nrows() != s.nrows() || a.ncols() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{} but factors reconstruct {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

/// Mean squared error over observed entries:
/// (1/|Omega|) sum_{(m,n) in Omega} (a_mn - w_m' z_n)^2.
pub fn masked_mse(a: &MaskedMatrix, s: &FactorState) -> Result<f64> {
    check_shapes(a, s)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] {
                let r = a.values[[m, n]] - s.predict(m, n);
                sum += r * r;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Un-normalized sum of squared residuals over observed entries.
pub fn frobenius_loss(a: &MaskedMatrix, s: &FactorState) -> Result<f64> {
    check_shapes(a, s)?;
    if a.nobs() == 0 {
        return Err(Error::EmptyMask);
    }
    if a.is_fully_observed() {
        let diff = &a.values - &s.reconstruct();
        return Ok(diff.iter().map(|v| v * v).sum());
    }
    let mut sum = 0.0;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] {
                let r = a.values[[m, n]] - s.predict(m, n);
                sum += r * r;
            }
        }
    }
    Ok(sum)
}
