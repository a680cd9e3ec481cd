//! Lagged covariance estimators.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::TimeSeriesSample;

/// Lagged covariance matrices `S(0), S(1), ..., S(L)` with
/// `S_ab(τ) = E{x_a(n) x_b(n+τ)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSequence {
    lags: Vec<DMatrix<f64>>,
}

impl CovarianceSequence {
    pub fn from_lags(lags: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = lags
            .first()
            .ok_or_else(|| Error::InvalidInput("covariance sequence needs lag 0".into()))?;
        let p = first.nrows();
        if p == 0 || lags.iter().any(|m| m.nrows() != p || m.ncols() != p) {
            return Err(Error::InvalidInput("lag matrices must all be p × p".into()));
        }
        if lags.iter().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariance sequence has non-finite entries".into()));
        }
        let scale = first.amax().max(f64::MIN_POSITIVE);
        if (first - first.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("lag-0 covariance is not symmetric".into()));
        }
        Ok(Self { lags })
    }

    /// Scalar sequence from autocovariances `[S(0), S(1), ...]`.
    pub fn scalar(autocov: &[f64]) -> Result<Self> {
        Self::from_lags(autocov.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn lag(&self, tau: usize) -> &DMatrix<f64> {
        &self.lags[tau]
    }

    pub fn lags(&self) -> &[DMatrix<f64>] {
        &self.lags
    }

    /// Scalar autocovariances; only meaningful for p = 1.
    pub fn autocovariances(&self) -> Vec<f64> {
        self.lags.iter().map(|m| m[(0, 0)]).collect()
    }

    pub fn truncate(&self, max_lag: usize) -> Self {
        Self {
            lags: self.lags[..=max_lag.min(self.max_lag())].to_vec(),
        }
    }

    /// Sequence of `A x(n)`: every lag becomes `A S(τ) Aᵀ`.
    pub fn transform(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::Dimension { expected: a.ncols(), got: self.dim() });
        }
        let at = a.transpose();
        let mut lags: Vec<DMatrix<f64>> = self.lags.iter().map(|s| a * s * &at).collect();
        let s0 = &mut lags[0];
        let sym = (&*s0 + s0.transpose()) * 0.5;
        *s0 = sym;
        Ok(Self { lags })
    }
}

/// `Ŝ = (1/N) Σ x(k) x(k)ᵀ`; the caller is expected to center the data.
pub fn sample_covariance(x: &TimeSeriesSample) -> DMatrix<f64> {
    lag_matrix(x, 0)
}

/// `Ŝ_ab(τ) = (1/N) Σ_{k=1}^{N-τ} x_a(k) x_b(k+τ)` for τ = 0..=max_lag.
///
/// The normalisation is 1/N at every lag.
pub fn sample_cross_covariance(x: &TimeSeriesSample, max_lag: usize) -> Result<CovarianceSequence> {
    if max_lag >= x.len() {
        return Err(Error::InvalidLag { lag: max_lag, len: x.len() });
    }
    let lags = (0..=max_lag).map(|tau| lag_matrix(x, tau)).collect();
    Ok(CovarianceSequence { lags })
}

fn lag_matrix(x: &TimeSeriesSample, tau: usize) -> DMatrix<f64> {
    let p = x.dim();
    let n = x.len();
    let data = x.as_slice();
    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for k in 0..n - tau {
                acc += data[k * p + a] * data[(k + tau) * p + b];
            }
            out[(a, b)] = acc / n as f64;
        }
    }
    out
}
