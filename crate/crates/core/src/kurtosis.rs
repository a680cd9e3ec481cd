//! Mardia's multivariate kurtosis and its null distributions for i.i.d.,
//! colored scalar and colored bivariate samples.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate_null, neumaier, Calibration, CalibrationBudget, GaussianSurrogate};
use crate::error::{Error, Result};
use crate::moments::{sample_covariance, sample_cross_covariance, CovarianceSequence};
use crate::report::{check_alpha, NullMoments, NullSource, TestReport};
use crate::series::{center, TimeSeriesSample};

/// Covariances with a condition number above this are treated as singular.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Mardia's test assuming independent samples, for any dimension.
    MardiaIid(usize),
    /// Scalar test with the colored closed-form null moments.
    ColoredScalar,
    /// Bivariate test with a calibrated colored null.
    ColoredBivariate,
}

impl TestKind {
    pub fn required_dim(&self) -> usize {
        match *self {
            TestKind::MardiaIid(p) => p,
            TestKind::ColoredScalar => 1,
            TestKind::ColoredBivariate => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KurtosisValue {
    pub value: f64,
    pub dim: usize,
    pub len: usize,
}

/// `B̂_p(N) = (1/N) Σ (x(n)ᵀ Ŝ⁻¹ x(n))²` on the centered sample.
pub fn mardia_kurtosis(x: &TimeSeriesSample) -> Result<KurtosisValue> {
    let xc = center(x);
    let (p, n) = (xc.dim(), xc.len());
    let s = sample_covariance(&xc);
    let chol = whitening_factor(&s)?;
    let data = xc.as_slice();
    let mut y = vec![0.0; p];
    let mut acc = 0.0;
    for t in 0..n {
        let v = &data[t * p..(t + 1) * p];
        // Forward substitution L y = x(n); then x(n)ᵀ Ŝ⁻¹ x(n) = |y|².
        let mut d = 0.0;
        for i in 0..p {
            let mut r = v[i];
            for k in 0..i {
                r -= chol[(i, k)] * y[k];
            }
            y[i] = r / chol[(i, i)];
            d += y[i] * y[i];
        }
        acc += d * d;
    }
    Ok(KurtosisValue { value: acc / n as f64, dim: p, len: n })
}

// Lower Cholesky factor of Ŝ after a conditioning check.
fn whitening_factor(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION_NUMBER {
        return Err(Error::Degenerate(format!(
            "sample covariance is singular or ill-conditioned (eigenvalues {lo:.3e} .. {hi:.3e}); \
             check for constant or collinear channels"
        )));
    }
    s.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Degenerate("sample covariance is not positive definite".into()))
}

/// Mean `p(p+2)(N−1)/(N+1)` and variance `8p(p+2)/N`.
pub fn iid_null_moments(p: usize, n: usize) -> Result<NullMoments> {
    if p == 0 || n < 2 {
        return Err(Error::InvalidInput(format!("need p ≥ 1 and N ≥ 2, got p = {p}, N = {n}")));
    }
    let (pf, nf) = (p as f64, n as f64);
    let k = pf * (pf + 2.0);
    NullMoments::new(k * (nf - 1.0) / (nf + 1.0), 8.0 * k / nf, NullSource::IidClosedForm)
}

/// Colored scalar null moments from the autocovariances in `cov`:
///
/// `E = 3 − 6/N − (12/N²) Σ (N−τ) ρ(τ)²`,
/// `Var = (24/N) [1 + (2/N) Σ (N−τ) ρ(τ)⁴]`,
///
/// with ρ(τ) = S(τ)/S(0) and τ running over `1..=min(L, N−1)`.
pub fn colored_scalar_null_moments(cov: &CovarianceSequence, n: usize) -> Result<NullMoments> {
    if cov.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: cov.dim() });
    }
    if n < 2 {
        return Err(Error::InvalidInput("need N ≥ 2".into()));
    }
    let acov = cov.autocovariances();
    let s0 = acov[0];
    if !(s0 > 0.0) {
        return Err(Error::Degenerate(format!("lag-0 variance must be positive, got {s0}")));
    }
    let nf = n as f64;
    let top = cov.max_lag().min(n - 1);
    let weighted = |power: i32| {
        neumaier((1..=top).map(|tau| (nf - tau as f64) * (acov[tau] / s0).powi(power)))
    };
    let mean = 3.0 - 6.0 / nf - 12.0 / (nf * nf) * weighted(2);
    let variance = 24.0 / nf * (1.0 + 2.0 / nf * weighted(4));
    NullMoments::new(mean, variance, NullSource::ColoredScalarClosedForm)
}

/// Calibrated null of B̂₂ under a Gaussian process matching `cov`.
///
/// The sequence is first whitened by `S(0)^{-1/2}` and rotated into a
/// canonical frame, which leaves the null law of the affine-invariant
/// statistic unchanged and makes the calibration depend only on the
/// temporal structure, not on the coordinate system of the data.
pub fn colored_bivariate_calibration(
    cov: &CovarianceSequence,
    n: usize,
    budget: &CalibrationBudget,
) -> Result<Calibration> {
    if cov.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cov.dim() });
    }
    let model = canonical_bivariate(&cov.truncate(budget.lag_for(n)))?;
    let surrogate = GaussianSurrogate::new(&model, n)?;
    calibrate_null(&surrogate, |x| mardia_kurtosis(x).map(|k| k.value), budget)
}

pub fn colored_bivariate_null_moments(
    cov: &CovarianceSequence,
    n: usize,
    budget: &CalibrationBudget,
) -> Result<NullMoments> {
    colored_bivariate_calibration(cov, n, budget).map(|c| c.moments)
}

/// Whitened covariance sequence in a frame fixed by the sequence itself.
///
/// With `W = S(0)^{-1/2}` and `T(τ) = W S(τ) W`, the frame is the
/// eigenbasis of `Σ_τ sym T(τ)` (larger eigenvalue first, positive
/// orientation), reflected if needed so that the summed antisymmetric part
/// is nonnegative. Sequences that differ by an orthogonal change of
/// coordinates map to the same result.
pub fn canonical_bivariate(cov: &CovarianceSequence) -> Result<CovarianceSequence> {
    let s0 = cov.lag(0);
    let s0 = Matrix2::new(s0[(0, 0)], s0[(0, 1)], s0[(1, 0)], s0[(1, 1)]);
    let s0 = (s0 + s0.transpose()) * 0.5;
    let eig = s0.symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0) || hi / lo > MAX_CONDITION_NUMBER {
        return Err(Error::Degenerate(format!(
            "lag-0 covariance is singular or ill-conditioned (eigenvalues {lo:.3e} .. {hi:.3e})"
        )));
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let w = eig.eigenvectors * Matrix2::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();

    let to2 = |m: &DMatrix<f64>| Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let whitened: Vec<Matrix2<f64>> = cov.lags()[1..].iter().map(|s| w * to2(s) * w).collect();

    let k = whitened
        .iter()
        .fold(Matrix2::zeros(), |acc, t| acc + (t + t.transpose()) * 0.5);
    let angle = 0.5 * (2.0 * k[(0, 1)]).atan2(k[(0, 0)] - k[(1, 1)]);
    let (s, c) = angle.sin_cos();
    let q = Matrix2::new(c, -s, s, c);

    let mut canon: Vec<Matrix2<f64>> = whitened.iter().map(|t| q.transpose() * t * q).collect();
    let skew: f64 = neumaier(canon.iter().map(|t| t[(0, 1)] - t[(1, 0)]));
    if skew < 0.0 {
        let d = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        canon.iter_mut().for_each(|t| *t = d * *t * d);
    }

    let mut lags = Vec::with_capacity(canon.len() + 1);
    lags.push(DMatrix::identity(2, 2));
    lags.extend(canon.iter().map(|t| DMatrix::from_column_slice(2, 2, t.as_slice())));
    CovarianceSequence::from_lags(lags)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// Lag truncation. For the scalar closed form the default is N − 1; for
    /// the bivariate calibration it overrides the budget's truncation.
    pub max_lag: Option<usize>,
    pub calibration: CalibrationBudget,
}

pub fn run_test(x: &TimeSeriesSample, kind: TestKind, alpha: f64) -> Result<TestReport> {
    run_test_with(x, kind, alpha, &TestOptions::default())
}

/// Standardises B̂_p by the null moments of `kind` and applies the two-sided rule.
pub fn run_test_with(x: &TimeSeriesSample, kind: TestKind, alpha: f64, opts: &TestOptions) -> Result<TestReport> {
    check_alpha(alpha)?;
    if x.dim() != kind.required_dim() {
        return Err(Error::Dimension { expected: kind.required_dim(), got: x.dim() });
    }
    let xc = center(x);
    let n = xc.len();
    let stat = mardia_kurtosis(&xc)?;
    let (moments, lag) = match kind {
        TestKind::MardiaIid(p) => (iid_null_moments(p, n)?, None),
        TestKind::ColoredScalar => {
            let lag = opts.max_lag.unwrap_or(n - 1).min(n - 1);
            let cov = sample_cross_covariance(&xc, lag)?;
            (colored_scalar_null_moments(&cov, n)?, Some(lag))
        }
        TestKind::ColoredBivariate => {
            let mut budget = opts.calibration.clone();
            if opts.max_lag.is_some() {
                budget.max_lag = opts.max_lag;
            }
            let lag = budget.lag_for(n);
            let cov = sample_cross_covariance(&xc, lag)?;
            (colored_bivariate_null_moments(&cov, n, &budget)?, Some(lag))
        }
    };
    TestReport::new(stat.value, moments, alpha, lag)
}
