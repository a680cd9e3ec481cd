//! Parametric Monte Carlo null calibration.
//!
//! A [`GaussianSurrogate`] is a stationary Gaussian process whose lagged
//! covariances match a truncated [`CovarianceSequence`]. Samples are drawn
//! by circulant embedding: the sequence is wrapped onto a circle of length
//! `M ≥ N + L`, its matrix spectrum is factored once per frequency, and
//! each draw costs one inverse FFT per channel. The real and imaginary parts
//! of a draw are independent, so every FFT yields two replicates.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::CovarianceSequence;
use crate::report::{NullMoments, NullSource};
use crate::rng::RngStream;
use crate::series::TimeSeriesSample;

/// Clipping norm above this fraction of the spectral norm aborts.
pub const MAX_CLIPPING_FRACTION: f64 = 0.01;
/// Clipping below this fraction is treated as rounding and not reported.
pub const SILENT_CLIPPING_FRACTION: f64 = 1e-8;
pub const DEFAULT_REPLICATES: usize = 2000;
pub const MIN_REPLICATES: usize = 100;
pub const DEFAULT_MAX_LAG: usize = 50;

pub fn default_max_lag(len: usize) -> usize {
    DEFAULT_MAX_LAG.min(len.saturating_sub(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBudget {
    pub replicates: usize,
    /// Lag truncation of the surrogate; `None` means `min(N − 1, 50)`.
    pub max_lag: Option<usize>,
    pub seed: RngStream,
    /// Probabilities at which to report empirical null quantiles.
    #[serde(default)]
    pub quantiles: Vec<f64>,
}

impl Default for CalibrationBudget {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            max_lag: None,
            seed: RngStream::new(0, 0),
            quantiles: Vec::new(),
        }
    }
}

impl CalibrationBudget {
    pub fn new(replicates: usize, seed: RngStream) -> Self {
        Self { replicates, seed, ..Self::default() }
    }

    pub fn lag_for(&self, len: usize) -> usize {
        self.max_lag.unwrap_or_else(|| default_max_lag(len)).min(len.saturating_sub(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidInput(format!(
                "calibration needs at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::InvalidInput("quantile probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct GaussianSurrogate {
    dim: usize,
    len: usize,
    max_lag: usize,
    fft_len: usize,
    // Per-frequency PSD square roots of the spectral matrix, each p × p column-major.
    factors: Vec<Complex64>,
    clipping_norm: f64,
    spectral_norm: f64,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GaussianSurrogate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSurrogate")
            .field("dim", &self.dim)
            .field("len", &self.len)
            .field("max_lag", &self.max_lag)
            .field("fft_len", &self.fft_len)
            .field("clipping_norm", &self.clipping_norm)
            .field("spectral_norm", &self.spectral_norm)
            .finish()
    }
}

impl GaussianSurrogate {
    /// Surrogate of length `len` matching every lag of `cov` (lags at or
    /// beyond `len` are ignored).
    pub fn new(cov: &CovarianceSequence, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidInput("surrogate length must be at least 2".into()));
        }
        let cov = cov.truncate(len - 1);
        let p = cov.dim();
        let max_lag = cov.max_lag();
        let fft_len = (len + max_lag).max(2 * max_lag + 1).next_power_of_two();

        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let ifft = planner.plan_fft_inverse(fft_len);

        // Circulant first block-row: c(m) = S(m)ᵀ, c(M − m) = S(m).
        let mut spectra = vec![vec![Complex64::new(0.0, 0.0); fft_len]; p * p];
        for a in 0..p {
            for b in 0..p {
                let buf = &mut spectra[a + b * p];
                buf[0] = Complex64::new(0.5 * (cov.lag(0)[(a, b)] + cov.lag(0)[(b, a)]), 0.0);
                for m in 1..=max_lag {
                    buf[m] = Complex64::new(cov.lag(m)[(b, a)], 0.0);
                    buf[fft_len - m] = Complex64::new(cov.lag(m)[(a, b)], 0.0);
                }
                fwd.process(buf);
            }
        }

        let mut factors = vec![Complex64::new(0.0, 0.0); fft_len * p * p];
        let mut clipped_sq = 0.0f64;
        let mut total_sq = 0.0f64;
        for j in 0..fft_len {
            let mut f = DMatrix::<Complex64>::from_fn(p, p, |a, b| spectra[a + b * p][j]);
            // Enforce exact Hermitian symmetry before factoring.
            f = (&f + f.adjoint()).scale(0.5);
            let (root, c, t) = psd_sqrt(f);
            clipped_sq += c;
            total_sq += t;
            factors[j * p * p..(j + 1) * p * p].copy_from_slice(root.as_slice());
        }

        // Frobenius norms over all frequencies, scaled so both equal the
        // norm of the matching perturbation in the lag domain.
        let clipping_norm = (clipped_sq / fft_len as f64).sqrt();
        let spectral_norm = (total_sq / fft_len as f64).sqrt();
        if !(spectral_norm > 0.0) {
            return Err(Error::Calibration("covariance model has an empty spectrum".into()));
        }
        if clipping_norm > MAX_CLIPPING_FRACTION * spectral_norm {
            return Err(Error::Calibration(format!(
                "embedded spectrum is not positive semidefinite: clipping {clipping_norm:.3e} exceeds \
                 {:.0}% of the spectral norm {spectral_norm:.3e}; the covariance estimate is likely invalid (a smaller lag truncation may help)",
                MAX_CLIPPING_FRACTION * 100.0
            )));
        }
        if clipping_norm > SILENT_CLIPPING_FRACTION * spectral_norm {
            log::debug!(
                "clipped a negative spectral part of norm {clipping_norm:.3e} \
                 (spectral norm {spectral_norm:.3e})"
            );
        }

        Ok(Self {
            dim: p,
            len,
            max_lag,
            fft_len,
            factors,
            clipping_norm,
            spectral_norm,
            ifft,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn embedding_len(&self) -> usize {
        self.fft_len
    }

    /// Frobenius norm of the negative spectral part removed, in lag-domain units.
    pub fn clipping_norm(&self) -> f64 {
        self.clipping_norm
    }

    /// Frobenius norm of the embedded spectrum, in lag-domain units.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// Two independent draws from one complex FFT pass.
    pub fn simulate_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (TimeSeriesSample, TimeSeriesSample) {
        let p = self.dim;
        let m = self.fft_len;
        let mut channels = vec![vec![Complex64::new(0.0, 0.0); m]; p];
        let mut z = vec![Complex64::new(0.0, 0.0); p];
        for j in 0..m {
            for zi in z.iter_mut() {
                *zi = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            }
            let g = &self.factors[j * p * p..(j + 1) * p * p];
            for (a, ch) in channels.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (b, zb) in z.iter().enumerate() {
                    acc += g[a + b * p] * zb;
                }
                ch[j] = acc;
            }
        }
        for ch in channels.iter_mut() {
            self.ifft.process(ch);
        }
        let scale = 1.0 / (m as f64).sqrt();
        let mut re = Vec::with_capacity(p * self.len);
        let mut im = Vec::with_capacity(p * self.len);
        for n in 0..self.len {
            for ch in &channels {
                re.push(ch[n].re * scale);
                im.push(ch[n].im * scale);
            }
        }
        (
            TimeSeriesSample::from_time_major(p, re).expect("finite surrogate draw"),
            TimeSeriesSample::from_time_major(p, im).expect("finite surrogate draw"),
        )
    }
}

// PSD square root with negative eigenvalues clipped; also returns the
// squared magnitude of the clipped part and of the whole matrix.
fn psd_sqrt(f: DMatrix<Complex64>) -> (DMatrix<Complex64>, f64, f64) {
    let p = f.nrows();
    if p == 1 {
        let lam = f[(0, 0)].re;
        let clipped = lam.min(0.0);
        return (
            DMatrix::from_element(1, 1, Complex64::new(lam.max(0.0).sqrt(), 0.0)),
            clipped * clipped,
            lam * lam,
        );
    }
    let eig = f.symmetric_eigen();
    let clipped = eig.eigenvalues.iter().map(|l| l.min(0.0).powi(2)).sum();
    let total = eig.eigenvalues.iter().map(|l| l * l).sum();
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        scaled.column_mut(k).scale_mut(s);
    }
    (scaled * u.adjoint(), clipped, total)
}

/// One stationary Gaussian draw from the surrogate.
pub fn simulate_gaussian(surrogate: &GaussianSurrogate, stream: RngStream) -> TimeSeriesSample {
    surrogate.simulate_pair(&mut stream.rng()).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub moments: NullMoments,
    pub se_mean: f64,
    pub se_variance: f64,
    pub replicates: usize,
    pub clipping_norm: f64,
    /// `(probability, empirical quantile)` pairs requested in the budget.
    pub quantiles: Vec<(f64, f64)>,
}

/// Mean and variance of `statistic` over `budget.replicates` independent
/// surrogate draws.
///
/// Replicate pairs use substreams of `budget.seed` and are aggregated in
/// index order, so the result does not depend on thread scheduling.
pub fn calibrate_null<F>(surrogate: &GaussianSurrogate, statistic: F, budget: &CalibrationBudget) -> Result<Calibration>
where
    F: Fn(&TimeSeriesSample) -> Result<f64> + Sync,
{
    budget.validate()?;
    let pairs = budget.replicates.div_ceil(2);
    let draws: Vec<[f64; 2]> = (0..pairs as u64)
        .into_par_iter()
        .map(|k| {
            let (a, b) = surrogate.simulate_pair(&mut budget.seed.substream(k).rng());
            Ok([statistic(&a)?, statistic(&b)?])
        })
        .collect::<Result<_>>()?;
    let mut values: Vec<f64> = draws.into_iter().flatten().collect();
    values.truncate(budget.replicates);

    let summary = Summary::of(&values);
    let moments = NullMoments::new(summary.mean, summary.variance, NullSource::MonteCarloCalibrated)
        .map_err(|e| Error::Calibration(format!("calibrated statistic has no spread: {e}")))?;

    let quantiles = if budget.quantiles.is_empty() {
        Vec::new()
    } else {
        values.sort_by(f64::total_cmp);
        budget.quantiles.iter().map(|&q| (q, sorted_quantile(&values, q))).collect()
    };

    Ok(Calibration {
        moments,
        se_mean: summary.se_mean,
        se_variance: summary.se_variance,
        replicates: values.len(),
        clipping_norm: surrogate.clipping_norm(),
        quantiles,
    })
}

/// Sample moments with standard errors, accumulated with Neumaier summation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = neumaier(values.iter().copied()) / n;
        let m2 = neumaier(values.iter().map(|v| (v - mean).powi(2))) / n;
        let m4 = neumaier(values.iter().map(|v| (v - mean).powi(4))) / n;
        let variance = m2 * n / (n - 1.0);
        Self {
            mean,
            variance,
            se_mean: (variance / n).sqrt(),
            se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        }
    }
}

pub(crate) fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
