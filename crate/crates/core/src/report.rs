use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Where a pair of null moments came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSource {
    IidClosedForm,
    ColoredScalarClosedForm,
    MonteCarloCalibrated,
}

impl NullSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            NullSource::IidClosedForm => "iid_closed_form",
            NullSource::ColoredScalarClosedForm => "colored_scalar_closed_form",
            NullSource::MonteCarloCalibrated => "monte_carlo_calibrated",
        }
    }
}

/// Mean and variance of a statistic under the null hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
    pub source: NullSource,
}

impl NullMoments {
    pub fn new(mean: f64, variance: f64, source: NullSource) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::Degenerate(format!(
                "null moments need a finite mean and positive variance (mean {mean}, variance {variance})"
            )));
        }
        Ok(Self { mean, variance, source })
    }

    pub fn z_score(&self, statistic: f64) -> f64 {
        (statistic - self.mean) / self.variance.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub null_moments: NullMoments,
    /// Largest covariance lag used to build the null moments, when the
    /// null depends on the temporal structure.
    pub lag_truncation: Option<usize>,
}

impl TestReport {
    /// Standardises `statistic` and applies the two-sided rule
    /// `2(1 − Φ(|z|)) < α`.
    pub fn new(statistic: f64, null_moments: NullMoments, alpha: f64, lag_truncation: Option<usize>) -> Result<Self> {
        check_alpha(alpha)?;
        let z = null_moments.z_score(statistic);
        let p_value = normal::two_sided_p_value(z);
        Ok(Self {
            statistic,
            z,
            p_value,
            alpha,
            reject: p_value < alpha,
            null_moments,
            lag_truncation,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("significance level must lie in (0, 1), got {alpha}")))
    }
}
