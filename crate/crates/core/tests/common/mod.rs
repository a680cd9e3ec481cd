//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use dntest::normal;
use rand::Rng;
use rand_distr::StandardNormal;

/// Kendall's tau-a by direct pair counting.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let d = (x[i] - x[j]) * (y[i] - y[j]);
            s += if d > 0.0 {
                1
            } else if d < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Two-sided Kolmogorov–Smirnov distance to the standard normal.
pub fn ks_distance(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal::cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% KS band.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Lag-τ autocorrelation of a series around its own mean.
pub fn autocorrelation(x: &[f64], tau: usize) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let ct: f64 = (0..n - tau).map(|k| (x[k] - m) * (x[k + tau] - m)).sum();
    ct / c0
}

/// Stationary AR(1) autocovariances σ²a^τ/(1 − a²) for τ = 0..=max_lag.
pub fn ar1_autocov(a: f64, max_lag: usize) -> Vec<f64> {
    (0..=max_lag).map(|t| a.powi(t as i32) / (1.0 - a * a)).collect()
}

/// Stationary Gaussian AR(1) path by the exact recursion with a stationary start.
pub fn ar1_path<R: Rng>(a: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut y = rng.sample::<f64, _>(StandardNormal) / (1.0 - a * a).sqrt();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(y);
        y = a * y + rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Scalar colored null moments with the lag sums expanded into sums over
/// ordered pairs of time indices (k, l), k < l.
pub fn colored_scalar_oracle(autocov: &[f64], n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for k in 0..n {
        for l in k + 1..n.min(k + autocov.len()) {
            let r = autocov[l - k] / autocov[0];
            s2 += r * r;
            s4 += r * r * r * r;
        }
    }
    (3.0 - 6.0 / nf - 12.0 / (nf * nf) * s2, 24.0 / nf * (1.0 + 2.0 / nf * s4))
}

/// Mardia kurtosis through an explicit inverse of the sample covariance.
pub fn mardia_oracle(rows: &[Vec<f64>]) -> f64 {
    let p = rows.len();
    let n = rows[0].len();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / n as f64;
            r.iter().map(|v| v - m).collect()
        })
        .collect();
    let s = nalgebra::DMatrix::from_fn(p, p, |a, b| {
        (0..n).map(|k| centered[a][k] * centered[b][k]).sum::<f64>() / n as f64
    });
    let inv = s.try_inverse().expect("invertible covariance");
    (0..n)
        .map(|k| {
            let x = nalgebra::DVector::from_fn(p, |a, _| centered[a][k]);
            let d = (x.transpose() * &inv * &x)[(0, 0)];
            d * d
        })
        .sum::<f64>()
        / n as f64
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

pub fn normal_rows<R: Rng>(p: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
}
