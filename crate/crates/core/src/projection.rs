//! Random scalar and planar projections.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeriesSample;

/// Unit direction `(sin φ, cos φ)` in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction1D {
    pub phi: f64,
}

impl Direction1D {
    pub fn new(phi: f64) -> Self {
        Self { phi }
    }

    pub fn vector(&self) -> [f64; 2] {
        [self.phi.sin(), self.phi.cos()]
    }

    /// 1 × 2 projection matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &self.vector())
    }

    /// 2 × 2 rotation by φ; rows are an orthonormal basis of the plane.
    pub fn rotation(&self) -> DMatrix<f64> {
        let (s, c) = self.phi.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
    }
}

/// Plane in R³ tilted by θ from the z axis, with in-plane angle φ from the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane2D {
    pub theta: f64,
    pub phi: f64,
}

impl Plane2D {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// `u₁ = (cos φ, sin φ, 0)`, `u₂ = (−sin θ sin φ, sin θ cos φ, cos θ)`.
    pub fn basis(&self) -> ([f64; 3], [f64; 3]) {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        ([cp, sp, 0.0], [-st * sp, st * cp, ct])
    }

    /// 2 × 3 projection matrix with rows `u₁`, `u₂`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (u1, u2) = self.basis();
        DMatrix::from_row_slice(2, 3, &[u1[0], u1[1], u1[2], u2[0], u2[1], u2[2]])
    }
}

pub fn project_1d(x: &TimeSeriesSample, d: &Direction1D) -> Result<TimeSeriesSample> {
    if x.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: x.dim() });
    }
    let [s, c] = d.vector();
    let values = (0..x.len())
        .map(|n| {
            let v = x.at(n);
            s * v[0] + c * v[1]
        })
        .collect();
    TimeSeriesSample::from_time_major(1, values)
}

pub fn project_2d(x: &TimeSeriesSample, pl: &Plane2D) -> Result<TimeSeriesSample> {
    if x.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: x.dim() });
    }
    let (u1, u2) = pl.basis();
    let mut values = Vec::with_capacity(2 * x.len());
    for n in 0..x.len() {
        let v = x.at(n);
        values.push(u1[0] * v[0] + u1[1] * v[1] + u1[2] * v[2]);
        values.push(u2[0] * v[0] + u2[1] * v[1] + u2[2] * v[2]);
    }
    TimeSeriesSample::from_time_major(2, values)
}

/// Re-expresses a bivariate sample in the basis rotated by φ.
pub fn rotate_2d(x: &TimeSeriesSample, d: &Direction1D) -> Result<TimeSeriesSample> {
    if x.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: x.dim() });
    }
    x.transform(&d.rotation())
}

/// φ ~ U[0, π).
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction1D {
    Direction1D::new(rng.gen_range(0.0..PI))
}

/// θ ~ U(−π/2, π/2), φ ~ U[0, π).
pub fn sample_plane<R: Rng + ?Sized>(rng: &mut R) -> Plane2D {
    let theta = loop {
        let t = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
        if t != -FRAC_PI_2 {
            break t;
        }
    };
    Plane2D::new(theta, rng.gen_range(0.0..PI))
}
