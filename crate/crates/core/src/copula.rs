//! Colored p-variate series with standard normal marginals and Archimedean
//! cross-sectional dependence, built by the Marshall–Olkin frailty
//! construction.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::RngStream;
use crate::series::TimeSeriesSample;

/// Uniforms are kept inside [ε, 1 − ε] before taking logarithms or quantiles.
pub const UNIFORM_CLAMP: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gumbel,
    Clayton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanFamily {
    pub kind: FamilyKind,
    pub rho: f64,
}

impl ArchimedeanFamily {
    /// Gumbel accepts ρ ≥ 1 (ρ = 1 is independence), Clayton ρ > 0.
    pub fn new(kind: FamilyKind, rho: f64) -> Result<Self> {
        let ok = match kind {
            FamilyKind::Gumbel => rho >= 1.0,
            FamilyKind::Clayton => rho > 0.0,
        };
        if !ok || !rho.is_finite() {
            return Err(Error::Domain(format!("{kind:?} copula does not accept rho = {rho}")));
        }
        Ok(Self { kind, rho })
    }

    pub fn gumbel(rho: f64) -> Result<Self> {
        Self::new(FamilyKind::Gumbel, rho)
    }

    pub fn clayton(rho: f64) -> Result<Self> {
        Self::new(FamilyKind::Clayton, rho)
    }

    /// Population Kendall's τ of the bivariate margin.
    pub fn kendall_tau(&self) -> f64 {
        match self.kind {
            FamilyKind::Gumbel => 1.0 - 1.0 / self.rho,
            FamilyKind::Clayton => self.rho / (self.rho + 2.0),
        }
    }

    // ψ(t) together with 1 − ψ(t), both to full relative precision.
    fn psi_pair(&self, t: f64) -> (f64, f64) {
        let log_psi = match self.kind {
            FamilyKind::Gumbel => -t.powf(1.0 / self.rho),
            FamilyKind::Clayton => -t.ln_1p() / self.rho,
        };
        (log_psi.exp(), -log_psi.exp_m1())
    }
}

/// Generator ψ: Gumbel `exp(−t^{1/ρ})`, Clayton `(1 + t)^{−1/ρ}`.
pub fn psi(family: &ArchimedeanFamily, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("generator argument must be nonnegative, got {t}")));
    }
    Ok(family.psi_pair(t).0)
}

pub fn psi_inverse(family: &ArchimedeanFamily, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("inverse generator needs u in (0, 1], got {u}")));
    }
    Ok(match family.kind {
        FamilyKind::Gumbel => (-u.ln()).powf(family.rho),
        FamilyKind::Clayton => (-family.rho * u.ln()).exp_m1(),
    })
}

enum FrailtySampler {
    Unit,
    PositiveStable { alpha: f64 },
    Gamma(Gamma<f64>),
}

impl FrailtySampler {
    fn new(family: &ArchimedeanFamily) -> Self {
        match family.kind {
            FamilyKind::Gumbel if family.rho == 1.0 => FrailtySampler::Unit,
            FamilyKind::Gumbel => FrailtySampler::PositiveStable { alpha: 1.0 / family.rho },
            FamilyKind::Clayton => {
                FrailtySampler::Gamma(Gamma::new(1.0 / family.rho, 1.0).expect("validated shape"))
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FrailtySampler::Unit => 1.0,
            FrailtySampler::PositiveStable { alpha } => positive_stable(*alpha, rng),
            FrailtySampler::Gamma(g) => loop {
                let v = g.sample(rng);
                if v > 0.0 {
                    break v;
                }
            },
        }
    }
}

// Chambers–Mallows–Stuck form of the totally skewed stable law with
// Laplace transform exp(−t^α), 0 < α < 1.
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = PI * rng.sample::<f64, _>(Open01);
        let w: f64 = rng.sample(Exp1);
        let v = (alpha * u).sin() / u.sin().powf(1.0 / alpha)
            * ((1.0 - alpha) * u).sin().powf((1.0 - alpha) / alpha)
            / w.powf((1.0 - alpha) / alpha);
        if v > 0.0 && v.is_finite() {
            return v;
        }
    }
}

/// Draws the frailty V whose Laplace transform is ψ: positive stable with
/// index 1/ρ for Gumbel, Gamma(1/ρ, 1) for Clayton.
pub fn sample_frailty<R: Rng + ?Sized>(family: &ArchimedeanFamily, rng: &mut R) -> f64 {
    FrailtySampler::new(family).sample(rng)
}

/// `y(n) = a·y(n−1) + η(n)` with `y(0) = η(0)`, returning `y[n_drop..]`.
pub fn ar1_filter(eta: &[f64], a: f64, n_drop: usize) -> Result<Vec<f64>> {
    if !(a.abs() < 1.0) {
        return Err(Error::NonstationaryFilter(a));
    }
    if n_drop > eta.len() {
        return Err(Error::InvalidInput(format!(
            "cannot drop {n_drop} values from a series of {}",
            eta.len()
        )));
    }
    let mut y = Vec::with_capacity(eta.len());
    let mut prev = 0.0;
    for (n, &e) in eta.iter().enumerate() {
        prev = if n == 0 { e } else { a * prev + e };
        y.push(prev);
    }
    Ok(y.split_off(n_drop))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: ArchimedeanFamily,
    pub dim: usize,
    pub len: usize,
    pub ar_coefficient: f64,
    pub n_drop: usize,
    pub temporal_coloring: bool,
}

impl GeneratorConfig {
    /// Colored with AR coefficient 0.8 and a 1000-sample burn-in.
    pub fn new(family: ArchimedeanFamily, dim: usize, len: usize) -> Self {
        Self {
            family,
            dim,
            len,
            ar_coefficient: 0.8,
            n_drop: 1000,
            temporal_coloring: true,
        }
    }

    pub fn colored(mut self, on: bool) -> Self {
        self.temporal_coloring = on;
        self
    }

    fn validate(&self) -> Result<()> {
        ArchimedeanFamily::new(self.family.kind, self.family.rho)?;
        if self.dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if self.len < 2 {
            return Err(Error::InvalidInput("series length must be at least 2".into()));
        }
        if self.temporal_coloring && !(self.ar_coefficient.abs() < 1.0) {
            return Err(Error::NonstationaryFilter(self.ar_coefficient));
        }
        Ok(())
    }
}

/// Independent standard normal channels, AR(1)-colored and rescaled to unit
/// stationary variance when `colored`.
pub fn gaussian_channels<R: Rng + ?Sized>(
    dim: usize,
    len: usize,
    colored: Option<(f64, usize)>,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    (0..dim)
        .map(|_| match colored {
            Some((a, n_drop)) => {
                let eta: Vec<f64> = (0..n_drop + len).map(|_| rng.sample(StandardNormal)).collect();
                let scale = (1.0 - a * a).sqrt();
                let mut y = ar1_filter(&eta, a, n_drop)?;
                y.iter_mut().for_each(|v| *v *= scale);
                Ok(y)
            }
            None => Ok((0..len).map(|_| rng.sample(StandardNormal)).collect()),
        })
        .collect()
}

// −ln Φ(y) with Φ(y) clamped to [ε, 1 − ε].
fn neg_ln_cdf(y: f64) -> f64 {
    if y > 0.0 {
        -(-normal::sf(y).max(UNIFORM_CLAMP)).ln_1p()
    } else {
        -normal::cdf(y).max(UNIFORM_CLAMP).ln()
    }
}

/// Generates a `dim × len` sample.
///
/// Each channel starts as i.i.d. N(0, 1) noise, optionally passed through
/// the AR(1) filter and rescaled to unit variance, then mapped to a uniform
/// `u = Φ(y)`. One frailty V is drawn per time index and the coordinates
/// become `u' = ψ(−ln u / V)`, which are returned as `Φ⁻¹(u')`.
pub fn generate(config: &GeneratorConfig, stream: RngStream) -> Result<TimeSeriesSample> {
    config.validate()?;
    let mut rng = stream.rng();
    let coloring = config
        .temporal_coloring
        .then_some((config.ar_coefficient, config.n_drop));
    let channels = gaussian_channels(config.dim, config.len, coloring, &mut rng)?;

    let family = config.family;
    let frailty = FrailtySampler::new(&family);
    let mut data = DMatrix::zeros(config.dim, config.len);
    for n in 0..config.len {
        let v = frailty.sample(&mut rng);
        for (i, ch) in channels.iter().enumerate() {
            let (u, c) = family.psi_pair(neg_ln_cdf(ch[n]) / v);
            data[(i, n)] = if u < 0.5 {
                normal::quantile(u.max(UNIFORM_CLAMP))
            } else {
                normal::upper_quantile(c.max(UNIFORM_CLAMP))
            };
        }
    }
    TimeSeriesSample::from_matrix(data)
}
