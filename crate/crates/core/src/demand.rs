//! Ornstein-Uhlenbeck demand model.
//!
//! Demand follows `dY = κ(μ(t) − Y)dt + σ dW`. Given `Y_{t0} = y`, the value
//! `Y_s` is Gaussian with
//!
//! ```text
//! mean     = y·e^{−κ(s−t0)} + κ ∫_{t0}^{s} e^{−κ(s−r)} μ(r) dr
//! variance = σ² (1 − e^{−2κ(s−t0)}) / (2κ)
//! ```
//!
//! Everything downstream (objective, control, Monte Carlo) is computed from
//! this conditional law. Paths are drawn from the exact Gaussian transition,
//! so there is no time-discretization bias.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Simpson;
use crate::special::norm_quantile;

/// Absolute tolerance for the tabulated-mean quadrature.
pub const MEAN_QUAD_TOL: f64 = 1e-10;

/// One harmonic term `amplitude · sin(2π·frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Time-dependent mean demand level μ(t).
#[derive(Debug, Clone, PartialEq)]
pub enum MeanFunction {
    /// `offset + Σ sinusoids`, defined for every t; mean integrals in closed form.
    Harmonic { offset: f64, sinusoids: Vec<Sinusoid> },
    /// Linear interpolation between knots, defined on `[first, last]`.
    Tabulated(Vec<(f64, f64)>),
}

impl MeanFunction {
    pub fn constant(c: f64) -> Self {
        MeanFunction::Harmonic {
            offset: c,
            sinusoids: Vec::new(),
        }
    }

    /// `μ(t) = 2 + 3·sin(2πt)`, the case-study forecast.
    pub fn case_study() -> Self {
        MeanFunction::Harmonic {
            offset: 2.0,
            sinusoids: vec![Sinusoid {
                amplitude: 3.0,
                frequency: 1.0,
                phase: 0.0,
            }],
        }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        let f = MeanFunction::Tabulated(knots);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeanFunction::Harmonic { offset, sinusoids } => {
                let finite = offset.is_finite()
                    && sinusoids
                        .iter()
                        .all(|s| s.amplitude.is_finite() && s.frequency.is_finite() && s.phase.is_finite());
                if !finite {
                    return Err(Error::param("mean", "non-finite coefficient"));
                }
            }
            MeanFunction::Tabulated(knots) => {
                if knots.len() < 2 {
                    return Err(Error::param("mean.tabulated", "needs at least two knots"));
                }
                if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::param("mean.tabulated", "non-finite knot"));
                }
                if let Some(i) = knots.windows(2).position(|w| w[1].0 <= w[0].0) {
                    return Err(Error::param(
                        "mean.tabulated",
                        format!("knot times must be strictly increasing (index {})", i + 1),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Interval on which μ is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            MeanFunction::Harmonic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            MeanFunction::Tabulated(knots) => (knots[0].0, knots[knots.len() - 1].0),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            MeanFunction::Harmonic { offset, sinusoids } => Ok(offset
                + sinusoids
                    .iter()
                    .map(|s| s.amplitude * (std::f64::consts::TAU * s.frequency * t + s.phase).sin())
                    .sum::<f64>()),
            MeanFunction::Tabulated(knots) => {
                let (lo, hi) = self.domain();
                if !(lo..=hi).contains(&t) {
                    return Err(Error::OutsideDomain(t));
                }
                let i = knots.partition_point(|k| k.0 <= t).clamp(1, knots.len() - 1);
                let (t0, v0) = knots[i - 1];
                let (t1, v1) = knots[i];
                Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
            }
        }
    }

    /// `κ ∫_{t0}^{s} e^{−κ(s−r)} μ(r) dr`, the forcing part of the conditional mean.
    fn relaxation(&self, kappa: f64, t0: f64, s: f64) -> Result<f64> {
        let dt = s - t0;
        match self {
            MeanFunction::Harmonic { offset, sinusoids } => {
                let decay = (-kappa * dt).exp();
                let mut acc = -offset * (-kappa * dt).exp_m1();
                for sn in sinusoids {
                    let w = std::f64::consts::TAU * sn.frequency;
                    let g = |r: f64| {
                        let th = w * r + sn.phase;
                        kappa * th.sin() - w * th.cos()
                    };
                    acc += kappa * sn.amplitude / (kappa * kappa + w * w) * (g(s) - decay * g(t0));
                }
                Ok(acc)
            }
            MeanFunction::Tabulated(knots) => {
                let (lo, hi) = self.domain();
                if t0 < lo || s > hi {
                    return Err(Error::OutsideDomain(if t0 < lo { t0 } else { s }));
                }
                // integrate knot-to-knot so every panel sees a smooth integrand
                let mut breaks = vec![t0];
                breaks.extend(knots.iter().map(|k| k.0).filter(|&t| t > t0 && t < s));
                breaks.push(s);
                let quad = Simpson::new(MEAN_QUAD_TOL / (breaks.len() - 1) as f64);
                let mut acc = 0.0;
                for w in breaks.windows(2) {
                    acc += quad.integrate(
                        |r| {
                            let mu = self.eval(r.clamp(lo, hi)).unwrap_or(f64::NAN);
                            kappa * (-kappa * (s - r)).exp() * mu
                        },
                        w[0],
                        w[1],
                    )?;
                }
                Ok(acc)
            }
        }
    }
}

/// Full stochastic demand specification.
#[derive(Debug, Clone, PartialEq)]
pub struct OUParams {
    kappa: f64,
    sigma: f64,
    y0: f64,
    mu: MeanFunction,
}

impl OUParams {
    pub fn new(kappa: f64, sigma: f64, y0: f64, mu: MeanFunction) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", "kappa > 0 required"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "sigma > 0 required"));
        }
        if !y0.is_finite() {
            return Err(Error::param("y0", "must be finite"));
        }
        mu.validate()?;
        Ok(Self { kappa, sigma, y0, mu })
    }

    /// κ = 3, σ = 2, y0 = 1, μ(t) = 2 + 3 sin(2πt).
    pub fn case_study() -> Self {
        Self::new(3.0, 2.0, 1.0, MeanFunction::case_study()).expect("valid constants")
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn mu(&self) -> &MeanFunction {
        &self.mu
    }
}

/// Gaussian law of demand at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, variance: f64) -> Self {
        debug_assert!(variance >= 0.0);
        Self { mean, variance }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

fn check_order(t0: f64, s: f64) -> Result<()> {
    if s < t0 || s.is_nan() || t0.is_nan() {
        return Err(Error::TimeOrder { t0, s });
    }
    Ok(())
}

/// Conditional mean of `Y_s` given `Y_{t0} = y_t0`.
pub fn conditional_mean(p: &OUParams, t0: f64, y_t0: f64, s: f64) -> Result<f64> {
    check_order(t0, s)?;
    if t0 < 0.0 {
        return Err(Error::param("t0", "conditioning time must be >= 0"));
    }
    if s == t0 {
        let (lo, hi) = p.mu.domain();
        if t0 < lo || t0 > hi {
            return Err(Error::OutsideDomain(t0));
        }
        return Ok(y_t0);
    }
    Ok(y_t0 * (-p.kappa * (s - t0)).exp() + p.mu.relaxation(p.kappa, t0, s)?)
}

/// Conditional variance of `Y_s` given `Y_{t0}`; independent of the observed value.
pub fn conditional_variance(p: &OUParams, t0: f64, s: f64) -> Result<f64> {
    check_order(t0, s)?;
    Ok(-p.sigma * p.sigma * (-2.0 * p.kappa * (s - t0)).exp_m1() / (2.0 * p.kappa))
}

/// Law of `Y_s` given `Y_{t0} = y_t0`.
pub fn law(p: &OUParams, t0: f64, y_t0: f64, s: f64) -> Result<GaussianLaw> {
    Ok(GaussianLaw::new(
        conditional_mean(p, t0, y_t0, s)?,
        conditional_variance(p, t0, s)?,
    ))
}

/// One exact draw of `Y_{t+dt}` given `Y_t = y_t`.
pub fn sample_transition<R: Rng + ?Sized>(
    p: &OUParams,
    t: f64,
    y_t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "transition step must be > 0"));
    }
    let l = law(p, t, y_t, t + dt)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(l.mean + l.std_dev() * z)
}

/// Seed of one path: a base seed plus a per-path substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub seed: u64,
    pub stream: u64,
}

impl PathSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Counter-based generator positioned at the start of this substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A realized demand path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: PathSeed,
}

impl DemandPath {
    /// Value at a grid time (matched to within `1e-9`).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&x| x < t - 1e-9);
        match self.times.get(i) {
            Some(&x) if (x - t).abs() <= 1e-9 => Some(self.values[i]),
            _ => None,
        }
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Grid("empty time grid".into()));
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneGrid(i + 1));
    }
    Ok(())
}

/// Chains exact transitions along `times`, starting from `y_start` at `times[0]`.
pub fn simulate_path(p: &OUParams, times: &[f64], y_start: f64, seed: PathSeed) -> Result<DemandPath> {
    check_grid(times)?;
    let mut rng = seed.rng();
    let mut values = Vec::with_capacity(times.len());
    values.push(y_start);
    let mut y = y_start;
    for w in times.windows(2) {
        y = sample_transition(p, w[0], y, w[1] - w[0], &mut rng)?;
        values.push(y);
    }
    Ok(DemandPath {
        times: times.to_vec(),
        values,
        seed,
    })
}

/// Central `level` interval of the conditional law: `mean ± z·sd`.
pub fn confidence_band(p: &OUParams, t0: f64, y_t0: f64, s: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", "confidence level must lie in (0, 1)"));
    }
    let l = law(p, t0, y_t0, s)?;
    Ok(band_of(&l, level))
}

pub(crate) fn band_of(l: &GaussianLaw, level: f64) -> (f64, f64) {
    let half = norm_quantile(0.5 * (1.0 + level)) * l.std_dev();
    (l.mean - half, l.mean + half)
}
