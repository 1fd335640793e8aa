//! Discrete variance-preserving noise schedule.
//!
//! A single cumulative-retention convention is used throughout:
//! `x_t = sqrt(abar_t) * x_0 + sqrt(1 - abar_t) * eps`, so noising and
//! the one-step `x_0` prediction are exact inverses of each other.

use crate::error::{check_dim, Error, Result};

/// Gradient weighting `w(t)` applied to every distillation gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightKind {
    One,
    #[default]
    OneMinusAlphaBar,
    SigmaSquared,
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::One),
            "one_minus_alpha_bar" => Ok(Self::OneMinusAlphaBar),
            "sigma_squared" => Ok(Self::SigmaSquared),
            other => Err(Error::Parameter(format!("unknown weight kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
    weight_kind: WeightKind,
}

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.02;

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_linear_schedule(DEFAULT_STEPS, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX)
            .expect("default schedule is valid")
    }
}

/// Builds `abar_t = prod_{i<=t} (1 - beta_i)` with `beta_i` linear from
/// `beta_min` at `i = 1` to `beta_max` at `i = steps`.
pub fn make_linear_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::Parameter(format!("schedule needs at least 2 steps, got {steps}")));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::Parameter(format!(
            "beta bounds must satisfy 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )));
    }
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    let mut acc = 1.0;
    for i in 1..=steps {
        let frac = (i - 1) as f64 / (steps - 1) as f64;
        let beta = beta_min + (beta_max - beta_min) * frac;
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    NoiseSchedule::from_alpha_bar(alpha_bar)
}

impl NoiseSchedule {
    /// Wraps an explicit `abar` table indexed `0..=T`.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(Error::Parameter("alpha_bar needs entries for t = 0..=T with T >= 1".into()));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::Parameter(format!("alpha_bar[0] must be 1, got {}", alpha_bar[0])));
        }
        for (t, pair) in alpha_bar.windows(2).enumerate() {
            if !(pair[1] > 0.0 && pair[1] < pair[0]) {
                return Err(Error::Parameter(format!(
                    "alpha_bar must be positive and strictly decreasing (t = {})",
                    t + 1
                )));
            }
        }
        Ok(Self { alpha_bar, weight_kind: WeightKind::default() })
    }

    pub fn with_weight(mut self, weight_kind: WeightKind) -> Self {
        self.weight_kind = weight_kind;
        self
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn weight_kind(&self) -> WeightKind {
        self.weight_kind
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bar
            .get(t)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("timestep {t} outside 0..={}", self.steps())))
    }

    /// Signal and noise coefficients `(sqrt(abar_t), sqrt(1 - abar_t))`.
    pub fn coefficients(&self, t: usize) -> Result<(f64, f64)> {
        let ab = self.alpha_bar(t)?;
        Ok((ab.sqrt(), (1.0 - ab).sqrt()))
    }

    /// `w(t)`. Under the unified convention `sigma_t^2 = 1 - abar_t`, so the
    /// two non-constant kinds coincide.
    pub fn weight(&self, t: usize) -> Result<f64> {
        let ab = self.alpha_bar(t)?;
        Ok(match self.weight_kind {
            WeightKind::One => 1.0,
            WeightKind::OneMinusAlphaBar => 1.0 - ab,
            WeightKind::SigmaSquared => {
                let sigma = (1.0 - ab).sqrt();
                sigma * sigma
            }
        })
    }
}

/// `sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps`.
pub fn forward_diffuse(x0: &[f64], eps: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>> {
    check_dim(x0.len(), eps.len())?;
    let (a, s) = sched.coefficients(t)?;
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect())
}

pub fn weight(t: usize, sched: &NoiseSchedule) -> Result<f64> {
    sched.weight(t)
}
