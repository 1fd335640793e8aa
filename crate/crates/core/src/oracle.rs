//! Closed-form noise prediction for a labeled isotropic Gaussian mixture.
//!
//! The mixture stands in for a frozen text-conditioned denoiser: the
//! diffused marginal of a Gaussian mixture is again a Gaussian mixture, so
//! `eps_hat = -sqrt(1 - abar_t) * grad log p_t(x_t | label)` is exact.
//! Conditioning filters components by label; no label means the full
//! mixture.

use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub stdev: f64,
    pub label: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Parameter("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::Parameter("mixture dimension must be positive".into()));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            check_dim(dim, c.mean.len())?;
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Parameter(format!("component {k}: weight must be positive")));
            }
            if !(c.stdev >= 0.0 && c.stdev.is_finite()) {
                return Err(Error::Parameter(format!("component {k}: stdev must be nonnegative")));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::Parameter(format!("component {k}: mean must be finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn has_label(&self, label: i64) -> bool {
        self.components.iter().any(|c| c.label == label)
    }

    fn select(&self, label: Option<i64>) -> Result<Vec<&Component>> {
        match label {
            None => Ok(self.components.iter().collect()),
            Some(l) => {
                let picked: Vec<_> = self.components.iter().filter(|c| c.label == l).collect();
                if picked.is_empty() {
                    return Err(Error::Label(l));
                }
                Ok(picked)
            }
        }
    }
}

/// One component of the diffused marginal `p_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusedComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Mixture parameters of `p_t(. | label)`: means scale by `sqrt(abar_t)`,
/// variances become `abar_t * s^2 + (1 - abar_t)`, and weights are
/// renormalized over the selected components.
pub fn diffused_density_params(
    gmm: &GaussianMixture,
    t: usize,
    sched: &NoiseSchedule,
    label: Option<i64>,
) -> Result<Vec<DiffusedComponent>> {
    params_at(gmm, sched.alpha_bar(t)?, label)
}

fn params_at(gmm: &GaussianMixture, ab: f64, label: Option<i64>) -> Result<Vec<DiffusedComponent>> {
    let root = ab.sqrt();
    let selected = gmm.select(label)?;
    let total: f64 = selected.iter().map(|c| c.weight).sum();
    Ok(selected
        .into_iter()
        .map(|c| DiffusedComponent {
            weight: c.weight / total,
            mean: c.mean.iter().map(|m| root * m).collect(),
            variance: ab * c.stdev * c.stdev + (1.0 - ab),
        })
        .collect())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn component_log_terms(x: &[f64], params: &[DiffusedComponent]) -> Vec<f64> {
    let d = x.len() as f64;
    params
        .iter()
        .map(|p| {
            let sq: f64 = x.iter().zip(&p.mean).map(|(a, b)| (a - b) * (a - b)).sum();
            p.weight.ln() - sq / (2.0 * p.variance) - 0.5 * d * (2.0 * PI * p.variance).ln()
        })
        .collect()
}

fn require_positive_variance(params: &[DiffusedComponent], t: usize) -> Result<()> {
    if params.iter().any(|p| p.variance <= 0.0) {
        return Err(Error::Parameter(format!(
            "density at t = {t} is degenerate (zero-variance component)"
        )));
    }
    Ok(())
}

/// `log p_t(x | label)` of the diffused mixture.
pub fn log_density(
    x: &[f64],
    t: usize,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    label: Option<i64>,
) -> Result<f64> {
    check_dim(gmm.dim(), x.len())?;
    let params = diffused_density_params(gmm, t, sched, label)?;
    require_positive_variance(&params, t)?;
    Ok(log_sum_exp(&component_log_terms(x, &params)))
}

/// `log p_0(x | label)`: the undiffused mixture density.
pub fn clean_log_density(x: &[f64], gmm: &GaussianMixture, label: Option<i64>) -> Result<f64> {
    check_dim(gmm.dim(), x.len())?;
    let params = params_at(gmm, 1.0, label)?;
    require_positive_variance(&params, 0)?;
    Ok(log_sum_exp(&component_log_terms(x, &params)))
}

/// Noise prediction `-sqrt(1 - abar_t) * grad log p_t(x_t | label)`.
pub fn epsilon_pred(
    x_t: &[f64],
    t: usize,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    label: Option<i64>,
) -> Result<Vec<f64>> {
    check_dim(gmm.dim(), x_t.len())?;
    if t == 0 {
        return Err(Error::Parameter("noise prediction requires t >= 1".into()));
    }
    let params = diffused_density_params(gmm, t, sched, label)?;
    require_positive_variance(&params, t)?;
    let logs = component_log_terms(x_t, &params);
    let norm = log_sum_exp(&logs);
    let sigma = (1.0 - sched.alpha_bar(t)?).sqrt();

    // grad log p = sum_k gamma_k (m_k - x) / v_k
    let mut score = vec![0.0; x_t.len()];
    for (p, l) in params.iter().zip(&logs) {
        let gamma = (l - norm).exp();
        if gamma == 0.0 {
            continue;
        }
        let c = gamma / p.variance;
        for ((s, m), x) in score.iter_mut().zip(&p.mean).zip(x_t) {
            *s += c * (m - x);
        }
    }
    Ok(score.into_iter().map(|s| -sigma * s).collect())
}

/// Classifier-free guidance settings: scale `s` and the conditioning label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfgSpec {
    pub scale: f64,
    pub label: Option<i64>,
}

impl CfgSpec {
    pub fn new(scale: f64, label: Option<i64>) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::Parameter(format!("guidance scale must be finite, got {scale}")));
        }
        Ok(Self { scale, label })
    }

    pub fn unconditional() -> Self {
        Self { scale: 0.0, label: None }
    }

    /// Same conditioning at a different scale.
    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }
}

/// `eps_uncond + s * (eps_cond - eps_uncond)`.
///
/// Without a label the conditional and unconditional predictions coincide,
/// so any scale yields the unconditional prediction.
pub fn cfg_epsilon(
    x_t: &[f64],
    t: usize,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    cfg: &CfgSpec,
) -> Result<Vec<f64>> {
    let uncond = epsilon_pred(x_t, t, gmm, sched, None)?;
    let Some(label) = cfg.label else {
        return Ok(uncond);
    };
    let cond = epsilon_pred(x_t, t, gmm, sched, Some(label))?;
    Ok(guide(&uncond, &cond, cfg.scale))
}

pub(crate) fn guide(uncond: &[f64], cond: &[f64], scale: f64) -> Vec<f64> {
    uncond.iter().zip(cond).map(|(u, c)| u + scale * (c - u)).collect()
}

/// One-step clean estimate `(x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)`.
pub fn predict_x0(x_t: &[f64], t: usize, eps_hat: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    check_dim(x_t.len(), eps_hat.len())?;
    let (a, s) = sched.coefficients(t)?;
    Ok(x_t.iter().zip(eps_hat).map(|(x, e)| (x - s * e) / a).collect())
}
