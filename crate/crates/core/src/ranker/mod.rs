//! Preference models `r(.)` and the pairwise win/lose comparison.

pub mod lmm;
pub mod transport;

use crate::error::{check_dim, Error, Result};
use crate::oracle::{clean_log_density, GaussianMixture};

pub use lmm::{lmm_format_query, lmm_parse_response, LmmAnnotator};

#[derive(Debug, Clone, PartialEq)]
pub enum RewardSpec {
    /// `-|x - target|^2`
    Proximity { target: Vec<f64> },
    /// `<weights, x>`
    Linear { weights: Vec<f64> },
    /// `log p_0(x | label)` under the oracle mixture.
    MixtureLikelihood { label: Option<i64> },
    /// Same score for every image; every comparison ties.
    Constant { value: f64 },
    /// Yes-count from an LMM annotator.
    Lmm { questions: Vec<String>, endpoint: String },
}

impl RewardSpec {
    pub fn is_lmm(&self) -> bool {
        matches!(self, RewardSpec::Lmm { .. })
    }

    /// Checks the reward definition against the render dimension and the mixture.
    pub fn validate(&self, image_dim: usize, mixture: Option<&GaussianMixture>) -> Result<()> {
        match self {
            RewardSpec::Proximity { target: v } | RewardSpec::Linear { weights: v } => {
                check_dim(image_dim, v.len())?;
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parameter("reward vector entries must be finite".into()));
                }
            }
            RewardSpec::MixtureLikelihood { label } => {
                let gmm = mixture.ok_or_else(|| {
                    Error::Parameter("mixture_likelihood reward needs a mixture".into())
                })?;
                check_dim(image_dim, gmm.dim())?;
                if let Some(l) = label {
                    if !gmm.has_label(*l) {
                        return Err(Error::Label(*l));
                    }
                }
                let selected = gmm.components().iter().filter(|c| label.is_none_or(|l| c.label == l));
                if selected.into_iter().any(|c| c.stdev == 0.0) {
                    return Err(Error::Parameter(
                        "mixture_likelihood needs positive stdev on every scored component".into(),
                    ));
                }
            }
            RewardSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Parameter("constant reward must be finite".into()));
                }
            }
            RewardSpec::Lmm { questions, .. } => {
                if questions.is_empty() {
                    return Err(Error::Parameter("lmm reward needs at least one question".into()));
                }
            }
        }
        Ok(())
    }
}

/// Scores a synthetic reward. LMM specs need a transport; use [`LmmAnnotator`].
pub fn reward(x: &[f64], spec: &RewardSpec, mixture: Option<&GaussianMixture>) -> Result<f64> {
    match spec {
        RewardSpec::Proximity { target } => {
            check_dim(target.len(), x.len())?;
            Ok(-x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        RewardSpec::Linear { weights } => {
            check_dim(weights.len(), x.len())?;
            Ok(x.iter().zip(weights).map(|(a, b)| a * b).sum())
        }
        RewardSpec::MixtureLikelihood { label } => {
            let gmm = mixture
                .ok_or_else(|| Error::Parameter("mixture_likelihood reward needs a mixture".into()))?;
            clean_log_density(x, gmm, *label)
        }
        RewardSpec::Constant { value } => Ok(*value),
        RewardSpec::Lmm { .. } => Err(Error::Parameter("lmm rewards require an annotator transport".into())),
    }
}

/// Anything that can score a single image.
pub trait Ranker {
    fn score(&mut self, image: &[f64]) -> Result<f64>;
}

impl<R: Ranker + ?Sized> Ranker for &mut R {
    fn score(&mut self, image: &[f64]) -> Result<f64> {
        (**self).score(image)
    }
}

impl<R: Ranker + ?Sized> Ranker for Box<R> {
    fn score(&mut self, image: &[f64]) -> Result<f64> {
        (**self).score(image)
    }
}

/// Pure reward functions (everything except the LMM variant).
#[derive(Debug, Clone)]
pub struct SyntheticRanker {
    spec: RewardSpec,
    mixture: Option<GaussianMixture>,
}

impl SyntheticRanker {
    pub fn new(spec: RewardSpec, mixture: Option<GaussianMixture>) -> Result<Self> {
        if spec.is_lmm() {
            return Err(Error::Parameter("lmm rewards require an annotator transport".into()));
        }
        Ok(Self { spec, mixture })
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }
}

impl Ranker for SyntheticRanker {
    fn score(&mut self, image: &[f64]) -> Result<f64> {
        reward(image, &self.spec, self.mixture.as_ref())
    }
}

/// Which member of a constructed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Member {
    First,
    Second,
}

impl Member {
    pub fn index(self) -> usize {
        match self {
            Member::First => 1,
            Member::Second => 2,
        }
    }

    pub fn other(self) -> Member {
        match self {
            Member::First => Member::Second,
            Member::Second => Member::First,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseVerdict {
    pub win: Member,
    pub lose: Member,
    pub reward_win: f64,
    pub reward_lose: f64,
    pub s_gap: f64,
}

impl PairwiseVerdict {
    /// Builds a verdict from the two raw rewards; ties go to the first member.
    pub fn from_rewards(reward_a: f64, reward_b: f64) -> Self {
        let (win, reward_win, reward_lose) = if reward_b > reward_a {
            (Member::Second, reward_b, reward_a)
        } else {
            (Member::First, reward_a, reward_b)
        };
        Self { win, lose: win.other(), reward_win, reward_lose, s_gap: reward_win - reward_lose }
    }
}

/// Scores `x_a` then `x_b` and returns the preference verdict.
pub fn compare(x_a: &[f64], x_b: &[f64], ranker: &mut dyn Ranker) -> Result<PairwiseVerdict> {
    check_dim(x_a.len(), x_b.len())?;
    let ra = ranker.score(x_a)?;
    let rb = ranker.score(x_b)?;
    Ok(PairwiseVerdict::from_rewards(ra, rb))
}
