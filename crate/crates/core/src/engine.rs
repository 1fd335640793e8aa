//! The preference-guided distillation loop.
//!
//! Each iteration samples a view and a timestep, renders, builds a noisy
//! pair, predicts both clean images in one step, ranks the predictions and
//! applies the piecewise gradient through the representation's pullback.
//! All randomness for iteration `i` comes from ChaCha stream `i` of the
//! run seed, so iteration `i` draws the same (view, t, eps1, eps2) no matter
//! what happened earlier in the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, AnnotationError, Error, Result};
use crate::oracle::{cfg_epsilon, predict_x0, CfgSpec, GaussianMixture};
use crate::optim::{Optimizer, OptimizerKind};
use crate::ranker::{compare, Member, PairwiseVerdict, Ranker};
use crate::representation::{Representation, ViewSpec};
use crate::schedule::{forward_diffuse, NoiseSchedule};

/// Default score-gap threshold for scalar rewards.
pub const DEFAULT_TAU: f64 = 0.001;
/// Threshold for integer yes-count rewards.
pub const LMM_TAU: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairStrategy {
    /// Independent noises at one timestep.
    #[default]
    DifferentNoises,
    /// One shared noise at `t` and `t + gap`.
    DifferentTimesteps { gap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Preference,
    Sds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tau: f64,
    pub cfg: CfgSpec,
    pub pair_strategy: PairStrategy,
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub t_min: usize,
    pub t_max: usize,
    pub seed: u64,
    pub views: Vec<ViewSpec>,
    pub mode: Mode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            cfg: CfgSpec { scale: 1.0, label: None },
            pair_strategy: PairStrategy::default(),
            steps: 1000,
            learning_rate: 0.01,
            optimizer: OptimizerKind::default(),
            t_min: 1,
            t_max: crate::schedule::DEFAULT_STEPS,
            seed: 0,
            views: vec![ViewSpec::Identity],
            mode: Mode::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self, sched: &NoiseSchedule) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.tau.is_nan() || self.tau < 0.0 {
            return bad(format!("tau must be >= 0 or inf, got {}", self.tau));
        }
        if !self.cfg.scale.is_finite() {
            return bad("guidance scale must be finite".into());
        }
        if !(1 <= self.t_min && self.t_min <= self.t_max && self.t_max <= sched.steps()) {
            return bad(format!(
                "timestep bounds must satisfy 1 <= t_min <= t_max <= {}, got [{}, {}]",
                sched.steps(),
                self.t_min,
                self.t_max
            ));
        }
        if let PairStrategy::DifferentTimesteps { gap } = self.pair_strategy {
            if self.t_min + gap > self.t_max {
                return bad(format!("timestep gap {gap} does not fit in [{}, {}]", self.t_min, self.t_max));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.views.is_empty() {
            return bad("at least one view is required".into());
        }
        Ok(())
    }

    /// Largest timestep the first pair member may be sampled at.
    fn first_t_max(&self) -> usize {
        match self.pair_strategy {
            PairStrategy::DifferentNoises => self.t_max,
            PairStrategy::DifferentTimesteps { gap } => self.t_max - gap,
        }
    }
}

/// A noised pair before any noise prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyPair {
    /// Timestep of the first member; the second sits at `t + gap`.
    pub t: usize,
    pub gap: usize,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub xt1: Vec<f64>,
    pub xt2: Vec<f64>,
}

/// A noised pair with its guided noise predictions and one-step clean estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub t: usize,
    pub gap: usize,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub xt1: Vec<f64>,
    pub xt2: Vec<f64>,
    pub eps_hat1: Vec<f64>,
    pub eps_hat2: Vec<f64>,
    pub x0hat1: Vec<f64>,
    pub x0hat2: Vec<f64>,
}

impl PairSample {
    pub fn t_of(&self, m: Member) -> usize {
        match m {
            Member::First => self.t,
            Member::Second => self.t + self.gap,
        }
    }

    pub fn eps_of(&self, m: Member) -> &[f64] {
        match m {
            Member::First => &self.eps1,
            Member::Second => &self.eps2,
        }
    }

    pub fn xt_of(&self, m: Member) -> &[f64] {
        match m {
            Member::First => &self.xt1,
            Member::Second => &self.xt2,
        }
    }

    pub fn eps_hat_of(&self, m: Member) -> &[f64] {
        match m {
            Member::First => &self.eps_hat1,
            Member::Second => &self.eps_hat2,
        }
    }

    pub fn x0hat_of(&self, m: Member) -> &[f64] {
        match m {
            Member::First => &self.x0hat1,
            Member::Second => &self.x0hat2,
        }
    }
}

fn normal_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform index in `0..n` from exactly one `u64` draw.
fn uniform_index(rng: &mut impl Rng, n: usize) -> usize {
    let u: f64 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    ((u * n as f64) as usize).min(n - 1)
}

/// Noises `x0` twice. Both noise vectors are always drawn so that the
/// random stream does not depend on the strategy.
pub fn construct_pair(
    x0: &[f64],
    rng: &mut impl Rng,
    t: usize,
    strategy: PairStrategy,
    sched: &NoiseSchedule,
) -> Result<NoisyPair> {
    let gap = match strategy {
        PairStrategy::DifferentNoises => 0,
        PairStrategy::DifferentTimesteps { gap } => gap,
    };
    if t > sched.steps() || t + gap > sched.steps() {
        return Err(Error::Parameter(format!(
            "pair timesteps ({t}, {}) exceed schedule length {}",
            t + gap,
            sched.steps()
        )));
    }
    let eps1 = normal_vec(rng, x0.len());
    let drawn2 = normal_vec(rng, x0.len());
    let eps2 = match strategy {
        PairStrategy::DifferentNoises => drawn2,
        PairStrategy::DifferentTimesteps { .. } => eps1.clone(),
    };
    let xt1 = forward_diffuse(x0, &eps1, t, sched)?;
    let xt2 = forward_diffuse(x0, &eps2, t + gap, sched)?;
    Ok(NoisyPair { t, gap, eps1, eps2, xt1, xt2 })
}

/// Adds guided noise predictions (scale `cfg.scale`) and `x0` estimates.
pub fn predict_pair(
    noisy: NoisyPair,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    cfg: &CfgSpec,
) -> Result<PairSample> {
    let t2 = noisy.t + noisy.gap;
    let eps_hat1 = cfg_epsilon(&noisy.xt1, noisy.t, gmm, sched, cfg)?;
    let eps_hat2 = cfg_epsilon(&noisy.xt2, t2, gmm, sched, cfg)?;
    let x0hat1 = predict_x0(&noisy.xt1, noisy.t, &eps_hat1, sched)?;
    let x0hat2 = predict_x0(&noisy.xt2, t2, &eps_hat2, sched)?;
    let NoisyPair { t, gap, eps1, eps2, xt1, xt2 } = noisy;
    Ok(PairSample { t, gap, eps1, eps2, xt1, xt2, eps_hat1, eps_hat2, x0hat1, x0hat2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    PullOnly,
    PushPull,
    Skipped,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::PullOnly => "pull_only",
            Branch::PushPull => "push_pull",
            Branch::Skipped => "skipped",
        }
    }

    /// Piecewise gate: pull only when the score gap is below `tau`.
    pub fn for_gap(s_gap: f64, tau: f64) -> Branch {
        if s_gap < tau {
            Branch::PullOnly
        } else {
            Branch::PushPull
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pull_only" => Ok(Branch::PullOnly),
            "push_pull" => Ok(Branch::PushPull),
            "skipped" => Ok(Branch::Skipped),
            other => Err(format!("unknown branch '{other}'")),
        }
    }
}

fn scaled(w: f64, v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| w * x).collect()
}

/// Image-space piecewise preference gradient.
///
/// Below the threshold only the guided prediction for the winner is
/// applied, with no noise subtracted. Otherwise the winner's residual
/// (guidance scale `s`) minus the loser's residual (guidance scale 1).
/// Each member is weighted at its own timestep.
pub fn preference_gradient(
    pair: &PairSample,
    verdict: &PairwiseVerdict,
    tau: f64,
    cfg: &CfgSpec,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
) -> Result<(Vec<f64>, Branch)> {
    let win = verdict.win;
    let lose = verdict.lose;
    let t_win = pair.t_of(win);
    let w_win = sched.weight(t_win)?;
    let branch = Branch::for_gap(verdict.s_gap, tau);
    if branch == Branch::PullOnly {
        return Ok((scaled(w_win, pair.eps_hat_of(win)), branch));
    }
    let t_lose = pair.t_of(lose);
    let w_lose = sched.weight(t_lose)?;
    let lose_hat = if cfg.scale == 1.0 {
        pair.eps_hat_of(lose).to_vec()
    } else {
        cfg_epsilon(pair.xt_of(lose), t_lose, gmm, sched, &cfg.with_scale(1.0))?
    };
    let grad = pair
        .eps_hat_of(win)
        .iter()
        .zip(pair.eps_of(win))
        .zip(lose_hat.iter().zip(pair.eps_of(lose)))
        .map(|((hw, ew), (hl, el))| w_win * (hw - ew) - w_lose * (hl - el))
        .collect();
    Ok((grad, branch))
}

/// `w(t) * (eps_hat^s(x_t) - eps)` with `x_t` the noised `x0`.
pub fn sds_gradient(
    x0: &[f64],
    t: usize,
    eps: &[f64],
    cfg: &CfgSpec,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    check_dim(x0.len(), eps.len())?;
    let w = sched.weight(t)?;
    if w == 0.0 {
        return Ok(vec![0.0; x0.len()]);
    }
    let xt = forward_diffuse(x0, eps, t, sched)?;
    let eps_hat = cfg_epsilon(&xt, t, gmm, sched, cfg)?;
    Ok(eps_hat.iter().zip(eps).map(|(h, e)| w * (h - e)).collect())
}

/// Per-iteration record. Ranker fields are `None` in SDS mode.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub t: usize,
    pub reward_win: Option<f64>,
    pub reward_lose: Option<f64>,
    pub s_gap: Option<f64>,
    pub branch: Option<Branch>,
    pub grad_norm: f64,
    pub metric_avg_reward: Option<f64>,
}

/// Everything one iteration computed; used by tests and replay tooling.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub trace: IterationTrace,
    pub view: ViewSpec,
    pub pair: PairSample,
    pub verdict: Option<PairwiseVerdict>,
    /// Image-space gradient; `None` when the iteration was skipped.
    pub image_grad: Option<Vec<f64>>,
    pub param_grad: Option<Vec<f64>>,
}

pub fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// One optimization run: owns its representation and optimizer state.
pub struct Engine {
    config: RunConfig,
    sched: NoiseSchedule,
    gmm: GaussianMixture,
    rep: Representation,
    optimizer: Optimizer,
    iteration: usize,
}

impl Engine {
    pub fn new(config: RunConfig, rep: Representation, gmm: GaussianMixture, sched: NoiseSchedule) -> Result<Self> {
        config.validate(&sched)?;
        check_dim(rep.image_dim(), gmm.dim())?;
        if let Some(l) = config.cfg.label {
            if !gmm.has_label(l) {
                return Err(Error::Label(l));
            }
        }
        for v in &config.views {
            rep.render(v)?;
        }
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, rep.params().len());
        Ok(Self { config, sched, gmm, rep, optimizer, iteration: 0 })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.sched
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.gmm
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn into_representation(self) -> Representation {
        self.rep
    }

    pub fn step(&mut self, ranker: &mut dyn Ranker) -> Result<IterationTrace> {
        self.step_detailed(ranker).map(|r| r.trace)
    }

    pub fn step_detailed(&mut self, ranker: &mut dyn Ranker) -> Result<StepRecord> {
        let cfg = &self.config;
        let mut rng = iteration_rng(cfg.seed, self.iteration);
        let view = cfg.views[uniform_index(&mut rng, cfg.views.len())];
        let t = cfg.t_min + uniform_index(&mut rng, cfg.first_t_max() - cfg.t_min + 1);
        let x0 = self.rep.render(&view)?;
        let noisy = construct_pair(&x0, &mut rng, t, cfg.pair_strategy, &self.sched)?;
        let pair = predict_pair(noisy, &self.gmm, &self.sched, &cfg.cfg)?;

        let mut trace = IterationTrace {
            iteration: self.iteration,
            t,
            reward_win: None,
            reward_lose: None,
            s_gap: None,
            branch: None,
            grad_norm: 0.0,
            metric_avg_reward: None,
        };
        let mut verdict = None;
        let image_grad = match cfg.mode {
            Mode::Sds => {
                let w = self.sched.weight(t)?;
                Some(pair.eps_hat1.iter().zip(&pair.eps1).map(|(h, e)| w * (h - e)).collect())
            }
            Mode::Preference => match compare(&pair.x0hat1, &pair.x0hat2, ranker) {
                Ok(v) => {
                    trace.reward_win = Some(v.reward_win);
                    trace.reward_lose = Some(v.reward_lose);
                    trace.s_gap = Some(v.s_gap);
                    verdict = Some(v);
                    let (g, branch) = preference_gradient(&pair, &v, cfg.tau, &cfg.cfg, &self.gmm, &self.sched)?;
                    trace.branch = Some(branch);
                    Some(g)
                }
                Err(Error::Annotation(e)) => {
                    log_skip(self.iteration, &e);
                    trace.branch = Some(Branch::Skipped);
                    None
                }
                Err(e) => return Err(e),
            },
        };

        let param_grad = match &image_grad {
            Some(g) => {
                let pg = self.rep.pullback(&view, g)?;
                trace.grad_norm = pg.iter().map(|x| x * x).sum::<f64>().sqrt();
                self.optimizer.update(self.rep.params_mut(), &pg)?;
                Some(pg)
            }
            None => None,
        };
        self.iteration += 1;
        Ok(StepRecord { trace, view, pair, verdict, image_grad, param_grad })
    }
}

fn log_skip(iteration: usize, e: &AnnotationError) {
    eprintln!("iteration {iteration}: annotation failed, skipping ({e})");
}

/// Runs exactly `config.steps` iterations and returns the final
/// representation with every trace.
pub fn run(
    config: RunConfig,
    rep: Representation,
    gmm: GaussianMixture,
    sched: NoiseSchedule,
    ranker: &mut dyn Ranker,
) -> Result<(Representation, Vec<IterationTrace>)> {
    let steps = config.steps;
    let mut engine = Engine::new(config, rep, gmm, sched)?;
    let mut traces = Vec::with_capacity(steps);
    for _ in 0..steps {
        traces.push(engine.step(ranker)?);
    }
    Ok((engine.into_representation(), traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Component;
    use crate::ranker::{RewardSpec, SyntheticRanker};
    use crate::representation::DirectVector;

    fn two_mode() -> GaussianMixture {
        GaussianMixture::new(vec![
            Component { weight: 0.5, mean: vec![4.0, 0.0], stdev: 1.0, label: 0 },
            Component { weight: 0.5, mean: vec![-4.0, 0.0], stdev: 1.0, label: 1 },
        ])
        .unwrap()
    }

    fn direct(v: &[f64]) -> Representation {
        DirectVector::new(v.to_vec()).unwrap().into()
    }

    fn proximity() -> SyntheticRanker {
        SyntheticRanker::new(RewardSpec::Proximity { target: vec![4.0, 0.0] }, None).unwrap()
    }

    #[test]
    fn pair_noises_are_standard_normal() {
        let sched = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = vec![0.0; 10];
        let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0.0);
        let mut differ = 0;
        for _ in 0..1000 {
            let p = construct_pair(&x0, &mut rng, 500, PairStrategy::DifferentNoises, &sched).unwrap();
            if p.eps1 != p.eps2 {
                differ += 1;
            }
            for z in p.eps1.iter().chain(&p.eps2) {
                sum += z;
                sum_sq += z * z;
                n += 1.0;
            }
        }
        assert_eq!(differ, 1000);
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        // 3-sigma bounds for 2e4 draws
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn zero_gap_gives_identical_members() {
        let sched = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = construct_pair(&[1.0, 2.0], &mut rng, 10, PairStrategy::DifferentTimesteps { gap: 0 }, &sched).unwrap();
        assert_eq!(p.xt1, p.xt2);
        let p = construct_pair(&[1.0, 2.0], &mut rng, 10, PairStrategy::DifferentTimesteps { gap: 5 }, &sched).unwrap();
        assert_eq!(p.eps1, p.eps2);
        assert_ne!(p.xt1, p.xt2);
        assert!(construct_pair(&[1.0], &mut rng, 999, PairStrategy::DifferentTimesteps { gap: 5 }, &sched).is_err());
    }

    #[test]
    fn clean_endpoint_pair_equals_x0() {
        let sched = NoiseSchedule::from_alpha_bar(vec![1.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = construct_pair(&[1.0, -1.0], &mut rng, 0, PairStrategy::DifferentNoises, &sched).unwrap();
        assert_eq!(p.xt1, vec![1.0, -1.0]);
        assert_eq!(p.xt2, vec![1.0, -1.0]);
    }

    fn hand_pair() -> PairSample {
        PairSample {
            t: 2,
            gap: 0,
            eps1: vec![0.5, -1.0],
            eps2: vec![1.0, 1.0],
            xt1: vec![0.0, 0.0],
            xt2: vec![0.0, 0.0],
            eps_hat1: vec![1.0, 0.0],
            eps_hat2: vec![0.0, 2.0],
            x0hat1: vec![0.0, 0.0],
            x0hat2: vec![0.0, 0.0],
        }
    }

    #[test]
    fn second_branch_hand_evaluation() {
        let sched = NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 0.25]).unwrap();
        let gmm = two_mode();
        let cfg = CfgSpec::new(1.0, None).unwrap();
        let v = PairwiseVerdict::from_rewards(1.0, 0.0);
        let (g, b) = preference_gradient(&hand_pair(), &v, 0.001, &cfg, &gmm, &sched).unwrap();
        assert_eq!(b, Branch::PushPull);
        // 0.75 * ((1, 0) - (0.5, -1) - ((0, 2) - (1, 1)))
        assert_eq!(g, vec![0.75 * 1.5, 0.75 * 0.0]);

        let v = PairwiseVerdict::from_rewards(0.0, 1.0);
        let (g, _) = preference_gradient(&hand_pair(), &v, 0.001, &cfg, &gmm, &sched).unwrap();
        assert_eq!(g, vec![-0.75 * 1.5, 0.0]);
    }

    #[test]
    fn first_branch_has_no_noise_subtraction() {
        let sched = NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 0.25]).unwrap();
        let v = PairwiseVerdict::from_rewards(0.3, 0.3);
        let cfg = CfgSpec::new(1.0, None).unwrap();
        let (g, b) = preference_gradient(&hand_pair(), &v, 0.001, &cfg, &two_mode(), &sched).unwrap();
        assert_eq!(b, Branch::PullOnly);
        assert_eq!(g, vec![0.75, 0.0]);
    }

    #[test]
    fn exact_predictions_cancel() {
        let mut p = hand_pair();
        p.eps_hat1 = p.eps1.clone();
        p.eps_hat2 = p.eps2.clone();
        let sched = NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 0.25]).unwrap();
        let v = PairwiseVerdict::from_rewards(5.0, 1.0);
        let cfg = CfgSpec::new(1.0, None).unwrap();
        let (g, _) = preference_gradient(&p, &v, 0.001, &cfg, &two_mode(), &sched).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn sds_gradient_cases() {
        let mu = vec![1.0, 2.0];
        let gmm = GaussianMixture::new(vec![Component { weight: 1.0, mean: mu.clone(), stdev: 0.0, label: 0 }]).unwrap();
        let sched = NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 0.25]).unwrap();
        let cfg = CfgSpec::unconditional();
        // at x0 = mu the point-mass oracle returns the injected noise
        let g = sds_gradient(&mu, 2, &[0.3, -0.4], &cfg, &gmm, &sched).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        // w(0) = 0
        assert_eq!(sds_gradient(&[5.0, 5.0], 0, &[0.3, -0.4], &cfg, &gmm, &sched).unwrap(), vec![0.0, 0.0]);
        // x0 = 0, eps = 0, abar = 0.25: x_t = 0, eps_hat = -sqrt(0.75) * (0.5 * mu - 0) / 0.75
        let g = sds_gradient(&[0.0, 0.0], 2, &[0.0, 0.0], &cfg, &gmm, &sched).unwrap();
        let c = -(0.75f64).sqrt() * 0.5 / 0.75 * 0.75;
        assert!((g[0] - c * 1.0).abs() < 1e-12 && (g[1] - c * 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let config = RunConfig { learning_rate: 0.0, steps: 5, ..Default::default() };
        let (rep, traces) = run(config, direct(&[0.1, -0.2]), two_mode(), NoiseSchedule::default(), &mut proximity()).unwrap();
        assert_eq!(rep.params(), &[0.1, -0.2]);
        assert_eq!(traces.len(), 5);
    }

    #[test]
    fn zero_steps_returns_initial() {
        let config = RunConfig { steps: 0, ..Default::default() };
        let (rep, traces) = run(config, direct(&[0.5, 0.5]), two_mode(), NoiseSchedule::default(), &mut proximity()).unwrap();
        assert_eq!(rep.params(), &[0.5, 0.5]);
        assert!(traces.is_empty());
    }

    struct Counting(usize);
    impl Ranker for Counting {
        fn score(&mut self, _: &[f64]) -> Result<f64> {
            self.0 += 1;
            Ok(0.0)
        }
    }

    #[test]
    fn sds_never_ranks() {
        let config = RunConfig { mode: Mode::Sds, steps: 20, ..Default::default() };
        let mut counter = Counting(0);
        let (_, traces) = run(config, direct(&[0.0, 0.0]), two_mode(), NoiseSchedule::default(), &mut counter).unwrap();
        assert_eq!(counter.0, 0);
        assert!(traces.iter().all(|t| t.branch.is_none() && t.s_gap.is_none()));
    }

    #[test]
    fn infinite_tau_only_pulls() {
        let config = RunConfig { tau: f64::INFINITY, steps: 50, ..Default::default() };
        let (_, traces) = run(config, direct(&[0.0, 0.0]), two_mode(), NoiseSchedule::default(), &mut proximity()).unwrap();
        assert!(traces.iter().all(|t| t.branch == Some(Branch::PullOnly)));
    }

    #[test]
    fn seeded_runs_repeat_bitwise() {
        let config = RunConfig { steps: 100, seed: 99, ..Default::default() };
        let a = run(config.clone(), direct(&[0.1, 0.1]), two_mode(), NoiseSchedule::default(), &mut proximity()).unwrap();
        let b = run(config, direct(&[0.1, 0.1]), two_mode(), NoiseSchedule::default(), &mut proximity()).unwrap();
        assert_eq!(a.1, b.1);
        assert!(a.0.params().iter().zip(b.0.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    struct Failing;
    impl Ranker for Failing {
        fn score(&mut self, _: &[f64]) -> Result<f64> {
            Err(AnnotationError::Transport("down".into()).into())
        }
    }

    #[test]
    fn annotation_failures_skip() {
        let config = RunConfig { steps: 3, ..Default::default() };
        let (rep, traces) = run(config, direct(&[0.3, 0.3]), two_mode(), NoiseSchedule::default(), &mut Failing).unwrap();
        assert_eq!(rep.params(), &[0.3, 0.3]);
        assert!(traces.iter().all(|t| t.branch == Some(Branch::Skipped) && t.grad_norm == 0.0));
    }

    #[test]
    fn direct_update_follows_image_gradient() {
        let config = RunConfig { optimizer: OptimizerKind::Sgd, learning_rate: 0.01, steps: 1, seed: 5, ..Default::default() };
        let mut engine = Engine::new(config, direct(&[0.2, -0.1]), two_mode(), NoiseSchedule::default()).unwrap();
        let before = engine.representation().params().to_vec();
        let rec = engine.step_detailed(&mut proximity()).unwrap();
        let g = rec.image_grad.unwrap();
        assert_eq!(rec.param_grad.unwrap(), g);
        for ((a, b), gi) in engine.representation().params().iter().zip(&before).zip(&g) {
            assert_eq!(*a, b - 0.01 * gi);
        }
    }

    #[test]
    fn config_validation() {
        let s = NoiseSchedule::default();
        assert!(RunConfig { tau: -1.0, ..Default::default() }.validate(&s).is_err());
        assert!(RunConfig { tau: f64::NAN, ..Default::default() }.validate(&s).is_err());
        assert!(RunConfig { t_min: 0, ..Default::default() }.validate(&s).is_err());
        assert!(RunConfig { t_max: 1001, ..Default::default() }.validate(&s).is_err());
        assert!(RunConfig { pair_strategy: PairStrategy::DifferentTimesteps { gap: 1000 }, ..Default::default() }
            .validate(&s)
            .is_err());
        assert!(RunConfig { views: vec![], ..Default::default() }.validate(&s).is_err());
        assert!(RunConfig::default().validate(&s).is_ok());
    }

    #[test]
    fn sampled_timesteps_cover_range() {
        let config = RunConfig { t_min: 3, t_max: 6, ..Default::default() };
        let mut seen = [false; 7];
        for i in 0..200 {
            let mut rng = iteration_rng(config.seed, i);
            let t = config.t_min + uniform_index(&mut rng, config.t_max - config.t_min + 1);
            seen[t] = true;
        }
        assert_eq!(seen, [false, false, false, true, true, true, true]);
    }
}
