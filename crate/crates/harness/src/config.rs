//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys
//! are unique; unknown keys are rejected. Every error carries the line it
//! came from (`0` for values supplied on the command line).
//!
//! Vector values accept three forms:
//!
//! * a literal list `1.5, -2, 0`
//! * `fill(v)`: `v` repeated to the render dimension
//! * `blob(cx, cy, scale, amp)` terms joined by `+`: Gaussian blobs drawn
//!   on the representation's grid (direct vectors are a 1-row grid)

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pairdistill_core::engine::{Mode, PairStrategy, RunConfig, DEFAULT_TAU, LMM_TAU};
use pairdistill_core::imaging::Normalization;
use pairdistill_core::optim::OptimizerKind;
use pairdistill_core::oracle::{CfgSpec, Component, GaussianMixture};
use pairdistill_core::ranker::transport::{Endpoint, HttpSettings};
use pairdistill_core::ranker::RewardSpec;
use pairdistill_core::representation::{
    DirectVector, ImageShape, Representation, Splat, SplatField2D, ViewSpec,
};
use pairdistill_core::schedule::{make_linear_schedule, NoiseSchedule, WeightKind};

/// Environment variable naming the LMM endpoint when `lmm.endpoint = env`.
pub const ENDPOINT_ENV: &str = "PAIRDISTILL_LMM_ENDPOINT";
/// Bearer token for HTTP endpoints.
pub const API_KEY_ENV: &str = "PAIRDISTILL_LMM_API_KEY";

/// Evaluation views for the average-reward metric at desk scale.
pub const DEFAULT_METRIC_VIEWS: usize = 8;

/// `line` is 1-based; 0 means the value came from a command-line override.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {message}", if *line == 0 { "command line".to_owned() } else { format!("line {line}") })]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

const KEYS: &[&str] = &[
    "name",
    "output_dir",
    "mode",
    "tau",
    "cfg_scale",
    "cfg_label",
    "pair_strategy",
    "pair_gap",
    "steps",
    "learning_rate",
    "optimizer",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "t_min",
    "t_max",
    "seed",
    "views",
    "schedule_steps",
    "beta_min",
    "beta_max",
    "weight",
    "representation",
    "dim",
    "init",
    "init_noise",
    "grid_width",
    "grid_height",
    "grid_channels",
    "splat_count",
    "splat_log_scale",
    "splat_amplitude",
    "reward",
    "reward.target",
    "reward.weights",
    "reward.label",
    "reward.value",
    "lmm.questions",
    "lmm.endpoint",
    "lmm.model",
    "lmm.timeout_secs",
    "lmm.record",
    "metric_views",
    "metric_every",
    "image_min",
    "image_max",
];

const MIXTURE_FIELDS: &[&str] = &["weight", "mean", "stdev", "label"];

fn known_key(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    let mut parts = key.split('.');
    matches!(
        (parts.next(), parts.next().map(|k| k.parse::<usize>()), parts.next(), parts.next()),
        (Some("mixture"), Some(Ok(_)), Some(field), None) if MIXTURE_FIELDS.contains(&field)
    )
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but not yet validated key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(line, format!("expected 'key = value', got '{content}'"));
            };
            let key = key.trim();
            if key.is_empty() {
                return err(line, "empty key");
            }
            if !known_key(key) {
                return err(line, format!("unknown key '{key}'"));
            }
            if let Some(prev) = entries.get(key) {
                return err(line, format!("duplicate key '{key}' (lines {} and {line})", prev.line));
            }
            entries.insert(key.to_owned(), Entry { value: value.trim().to_owned(), line });
        }
        Ok(Self { entries })
    }

    /// Command-line override; replaces any value from the file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !known_key(key) {
            return err(0, format!("unknown key '{key}'"));
        }
        self.entries.insert(key.to_owned(), Entry { value: value.trim().to_owned(), line: 0 });
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        match pair.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v),
            None => err(0, format!("override '{pair}' is not key=value")),
        }
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|e| (e.value.as_str(), e.line))
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().or_else(|_| err(line, format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.get(key).map_or(default, |(v, _)| v).to_owned()
    }

    fn label(&self, key: &str) -> Result<Option<i64>, ConfigError> {
        match self.get(key) {
            None | Some(("none", _)) => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .or_else(|_| err(line, format!("{key}: expected an integer label or 'none', got '{v}'"))),
        }
    }
}

/// Unresolved vector expression; resolved once the render shape is known.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorExpr {
    Literal(Vec<f64>),
    Fill(f64),
    Blobs(Vec<[f64; 4]>),
}

fn parse_args(inner: &str, n: usize) -> Option<Vec<f64>> {
    let args: Result<Vec<f64>, _> = inner.split(',').map(|a| a.trim().parse::<f64>()).collect();
    args.ok().filter(|a| a.len() == n)
}

impl std::str::FromStr for VectorExpr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("fill(").and_then(|r| r.strip_suffix(')')) {
            return parse_args(inner, 1)
                .map(|a| VectorExpr::Fill(a[0]))
                .ok_or_else(|| format!("bad fill expression '{s}'"));
        }
        if s.starts_with("blob(") {
            let blobs: Option<Vec<[f64; 4]>> = s
                .split('+')
                .map(|term| {
                    let inner = term.trim().strip_prefix("blob(")?.strip_suffix(')')?;
                    let a = parse_args(inner, 4)?;
                    Some([a[0], a[1], a[2], a[3]])
                })
                .collect();
            return blobs.map(VectorExpr::Blobs).ok_or_else(|| format!("bad blob expression '{s}'"));
        }
        let values: Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match values {
            Ok(v) if !v.is_empty() => Ok(VectorExpr::Literal(v)),
            _ => Err(format!("cannot parse vector '{s}'")),
        }
    }
}

impl VectorExpr {
    pub fn resolve(&self, shape: ImageShape) -> Result<Vec<f64>, String> {
        match self {
            VectorExpr::Literal(v) => Ok(v.clone()),
            VectorExpr::Fill(v) => Ok(vec![*v; shape.len()]),
            VectorExpr::Blobs(blobs) => {
                let splats: Vec<Splat> = blobs
                    .iter()
                    .map(|&[cx, cy, scale, amp]| Splat {
                        center: [cx, cy],
                        log_scale: scale.ln(),
                        amplitude: vec![amp; shape.channels],
                    })
                    .collect();
                if blobs.iter().any(|b| b[2].is_nan() || b[2] <= 0.0) {
                    return Err("blob scale must be positive".into());
                }
                let field = SplatField2D::new(&splats, shape).map_err(|e| e.to_string())?;
                Ok(field.render(&ViewSpec::Identity))
            }
        }
    }
}

fn parse_views(s: &str) -> Result<Vec<ViewSpec>, String> {
    let s = s.trim();
    if s == "identity" {
        return Ok(vec![ViewSpec::Identity]);
    }
    if let Some(n) = s.strip_prefix("ring:") {
        let n: usize = n.trim().parse().map_err(|_| format!("bad ring count '{n}'"))?;
        if n == 0 {
            return Err("ring needs at least one view".into());
        }
        return Ok(ViewSpec::ring(n));
    }
    s.split(';')
        .map(|item| {
            let item = item.trim();
            if item == "identity" {
                return Ok(ViewSpec::Identity);
            }
            let parts: Option<Vec<f64>> = item
                .strip_prefix("affine:")
                .map(|rest| rest.split(':').filter_map(|p| p.trim().parse().ok()).collect());
            match parts {
                Some(p) if p.len() == 3 => Ok(ViewSpec::Affine { angle: p[0], translation: [p[1], p[2]] }),
                _ => Err(format!("bad view '{item}' (expected identity, ring:<n> or affine:<angle>:<tx>:<ty>)")),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepresentationSpec {
    Direct { init: Vec<f64>, init_noise: f64 },
    Splat { shape: ImageShape, count: usize, log_scale: f64, amplitude: f64, init_noise: f64 },
}

impl RepresentationSpec {
    pub fn shape(&self) -> ImageShape {
        match self {
            RepresentationSpec::Direct { init, .. } => ImageShape { width: init.len(), height: 1, channels: 1 },
            RepresentationSpec::Splat { shape, .. } => *shape,
        }
    }

    /// Initial representation. Randomness comes from a stream of `seed`
    /// that the optimization loop never uses.
    pub fn build(&self, seed: u64) -> pairdistill_core::Result<Representation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        match self {
            RepresentationSpec::Direct { init, init_noise } => {
                let params = init
                    .iter()
                    .map(|v| v + init_noise * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Ok(DirectVector::new(params)?.into())
            }
            RepresentationSpec::Splat { shape, count, log_scale, amplitude, init_noise } => {
                let splats: Vec<Splat> = (0..*count)
                    .map(|_| Splat {
                        center: [
                            rng.random::<f64>() * (shape.width as f64 - 1.0),
                            rng.random::<f64>() * (shape.height as f64 - 1.0),
                        ],
                        log_scale: *log_scale,
                        amplitude: (0..shape.channels)
                            .map(|_| amplitude + init_noise * rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    })
                    .collect();
                Ok(SplatField2D::new(&splats, *shape)?.into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub weight: WeightKind,
}

impl ScheduleSpec {
    pub fn build(&self) -> pairdistill_core::Result<NoiseSchedule> {
        Ok(make_linear_schedule(self.steps, self.beta_min, self.beta_max)?.with_weight(self.weight))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmSettings {
    /// `env` defers to [`ENDPOINT_ENV`], falling back to `mock:yes`.
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub record: Option<PathBuf>,
}

impl LmmSettings {
    pub fn resolve_endpoint(&self) -> Result<Endpoint, String> {
        let locator = if self.endpoint == "env" {
            std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| "mock:yes".into())
        } else {
            self.endpoint.clone()
        };
        locator.parse()
    }

    pub fn http(&self) -> HttpSettings {
        HttpSettings { model: self.model.clone(), api_key: std::env::var(API_KEY_ENV).ok(), timeout: self.timeout }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub run: RunConfig,
    pub schedule: ScheduleSpec,
    pub mixture: GaussianMixture,
    pub reward: RewardSpec,
    pub representation: RepresentationSpec,
    /// Timestep offset for the timestep pair strategy, kept even when the
    /// run itself uses different noises (the pair ablation needs it).
    pub pair_gap: usize,
    pub output_dir: PathBuf,
    pub metric_views: usize,
    pub metric_every: usize,
    pub image_norm: Normalization,
    pub lmm: LmmSettings,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_raw(&RawConfig::parse(text)?)
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let schedule = ScheduleSpec {
            steps: raw.parsed("schedule_steps", pairdistill_core::schedule::DEFAULT_STEPS)?,
            beta_min: raw.parsed("beta_min", pairdistill_core::schedule::DEFAULT_BETA_MIN)?,
            beta_max: raw.parsed("beta_max", pairdistill_core::schedule::DEFAULT_BETA_MAX)?,
            weight: raw.parsed("weight", WeightKind::default())?,
        };
        let sched = schedule
            .build()
            .or_else(|e| err(raw.line("schedule_steps").max(raw.line("beta_min")), e.to_string()))?;

        let representation = parse_representation(raw)?;
        let shape = representation.shape();
        let mixture = parse_mixture(raw, shape)?;
        if mixture.dim() != shape.len() {
            return err(
                raw.line("mixture.0.mean"),
                format!("mixture dimension {} does not match render dimension {}", mixture.dim(), shape.len()),
            );
        }

        let reward = parse_reward(raw, shape)?;
        let reward_line = raw.line("reward");
        reward.validate(shape.len(), Some(&mixture)).or_else(|e| err(reward_line, e.to_string()))?;

        let mode = match raw.string("mode", "preference").as_str() {
            "preference" => Mode::Preference,
            "sds" => Mode::Sds,
            other => return err(raw.line("mode"), format!("mode must be 'preference' or 'sds', got '{other}'")),
        };

        let default_tau = if reward.is_lmm() { LMM_TAU } else { DEFAULT_TAU };
        let tau = match raw.get("tau") {
            None => default_tau,
            Some(("inf", _)) => f64::INFINITY,
            Some((v, line)) => match v.parse::<f64>() {
                Ok(t) if t >= 0.0 && t.is_finite() => t,
                _ => return err(line, format!("tau must be a number >= 0 or 'inf', got '{v}'")),
            },
        };

        let cfg_label = raw.label("cfg_label")?;
        if let Some(l) = cfg_label {
            if !mixture.has_label(l) {
                return err(raw.line("cfg_label"), format!("cfg_label {l} matches no mixture component"));
            }
        }
        let cfg = CfgSpec::new(raw.parsed("cfg_scale", 1.0)?, cfg_label)
            .or_else(|e| err(raw.line("cfg_scale"), e.to_string()))?;

        let gap: usize = raw.parsed("pair_gap", 200)?;
        let pair_strategy = match raw.string("pair_strategy", "different_noises").as_str() {
            "different_noises" => PairStrategy::DifferentNoises,
            "different_timesteps" => PairStrategy::DifferentTimesteps { gap },
            other => return err(raw.line("pair_strategy"), format!("unknown pair strategy '{other}'")),
        };

        let optimizer = match raw.string("optimizer", "adam").as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam {
                beta1: raw.parsed("adam_beta1", 0.9)?,
                beta2: raw.parsed("adam_beta2", 0.99)?,
                eps: raw.parsed("adam_eps", 1e-8)?,
            },
            other => return err(raw.line("optimizer"), format!("optimizer must be 'adam' or 'sgd', got '{other}'")),
        };

        let views = match raw.get("views") {
            None => vec![ViewSpec::Identity],
            Some((v, line)) => parse_views(v).or_else(|e| err(line, e))?,
        };
        if matches!(representation, RepresentationSpec::Direct { .. })
            && views.iter().any(|v| *v != ViewSpec::Identity)
        {
            return err(raw.line("views"), "direct representations only support the identity view");
        }

        let steps: usize = raw.parsed("steps", 1000)?;
        let learning_rate: f64 = raw.parsed("learning_rate", 0.01)?;
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return err(raw.line("learning_rate"), "learning_rate must be finite and >= 0");
        }
        let run = RunConfig {
            tau,
            cfg,
            pair_strategy,
            steps,
            learning_rate,
            optimizer,
            t_min: raw.parsed("t_min", 1)?,
            t_max: raw.parsed("t_max", sched.steps())?,
            seed: raw.parsed("seed", 0)?,
            views,
            mode,
        };
        run.validate(&sched).or_else(|e| {
            let line = ["t_min", "t_max", "pair_gap"].iter().map(|k| raw.line(k)).max().unwrap_or(0);
            err(line, e.to_string())
        })?;

        let metric_views: usize = raw.parsed("metric_views", DEFAULT_METRIC_VIEWS)?;
        if metric_views == 0 {
            return err(raw.line("metric_views"), "metric_views must be >= 1");
        }
        let metric_every: usize = raw.parsed("metric_every", 1)?;
        if metric_every == 0 {
            return err(raw.line("metric_every"), "metric_every must be >= 1");
        }
        let image_norm = Normalization::new(raw.parsed("image_min", 0.0)?, raw.parsed("image_max", 1.0)?)
            .or_else(|e| err(raw.line("image_max"), e.to_string()))?;

        let lmm = LmmSettings {
            endpoint: raw.string("lmm.endpoint", "env"),
            model: raw.string("lmm.model", "qwen-vl-plus-latest"),
            timeout: Duration::from_secs_f64(raw.parsed("lmm.timeout_secs", 60.0)?),
            record: raw.get("lmm.record").map(|(v, _)| PathBuf::from(v)),
        };
        if reward.is_lmm() {
            lmm.resolve_endpoint().or_else(|e| err(raw.line("lmm.endpoint"), e))?;
        }

        Ok(Self {
            name: raw.string("name", "run"),
            run,
            schedule,
            mixture,
            reward,
            representation,
            pair_gap: gap,
            output_dir: PathBuf::from(raw.string("output_dir", "out")),
            metric_views,
            metric_every,
            image_norm,
            lmm,
        })
    }

    /// Views the average-reward metric is taken over.
    pub fn metric_view_list(&self) -> Vec<ViewSpec> {
        match self.representation {
            RepresentationSpec::Direct { .. } => vec![ViewSpec::Identity; self.metric_views],
            RepresentationSpec::Splat { .. } => ViewSpec::ring(self.metric_views),
        }
    }

    pub fn build_schedule(&self) -> pairdistill_core::Result<NoiseSchedule> {
        self.schedule.build()
    }
}

fn parse_representation(raw: &RawConfig) -> Result<RepresentationSpec, ConfigError> {
    let init_noise: f64 = raw.parsed("init_noise", 0.0)?;
    if !(init_noise >= 0.0 && init_noise.is_finite()) {
        return err(raw.line("init_noise"), "init_noise must be finite and >= 0");
    }
    match raw.string("representation", "direct").as_str() {
        "direct" => {
            let init_expr: Option<VectorExpr> = match raw.get("init") {
                None => None,
                Some((v, line)) => Some(v.parse().or_else(|e: String| err(line, e))?),
            };
            let dim = match (raw.get("dim"), &init_expr) {
                (Some(_), _) => raw.parsed::<usize>("dim", 0)?,
                (None, Some(VectorExpr::Literal(v))) => v.len(),
                _ => return err(raw.line("representation"), "direct representation needs 'dim' or a literal 'init'"),
            };
            if dim == 0 {
                return err(raw.line("dim"), "dim must be >= 1");
            }
            let shape = ImageShape { width: dim, height: 1, channels: 1 };
            let init = match init_expr {
                None => vec![0.0; dim],
                Some(e) => e.resolve(shape).or_else(|m| err(raw.line("init"), m))?,
            };
            if init.len() != dim {
                return err(raw.line("init"), format!("init has {} entries, dim is {dim}", init.len()));
            }
            Ok(RepresentationSpec::Direct { init, init_noise })
        }
        "splat" => {
            let shape = ImageShape {
                width: raw.parsed("grid_width", 16)?,
                height: raw.parsed("grid_height", 16)?,
                channels: raw.parsed("grid_channels", 1)?,
            };
            if shape.is_empty() || !(1..=4).contains(&shape.channels) {
                return err(raw.line("grid_channels").max(raw.line("grid_width")), "grid needs positive size and 1-4 channels");
            }
            Ok(RepresentationSpec::Splat {
                shape,
                count: raw.parsed("splat_count", 8)?,
                log_scale: raw.parsed("splat_log_scale", 0.5)?,
                amplitude: raw.parsed("splat_amplitude", 0.1)?,
                init_noise,
            })
        }
        other => err(raw.line("representation"), format!("representation must be 'direct' or 'splat', got '{other}'")),
    }
}

fn parse_mixture(raw: &RawConfig, shape: ImageShape) -> Result<GaussianMixture, ConfigError> {
    let mut indices: Vec<usize> = raw
        .entries
        .keys()
        .filter_map(|k| k.strip_prefix("mixture.")?.split('.').next()?.parse().ok())
        .collect();
    indices.dedup();
    if indices.is_empty() {
        return err(0, "at least one mixture component (mixture.0.*) is required");
    }
    for (expected, &k) in indices.iter().enumerate() {
        if k != expected {
            return err(raw.line(&format!("mixture.{k}.mean")), format!("mixture components must be numbered 0..n, found {k}"));
        }
    }
    let mut comps = Vec::with_capacity(indices.len());
    for k in indices {
        let key = |f: &str| format!("mixture.{k}.{f}");
        let Some((mean_text, mean_line)) = raw.get(&key("mean")) else {
            return err(raw.line(&key("weight")), format!("mixture.{k} has no mean"));
        };
        let mean_expr: VectorExpr = mean_text.parse().or_else(|e: String| err(mean_line, e))?;
        let mean = mean_expr.resolve(shape).or_else(|e| err(mean_line, e))?;
        comps.push(Component {
            weight: raw.parsed(&key("weight"), f64::NAN)?,
            mean,
            stdev: raw.parsed(&key("stdev"), 1.0)?,
            label: raw.parsed(&key("label"), 0)?,
        });
    }
    if comps.iter().any(|c| c.weight.is_nan()) {
        return err(0, "every mixture component needs a weight");
    }
    GaussianMixture::new(comps).or_else(|e| err(raw.line("mixture.0.weight"), e.to_string()))
}

fn parse_reward(raw: &RawConfig, shape: ImageShape) -> Result<RewardSpec, ConfigError> {
    let vector = |key: &str| -> Result<Vec<f64>, ConfigError> {
        let Some((v, line)) = raw.get(key) else {
            return err(raw.line("reward"), format!("reward needs '{key}'"));
        };
        let expr: VectorExpr = v.parse().or_else(|e: String| err(line, e))?;
        expr.resolve(shape).or_else(|e| err(line, e))
    };
    Ok(match raw.string("reward", "constant").as_str() {
        "proximity" => RewardSpec::Proximity { target: vector("reward.target")? },
        "linear" => RewardSpec::Linear { weights: vector("reward.weights")? },
        "mixture_likelihood" => RewardSpec::MixtureLikelihood { label: raw.label("reward.label")? },
        "constant" => RewardSpec::Constant { value: raw.parsed("reward.value", 0.0)? },
        "lmm" => {
            let questions: Vec<String> = raw
                .get("lmm.questions")
                .map(|(v, _)| v.split('|').map(|q| q.trim().to_owned()).filter(|q| !q.is_empty()).collect())
                .unwrap_or_default();
            if questions.is_empty() {
                return err(raw.line("lmm.questions").max(raw.line("reward")), "lmm reward needs 'lmm.questions' (separated by '|')");
            }
            RewardSpec::Lmm { questions, endpoint: raw.string("lmm.endpoint", "env") }
        }
        other => return err(raw.line("reward"), format!("unknown reward '{other}'")),
    })
}
