//! Experiment orchestration: single runs, the τ sweep, the pair-strategy
//! ablation, and the SDS baseline.
//!
//! Every run directory holds `trace.csv`, `view_<k>.png` (final render per
//! training view), `params.txt`, and a one-row `summary.csv`. Sweeps put
//! each member run in its own subdirectory and write the combined table
//! at the top.

use std::path::Path;
use std::time::Instant;

use pairdistill_core::engine::{Branch, Engine, IterationTrace, Mode, PairStrategy};
use pairdistill_core::imaging::encode_png;
use pairdistill_core::ranker::lmm::LmmAnnotator;
use pairdistill_core::ranker::transport::{connect, RecordingTransport, Transport};
use pairdistill_core::ranker::{Ranker, RewardSpec, SyntheticRanker};
use pairdistill_core::representation::Representation;

use crate::config::ExperimentConfig;
use crate::error::{io_err, HarnessError, Result};
use crate::metric::avg_reward_metric;
use crate::snapshot::write_snapshot;
use crate::trace::{write_summary, write_trace, SummaryRow};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PARAMS_FILE: &str = "params.txt";
pub const S_GAP_FILE: &str = "s_gap.csv";

pub struct RunOutput {
    pub summary: SummaryRow,
    pub traces: Vec<IterationTrace>,
    pub representation: Representation,
}

/// Builds the ranker a config asks for. A relative `lmm.record` path is
/// resolved against `run_dir` so concurrent runs never share a file.
pub fn build_ranker(cfg: &ExperimentConfig, run_dir: &Path) -> Result<Box<dyn Ranker>> {
    match &cfg.reward {
        RewardSpec::Lmm { questions, .. } => {
            let endpoint = cfg.lmm.resolve_endpoint().map_err(HarnessError::Invalid)?;
            let mut transport: Box<dyn Transport> = connect(&endpoint, questions.len(), &cfg.lmm.http())?;
            if let Some(record) = &cfg.lmm.record {
                transport = Box::new(RecordingTransport::to_file(transport, run_dir.join(record)));
            }
            let shape = cfg.representation.shape();
            Ok(Box::new(LmmAnnotator::new(questions.clone(), shape, cfg.image_norm, transport)?))
        }
        spec => Ok(Box::new(SyntheticRanker::new(spec.clone(), Some(cfg.mixture.clone()))?)),
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Preference => "preference",
        Mode::Sds => "sds",
    }
}

pub fn strategy_name(strategy: PairStrategy) -> String {
    match strategy {
        PairStrategy::DifferentNoises => "different_noises".into(),
        PairStrategy::DifferentTimesteps { gap } => format!("different_timesteps:{gap}"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs `cfg` with all outputs in `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let dir = cfg.output_dir.as_path();
    create_dir(dir)?;

    let sched = cfg.build_schedule()?;
    let rep = cfg.representation.build(cfg.run.seed)?;
    let mut ranker = build_ranker(cfg, dir)?;
    let metric_views = cfg.metric_view_list();
    let steps = cfg.run.steps;

    let mut engine = Engine::new(cfg.run.clone(), rep, cfg.mixture.clone(), sched)?;
    let mut traces = Vec::with_capacity(steps);
    for i in 0..steps {
        let mut tr = engine.step(ranker.as_mut())?;
        if (i + 1) % cfg.metric_every == 0 || i + 1 == steps {
            tr.metric_avg_reward = avg_reward_metric(engine.representation(), &metric_views, ranker.as_mut())?;
        }
        traces.push(tr);
    }
    let rep = engine.into_representation();

    let final_avg_reward = match traces.last() {
        Some(tr) => tr.metric_avg_reward,
        None => avg_reward_metric(&rep, &metric_views, ranker.as_mut())?,
    };
    let distance_to_target = match &cfg.reward {
        RewardSpec::Proximity { target } => {
            let mut dists = Vec::with_capacity(cfg.run.views.len());
            for v in &cfg.run.views {
                let img = rep.render(v)?;
                dists.push(img.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
            }
            mean(dists.into_iter())
        }
        _ => None,
    };
    let count = |b: Branch| traces.iter().filter(|t| t.branch == Some(b)).count();

    write_trace(&dir.join(TRACE_FILE), &traces)?;
    for (k, v) in cfg.run.views.iter().enumerate() {
        let png = encode_png(&rep.render(v)?, rep.image_shape(), cfg.image_norm)?;
        let path = dir.join(format!("view_{k}.png"));
        std::fs::write(&path, png).map_err(io_err(&path))?;
    }
    write_snapshot(&dir.join(PARAMS_FILE), &rep)?;

    let summary = SummaryRow {
        name: cfg.name.clone(),
        mode: mode_name(cfg.run.mode).into(),
        tau: cfg.run.tau,
        pair_strategy: strategy_name(cfg.run.pair_strategy),
        steps,
        final_avg_reward,
        distance_to_target,
        pull_only: count(Branch::PullOnly),
        push_pull: count(Branch::PushPull),
        skipped: count(Branch::Skipped),
        mean_s_gap: mean(traces.iter().filter_map(|t| t.s_gap)),
        replay_push_pull: None,
        image_min: cfg.image_norm.min,
        image_max: cfg.image_norm.max,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_summary(&dir.join(SUMMARY_FILE), std::slice::from_ref(&summary))?;
    Ok(RunOutput { summary, traces, representation: rep })
}

/// Runs every config concurrently and returns outputs in input order.
fn run_all(configs: &[ExperimentConfig]) -> Result<Vec<RunOutput>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Invalid("experiment thread panicked".into()))))
            .collect()
    })
}

fn tau_label(tau: f64) -> String {
    if tau.is_infinite() {
        "inf".into()
    } else {
        tau.to_string()
    }
}

/// Push-pull count when the score gaps of `reference` are replayed under `tau`.
pub fn replay_push_pull(reference: &[IterationTrace], tau: f64) -> usize {
    reference
        .iter()
        .filter_map(|t| t.s_gap)
        .filter(|&g| Branch::for_gap(g, tau) == Branch::PushPull)
        .count()
}

/// One run per τ, concurrently, in `<output_dir>/tau_<τ>/`.
///
/// Iteration `i` draws its view, timestep and noises from a stream keyed
/// by (seed, i) alone, so all member runs see the same draws. The
/// `replay_push_pull` column replays the first run's score gaps under
/// each τ, which isolates the threshold from trajectory differences.
pub fn sweep_tau(base: &ExperimentConfig, taus: &[f64]) -> Result<Vec<RunOutput>> {
    if taus.len() < 2 {
        return Err(HarnessError::Invalid("a tau sweep needs at least two values".into()));
    }
    if let Some(t) = taus.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(HarnessError::Invalid(format!("tau must be >= 0 or inf, got {t}")));
    }
    for (i, a) in taus.iter().enumerate() {
        if taus[..i].contains(a) {
            return Err(HarnessError::Invalid(format!("tau {a} listed twice")));
        }
    }
    let configs: Vec<ExperimentConfig> = taus
        .iter()
        .map(|&tau| {
            let mut c = base.clone();
            c.run.tau = tau;
            c.name = format!("{}_tau_{}", base.name, tau_label(tau));
            c.output_dir = base.output_dir.join(format!("tau_{}", tau_label(tau)));
            c
        })
        .collect();
    let mut outputs = run_all(&configs)?;
    let reference = outputs[0].traces.clone();
    for out in &mut outputs {
        out.summary.replay_push_pull = Some(replay_push_pull(&reference, out.summary.tau));
    }
    let rows: Vec<SummaryRow> = outputs.iter().map(|o| o.summary.clone()).collect();
    create_dir(&base.output_dir)?;
    write_summary(&base.output_dir.join(SUMMARY_FILE), &rows)?;
    Ok(outputs)
}

/// Paired comparison of per-iteration score gaps (timesteps minus noises).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedComparison {
    pub n: usize,
    pub mean_diff: f64,
    pub std_err: f64,
    /// `mean_diff / std_err`; compare with 1.645 for a one-sided 95% test.
    pub z: f64,
}

pub fn paired_comparison(noises: &[IterationTrace], timesteps: &[IterationTrace]) -> Option<PairedComparison> {
    let diffs: Vec<f64> =
        noises.iter().zip(timesteps).filter_map(|(a, b)| Some(b.s_gap? - a.s_gap?)).collect();
    let n = diffs.len();
    if n < 2 {
        return None;
    }
    let mean_diff = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_err = (var / n as f64).sqrt();
    Some(PairedComparison { n, mean_diff, std_err, z: mean_diff / std_err })
}

pub struct AblationOutput {
    /// `[different_noises, different_timesteps]`.
    pub runs: [RunOutput; 2],
    pub paired: Option<PairedComparison>,
}

/// Both pair strategies on the same seed and the same timestep stream.
///
/// The noise strategy samples `t` on `[t_min, hi]` and the timestep
/// strategy samples its first member there too (second member at `t +
/// gap`), where `hi = min(t_max, T - gap)`. Outputs go to
/// `different_noises/` and `different_timesteps/`, with the combined table
/// and `s_gap.csv` (per-iteration gaps side by side) at the top.
pub fn ablate_pairs(base: &ExperimentConfig) -> Result<AblationOutput> {
    let steps = base.schedule.steps;
    let gap = base.pair_gap;
    let hi = base.run.t_max.min(steps.saturating_sub(gap));
    if hi < base.run.t_min {
        return Err(HarnessError::Invalid(format!(
            "pair_gap {gap} leaves no room for timesteps in [{}, {}] with T = {steps}",
            base.run.t_min, base.run.t_max
        )));
    }
    let variant = |strategy: PairStrategy, t_max: usize, dir: &str| {
        let mut c = base.clone();
        c.run.pair_strategy = strategy;
        c.run.t_max = t_max;
        c.run.mode = Mode::Preference;
        c.name = format!("{}_{dir}", base.name);
        c.output_dir = base.output_dir.join(dir);
        c
    };
    let configs = [
        variant(PairStrategy::DifferentNoises, hi, "different_noises"),
        variant(PairStrategy::DifferentTimesteps { gap }, hi + gap, "different_timesteps"),
    ];
    let mut outputs = run_all(&configs)?.into_iter();
    let runs = [outputs.next().expect("two runs"), outputs.next().expect("two runs")];

    create_dir(&base.output_dir)?;
    let rows: Vec<SummaryRow> = runs.iter().map(|r| r.summary.clone()).collect();
    write_summary(&base.output_dir.join(SUMMARY_FILE), &rows)?;
    let mut gaps = String::from("iter,different_noises,different_timesteps\n");
    for (a, b) in runs[0].traces.iter().zip(&runs[1].traces) {
        let f = |g: Option<f64>| g.map(|v| v.to_string()).unwrap_or_default();
        gaps.push_str(&format!("{},{},{}\n", a.iteration, f(a.s_gap), f(b.s_gap)));
    }
    let path = base.output_dir.join(S_GAP_FILE);
    std::fs::write(&path, gaps).map_err(io_err(&path))?;

    let paired = paired_comparison(&runs[0].traces, &runs[1].traces);
    Ok(AblationOutput { runs, paired })
}

/// The same config with the ranker-free SDS update.
pub fn baseline_sds(base: &ExperimentConfig) -> Result<RunOutput> {
    let mut c = base.clone();
    c.run.mode = Mode::Sds;
    run_experiment(&c)
}
