use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pairdistill::experiment::{ablate_pairs, baseline_sds, run_experiment, sweep_tau, RunOutput};
use pairdistill::trace::SummaryRow;
use pairdistill::{ExperimentConfig, HarnessError, RawConfig, Result};

#[derive(Parser)]
#[command(name = "pairdistill", version, about = "Preference-guided score distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Run the config once per threshold, sharing the seed and pair draws.
    SweepTau {
        #[command(flatten)]
        common: Common,
        /// Comma-separated thresholds, e.g. `0.01,0.005,0.001,0,inf`.
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<String>,
    },
    /// Compare the two pair-construction strategies on matched draws.
    AblatePairs(Common),
    /// Run the config with the ranker-free SDS update.
    BaselineSds(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (flat `key = value` lines).
    config: PathBuf,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_path();
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_owned(), source })?;
        let wrap = |source| HarnessError::Config { path: path.to_owned(), source };
        let mut raw = RawConfig::parse(&text).map_err(wrap)?;
        for kv in &self.overrides {
            raw.set_pair(kv).map_err(wrap)?;
        }
        if let Some(out) = &self.out {
            raw.set("output_dir", &out.to_string_lossy()).map_err(wrap)?;
        }
        if let Some(seed) = self.seed {
            raw.set("seed", &seed.to_string()).map_err(wrap)?;
        }
        if let Some(steps) = self.steps {
            raw.set("steps", &steps.to_string()).map_err(wrap)?;
        }
        ExperimentConfig::from_raw(&raw).map_err(wrap)
    }
}

fn parse_tau(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|t| *t >= 0.0 && t.is_finite())
            .ok_or_else(|| HarnessError::Invalid(format!("bad tau '{v}' (expected a number >= 0 or 'inf')"))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn report(rows: &[&SummaryRow], dir: &Path) {
    for r in rows {
        println!(
            "{}: avg_reward {} distance {} pull_only {} push_pull {} skipped {} mean_s_gap {} ({:.2} s)",
            r.name,
            opt(r.final_avg_reward),
            opt(r.distance_to_target),
            r.pull_only,
            r.push_pull,
            r.skipped,
            opt(r.mean_s_gap),
            r.seconds,
        );
        if let Some(n) = r.replay_push_pull {
            println!("  replayed push_pull at tau {}: {n}", r.tau);
        }
    }
    println!("outputs in {}", dir.display());
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let out = run_experiment(&cfg)?;
            report(&[&out.summary], &cfg.output_dir);
        }
        Command::BaselineSds(c) => {
            let cfg = c.load()?;
            let out = baseline_sds(&cfg)?;
            report(&[&out.summary], &cfg.output_dir);
        }
        Command::SweepTau { common, taus } => {
            let cfg = common.load()?;
            let taus = taus.iter().map(|t| parse_tau(t)).collect::<Result<Vec<_>>>()?;
            let outs = sweep_tau(&cfg, &taus)?;
            report(&outs.iter().map(|o: &RunOutput| &o.summary).collect::<Vec<_>>(), &cfg.output_dir);
        }
        Command::AblatePairs(c) => {
            let cfg = c.load()?;
            let out = ablate_pairs(&cfg)?;
            report(&out.runs.iter().map(|o| &o.summary).collect::<Vec<_>>(), &cfg.output_dir);
            match out.paired {
                Some(p) => println!(
                    "paired s_gap difference (timesteps - noises): mean {:.6}, std err {:.6}, z {:.3}, n {}",
                    p.mean_diff, p.std_err, p.z, p.n
                ),
                None => println!("paired s_gap difference: not enough ranked iterations"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
