use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use localnet::charts::build_atlas;
use localnet::error::{Error, Result};
use localnet::estimator::{build_from_parts, choose_n, DeepNetEstimator, Mode};
use localnet::geometry::{label_inputs, read_dataset, sample_inputs, write_dataset, InputDistribution};
use localnet::harness::{
    emit_results, run_dimension_comparison, run_feedback_comparison, run_rate_sweep,
    run_verification, write_json, write_predictions, ExperimentConfig,
};
use localnet::oracle::{Lemma2Options, McReport};

#[derive(Parser)]
#[command(name = "localnet", version, about = "Partition-based deep net regression on manifolds")]
struct Cli {
    /// Overrides the config's master seed.
    #[arg(long, global = true, env = "LOCALNET_SEED")]
    seed: Option<u64>,
    /// Worker threads for trials.
    #[arg(long, global = true, env = "LOCALNET_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled dataset.
    Gen {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_OUT")]
        out: PathBuf,
        /// Sample size; defaults to the config's `m` or largest `m_values` entry.
        #[arg(long, env = "LOCALNET_M")]
        m: Option<usize>,
    },
    /// Build an estimator from a dataset.
    Fit {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_DATA")]
        data: PathBuf,
        #[arg(long, env = "LOCALNET_OUT")]
        out: PathBuf,
        /// Chart-space resolution; chosen from the sample size when absent.
        #[arg(long, env = "LOCALNET_N")]
        n: Option<u32>,
    },
    /// Evaluate a saved estimator on query points.
    Predict {
        #[arg(long, env = "LOCALNET_EST")]
        est: PathBuf,
        #[arg(long, env = "LOCALNET_QUERIES")]
        queries: PathBuf,
        #[arg(long, env = "LOCALNET_MODE")]
        mode: Option<Mode>,
        #[arg(long, env = "LOCALNET_OUT")]
        out: PathBuf,
    },
    /// Rate sweep over the config's sample sizes.
    Rates {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_OUT")]
        out: Option<PathBuf>,
    },
    /// Literal against feedback mode on shared data.
    CompareFeedback {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_OUT")]
        out: Option<PathBuf>,
    },
    /// The same sweep at two ambient dimensions.
    CompareDimension {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_AMBIENT_DIM")]
        ambient_dim: Option<usize>,
        #[arg(long, env = "LOCALNET_OUT")]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo checks of the counting and decomposition lemmas.
    Verify {
        #[arg(long, env = "LOCALNET_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "LOCALNET_TRIALS", default_value_t = 100_000)]
        trials: usize,
        #[arg(long, env = "LOCALNET_LEMMA2_TRIALS", default_value_t = 20_000)]
        lemma2_trials: usize,
        #[arg(long, env = "LOCALNET_OUT")]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>, cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(out: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    out.or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen { config, out, m } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let manifold = cfg.manifold()?;
            let target = cfg.target_for(&manifold);
            let grid = match cfg.distribution {
                InputDistribution::BoundaryAtom { .. } => {
                    Some(build_atlas(&manifold, &cfg.atlas, cfg.seed)?.q_star())
                }
                InputDistribution::Uniform => None,
            };
            let m = m.unwrap_or_else(|| cfg.sample_size());
            let x = sample_inputs(&manifold, m, &cfg.distribution, grid, cfg.seed)?;
            let samples = label_inputs(&manifold, &target, &cfg.noise, x, cfg.seed)?;
            write_dataset(out, &samples)
        }
        Command::Fit { config, data, out, n } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let manifold = cfg.manifold()?;
            let target = cfg.target_for(&manifold);
            let (x, y) = read_dataset(data)?;
            if y.len() != x.len() {
                return Err(Error::Config(format!("{} has no y column", data.display())));
            }
            let n = match n {
                Some(n) => *n,
                None => choose_n(x.len(), target.s, manifold.intrinsic_dim())?,
            };
            let atlas = build_atlas(&manifold, &cfg.atlas, cfg.seed)?;
            let est = build_from_parts(&atlas, &x, &y, target.bound, n)?
                .with_mode(cfg.mode)
                .with_gating(cfg.gated);
            std::fs::write(out, est.to_json()?)?;
            Ok(())
        }
        Command::Predict { est, queries, mode, out } => {
            let est = DeepNetEstimator::from_json(&std::fs::read_to_string(est)?)?;
            let (q, _) = read_dataset(queries)?;
            write_predictions(out, &est, &q, mode.unwrap_or(est.mode()))
        }
        Command::Rates { config, out } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let path = output_path(out.clone(), &cfg)?;
            let result = run_rate_sweep(&cfg)?;
            emit_results(&path, std::slice::from_ref(&result))
        }
        Command::CompareFeedback { config, out } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let path = output_path(out.clone(), &cfg)?;
            let cmp = run_feedback_comparison(&cfg)?;
            for (p, (r, w)) in cmp.literal.points.iter().zip(cmp.mse_ratio.iter().zip(&cmp.feedback_wins)) {
                eprintln!(
                    "m={} literal/feedback mse ratio={} feedback wins {w}/{}",
                    p.m,
                    r.map_or("n/a".into(), |v| format!("{v:.4}")),
                    cmp.trials
                );
            }
            if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                emit_results(&path, &[cmp.literal, cmp.feedback])
            } else {
                write_json(&path, &cmp)
            }
        }
        Command::CompareDimension { config, ambient_dim, out } => {
            let mut cfg = load_config(config.as_deref(), cli)?;
            if ambient_dim.is_some() {
                cfg.compare_ambient_dim = *ambient_dim;
            }
            let path = output_path(out.clone(), &cfg)?;
            let cmp = run_dimension_comparison(&cfg)?;
            if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                emit_results(&path, &[cmp.low, cmp.high])
            } else {
                write_json(&path, &cmp)
            }
        }
        Command::Verify { config, trials, lemma2_trials, out } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let path = output_path(out.clone(), &cfg)?;
            let opts = Lemma2Options {
                trials: *lemma2_trials,
                seed: cfg.seed,
                ..Lemma2Options::default()
            };
            let report = run_verification(&cfg, *trials, &opts)?;
            let reports: Vec<&McReport> = report.reports().collect();
            for r in &reports {
                eprintln!(
                    "[{}] {}: estimate {:.6e} target {:.6e} (se {:.2e})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.estimate,
                    r.target,
                    r.std_error
                );
            }
            write_json(&path, &reports)?;
            if report.all_pass() {
                Ok(())
            } else {
                Err(Error::Config("one or more Monte-Carlo checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
