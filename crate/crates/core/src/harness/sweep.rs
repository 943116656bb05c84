use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::charts::{build_atlas, Atlas};
use crate::error::{Error, Result};
use crate::estimator::{build_estimator, choose_n, lambda_sets, Mode};
use crate::geometry::{
    label_inputs, sample_inputs, Manifold, ManifoldSpec, TargetFunction,
};
use crate::seed;

/// Aggregate for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub m: usize,
    pub n_used: u32,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub log2_m: f64,
    /// Natural log of `mse_mean`; absent when the mean is zero.
    pub log_mse: Option<f64>,
    pub trial_mse: Vec<f64>,
    /// Mean of `|Lambda'_{x,S}| / |Lambda_{x,S}|` over test points, when
    /// collected.
    pub lambda_ratio_mean: Option<f64>,
}

/// A rate sweep for one prediction mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub mode: Mode,
    pub gated: bool,
    pub manifold: ManifoldSpec,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub s: f64,
    pub q_star: u32,
    pub charts: usize,
    pub theoretical_slope: f64,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `ln mse_mean` on `ln m`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_defined: bool,
}

/// Literal and feedback sweeps on identical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackComparison {
    pub literal: RateResult,
    pub feedback: RateResult,
    /// `literal / feedback` mean MSE per sample size.
    pub mse_ratio: Vec<Option<f64>>,
    /// Trials per sample size where feedback MSE is strictly below literal.
    pub feedback_wins: Vec<usize>,
    pub trials: usize,
}

/// The same intrinsic manifold swept at two ambient dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionComparison {
    pub low: RateResult,
    pub high: RateResult,
    pub slope_difference: Option<f64>,
}

/// Unweighted least squares of `y` on `x`; `None` with fewer than two
/// points or a degenerate design.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

struct Context {
    manifold: Manifold,
    target: TargetFunction,
    atlas: Atlas,
}

struct TrialOutcome {
    mse: BTreeMap<Mode, f64>,
    lambda_ratio: Option<f64>,
}

fn prepare(config: &ExperimentConfig) -> Result<Context> {
    config.validate()?;
    let manifold = config.manifold()?;
    let target = config.target_for(&manifold);
    let atlas = build_atlas(&manifold, &config.atlas, config.seed)?;
    Ok(Context {
        manifold,
        target,
        atlas,
    })
}

/// Seed of trial `trial` at sample size `m`.
pub fn trial_seed(master: u64, m: usize, trial: usize) -> u64 {
    seed::hash64(master, &[seed::STREAM_TRIAL, m as u64, trial as u64])
}

/// Intrinsic parameters of the inputs drawn in one trial.
pub fn trial_intrinsic_params(config: &ExperimentConfig, m: usize, trial: usize) -> Result<Vec<Vec<f64>>> {
    let ctx = prepare(config)?;
    let x = sample_inputs(
        &ctx.manifold,
        m,
        &config.distribution,
        Some(ctx.atlas.q_star()),
        trial_seed(config.seed, m, trial),
    )?;
    Ok(x.iter().map(|p| ctx.manifold.params(p)).collect())
}

fn run_trial(
    ctx: &Context,
    config: &ExperimentConfig,
    modes: &[Mode],
    m: usize,
    trial: usize,
    collect_lambda: bool,
) -> Result<TrialOutcome> {
    let ts = trial_seed(config.seed, m, trial);
    let grid = Some(ctx.atlas.q_star());
    let x = sample_inputs(&ctx.manifold, m, &config.distribution, grid, ts)?;
    let samples = label_inputs(&ctx.manifold, &ctx.target, &config.noise, x, ts)?;
    let n = choose_n(m, ctx.target.s, ctx.manifold.intrinsic_dim())?;
    let est = build_estimator(&ctx.atlas, &samples, n)?.with_gating(config.gated);

    let test_seed = seed::hash64(ts, &[seed::STREAM_TEST]);
    let test = sample_inputs(&ctx.manifold, config.test_points, &config.distribution, grid, test_seed)?;
    let truth: Vec<f64> = test.iter().map(|p| ctx.target.eval(&ctx.manifold, p)).collect();
    let mut mse = BTreeMap::new();
    for &mode in modes {
        let mut acc = 0.0;
        for (p, f) in test.iter().zip(&truth) {
            let e = est.predict_mode(p, mode)? - f;
            acc += e * e;
        }
        mse.insert(mode, acc / test.len() as f64);
    }
    let lambda_ratio = if collect_lambda {
        let (mut sum, mut count) = (0.0, 0usize);
        for p in &test {
            if let Some(r) = lambda_sets(&est, p)?.ratio() {
                sum += r;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    } else {
        None
    };
    Ok(TrialOutcome { mse, lambda_ratio })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn sweep(
    config: &ExperimentConfig,
    modes: &[Mode],
    collect_lambda: bool,
) -> Result<(Context, Vec<Vec<TrialOutcome>>)> {
    let ctx = prepare(config)?;
    let jobs: Vec<(usize, usize)> = config
        .m_values
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = with_threads(config.threads, || {
        jobs.par_iter()
            .map(|&(m, t)| {
                run_trial(&ctx, config, modes, m, t, collect_lambda).map_err(|e| Error::Trial {
                    m,
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut grouped = Vec::with_capacity(config.m_values.len());
    let mut it = outcomes.into_iter();
    for _ in &config.m_values {
        grouped.push(it.by_ref().take(config.trials).collect());
    }
    Ok((ctx, grouped))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize(
    ctx: &Context,
    config: &ExperimentConfig,
    mode: Mode,
    grouped: &[Vec<TrialOutcome>],
) -> Result<RateResult> {
    let d = ctx.manifold.intrinsic_dim();
    let s = ctx.target.s;
    let mut points = Vec::with_capacity(grouped.len());
    for (&m, trials) in config.m_values.iter().zip(grouped) {
        let trial_mse: Vec<f64> = trials.iter().map(|t| t.mse[&mode]).collect();
        let (mse_mean, mse_std) = mean_std(&trial_mse);
        let ratios: Vec<f64> = trials.iter().filter_map(|t| t.lambda_ratio).collect();
        points.push(RatePoint {
            m,
            n_used: choose_n(m, s, d)?,
            mse_mean,
            mse_std,
            log2_m: (m as f64).log2(),
            log_mse: (mse_mean > 0.0).then(|| mse_mean.ln()),
            trial_mse,
            lambda_ratio_mean: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        });
    }
    let fit = if points.iter().all(|p| p.log_mse.is_some()) {
        let lx: Vec<f64> = points.iter().map(|p| (p.m as f64).ln()).collect();
        let ly: Vec<f64> = points.iter().map(|p| p.log_mse.expect("checked")).collect();
        fit_line(&lx, &ly)
    } else {
        None
    };
    Ok(RateResult {
        mode,
        gated: config.gated,
        manifold: ctx.manifold.spec().clone(),
        ambient_dim: ctx.manifold.ambient_dim(),
        intrinsic_dim: d,
        s,
        q_star: ctx.atlas.q_star(),
        charts: ctx.atlas.len(),
        theoretical_slope: -2.0 * s / (2.0 * s + d as f64),
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        slope_defined: fit.is_some(),
    })
}

/// Sweeps `m_values` in the configured mode.
pub fn run_rate_sweep(config: &ExperimentConfig) -> Result<RateResult> {
    let (ctx, grouped) = sweep(config, &[config.mode], false)?;
    summarize(&ctx, config, config.mode, &grouped)
}

/// Sweeps several modes on the same samples.
pub fn run_rate_sweep_modes(config: &ExperimentConfig, modes: &[Mode]) -> Result<Vec<RateResult>> {
    let (ctx, grouped) = sweep(config, modes, false)?;
    modes.iter().map(|&m| summarize(&ctx, config, m, &grouped)).collect()
}

/// Literal against feedback on identical data, with `Lambda` diagnostics.
pub fn run_feedback_comparison(config: &ExperimentConfig) -> Result<FeedbackComparison> {
    let modes = [Mode::Literal, Mode::Feedback];
    let (ctx, grouped) = sweep(config, &modes, true)?;
    let literal = summarize(&ctx, config, Mode::Literal, &grouped)?;
    let feedback = summarize(&ctx, config, Mode::Feedback, &grouped)?;
    let mse_ratio = literal
        .points
        .iter()
        .zip(&feedback.points)
        .map(|(l, f)| (f.mse_mean > 0.0).then(|| l.mse_mean / f.mse_mean))
        .collect();
    let feedback_wins = grouped
        .iter()
        .map(|trials| {
            trials
                .iter()
                .filter(|t| t.mse[&Mode::Feedback] < t.mse[&Mode::Literal])
                .count()
        })
        .collect();
    Ok(FeedbackComparison {
        literal,
        feedback,
        mse_ratio,
        feedback_wins,
        trials: config.trials,
    })
}

/// Re-embeds the configured manifold at `compare_ambient_dim` and sweeps
/// both embeddings with the same seeds.
pub fn run_dimension_comparison(config: &ExperimentConfig) -> Result<DimensionComparison> {
    let high_dim = config
        .compare_ambient_dim
        .ok_or_else(|| Error::Config("compare_ambient_dim is required".into()))?;
    let high_spec = match &config.manifold {
        ManifoldSpec::ProductEmbedding { base, seed, .. } => ManifoldSpec::ProductEmbedding {
            base: base.clone(),
            ambient_dim: high_dim,
            seed: *seed,
        },
        base => ManifoldSpec::embedded(base.clone(), high_dim, config.seed),
    };
    let high_cfg = ExperimentConfig {
        manifold: high_spec,
        ..config.clone()
    };
    let low = run_rate_sweep(config)?;
    let high = run_rate_sweep(&high_cfg)?;
    let slope_difference = match (low.slope, high.slope) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    Ok(DimensionComparison {
        low,
        high,
        slope_difference,
    })
}
