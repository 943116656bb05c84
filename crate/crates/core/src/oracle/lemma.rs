use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial as ExactBinomial, Discrete};

use crate::charts::Atlas;
use crate::error::{Error, Result};
use crate::estimator::{build_from_parts, choose_n, weighted_ratio};
use crate::geometry::{sample_inputs, InputDistribution, NoiseSpec, TargetFunction};
use crate::seed;

/// Outcome of a Monte-Carlo check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub name: String,
    /// `bound` checks pass when `estimate <= target + 3 se`; `identity`
    /// checks pass when `|estimate - target| <= 3 se`.
    pub kind: String,
    pub estimate: f64,
    pub target: f64,
    pub trials: usize,
    pub std_error: f64,
    pub pass: bool,
}

impl McReport {
    fn bound(name: String, estimate: f64, bound: f64, trials: usize, se: f64) -> Self {
        Self {
            name,
            kind: "bound".into(),
            estimate,
            target: bound,
            trials,
            std_error: se,
            pass: estimate <= bound + 3.0 * se,
        }
    }

    fn identity(name: String, estimate: f64, target: f64, trials: usize, se: f64) -> Self {
        Self {
            name,
            kind: "identity".into(),
            estimate,
            target,
            trials,
            std_error: se,
            pass: (estimate - target).abs() <= 3.0 * se,
        }
    }
}

/// Mean and standard error, summed in the given order.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_probability(m: usize, p: f64) -> Result<()> {
    if m == 0 || !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("need m >= 1 and 0 < p <= 1, got m = {m}, p = {p}")));
    }
    Ok(())
}

/// Exact `E[1{T>0} / T]` for `T ~ Binomial(m, p)` by summing the pmf.
pub fn lemma1_exact(m: usize, p: f64) -> Result<f64> {
    check_probability(m, p)?;
    let b = ExactBinomial::new(p, m as u64).map_err(|e| Error::Config(e.to_string()))?;
    Ok((1..=m as u64).map(|t| b.pmf(t) / t as f64).sum())
}

/// Monte-Carlo estimate of `E[1{T>0} / T]` against the bound `2/((m+1)p)`,
/// plus an identity check of the simulator against the exact expectation.
pub fn lemma1_check(m: usize, p: f64, trials: usize, seed_value: u64) -> Result<(McReport, McReport)> {
    check_probability(m, p)?;
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let dist = Binomial::new(m as u64, p).map_err(|e| Error::Config(e.to_string()))?;
    let values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng_for(seed_value, &[t]);
            let draw = dist.sample(&mut rng);
            if draw == 0 {
                0.0
            } else {
                1.0 / draw as f64
            }
        })
        .collect();
    let (est, se) = mean_se(&values);
    let bound = 2.0 / ((m as f64 + 1.0) * p);
    let exact = lemma1_exact(m, p)?;
    Ok((
        McReport::bound(format!("lemma1 bound m={m} p={p}"), est, bound, trials, se),
        McReport::identity(format!("lemma1 exact m={m} p={p}"), est, exact, trials, se),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lemma2Options {
    pub m: usize,
    pub trials: usize,
    pub queries: usize,
    /// Chart-space resolution; `choose_n(m, s, d)` when absent.
    pub n: Option<u32>,
    pub seed: u64,
}

impl Default for Lemma2Options {
    fn default() -> Self {
        Self {
            m: 50,
            trials: 20_000,
            queries: 512,
            n: None,
            seed: 0,
        }
    }
}

/// Averages over trials of the squared-error decomposition terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub cross: McReport,
    pub residual: McReport,
    pub total: f64,
    pub variance: f64,
    pub bias2: f64,
}

/// Checks `E|f_S - f|^2 = E|f_S - E[f_S|x]|^2 + |E[f_S|x] - f|^2` for the
/// feedback estimator on a fixed design. `E[f_S|x]` is exact because the
/// estimator is linear in the outputs with input-only weights; `mu` is the
/// empirical measure of a fixed query set.
pub fn lemma2_check(
    atlas: &Atlas,
    target: &TargetFunction,
    noise: &NoiseSpec,
    options: &Lemma2Options,
) -> Result<Lemma2Report> {
    if options.trials < 2 || options.queries == 0 {
        return Err(Error::Config("need at least 2 trials and 1 query".into()));
    }
    let manifold = atlas.manifold();
    let margin = target.bound - target.sup_abs(manifold);
    noise.validate(margin)?;
    let n = match options.n {
        Some(n) => n,
        None => choose_n(options.m, target.s, manifold.intrinsic_dim())?,
    };
    let uniform = InputDistribution::Uniform;
    let x = sample_inputs(manifold, options.m, &uniform, None, seed::hash64(options.seed, &[1]))?;
    let fx: Vec<f64> = x.iter().map(|xi| target.eval(manifold, xi)).collect();
    let est = build_from_parts(atlas, &x, &fx, target.bound, n)?;
    let queries = sample_inputs(manifold, options.queries, &uniform, None, seed::hash64(options.seed, &[2]))?;
    let truth: Vec<f64> = queries.iter().map(|q| target.eval(manifold, q)).collect();
    let weights = queries
        .iter()
        .map(|q| est.feedback_weights(q))
        .collect::<Result<Vec<_>>>()?;
    let mean_fit: Vec<f64> = weights.iter().map(|w| weighted_ratio(w, &fx)).collect();
    let nq = queries.len() as f64;

    let per_trial: Vec<[f64; 5]> = (0..options.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng_for(options.seed, &[3, t]);
            let y: Vec<f64> = fx.iter().map(|f| f + noise.sample(&mut rng, margin)).collect();
            let (mut l, mut v, mut b, mut c) = (0.0, 0.0, 0.0, 0.0);
            for ((w, &ft), &f) in weights.iter().zip(&mean_fit).zip(&truth) {
                let fs = weighted_ratio(w, &y);
                l += (fs - f) * (fs - f);
                v += (fs - ft) * (fs - ft);
                b += (ft - f) * (ft - f);
                c += (fs - ft) * (ft - f);
            }
            let (l, v, b, c) = (l / nq, v / nq, b / nq, c / nq);
            [l, v, b, c, l - (v + b)]
        })
        .collect();
    let column = |k: usize| -> Vec<f64> { per_trial.iter().map(|r| r[k]).collect() };
    let (cross, cross_se) = mean_se(&column(3));
    let (resid, resid_se) = mean_se(&column(4));
    let trials = options.trials;
    Ok(Lemma2Report {
        cross: McReport::identity(format!("lemma2 cross term m={}", options.m), cross, 0.0, trials, cross_se),
        residual: McReport::identity(
            format!("lemma2 decomposition residual m={}", options.m),
            resid,
            0.0,
            trials,
            resid_se,
        ),
        total: mean_se(&column(0)).0,
        variance: mean_se(&column(1)).0,
        bias2: mean_se(&column(2)).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{build_atlas, AtlasOptions};
    use crate::geometry::{Manifold, ManifoldSpec, TargetKind};

    #[test]
    fn lemma1_degenerate_cases() {
        let (b, e) = lemma1_check(1, 1.0, 10_000, 1).unwrap();
        assert_eq!(b.estimate, 1.0);
        assert_eq!(b.target, 1.0);
        assert!(b.pass && e.pass);
        assert!((lemma1_exact(1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let (b, _) = lemma1_check(1, 0.5, 10_000, 1).unwrap();
        assert!(b.pass && (b.estimate - 0.5).abs() < 0.05);
    }

    #[test]
    fn lemma1_exact_matches_direct_sum() {
        // independent pmf: C(m,t) p^t (1-p)^(m-t) built multiplicatively
        let (m, p) = (100usize, 0.1f64);
        let mut pmf = (1.0 - p).powi(m as i32);
        let mut total = 0.0;
        for t in 1..=m {
            pmf *= (m - t + 1) as f64 / t as f64 * p / (1.0 - p);
            total += pmf / t as f64;
        }
        assert!((lemma1_exact(m, p).unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn lemma1_rejects_bad_probability() {
        assert!(lemma1_check(10, 0.0, 100, 1).is_err());
        assert!(lemma1_check(10, 1.5, 100, 1).is_err());
    }

    #[test]
    fn lemma2_without_noise_is_exact() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let atlas = build_atlas(&m, &AtlasOptions::default(), 2).unwrap();
        let target = TargetFunction::sine_ridge(2);
        let opts = Lemma2Options {
            m: 30,
            trials: 50,
            ..Lemma2Options::default()
        };
        let r = lemma2_check(&atlas, &target, &NoiseSpec::None, &opts).unwrap();
        assert_eq!(r.cross.estimate, 0.0);
        assert_eq!(r.variance, 0.0);
        assert_eq!(r.residual.estimate, 0.0);
        assert!(r.cross.pass && r.residual.pass);
    }

    #[test]
    fn lemma2_single_sample_symmetric_noise() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let atlas = build_atlas(&m, &AtlasOptions::default(), 2).unwrap();
        let target = TargetFunction::new(TargetKind::Constant { value: 0.1 }, 1.0, 1.0, 0.5).unwrap();
        let opts = Lemma2Options {
            m: 1,
            trials: 4000,
            queries: 1,
            n: Some(1),
            seed: 4,
        };
        let r = lemma2_check(&atlas, &target, &NoiseSpec::Uniform { a: 0.3 }, &opts).unwrap();
        assert!(r.cross.pass, "{r:?}");
    }
}
