use serde::{Deserialize, Serialize};

use crate::charts::build_atlas;
use crate::error::Result;
use crate::oracle::{lemma1_check, lemma2_check, Lemma2Options, Lemma2Report, McReport};

use super::config::ExperimentConfig;

/// Sample sizes and cell probabilities swept by the counting check.
pub const LEMMA1_M: [usize; 3] = [10, 100, 1000];
pub const LEMMA1_P: [f64; 4] = [0.01, 0.05, 0.1, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub lemma1_bound: Vec<McReport>,
    pub lemma1_exact: Vec<McReport>,
    pub lemma2: Lemma2Report,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.lemma1_bound
            .iter()
            .chain(&self.lemma1_exact)
            .chain([&self.lemma2.cross, &self.lemma2.residual])
            .all(|r| r.pass)
    }

    pub fn reports(&self) -> impl Iterator<Item = &McReport> {
        self.lemma1_bound
            .iter()
            .chain(&self.lemma1_exact)
            .chain([&self.lemma2.cross, &self.lemma2.residual])
    }
}

/// Runs both Monte-Carlo checks with `lemma1_trials` draws per grid point.
pub fn run_verification(
    config: &ExperimentConfig,
    lemma1_trials: usize,
    lemma2: &Lemma2Options,
) -> Result<VerifyReport> {
    let mut bound = Vec::new();
    let mut exact = Vec::new();
    for (a, &m) in LEMMA1_M.iter().enumerate() {
        for (b, &p) in LEMMA1_P.iter().enumerate() {
            let s = crate::seed::hash64(config.seed, &[a as u64, b as u64]);
            let (r, e) = lemma1_check(m, p, lemma1_trials, s)?;
            bound.push(r);
            exact.push(e);
        }
    }
    let manifold = config.manifold()?;
    let target = config.target_for(&manifold);
    let atlas = build_atlas(&manifold, &config.atlas, config.seed)?;
    let lemma2 = lemma2_check(&atlas, &target, &config.noise, lemma2)?;
    Ok(VerifyReport {
        lemma1_bound: bound,
        lemma1_exact: exact,
        lemma2,
    })
}
