use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::charts::AtlasOptions;
use crate::error::{Error, Result};
use crate::estimator::Mode;
use crate::geometry::{InputDistribution, Manifold, ManifoldSpec, NoiseSpec, TargetFunction};

/// One experiment, loaded from a single JSON document. Every field has a
/// default, so `{}` is a valid config (circle, sine ridge, uniform noise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldSpec,
    /// Defaults to a sine ridge over the manifold's canonical coordinates.
    pub target: Option<TargetFunction>,
    pub noise: NoiseSpec,
    pub distribution: InputDistribution,
    pub m_values: Vec<usize>,
    /// Sample size for `gen`; the largest entry of `m_values` when absent.
    pub m: Option<usize>,
    pub trials: usize,
    pub mode: Mode,
    /// Query-side cube gating in feedback mode.
    pub gated: bool,
    pub seed: u64,
    pub atlas: AtlasOptions,
    pub test_points: usize,
    /// Second ambient dimension for the dimension comparison.
    pub compare_ambient_dim: Option<usize>,
    /// Worker threads for trials; all cores when absent.
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldSpec::circle(),
            target: None,
            noise: NoiseSpec::default(),
            distribution: InputDistribution::Uniform,
            m_values: (8..=14).map(|e| 1usize << e).collect(),
            m: None,
            trials: 20,
            mode: Mode::Feedback,
            gated: true,
            seed: 0,
            atlas: AtlasOptions::default(),
            test_points: 2048,
            compare_ambient_dim: None,
            threads: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn manifold(&self) -> Result<Manifold> {
        Manifold::new(self.manifold.clone())
    }

    pub fn target_for(&self, manifold: &Manifold) -> TargetFunction {
        self.target
            .clone()
            .unwrap_or_else(|| TargetFunction::sine_ridge(manifold.canonical_dim()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::Config("m_values must not be empty".into()));
        }
        if self.m_values[0] == 0 || self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m_values must be positive and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.test_points == 0 {
            return Err(Error::Config("test_points must be at least 1".into()));
        }
        if self.m == Some(0) {
            return Err(Error::Config("m must be at least 1".into()));
        }
        let manifold = self.manifold()?;
        let target = self.target_for(&manifold);
        target.validate()?;
        self.noise.validate(target.bound - target.sup_abs(&manifold))?;
        if let InputDistribution::BoundaryAtom { p_atom } = self.distribution {
            if !(0.0..=1.0).contains(&p_atom) {
                return Err(Error::Config(format!("p_atom = {p_atom} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Sample size used by `gen` and `fit`.
    pub fn sample_size(&self) -> usize {
        self.m.unwrap_or_else(|| *self.m_values.last().expect("validated"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_valid() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.m_values.first(), Some(&256));
        assert_eq!(cfg.m_values.last(), Some(&16384));
    }

    #[test]
    fn rejects_unsorted_m() {
        let cfg = ExperimentConfig {
            m_values: vec![10, 10],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
