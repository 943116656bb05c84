//! Regression targets and the Hölder/Lipschitz validator.

use serde::{Deserialize, Serialize};

use super::manifold::Manifold;
use crate::error::{Error, Result};
use crate::seed;

/// Closed-form target families. All are evaluated on the manifold's
/// canonical coordinates so that re-embedding keeps the function fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    Constant { value: f64 },
    /// `scale * x[axis]`.
    Coordinate { axis: usize, scale: f64 },
    /// `amplitude * sin(frequency * <w, x>)` with `w` normalized.
    SineRidge {
        direction: Vec<f64>,
        frequency: f64,
        amplitude: f64,
    },
    /// `|<w, x>|^exponent` with `w` normalized; Hölder with constant 1.
    HolderRidge { direction: Vec<f64>, exponent: f64 },
    /// Sign of `x[axis]`; discontinuous.
    Sign { axis: usize },
}

/// A target `f` with declared smoothness `s`, constant `c0` and bound `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    #[serde(flatten)]
    pub kind: TargetKind,
    pub s: f64,
    pub c0: f64,
    #[serde(rename = "M")]
    pub bound: f64,
}

fn unit(direction: &[f64]) -> Vec<f64> {
    let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter().map(|v| v / n).collect()
}

fn project(direction: &[f64], x: &[f64]) -> f64 {
    unit(direction).iter().zip(x).map(|(a, b)| a * b).sum()
}

impl TargetFunction {
    pub fn new(kind: TargetKind, s: f64, c0: f64, bound: f64) -> Result<Self> {
        let t = Self {
            kind,
            s,
            c0,
            bound,
        };
        t.validate()?;
        Ok(t)
    }

    /// The default rate target: `0.5 sin(4 <w, x>)` with
    /// `w = (1, ..., 1)/sqrt(D)`. Lipschitz constant 2.
    pub fn sine_ridge(dim: usize) -> Self {
        Self {
            kind: TargetKind::SineRidge {
                direction: vec![1.0; dim],
                frequency: 4.0,
                amplitude: 0.5,
            },
            s: 1.0,
            c0: 2.0,
            bound: 1.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::Config(format!("smoothness s = {} outside (0, 1]", self.s)));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::Config("c0 must be positive".into()));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::Config("bound M must be positive".into()));
        }
        if let TargetKind::SineRidge { direction, .. } | TargetKind::HolderRidge { direction, .. } = &self.kind {
            if direction.iter().all(|v| *v == 0.0) || direction.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("ridge direction must be non-zero".into()));
            }
        }
        Ok(())
    }

    /// Evaluates `f` at canonical coordinates `c`.
    pub fn eval_canonical(&self, c: &[f64]) -> f64 {
        match &self.kind {
            TargetKind::Constant { value } => *value,
            TargetKind::Coordinate { axis, scale } => scale * c.get(*axis).copied().unwrap_or(0.0),
            TargetKind::SineRidge {
                direction,
                frequency,
                amplitude,
            } => amplitude * (frequency * project(direction, c)).sin(),
            TargetKind::HolderRidge {
                direction,
                exponent,
            } => project(direction, c).abs().powf(*exponent),
            TargetKind::Sign { axis } => {
                let v = c.get(*axis).copied().unwrap_or(0.0);
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Evaluates `f` at an ambient point of `manifold`.
    pub fn eval(&self, manifold: &Manifold, x: &[f64]) -> f64 {
        self.eval_canonical(&manifold.canonical_coords(x))
    }

    /// An upper bound on `sup |f|` over the manifold.
    pub fn sup_abs(&self, manifold: &Manifold) -> f64 {
        let r = manifold.coordinate_bound();
        match &self.kind {
            TargetKind::Constant { value } => value.abs(),
            TargetKind::Coordinate { scale, .. } => scale.abs() * r,
            TargetKind::SineRidge {
                frequency,
                amplitude,
                ..
            } => amplitude.abs() * (frequency.abs() * r).min(1.0),
            TargetKind::HolderRidge { exponent, .. } => r.powf(*exponent),
            TargetKind::Sign { .. } => 1.0,
        }
    }
}

/// Outcome of the smoothness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub pass: bool,
}

/// Reports `max |f(x) - f(x')| / d_G(x, x')^s` over random pairs and
/// whether it stays within `c0 (1 + 1e-9)`.
pub fn validate_lipschitz(
    target: &TargetFunction,
    manifold: &Manifold,
    n_pairs: usize,
    seed_value: u64,
) -> Result<LipschitzReport> {
    if n_pairs == 0 {
        return Err(Error::Config("n_pairs must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_INPUTS, 0x11b]);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..n_pairs {
        let x = manifold.sample_point(&mut rng);
        let y = manifold.sample_point(&mut rng);
        let d = manifold.geodesic_unchecked(&x, &y);
        if d == 0.0 {
            continue;
        }
        let diff = (target.eval(manifold, &x) - target.eval(manifold, &y)).abs();
        max_ratio = max_ratio.max(diff / d.powf(target.s));
    }
    Ok(LipschitzReport {
        max_ratio,
        pass: max_ratio <= target.c0 * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;

    fn circle() -> Manifold {
        Manifold::new(ManifoldSpec::circle()).unwrap()
    }

    #[test]
    fn constant_target_has_zero_ratio() {
        let t = TargetFunction::new(TargetKind::Constant { value: 0.3 }, 1.0, 1.0, 1.0).unwrap();
        let r = validate_lipschitz(&t, &circle(), 1000, 1).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn coordinate_target_is_one_lipschitz_on_circle() {
        let t = TargetFunction::new(TargetKind::Coordinate { axis: 0, scale: 1.0 }, 1.0, 1.0, 1.0)
            .unwrap();
        let r = validate_lipschitz(&t, &circle(), 10_000, 2).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_ratio > 0.9);
    }

    #[test]
    fn sign_target_fails() {
        let t = TargetFunction::new(TargetKind::Sign { axis: 0 }, 1.0, 1.0, 1.0).unwrap();
        let r = validate_lipschitz(&t, &circle(), 10_000, 3).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn default_ridge_passes_on_all_embeddings() {
        for spec in [
            ManifoldSpec::circle(),
            ManifoldSpec::embedded(ManifoldSpec::circle(), 10, 4),
            ManifoldSpec::sphere(),
        ] {
            let m = Manifold::new(spec).unwrap();
            let base_dim = m.canonical_coords(&m.sample_point(&mut seed::rng_for(0, &[]))).len();
            let t = TargetFunction::sine_ridge(base_dim);
            assert!(validate_lipschitz(&t, &m, 5000, 4).unwrap().pass);
            assert!(t.sup_abs(&m) <= 1.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TargetFunction::new(TargetKind::Constant { value: 0.0 }, 1.5, 1.0, 1.0).is_err());
        assert!(TargetFunction::new(TargetKind::Constant { value: 0.0 }, 1.0, 0.0, 1.0).is_err());
        assert!(validate_lipschitz(&TargetFunction::sine_ridge(2), &circle(), 0, 1).is_err());
    }
}
