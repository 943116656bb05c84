use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, Manifold};
use crate::netcore::square_rectifier_unchecked;
use crate::seed;

/// One square-rectifier term `a * sigma2(<w, x> + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Unit {
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

impl Sigma2Unit {
    #[inline]
    pub fn pre_activation(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a * square_rectifier_unchecked(self.pre_activation(x))
    }
}

/// A shallow square-rectifier network with one hidden layer per output
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartNet {
    pub outputs: Vec<Vec<Sigma2Unit>>,
}

impl ChartNet {
    /// Number of terms per output coordinate for input dimension `dim`.
    pub fn width(dim: usize) -> usize {
        (dim + 2) * (dim + 1)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.outputs
            .iter()
            .map(|units| units.iter().map(|u| u.eval(x)).sum())
            .collect()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let width = Self::width(dim);
        for units in &self.outputs {
            if units.len() != width || units.iter().any(|u| u.w.len() != dim) {
                return Err(Error::Config(format!(
                    "chart net must have {width} terms of input dimension {dim} per coordinate"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum ChartBackend {
    Analytic,
    FittedNet { coeffs: ChartNet },
}

/// A chart `Phi` from the geodesic ball `B(center, delta)` onto `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub center: AmbientPoint,
    pub delta: f64,
    #[serde(flatten)]
    pub backend: ChartBackend,
    /// Sampled distortion bounds; zero until estimated.
    pub alpha: f64,
    pub beta: f64,
}

/// Output of a chart map with its out-of-domain flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartImage {
    pub coords: Vec<f64>,
    /// False when the analytic backend was evaluated outside its ball (the
    /// coordinates are then clamped) or a fitted net left `[-1, 1]^d`.
    pub in_domain: bool,
}

impl Chart {
    pub fn analytic(center: AmbientPoint, delta: f64) -> Self {
        Self {
            center,
            delta,
            backend: ChartBackend::Analytic,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn is_fitted(&self) -> bool {
        matches!(self.backend, ChartBackend::FittedNet { .. })
    }

    /// Scaled normal coordinates; the exact teacher for fitted nets.
    pub fn analytic_map(&self, manifold: &Manifold, x: &[f64]) -> ChartImage {
        let v = manifold.normal_coords(&self.center, x);
        let in_domain = v.iter().map(|c| c * c).sum::<f64>().sqrt() <= self.delta;
        let mut coords: Vec<f64> = v.iter().map(|c| c / self.delta).collect();
        if !in_domain {
            coords.iter_mut().for_each(|c| *c = c.clamp(-1.0, 1.0));
        }
        ChartImage { coords, in_domain }
    }

    pub fn map(&self, manifold: &Manifold, x: &[f64]) -> ChartImage {
        match &self.backend {
            ChartBackend::Analytic => self.analytic_map(manifold, x),
            ChartBackend::FittedNet { coeffs } => {
                let coords = coeffs.eval(x);
                let in_domain = coords.iter().all(|c| c.abs() <= 1.0);
                ChartImage { coords, in_domain }
            }
        }
    }
}

/// Evaluates a chart at `x`.
pub fn chart_map(chart: &Chart, manifold: &Manifold, x: &[f64]) -> ChartImage {
    chart.map(manifold, x)
}

/// Draws manifold points inside the geodesic ball `B(center, radius)`.
pub(crate) fn sample_in_ball<R: Rng + ?Sized>(
    manifold: &Manifold,
    center: &[f64],
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<AmbientPoint>> {
    let mut out = Vec::with_capacity(count);
    let cap = 1000 * count.max(1);
    for _ in 0..cap {
        if out.len() == count {
            break;
        }
        let x = manifold.sample_point(rng);
        if manifold.geodesic_unchecked(center, &x) <= radius {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(Error::Domain(format!(
            "geodesic ball of radius {radius} is too small to sample"
        )));
    }
    Ok(out)
}

/// Sampled `min` and `max` of `|Phi(x) - Phi(x')| / d_G(x, x')` over pairs in
/// the chart's ball.
pub fn distortion_constants(
    chart: &Chart,
    manifold: &Manifold,
    n_pairs: usize,
    seed_value: u64,
) -> Result<(f64, f64)> {
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_DISTORTION]);
    let pts = sample_in_ball(manifold, &chart.center, chart.delta, 2 * n_pairs, &mut rng)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut used = 0;
    for pair in pts.chunks_exact(2) {
        let d = manifold.geodesic_unchecked(&pair[0], &pair[1]);
        if d <= 1e-12 {
            continue;
        }
        let a = chart.map(manifold, &pair[0]).coords;
        let b = chart.map(manifold, &pair[1]).coords;
        let diff = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let ratio = diff / d;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        used += 1;
    }
    if used == 0 || lo <= 0.0 {
        return Err(Error::Domain("degenerate chart distortion".into()));
    }
    Ok((lo, hi))
}
