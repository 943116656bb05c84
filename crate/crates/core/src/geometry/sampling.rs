//! Input designs, bounded noise and labelled sample sets.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::manifold::{AmbientPoint, Manifold, ManifoldSpec};
use super::target::TargetFunction;
use crate::error::{Error, Result};
use crate::netcore::{active_cubes, grid_coordinate, half_width};
use crate::seed;

/// Bounded, mean-zero observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    /// Gaussian with scale `sigma`, truncated symmetrically at `M - sup|f|`.
    TruncatedGaussian { sigma: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Uniform { a: 0.2 }
    }
}

impl NoiseSpec {
    /// Checks the noise against the margin `M - sup|f|`.
    pub fn validate(&self, margin: f64) -> Result<()> {
        match *self {
            NoiseSpec::None if margin >= 0.0 => Ok(()),
            NoiseSpec::TruncatedGaussian { sigma } if sigma > 0.0 && margin > 0.0 => Ok(()),
            NoiseSpec::Uniform { a } if a >= 0.0 && a <= margin + 1e-12 => Ok(()),
            _ => Err(Error::Config(format!(
                "noise {self:?} is not bounded by the margin M - sup|f| = {margin}"
            ))),
        }
    }

    /// Draws one noise value; `margin` is the truncation level.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Uniform { a } => {
                if a == 0.0 {
                    0.0
                } else {
                    rng.random_range(-a..=a)
                }
            }
            NoiseSpec::TruncatedGaussian { sigma } => loop {
                let z: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                if z.abs() <= margin {
                    break z;
                }
            },
        }
    }

    /// Upper bound on the noise standard deviation.
    pub fn std_dev(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Uniform { a } => a / 3f64.sqrt(),
            NoiseSpec::TruncatedGaussian { sigma } => sigma,
        }
    }
}

/// Marginal distribution of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    /// Normalized volume measure on the manifold.
    #[default]
    Uniform,
    /// Uniform, except that each point independently with probability
    /// `p_atom` is moved onto a face shared by two grid cubes.
    BoundaryAtom { p_atom: f64 },
}

/// Draws `m` inputs. `grid` is the ambient grid resolution used to place
/// boundary atoms and is required for [`InputDistribution::BoundaryAtom`].
pub fn sample_inputs(
    manifold: &Manifold,
    m: usize,
    dist: &InputDistribution,
    grid: Option<u32>,
    seed_value: u64,
) -> Result<Vec<AmbientPoint>> {
    if m == 0 {
        return Err(Error::Config("sample size m must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_INPUTS]);
    let mut atom_rng = seed::rng_for(seed_value, &[seed::STREAM_ATOMS]);
    let (p_atom, q) = match *dist {
        InputDistribution::Uniform => (0.0, 0),
        InputDistribution::BoundaryAtom { p_atom } => {
            if !(0.0..=1.0).contains(&p_atom) {
                return Err(Error::Config(format!("p_atom = {p_atom} outside [0, 1]")));
            }
            let q = grid.ok_or_else(|| {
                Error::Config("boundary-atom sampling needs the grid resolution".into())
            })?;
            if q == 0 {
                return Err(Error::Config("grid resolution must be positive".into()));
            }
            (p_atom, q)
        }
    };
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let theta = manifold.sample_params(&mut rng);
        if p_atom > 0.0 && atom_rng.random::<f64>() < p_atom {
            out.push(boundary_atom(manifold, &theta, q, &mut atom_rng)?);
        } else {
            out.push(manifold.embed(&theta)?);
        }
    }
    Ok(out)
}

/// Moves the point with parameters `theta` along a straight parameter path
/// onto the nearest interior cube face crossed by that path, then snaps the
/// crossing coordinate to a float that both adjacent closed cubes contain.
fn boundary_atom<R: Rng + ?Sized>(
    manifold: &Manifold,
    theta: &[f64],
    q: u32,
    rng: &mut R,
) -> Result<AmbientPoint> {
    let dim = manifold.ambient_dim();
    let xa = manifold.embed(theta)?;
    for _ in 0..1000 {
        let axis = rng.random_range(0..dim);
        let other = manifold.sample_params(rng);
        let xb = manifold.embed(&other)?;
        let (lo, hi) = (xa[axis].min(xb[axis]), xa[axis].max(xb[axis]));
        // interior face planes are -1 + i/q for i in 1..2q
        let face = (1..2 * q)
            .map(|i| (i, -1.0 + i as f64 / q as f64))
            .filter(|&(_, g)| lo < g && g < hi)
            .min_by(|a, b| (a.1 - xa[axis]).abs().total_cmp(&(b.1 - xa[axis]).abs()));
        let Some((i, g)) = face else { continue };

        let point_at = |t: f64| -> Result<Vec<f64>> {
            let p: Vec<f64> = theta.iter().zip(&other).map(|(a, b)| a + t * (b - a)).collect();
            manifold.embed(&p)
        };
        let sign_a = xa[axis] < g;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (t0 + t1);
            if mid == t0 || mid == t1 {
                break;
            }
            if (point_at(mid)?[axis] < g) == sign_a {
                t0 = mid;
            } else {
                t1 = mid;
            }
        }
        let mut x = point_at(0.5 * (t0 + t1))?;
        let Some(snapped) = shared_face_coordinate(q, i, g) else { continue };
        x[axis] = snapped;
        if manifold.residual(&x) <= 1e-12 && active_cubes(q, &x)?.len() >= 2 {
            return Ok(x);
        }
    }
    Err(Error::Config(
        "could not place a boundary atom; the manifold may not cross any cube face".into(),
    ))
}

/// A float near the face between cubes `i` and `i + 1` along one axis that
/// both closed cubes contain under the localization net's arithmetic.
fn shared_face_coordinate(q: u32, i: u32, g: f64) -> Option<f64> {
    let h = half_width(q);
    let (za, zb) = (grid_coordinate(q, i), grid_coordinate(q, i + 1));
    let inside = |v: f64, z: f64| h + (v - z) >= 0.0 && h - (v - z) >= 0.0;
    let mut candidates = vec![g];
    let (mut up, mut down) = (g, g);
    for _ in 0..16 {
        up = up.next_up();
        down = down.next_down();
        candidates.push(up);
        candidates.push(down);
    }
    candidates.into_iter().find(|&v| inside(v, za) && inside(v, zb))
}

/// Labelled samples `(x_i, y_i)` with `|y_i| <= M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub x: Vec<AmbientPoint>,
    pub y: Vec<f64>,
    #[serde(rename = "M")]
    pub bound: f64,
    pub seed: u64,
    pub manifold: ManifoldSpec,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Noise-free outputs of the same inputs.
    pub fn with_outputs(&self, y: Vec<f64>) -> Self {
        Self {
            y,
            ..self.clone()
        }
    }
}

/// Labels given inputs with `y = f(x) + noise`.
pub fn label_inputs(
    manifold: &Manifold,
    target: &TargetFunction,
    noise: &NoiseSpec,
    x: Vec<AmbientPoint>,
    seed_value: u64,
) -> Result<SampleSet> {
    target.validate()?;
    let margin = target.bound - target.sup_abs(manifold);
    noise.validate(margin)?;
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_NOISE]);
    let y = x
        .iter()
        .map(|xi| {
            let v = target.eval(manifold, xi) + noise.sample(&mut rng, margin);
            v.clamp(-target.bound, target.bound)
        })
        .collect();
    Ok(SampleSet {
        x,
        y,
        bound: target.bound,
        seed: seed_value,
        manifold: manifold.spec().clone(),
    })
}

/// Draws `m` uniform inputs and labels them.
pub fn draw_sample_set(
    manifold: &Manifold,
    target: &TargetFunction,
    noise: &NoiseSpec,
    m: usize,
    seed_value: u64,
) -> Result<SampleSet> {
    let x = sample_inputs(manifold, m, &InputDistribution::Uniform, None, seed_value)?;
    label_inputs(manifold, target, noise, x, seed_value)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `x_1,...,x_D,y` rows with 17 significant digits.
pub fn write_dataset(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = samples.x.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (x, y) in samples.x.iter().zip(&samples.y) {
        let mut row: Vec<String> = x.iter().map(|v| fmt_float(*v)).collect();
        row.push(fmt_float(*y));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. Returns inputs and outputs.
pub fn read_dataset(path: &Path) -> Result<(Vec<AmbientPoint>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let has_y = headers.iter().next_back() == Some("y");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if has_y {
            let (x, y) = vals.split_at(vals.len() - 1);
            xs.push(x.to_vec());
            ys.push(y[0]);
        } else {
            xs.push(vals);
        }
    }
    Ok((xs, ys))
}
