//! Exact Heaviside networks for cube localization.
//!
//! A localization net `N1(r, q, j)` is a two-layer Heaviside network whose
//! output is exactly the indicator of the closed cube of width `1/q`
//! centered at the grid point `zeta_j`. Composing it with a chart map gives
//! the cell indicators used by the estimator.
//!
//! Each first-layer pre-activation is grouped as `h + (xi - zeta)` and
//! `h - (xi - zeta)`. The floating sum of two doubles is non-negative iff
//! the exact sum is, so the net decides `|fl(xi - zeta)| <= h`, which is
//! the same predicate a direct coordinate comparison evaluates.

use crate::error::{Error, Result};

/// Heaviside activation with `sigma0(0) = 1`, so cubes are closed.
pub fn heaviside(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::NonFinite);
    }
    Ok(if t >= 0.0 { 1.0 } else { 0.0 })
}

/// Square rectifier `max(t, 0)^2`.
pub fn square_rectifier(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::NonFinite);
    }
    Ok(square_rectifier_unchecked(t))
}

#[inline]
pub(crate) fn square_rectifier_unchecked(t: f64) -> f64 {
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

/// Coordinate of the grid center with 1-based index `j` at resolution `q`:
/// `-1 + (2j - 1) / (2q)`, evaluated as a single division.
#[inline]
pub fn grid_coordinate(q: u32, j: u32) -> f64 {
    let q = q as i64;
    let j = j as i64;
    (-2 * q + 2 * j - 1) as f64 / (2 * q) as f64
}

/// Half width `1/(2q)` of a grid cube.
#[inline]
pub fn half_width(q: u32) -> f64 {
    1.0 / (2.0 * q as f64)
}

/// A regular grid of `(2 * resolution)^dim` cube centers in `[-1, 1]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub resolution: u32,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(resolution: u32, dim: usize) -> Self {
        Self { resolution, dim }
    }

    /// Number of centers, `(2 * resolution)^dim`.
    pub fn len(&self) -> usize {
        (2 * self.resolution as usize).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All multi-indices in lexicographic order.
    pub fn indices(&self) -> Vec<Vec<u32>> {
        let side = 2 * self.resolution;
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![1u32; self.dim];
        if self.dim == 0 || side == 0 {
            return out;
        }
        loop {
            out.push(idx.clone());
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < side {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 1;
            }
        }
    }

    pub fn center(&self, j: &[u32]) -> Vec<f64> {
        j.iter().map(|&jl| grid_coordinate(self.resolution, jl)).collect()
    }
}

/// Grid centers in lexicographic order of their multi-indices.
pub fn grid_centers(spec: GridSpec) -> Vec<Vec<f64>> {
    spec.indices().iter().map(|j| spec.center(j)).collect()
}

/// The localization network `N1(r, q, zeta_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationNet {
    q: u32,
    index: Vec<u32>,
    center: Vec<f64>,
    half: f64,
}

impl LocalizationNet {
    pub fn new(q: u32, index: &[u32]) -> Result<Self> {
        if q == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if index.is_empty() {
            return Err(Error::Config("localization net needs r >= 1".into()));
        }
        if let Some(&bad) = index.iter().find(|&&j| j == 0 || j > 2 * q) {
            return Err(Error::Config(format!(
                "grid index {bad} outside 1..={}",
                2 * q
            )));
        }
        Ok(Self {
            q,
            index: index.to_vec(),
            center: index.iter().map(|&j| grid_coordinate(q, j)).collect(),
            half: half_width(q),
        })
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn resolution(&self) -> u32 {
        self.q
    }

    pub fn index(&self) -> &[u32] {
        &self.index
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Argument of the output neuron:
    /// `sum_l s0[h + (xi - zeta)] + sum_l s0[h - (xi - zeta)] - 2r + 1/2`.
    ///
    /// Equals `1/2` on the closed cube and is at most `-1/2` elsewhere.
    pub fn inner_sum(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::Domain(format!(
                "input has dimension {}, net expects {}",
                xi.len(),
                self.dim()
            )));
        }
        let mut acc = 0.0;
        for (&x, &z) in xi.iter().zip(&self.center) {
            let offset = x - z;
            acc += heaviside(self.half + offset)?;
            acc += heaviside(self.half - offset)?;
        }
        Ok(acc - 2.0 * self.dim() as f64 + 0.5)
    }

    /// Network output, in `{0, 1}`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        heaviside(self.inner_sum(xi)?)
    }

    pub fn contains(&self, xi: &[f64]) -> Result<bool> {
        Ok(self.eval(xi)? == 1.0)
    }
}

/// Evaluates `N1(r, q, zeta_j)(xi)`.
pub fn localization_eval(net: &LocalizationNet, xi: &[f64]) -> Result<f64> {
    net.eval(xi)
}

/// Reference indicator of the closed cube `zeta_j + [-1/(2q), 1/(2q)]^r`
/// by direct per-coordinate comparison.
pub fn cube_indicator_oracle(q: u32, j: &[u32], xi: &[f64]) -> f64 {
    let h = half_width(q);
    let inside = j
        .iter()
        .zip(xi)
        .all(|(&jl, &x)| (x - grid_coordinate(q, jl)).abs() <= h);
    if inside && j.len() == xi.len() {
        1.0
    } else {
        0.0
    }
}

/// 1-based indices along one axis whose closed interval may contain `x`,
/// confirmed with the first-layer Heaviside pair of the localization net.
pub(crate) fn axis_candidates(q: u32, x: f64) -> Result<Vec<u32>> {
    if x.is_nan() {
        return Err(Error::NonFinite);
    }
    let side = 2 * q as i64;
    let h = half_width(q);
    let guess = ((x + 1.0) * q as f64).floor() as i64 + 1;
    let mut out = Vec::with_capacity(2);
    for j in (guess - 1)..=(guess + 1) {
        if j < 1 || j > side {
            continue;
        }
        let offset = x - grid_coordinate(q, j as u32);
        if heaviside(h + offset)? == 1.0 && heaviside(h - offset)? == 1.0 {
            out.push(j as u32);
        }
    }
    Ok(out)
}

/// All grid cubes at resolution `q` whose localization net fires at `xi`.
///
/// Per-axis candidates are combined and every candidate is confirmed with
/// the full two-layer network.
pub fn active_cubes(q: u32, xi: &[f64]) -> Result<Vec<Vec<u32>>> {
    let mut per_axis = Vec::with_capacity(xi.len());
    for &x in xi {
        let c = axis_candidates(q, x)?;
        if c.is_empty() {
            return Ok(Vec::new());
        }
        per_axis.push(c);
    }
    let mut out = Vec::new();
    for j in cartesian(&per_axis) {
        if LocalizationNet::new(q, &j)?.contains(xi)? {
            out.push(j);
        }
    }
    Ok(out)
}

pub(crate) fn cartesian(per_axis: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::with_capacity(per_axis.len())];
    for options in per_axis {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for &o in options {
                let mut v = prefix.clone();
                v.push(o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
