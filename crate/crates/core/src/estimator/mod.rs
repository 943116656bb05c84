//! The three-hidden-layer local-average estimator.
//!
//! Samples are binned into cells `H_{k,j}` through the gated composite
//! networks. Predictions come in three forms:
//!
//! * `literal`: the printed network, `sum_c Sy(c) N3_c(x) / sum_c T(c)`, with
//!   ungated query-side cell networks and a global denominator;
//! * `interior`: the per-cell local average over the active set `Lambda_x`;
//! * `feedback`: the `Phi`-weighted ratio `sum_i y_i w_i(x) / sum_i w_i(x)`
//!   where `w_i(x)` counts cells holding `x_i` that fire at `x`.

mod cells;
mod lambda;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::Atlas;
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, SampleSet};

pub use cells::{composite_cell_eval, gated_cell_eval, CellIndex, CellStats, CellTable};
pub use lambda::{lambda_sets, LambdaSets};

use cells::firing_cells;

/// Prediction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Literal,
    Interior,
    #[default]
    Feedback,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Literal, Mode::Interior, Mode::Feedback];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Literal => "literal",
            Mode::Interior => "interior",
            Mode::Feedback => "feedback",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Mode::Literal),
            "interior" => Ok(Mode::Interior),
            "feedback" => Ok(Mode::Feedback),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// `n = ceil(m^(1/(2s+d)))`, nudged down by `1e-12` before the ceiling.
pub fn choose_n(m: usize, s: f64, d: usize) -> Result<u32> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    if !(s > 0.0 && s <= 1.0) || d == 0 {
        return Err(Error::Config(format!("invalid smoothness {s} or dimension {d}")));
    }
    let v = (m as f64).powf(1.0 / (2.0 * s + d as f64));
    Ok(((v - 1e-12).ceil() as u32).max(1))
}

/// A built estimator; immutable and safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepNetEstimator {
    atlas: Atlas,
    table: CellTable,
    y: Vec<f64>,
    bound: f64,
    mode: Mode,
    gated: bool,
}

/// Bins samples into cells. Samples on cube or cell boundaries register in
/// every closed cell that contains them.
pub fn build_estimator(atlas: &Atlas, samples: &SampleSet, n: u32) -> Result<DeepNetEstimator> {
    build_from_parts(atlas, &samples.x, &samples.y, samples.bound, n)
}

pub fn build_from_parts(
    atlas: &Atlas,
    x: &[AmbientPoint],
    y: &[f64],
    bound: f64,
    n: u32,
) -> Result<DeepNetEstimator> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Config("inputs and outputs differ in length".into()));
    }
    if x.len() > u32::MAX as usize {
        return Err(Error::Config("too many samples".into()));
    }
    let dim = atlas.ambient_dim();
    let mut cells: BTreeMap<CellIndex, CellStats> = BTreeMap::new();
    let mut membership = Vec::with_capacity(x.len());
    let mut cubes: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut cache: HashMap<Vec<u32>, usize> = HashMap::new();
    for (i, (xi, &yi)) in x.iter().zip(y).enumerate() {
        if xi.len() != dim {
            return Err(Error::Domain(format!(
                "sample {i} has dimension {}, expected {dim}",
                xi.len()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) || !yi.is_finite() {
            return Err(Error::NonFinite);
        }
        let mine = firing_cells(atlas, n, xi, |j| {
            if let Some(&c) = cache.get(j) {
                return Ok(Some(c));
            }
            let c = atlas.chart_for_cube(j)?.ok_or_else(|| Error::NoChart {
                cube: j.to_vec(),
                reason: format!("sample {i} lies in a cube without a chart"),
            })?;
            cache.insert(j.to_vec(), c);
            Ok(Some(c))
        })?;
        for c in &mine {
            let stats = cells.entry(c.clone()).or_default();
            stats.count += 1;
            stats.sum_y += yi;
            stats.members.push(i as u32);
            cubes.entry(c.j.clone()).or_insert(cache[&c.j]);
        }
        membership.push(mine);
    }
    Ok(DeepNetEstimator {
        atlas: atlas.clone(),
        table: CellTable {
            n,
            cells,
            membership,
            cubes,
        },
        y: y.to_vec(),
        bound,
        mode: Mode::default(),
        gated: true,
    })
}

impl DeepNetEstimator {
    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn table(&self) -> &CellTable {
        &self.table
    }

    pub fn n(&self) -> u32 {
        self.table.n
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn outputs(&self) -> &[f64] {
        &self.y
    }

    pub fn sample_count(&self) -> usize {
        self.y.len()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Whether the feedback mode gates query-side cells by the ambient cube.
    pub fn gated(&self) -> bool {
        self.gated
    }

    pub fn with_gating(mut self, gated: bool) -> Self {
        self.gated = gated;
        self
    }

    /// The same estimator on the same inputs with new outputs.
    pub fn with_outputs(&self, y: &[f64]) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::Config("output count differs from sample count".into()));
        }
        Ok(Self {
            table: self.table.with_outputs(y),
            y: y.to_vec(),
            ..self.clone()
        })
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.atlas.ambient_dim() {
            return Err(Error::Domain(format!(
                "query has dimension {}, expected {}",
                x.len(),
                self.atlas.ambient_dim()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Occupied cells in `Lambda_x` (query-gated), lexicographic.
    pub(crate) fn active_occupied(&self, x: &[f64]) -> Result<Vec<CellIndex>> {
        let cells = firing_cells(&self.atlas, self.table.n, x, |j| Ok(self.table.cubes.get(j).copied()))?;
        Ok(cells.into_iter().filter(|c| self.table.cells.contains_key(c)).collect())
    }

    /// Occupied cells whose ungated network `N3_{k,j}` fires at `x`,
    /// lexicographic.
    pub(crate) fn ungated_occupied(&self, x: &[f64]) -> Result<Vec<CellIndex>> {
        let n = self.table.n;
        let mut images: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut out = Vec::new();
        for (j, &chart) in &self.table.cubes {
            let img = images
                .entry(chart)
                .or_insert_with(|| self.atlas.chart_map(chart, x).coords);
            if img.iter().any(|v| !v.is_finite()) {
                continue;
            }
            for k in crate::netcore::active_cubes(n, img)? {
                let c = CellIndex { j: j.clone(), k };
                if self.table.cells.contains_key(&c) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Printed network: ungated numerator over the global denominator.
    pub fn predict_literal(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let den = self.table.total_count();
        if den == 0 {
            return Ok(0.0);
        }
        let mut num = 0.0;
        for c in self.ungated_occupied(x)? {
            num += self.table.cells[&c].sum_y;
        }
        Ok(num / den as f64)
    }

    /// Local average over the active cells `Lambda_x`.
    pub fn predict_interior(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let (mut num, mut den) = (0.0, 0u64);
        for c in self.active_occupied(x)? {
            let s = &self.table.cells[&c];
            num += s.sum_y;
            den += s.count as u64;
        }
        Ok(if den == 0 { 0.0 } else { num / den as f64 })
    }

    /// Per-sample weights `w_i(x) = sum_{j,k} Phi_{k,j}(x, x_i)`, ascending in
    /// sample index, zero weights omitted.
    pub fn feedback_weights(&self, x: &[f64]) -> Result<Vec<(u32, u32)>> {
        self.check_query(x)?;
        let firing = if self.gated {
            self.active_occupied(x)?
        } else {
            self.ungated_occupied(x)?
        };
        let mut w: BTreeMap<u32, u32> = BTreeMap::new();
        for c in &firing {
            for &i in &self.table.cells[c].members {
                *w.entry(i).or_insert(0) += 1;
            }
        }
        Ok(w.into_iter().collect())
    }

    /// Feedback estimator in `Phi` form, accumulated in sample order.
    pub fn predict_feedback(&self, x: &[f64]) -> Result<f64> {
        Ok(weighted_ratio(&self.feedback_weights(x)?, &self.y))
    }

    pub fn predict_mode(&self, x: &[f64], mode: Mode) -> Result<f64> {
        match mode {
            Mode::Literal => self.predict_literal(x),
            Mode::Interior => self.predict_interior(x),
            Mode::Feedback => self.predict_feedback(x),
        }
    }

    /// Prediction in the estimator's default mode.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_mode(x, self.mode)
    }

    /// Predicts many queries in parallel; results keep the query order.
    pub fn predict_batch(&self, xs: &[AmbientPoint], mode: Mode) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict_mode(x, mode)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `sum_i y_i w_i / sum_i w_i` in the order given, 0 on an empty sum.
pub fn weighted_ratio(weights: &[(u32, u32)], y: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0u64);
    for &(i, w) in weights {
        num += y[i as usize] * w as f64;
        den += w as u64;
    }
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

pub fn predict_literal(est: &DeepNetEstimator, x: &[f64]) -> Result<f64> {
    est.predict_literal(x)
}

pub fn predict_interior(est: &DeepNetEstimator, x: &[f64]) -> Result<f64> {
    est.predict_interior(x)
}

pub fn predict_feedback(est: &DeepNetEstimator, x: &[f64]) -> Result<f64> {
    est.predict_feedback(x)
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    j: Vec<u32>,
    k: Vec<u32>,
    #[serde(flatten)]
    stats: CellStats,
}

#[derive(Serialize, Deserialize)]
struct EstimatorFile {
    atlas: Atlas,
    n: u32,
    #[serde(rename = "M")]
    bound: f64,
    mode: Mode,
    gated: bool,
    y: Vec<f64>,
    cells: Vec<CellRecord>,
}

impl Serialize for DeepNetEstimator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EstimatorFile {
            atlas: self.atlas.clone(),
            n: self.table.n,
            bound: self.bound,
            mode: self.mode,
            gated: self.gated,
            y: self.y.clone(),
            cells: self
                .table
                .cells
                .iter()
                .map(|(c, s)| CellRecord {
                    j: c.j.clone(),
                    k: c.k.clone(),
                    stats: s.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeepNetEstimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = EstimatorFile::deserialize(d)?;
        let mut cells = BTreeMap::new();
        let mut cubes = BTreeMap::new();
        for r in f.cells {
            if !cubes.contains_key(&r.j) {
                let chart = f
                    .atlas
                    .chart_for_cube(&r.j)
                    .map_err(D::Error::custom)?
                    .ok_or_else(|| D::Error::custom(format!("cube {:?} has no chart", r.j)))?;
                cubes.insert(r.j.clone(), chart);
            }
            cells.insert(CellIndex { j: r.j, k: r.k }, r.stats);
        }
        let table = CellTable::from_cells(f.n, f.y.len(), cells, cubes).map_err(D::Error::custom)?;
        Ok(Self {
            atlas: f.atlas,
            table,
            y: f.y,
            bound: f.bound,
            mode: f.mode,
            gated: f.gated,
        })
    }
}
