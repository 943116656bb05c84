use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::charts::Atlas;
use crate::error::{Error, Result};
use crate::netcore::{active_cubes, LocalizationNet};

/// A cell `H_{k,j}`: ambient cube `j` (resolution `q*`) and chart-space
/// cube `k` (resolution `n`). Both are 1-based multi-indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub j: Vec<u32>,
    pub k: Vec<u32>,
}

impl Ord for CellIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.j.cmp(&other.j).then_with(|| self.k.cmp(&other.k))
    }
}

impl PartialOrd for CellIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-cell count `T`, output sum `Sy` and member sample indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    #[serde(rename = "T")]
    pub count: u32,
    #[serde(rename = "Sy")]
    pub sum_y: f64,
    pub members: Vec<u32>,
}

/// Sparse table of occupied cells plus per-sample membership lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    pub(crate) n: u32,
    pub(crate) cells: BTreeMap<CellIndex, CellStats>,
    pub(crate) membership: Vec<Vec<CellIndex>>,
    /// Occupied cubes with the chart used for them.
    pub(crate) cubes: BTreeMap<Vec<u32>, usize>,
}

impl CellTable {
    pub fn resolution(&self) -> u32 {
        self.n
    }

    pub fn cells(&self) -> &BTreeMap<CellIndex, CellStats> {
        &self.cells
    }

    pub fn get(&self, c: &CellIndex) -> Option<&CellStats> {
        self.cells.get(c)
    }

    /// Cells containing sample `i`, in lexicographic order.
    pub fn membership(&self, i: usize) -> &[CellIndex] {
        &self.membership[i]
    }

    pub fn sample_count(&self) -> usize {
        self.membership.len()
    }

    /// `sum_c T(c)`; exceeds `m` when samples sit on cell boundaries.
    pub fn total_count(&self) -> u64 {
        self.cells.values().map(|c| c.count as u64).sum()
    }

    /// Recomputes the output sums for new outputs on the same inputs.
    pub(crate) fn with_outputs(&self, y: &[f64]) -> Self {
        let mut t = self.clone();
        for stats in t.cells.values_mut() {
            let mut s = 0.0;
            for &i in &stats.members {
                s += y[i as usize];
            }
            stats.sum_y = s;
        }
        t
    }

    pub(crate) fn from_cells(
        n: u32,
        m: usize,
        cells: BTreeMap<CellIndex, CellStats>,
        cubes: BTreeMap<Vec<u32>, usize>,
    ) -> Result<Self> {
        let mut membership = vec![Vec::new(); m];
        for (c, stats) in &cells {
            if stats.count as usize != stats.members.len() {
                return Err(Error::Config("cell count does not match its members".into()));
            }
            for &i in &stats.members {
                membership
                    .get_mut(i as usize)
                    .ok_or_else(|| Error::Config(format!("member {i} out of range")))?
                    .push(c.clone());
            }
        }
        Ok(Self {
            n,
            cells,
            membership,
            cubes,
        })
    }
}

/// Evaluates `N1(d, n, t_k)(N2_j(x))` for cube `j`'s assigned chart.
pub fn composite_cell_eval(atlas: &Atlas, j: &[u32], k: &[u32], n: u32, x: &[f64]) -> Result<f64> {
    let i = atlas
        .chart_for_cube(j)?
        .ok_or_else(|| Error::NoChart {
            cube: j.to_vec(),
            reason: "cube has no assigned chart".into(),
        })?;
    let img = atlas.chart_map(i, x);
    LocalizationNet::new(n, k)?.eval(&img.coords)
}

/// Gated composite `N1(D, q*, zeta_j)(x) * N3_{k,j}(x)`.
pub fn gated_cell_eval(atlas: &Atlas, j: &[u32], k: &[u32], n: u32, x: &[f64]) -> Result<f64> {
    let gate = LocalizationNet::new(atlas.q_star(), j)?.eval(x)?;
    if gate == 0.0 {
        return Ok(0.0);
    }
    composite_cell_eval(atlas, j, k, n, x)
}

/// Cells whose gated indicator fires at `x`, computed through the networks.
///
/// `chart_of` resolves the chart for an ambient cube; returning `None`
/// skips the cube.
pub(crate) fn firing_cells<F>(atlas: &Atlas, n: u32, x: &[f64], mut chart_of: F) -> Result<Vec<CellIndex>>
where
    F: FnMut(&[u32]) -> Result<Option<usize>>,
{
    let mut out = Vec::new();
    let mut images: Vec<(usize, Vec<f64>)> = Vec::new();
    for j in active_cubes(atlas.q_star(), x)? {
        let Some(i) = chart_of(&j)? else { continue };
        let img = match images.iter().find(|(c, _)| *c == i) {
            Some((_, v)) => v.clone(),
            None => {
                let v = atlas.chart_map(i, x).coords;
                images.push((i, v.clone()));
                v
            }
        };
        if img.iter().any(|v| !v.is_finite()) {
            continue;
        }
        for k in active_cubes(n, &img)? {
            out.push(CellIndex { j: j.clone(), k });
        }
    }
    Ok(out)
}
