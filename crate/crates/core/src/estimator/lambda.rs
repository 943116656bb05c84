use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cells::{firing_cells, CellIndex};
use super::DeepNetEstimator;
use crate::error::Result;

/// Active-cell diagnostics at a query `x`.
///
/// `lambda_xs` holds `(cell, sample)` pairs for samples of `S_{Lambda_x}`
/// over all their cells; `lambda_xs_prime` keeps the pairs whose cell is
/// also active at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSets {
    pub lambda_x: Vec<CellIndex>,
    pub lambda_xs: Vec<(CellIndex, u32)>,
    pub lambda_xs_prime: Vec<(CellIndex, u32)>,
    /// Distinct cells appearing in `lambda_xs`.
    pub distinct_cells: usize,
}

impl LambdaSets {
    pub fn card_x(&self) -> usize {
        self.lambda_x.len()
    }

    pub fn card_xs(&self) -> usize {
        self.lambda_xs.len()
    }

    pub fn card_xs_prime(&self) -> usize {
        self.lambda_xs_prime.len()
    }

    /// `|Lambda'_{x,S}| / |Lambda_{x,S}|`, undefined when no sample is active.
    pub fn ratio(&self) -> Option<f64> {
        (self.card_xs() > 0).then(|| self.card_xs_prime() as f64 / self.card_xs() as f64)
    }
}

/// Enumerates `Lambda_x`, `Lambda_{x,S}` and `Lambda'_{x,S}`.
pub fn lambda_sets(est: &DeepNetEstimator, x: &[f64]) -> Result<LambdaSets> {
    est.check_query(x)?;
    let atlas = est.atlas();
    let table = est.table();
    let lambda_x = firing_cells(atlas, table.n, x, |j| match table.cubes.get(j) {
        Some(&c) => Ok(Some(c)),
        None => atlas.chart_for_cube(j),
    })?;
    let active: BTreeSet<&CellIndex> = lambda_x.iter().collect();
    let samples: BTreeSet<u32> = lambda_x
        .iter()
        .filter_map(|c| table.get(c))
        .flat_map(|s| s.members.iter().copied())
        .collect();
    let mut lambda_xs = Vec::new();
    let mut lambda_xs_prime = Vec::new();
    let mut distinct = BTreeSet::new();
    for &i in &samples {
        for c in table.membership(i as usize) {
            lambda_xs.push((c.clone(), i));
            distinct.insert(c);
            if active.contains(c) {
                lambda_xs_prime.push((c.clone(), i));
            }
        }
    }
    Ok(LambdaSets {
        distinct_cells: distinct.len(),
        lambda_x,
        lambda_xs,
        lambda_xs_prime,
    })
}

impl DeepNetEstimator {
    pub fn lambda_sets(&self, x: &[f64]) -> Result<LambdaSets> {
        lambda_sets(self, x)
    }
}
