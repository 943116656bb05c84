//! Brute-force references and Monte-Carlo checks of the probabilistic
//! lemmas behind the estimator.
//!
//! Membership here is decided by direct coordinate comparison, never by
//! evaluating the Heaviside networks.

mod lemma;

use std::collections::BTreeSet;

use crate::charts::Atlas;
use crate::error::Result;
use crate::estimator::CellIndex;
use crate::geometry::AmbientPoint;
use crate::netcore::{cartesian, cube_indicator_oracle};

pub use lemma::{
    lemma1_check, lemma1_exact, lemma2_check, Lemma2Options, Lemma2Report, McReport,
};

/// Indices along one axis whose closed interval contains `x`.
fn axis_hits(q: u32, x: f64) -> Vec<u32> {
    if !x.is_finite() {
        return Vec::new();
    }
    let guess = ((x + 1.0) * q as f64).floor() as i64 + 1;
    ((guess - 1)..=(guess + 1))
        .filter(|&j| j >= 1 && j <= 2 * q as i64)
        .map(|j| j as u32)
        .filter(|&j| cube_indicator_oracle(q, &[j], &[x]) == 1.0)
        .collect()
}

fn containing_cubes(q: u32, x: &[f64]) -> Vec<Vec<u32>> {
    let per_axis: Vec<Vec<u32>> = x.iter().map(|&v| axis_hits(q, v)).collect();
    if per_axis.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    cartesian(&per_axis)
        .into_iter()
        .filter(|j| cube_indicator_oracle(q, j, x) == 1.0)
        .collect()
}

/// Cells `H_{k,j}` containing `x`: `x` in the closed cube `j` and the
/// image under cube `j`'s chart in the closed cell `k`.
pub fn cell_membership(atlas: &Atlas, n: u32, x: &[f64]) -> Result<Vec<CellIndex>> {
    let mut out = Vec::new();
    for j in containing_cubes(atlas.q_star(), x) {
        let Some(i) = atlas.chart_for_cube(&j)? else { continue };
        let img = atlas.chart_map(i, x).coords;
        for k in containing_cubes(n, &img) {
            out.push(CellIndex { j: j.clone(), k });
        }
    }
    Ok(out)
}

/// Partition local average with precomputed sample memberships.
#[derive(Debug, Clone)]
pub struct PartitionOracle<'a> {
    atlas: &'a Atlas,
    n: u32,
    y: Vec<f64>,
    membership: Vec<BTreeSet<CellIndex>>,
}

impl<'a> PartitionOracle<'a> {
    pub fn new(atlas: &'a Atlas, n: u32, x: &[AmbientPoint], y: &[f64]) -> Result<Self> {
        let membership = x
            .iter()
            .map(|xi| Ok(cell_membership(atlas, n, xi)?.into_iter().collect()))
            .collect::<Result<_>>()?;
        Ok(Self {
            atlas,
            n,
            y: y.to_vec(),
            membership,
        })
    }

    /// Mean of `y_i` over samples sharing a cell with `x`, each counted once
    /// per shared cell; cells are visited in lexicographic order and samples
    /// in index order within each cell.
    pub fn average(&self, x: &[f64]) -> Result<f64> {
        let cells: BTreeSet<CellIndex> = cell_membership(self.atlas, self.n, x)?.into_iter().collect();
        let (mut num, mut den) = (0.0, 0u64);
        for c in &cells {
            let mut partial = 0.0;
            let mut count = 0u64;
            for (i, m) in self.membership.iter().enumerate() {
                if m.contains(c) {
                    partial += self.y[i];
                    count += 1;
                }
            }
            if count > 0 {
                num += partial;
                den += count;
            }
        }
        Ok(if den == 0 { 0.0 } else { num / den as f64 })
    }
}

/// One-shot partition local average.
pub fn partition_local_average(
    atlas: &Atlas,
    n: u32,
    x_samples: &[AmbientPoint],
    y_samples: &[f64],
    x: &[f64],
) -> Result<f64> {
    PartitionOracle::new(atlas, n, x_samples, y_samples)?.average(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{build_atlas, AtlasOptions};
    use crate::geometry::{Manifold, ManifoldSpec};

    #[test]
    fn interior_point_has_one_cell() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let atlas = build_atlas(&m, &AtlasOptions::default(), 1).unwrap();
        let x = m.embed(&[0.3]).unwrap();
        assert_eq!(cell_membership(&atlas, 3, &x).unwrap().len(), 1);
        assert!(cell_membership(&atlas, 3, &[0.99, -0.99]).unwrap().is_empty());
    }

    #[test]
    fn co_cell_sample_average() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let atlas = build_atlas(&m, &AtlasOptions::default(), 1).unwrap();
        let x = m.embed(&[0.3]).unwrap();
        let avg = partition_local_average(&atlas, 3, std::slice::from_ref(&x), &[0.25], &x).unwrap();
        assert_eq!(avg, 0.25);
        let far = m.embed(&[3.0]).unwrap();
        assert_eq!(partition_local_average(&atlas, 3, &[x], &[0.25], &far).unwrap(), 0.0);
    }
}
