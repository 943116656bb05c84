use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chart::{distortion_constants, Chart, ChartImage};
use super::fit::{fit_chart_net, FitOptions};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, Manifold};
use crate::netcore::{active_cubes, grid_coordinate};
use crate::seed;

/// How chart radii are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaPolicy {
    Fixed {
        delta: f64,
    },
    /// The manifold's built-in radius (half the injectivity radius where it
    /// is finite).
    #[default]
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Analytic,
    FittedNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtlasOptions {
    pub delta: DeltaPolicy,
    pub backend: BackendKind,
    /// Initial number of manifold samples for the greedy cover.
    pub cover_samples: usize,
    /// Densification rounds before giving up.
    pub cover_rounds: usize,
    pub embedding_pairs: usize,
    pub safety: f64,
    pub distortion_pairs: usize,
    pub fit: FitOptions,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        Self {
            delta: DeltaPolicy::Analytic,
            backend: BackendKind::Analytic,
            cover_samples: 4096,
            cover_rounds: 6,
            embedding_pairs: 10_000,
            safety: 1.1,
            distortion_pairs: 1000,
            fit: FitOptions::default(),
        }
    }
}

/// Largest sampled `d_G(x, x') / |x - x'|` over random pairs.
pub fn sampled_embedding_ratio(manifold: &Manifold, n_pairs: usize, seed_value: u64) -> Result<f64> {
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_EMBED_CONST]);
    let mut best: Option<f64> = None;
    for _ in 0..n_pairs {
        let x = manifold.sample_point(&mut rng);
        let y = manifold.sample_point(&mut rng);
        let chord = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if chord == 0.0 {
            continue;
        }
        let r = manifold.geodesic_unchecked(&x, &y) / chord;
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    best.ok_or_else(|| Error::Domain("all sampled pairs were degenerate".into()))
}

/// The constant `C0` with `d_G <= C0 |x - x'|`. Uses the closed-form value
/// when the manifold has one, otherwise `safety` times the sampled maximum,
/// floored at 1.
pub fn estimate_embedding_constant(
    manifold: &Manifold,
    n_pairs: usize,
    seed_value: u64,
    safety: f64,
) -> Result<f64> {
    if n_pairs < 1000 {
        return Err(Error::Config("at least 1000 pairs are needed for C0".into()));
    }
    if safety.is_nan() || safety < 1.0 {
        return Err(Error::Config("safety factor must be at least 1".into()));
    }
    if let Some(c) = manifold.analytic_embedding_constant() {
        return Ok(c);
    }
    Ok((safety * sampled_embedding_ratio(manifold, n_pairs, seed_value)?).max(1.0))
}

/// `ceil(2 C0 sqrt(D) / min delta)`, at least 1.
pub fn grid_resolution(c0: f64, ambient_dim: usize, min_delta: f64) -> u32 {
    let v = 2.0 * c0 * (ambient_dim as f64).sqrt() / min_delta;
    (v.ceil() as u32).max(1)
}

/// A finite atlas with its grid resolution and cube-to-chart assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    manifold: Manifold,
    charts: Vec<Chart>,
    c0: f64,
    q_star: u32,
    assignment: BTreeMap<Vec<u32>, usize>,
    alpha: f64,
    beta: f64,
}

fn cover(
    manifold: &Manifold,
    delta: f64,
    options: &AtlasOptions,
    seed_value: u64,
) -> Result<(Vec<AmbientPoint>, Vec<AmbientPoint>)> {
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_COVER]);
    let radius = 0.5 * delta;
    let mut pool: Vec<AmbientPoint> = (0..options.cover_samples.max(1))
        .map(|_| manifold.sample_point(&mut rng))
        .collect();
    let mut centers: Vec<AmbientPoint> = vec![pool[0].clone()];
    let mut last_uncovered = 0;
    let mut checked = 0;
    for _round in 0..options.cover_rounds.max(1) {
        // farthest-point insertion over the current pool
        let mut nearest: Vec<f64> = pool
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| manifold.geodesic_unchecked(c, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        loop {
            let (far, dist) = nearest
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
            if dist <= radius {
                break;
            }
            let c = pool[far].clone();
            for (n, p) in nearest.iter_mut().zip(&pool) {
                *n = n.min(manifold.geodesic_unchecked(&c, p));
            }
            centers.push(c);
        }
        // verify on fresh points; densify when any is missed
        let fresh: Vec<AmbientPoint> = (0..pool.len())
            .map(|_| manifold.sample_point(&mut rng))
            .collect();
        checked = fresh.len();
        last_uncovered = fresh
            .iter()
            .filter(|p| centers.iter().all(|c| manifold.geodesic_unchecked(c, p) > radius))
            .count();
        pool.extend(fresh);
        if last_uncovered == 0 {
            return Ok((centers, pool));
        }
    }
    Err(Error::Cover {
        iterations: options.cover_rounds,
        uncovered: last_uncovered,
        checked,
    })
}

impl Atlas {
    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn q_star(&self) -> u32 {
        self.q_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ambient_dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.manifold.intrinsic_dim()
    }

    pub fn min_delta(&self) -> f64 {
        self.charts.iter().map(|c| c.delta).fold(f64::INFINITY, f64::min)
    }

    /// Materialized cube assignments (cubes met by the cover sample).
    pub fn assignment(&self) -> &BTreeMap<Vec<u32>, usize> {
        &self.assignment
    }

    pub fn chart_map(&self, i: usize, x: &[f64]) -> ChartImage {
        self.charts[i].map(&self.manifold, x)
    }

    /// Chart assigned to cube `j`, or `None` when the cube misses the
    /// manifold. Cubes outside the materialized table are resolved with the
    /// same deterministic rule.
    pub fn chart_for_cube(&self, j: &[u32]) -> Result<Option<usize>> {
        if let Some(&i) = self.assignment.get(j) {
            return Ok(Some(i));
        }
        assignment_rule(&self.manifold, &self.charts, self.c0, self.q_star, j)
    }
}

/// Assignment rule for cube `j`: take the manifold point `p` nearest to the
/// cube center; if it is farther than the half diagonal the cube misses the
/// manifold. Otherwise the first chart with `d_G(p, center) <= delta/2` is
/// chosen, which contains the whole cube intersection when `q*` satisfies
/// its defining inequality.
fn assignment_rule(
    manifold: &Manifold,
    charts: &[Chart],
    c0: f64,
    q: u32,
    j: &[u32],
) -> Result<Option<usize>> {
    let dim = manifold.ambient_dim();
    if j.len() != dim || j.iter().any(|&v| v == 0 || v > 2 * q) {
        return Err(Error::Domain(format!("cube index {j:?} outside the grid")));
    }
    let zeta: Vec<f64> = j.iter().map(|&v| grid_coordinate(q, v)).collect();
    let p = manifold.nearest_point(&zeta);
    let gap = zeta.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let half_diag = (dim as f64).sqrt() / (2.0 * q as f64);
    if gap > half_diag * (1.0 + 1e-12) {
        return Ok(None);
    }
    let d: Vec<f64> = charts
        .iter()
        .map(|c| manifold.geodesic_unchecked(&p, &c.center))
        .collect();
    if let Some(i) = (0..charts.len()).find(|&i| d[i] <= 0.5 * charts[i].delta) {
        return Ok(Some(i));
    }
    let reach = c0 * 2.0 * half_diag;
    if let Some(i) = (0..charts.len()).find(|&i| d[i] <= charts[i].delta - reach) {
        return Ok(Some(i));
    }
    Err(Error::NoChart {
        cube: j.to_vec(),
        reason: "nearest manifold point is not within reach of any chart".into(),
    })
}

/// Assigns a chart to cube `j`; `None` when the cube misses the manifold.
pub fn assign_chart_to_cube(atlas: &Atlas, j: &[u32]) -> Result<Option<usize>> {
    atlas.chart_for_cube(j)
}

/// Builds an atlas by greedy farthest-point covering with half-radius balls.
pub fn build_atlas(manifold: &Manifold, options: &AtlasOptions, seed_value: u64) -> Result<Atlas> {
    let delta = match options.delta {
        DeltaPolicy::Fixed { delta } => delta,
        DeltaPolicy::Analytic => manifold.default_chart_radius(),
    };
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("chart radius {delta} must be positive")));
    }
    if delta >= manifold.injectivity_radius() {
        return Err(Error::Config(format!(
            "chart radius {delta} reaches the injectivity radius {}; charts would not be injective",
            manifold.injectivity_radius()
        )));
    }
    let (centers, pool) = cover(manifold, delta, options, seed_value)?;
    let c0 = estimate_embedding_constant(manifold, options.embedding_pairs, seed_value, options.safety)?;
    let q_star = grid_resolution(c0, manifold.ambient_dim(), delta);

    let mut charts = Vec::with_capacity(centers.len());
    for (i, c) in centers.into_iter().enumerate() {
        let mut chart = Chart::analytic(c, delta);
        if options.backend == BackendKind::FittedNet {
            chart = fit_chart_net(&chart, manifold, &options.fit, seed::hash64(seed_value, &[i as u64]))?;
        }
        let (a, b) = distortion_constants(
            &chart,
            manifold,
            options.distortion_pairs,
            seed::hash64(seed_value, &[seed::STREAM_DISTORTION, i as u64]),
        )?;
        chart.alpha = a;
        chart.beta = b;
        charts.push(chart);
    }

    let mut assignment = BTreeMap::new();
    for x in &pool {
        for j in active_cubes(q_star, x)? {
            let i = match assignment.get(&j) {
                Some(&i) => i,
                None => {
                    let i = assignment_rule(manifold, &charts, c0, q_star, &j)?.ok_or_else(|| {
                        Error::NoChart {
                            cube: j.clone(),
                            reason: "cube holds a manifold point but was judged empty".into(),
                        }
                    })?;
                    assignment.insert(j.clone(), i);
                    i
                }
            };
            if manifold.geodesic_unchecked(x, &charts[i].center) > charts[i].delta {
                return Err(Error::NoChart {
                    cube: j,
                    reason: format!("assigned chart {i} does not contain a sampled point"),
                });
            }
        }
    }
    let alpha = charts.iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min);
    let beta = charts.iter().map(|c| c.beta).fold(0.0, f64::max);
    Ok(Atlas {
        manifold: manifold.clone(),
        charts,
        c0,
        q_star,
        assignment,
        alpha,
        beta,
    })
}

#[derive(Serialize, Deserialize)]
struct AtlasFile {
    manifold: Manifold,
    charts: Vec<Chart>,
    #[serde(rename = "C0")]
    c0: f64,
    q_star: u32,
    alpha: f64,
    beta: f64,
    assignment: BTreeMap<String, usize>,
}

impl Serialize for Atlas {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AtlasFile {
            manifold: self.manifold.clone(),
            charts: self.charts.clone(),
            c0: self.c0,
            q_star: self.q_star,
            alpha: self.alpha,
            beta: self.beta,
            assignment: self
                .assignment
                .iter()
                .map(|(j, &i)| (j.iter().map(u32::to_string).collect::<Vec<_>>().join(","), i))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Atlas {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = AtlasFile::deserialize(d)?;
        let dim = f.manifold.ambient_dim();
        let mut assignment = BTreeMap::new();
        for (key, i) in f.assignment {
            let j = key
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| D::Error::custom(format!("bad cube key {key:?}: {e}")))?;
            if j.len() != dim || i >= f.charts.len() {
                return Err(D::Error::custom(format!("invalid assignment {key:?} -> {i}")));
            }
            assignment.insert(j, i);
        }
        for c in &f.charts {
            if c.center.len() != dim {
                return Err(D::Error::custom("chart center has the wrong dimension"));
            }
            if let super::chart::ChartBackend::FittedNet { coeffs } = &c.backend {
                coeffs.validate(dim).map_err(D::Error::custom)?;
            }
        }
        if f.q_star == 0 || f.charts.is_empty() {
            return Err(D::Error::custom("atlas needs q_star >= 1 and at least one chart"));
        }
        Ok(Atlas {
            manifold: f.manifold,
            charts: f.charts,
            c0: f.c0,
            q_star: f.q_star,
            assignment,
            alpha: f.alpha,
            beta: f.beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn circle() -> Manifold {
        Manifold::new(ManifoldSpec::circle()).unwrap()
    }

    #[test]
    fn circle_constant_matches_brute_force() {
        // d_G / chord = theta / (2 sin(theta/2)), maximized over (0, pi]
        let best = (1..=100_000)
            .map(|i| {
                let t = PI * i as f64 / 100_000.0;
                t / (2.0 * (t / 2.0).sin())
            })
            .fold(0.0, f64::max);
        let c0 = estimate_embedding_constant(&circle(), 1000, 1, 1.1).unwrap();
        assert!((c0 - best).abs() < 1e-9);
        assert!((c0 - FRAC_PI_2).abs() < 1e-15);
        let sampled = sampled_embedding_ratio(&circle(), 10_000, 1).unwrap();
        assert!((1.0..=FRAC_PI_2 + 1e-6).contains(&sampled));
    }

    #[test]
    fn segment_constant_is_one() {
        let m = Manifold::new(ManifoldSpec::segment()).unwrap();
        assert_eq!(estimate_embedding_constant(&m, 1000, 1, 1.1).unwrap(), 1.0);
    }

    #[test]
    fn swiss_roll_constant_is_sampled() {
        let m = Manifold::new(ManifoldSpec::swiss_roll()).unwrap();
        let raw = sampled_embedding_ratio(&m, 10_000, 2).unwrap();
        let c0 = estimate_embedding_constant(&m, 10_000, 2, 1.1).unwrap();
        assert!(c0 >= 1.0 && (c0 - 1.1 * raw).abs() < 1e-12);
    }

    #[test]
    fn grid_resolution_examples() {
        assert_eq!(grid_resolution(FRAC_PI_2, 2, 0.45 * PI), 4);
        assert_eq!(grid_resolution(1.0, 1, 2.0), 1);
        assert!(grid_resolution(FRAC_PI_2, 2, 0.2) > grid_resolution(FRAC_PI_2, 2, 0.4));
    }

    #[test]
    fn circle_atlas_covers() {
        let m = circle();
        let atlas = build_atlas(&m, &AtlasOptions::default(), 3).unwrap();
        assert!(atlas.len() >= 4);
        assert_eq!(atlas.q_star(), 4);
        let mut rng = seed::rng_for(99, &[]);
        for _ in 0..10_000 {
            let x = m.sample_point(&mut rng);
            assert!(atlas
                .charts()
                .iter()
                .any(|c| m.geodesic_unchecked(&x, &c.center) <= 0.5 * c.delta));
            for j in active_cubes(atlas.q_star(), &x).unwrap() {
                let i = atlas.chart_for_cube(&j).unwrap().expect("cube meets the circle");
                assert!(m.geodesic_unchecked(&x, &atlas.chart(i).center) <= atlas.chart(i).delta);
            }
        }
    }

    #[test]
    fn huge_radius_gives_one_chart() {
        let m = Manifold::new(ManifoldSpec::segment()).unwrap();
        let opts = AtlasOptions {
            delta: DeltaPolicy::Fixed { delta: 4.0 },
            ..AtlasOptions::default()
        };
        assert_eq!(build_atlas(&m, &opts, 1).unwrap().len(), 1);
    }

    #[test]
    fn radius_beyond_injectivity_rejected() {
        let opts = AtlasOptions {
            delta: DeltaPolicy::Fixed { delta: 3.0 },
            ..AtlasOptions::default()
        };
        assert!(matches!(build_atlas(&circle(), &opts, 1), Err(Error::Config(_))));
    }

    #[test]
    fn far_cube_is_unassigned() {
        let atlas = build_atlas(&circle(), &AtlasOptions::default(), 3).unwrap();
        assert_eq!(atlas.chart_for_cube(&[1, 1]).unwrap(), None);
        assert_eq!(atlas.chart_for_cube(&[4, 5]).unwrap(), None);
    }

    #[test]
    fn deterministic_and_serializable() {
        let a = build_atlas(&circle(), &AtlasOptions::default(), 5).unwrap();
        let b = build_atlas(&circle(), &AtlasOptions::default(), 5).unwrap();
        assert_eq!(a, b);
        let s = serde_json::to_string(&a).unwrap();
        let back: Atlas = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(s.contains("\"C0\"") && s.contains("\"q_star\""));
    }
}
