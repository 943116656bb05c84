//! Fitting square-rectifier chart networks to an analytic teacher.
//!
//! Each output coordinate gets `(D+2)(D+1)` terms. A constant term and `2D`
//! affine terms (using `(s2(t+1) - s2(1-t))/4 = t` on `[-1, 1]`) are placed
//! deterministically; the rest have random weights. The outer coefficients
//! are solved by linear least squares and then all parameters are refined
//! by Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::chart::{sample_in_ball, Chart, ChartBackend, ChartNet, Sigma2Unit};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, Manifold};
use crate::netcore::square_rectifier_unchecked;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub n_train: usize,
    pub n_validate: usize,
    pub tolerance: f64,
    pub max_resamples: usize,
    pub lm_iterations: usize,
    /// Skip Levenberg-Marquardt when a coordinate has more parameters.
    pub lm_max_params: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_train: 400,
            n_validate: 1000,
            tolerance: 1e-3,
            max_resamples: 4,
            lm_iterations: 400,
            lm_max_params: 1000,
        }
    }
}

fn initial_units<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Sigma2Unit> {
    let mut units = Vec::with_capacity(ChartNet::width(dim));
    units.push(Sigma2Unit {
        a: 0.0,
        w: vec![0.0; dim],
        b: 1.0,
    });
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut w = vec![0.0; dim];
            w[i] = sign;
            units.push(Sigma2Unit { a: 0.0, w, b: 1.0 });
        }
    }
    while units.len() < ChartNet::width(dim) {
        let w: Vec<f64> = (0..dim)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal) / (dim as f64).sqrt())
            .collect();
        units.push(Sigma2Unit {
            a: 0.0,
            w,
            b: rng.random_range(-1.0..=1.0),
        });
    }
    units
}

fn feature_matrix(units: &[Sigma2Unit], xs: &[AmbientPoint]) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), units.len(), |i, u| {
        square_rectifier_unchecked(units[u].pre_activation(&xs[i]))
    })
}

fn solve_outer(units: &mut [Sigma2Unit], xs: &[AmbientPoint], ys: &[f64]) {
    let phi = feature_matrix(units, xs);
    let rhs = DVector::from_column_slice(ys);
    let a = phi
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .expect("SVD with both factors");
    for (u, v) in units.iter_mut().zip(a.iter()) {
        u.a = *v;
    }
}

fn residuals(units: &[Sigma2Unit], xs: &[AmbientPoint], ys: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        xs.len(),
        xs.iter()
            .zip(ys)
            .map(|(x, y)| units.iter().map(|u| u.eval(x)).sum::<f64>() - y),
    )
}

fn pack(units: &[Sigma2Unit]) -> Vec<f64> {
    units
        .iter()
        .flat_map(|u| std::iter::once(u.a).chain(u.w.iter().copied()).chain(std::iter::once(u.b)))
        .collect()
}

fn unpack(p: &[f64], dim: usize) -> Vec<Sigma2Unit> {
    p.chunks_exact(dim + 2)
        .map(|c| Sigma2Unit {
            a: c[0],
            w: c[1..=dim].to_vec(),
            b: c[dim + 1],
        })
        .collect()
}

fn jacobian(units: &[Sigma2Unit], xs: &[AmbientPoint], dim: usize) -> DMatrix<f64> {
    let stride = dim + 2;
    let mut j = DMatrix::zeros(xs.len(), units.len() * stride);
    for (i, x) in xs.iter().enumerate() {
        for (k, u) in units.iter().enumerate() {
            let z = u.pre_activation(x);
            if z <= 0.0 {
                continue;
            }
            let base = k * stride;
            j[(i, base)] = z * z;
            let g = 2.0 * u.a * z;
            for (l, xl) in x.iter().enumerate() {
                j[(i, base + 1 + l)] = g * xl;
            }
            j[(i, base + 1 + dim)] = g;
        }
    }
    j
}

fn levenberg_marquardt(
    units: Vec<Sigma2Unit>,
    xs: &[AmbientPoint],
    ys: &[f64],
    dim: usize,
    iterations: usize,
) -> Vec<Sigma2Unit> {
    let mut p = pack(&units);
    let mut current = units;
    let mut cost = residuals(&current, xs, ys).norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        let r = residuals(&current, xs, ys);
        let jac = jacobian(&current, xs, dim);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&r);
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&grad);
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(v, s)| v - s).collect();
            let trial_units = unpack(&trial, dim);
            let trial_cost = residuals(&trial_units, xs, ys).norm_squared();
            if trial_cost < cost {
                p = trial;
                current = trial_units;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved || cost < 1e-24 {
            break;
        }
    }
    current
}

/// Fits one square-rectifier network per output coordinate to the pairs
/// `(xs[i], ys[i])`. Returns the network and its sup error on `xs`.
pub fn fit_sigma2_net(
    xs: &[AmbientPoint],
    ys: &[Vec<f64>],
    options: &FitOptions,
    seed_value: u64,
    attempt: u64,
) -> Result<ChartNet> {
    let dim = xs
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("no training points".into()))?;
    let out_dim = ys.first().map_or(0, Vec::len);
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_FIT, attempt]);
    let mut outputs = Vec::with_capacity(out_dim);
    for l in 0..out_dim {
        let target: Vec<f64> = ys.iter().map(|y| y[l]).collect();
        let mut units = initial_units(dim, &mut rng);
        solve_outer(&mut units, xs, &target);
        if units.len() * (dim + 2) <= options.lm_max_params && options.lm_iterations > 0 {
            units = levenberg_marquardt(units, xs, &target, dim, options.lm_iterations);
        }
        outputs.push(units);
    }
    Ok(ChartNet { outputs })
}

fn sup_error(net: &ChartNet, xs: &[AmbientPoint], ys: &[Vec<f64>]) -> f64 {
    xs.iter()
        .zip(ys)
        .flat_map(|(x, y)| {
            net.eval(x)
                .into_iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Fits a square-rectifier network to an analytic chart. Random features are
/// redrawn until the in-ball sup error on held-out points is below the
/// tolerance or the resample cap is reached.
pub fn fit_chart_net(
    chart: &Chart,
    manifold: &Manifold,
    options: &FitOptions,
    seed_value: u64,
) -> Result<Chart> {
    let mut rng = seed::rng_for(seed_value, &[seed::STREAM_FIT]);
    let train = sample_in_ball(manifold, &chart.center, chart.delta, options.n_train, &mut rng)?;
    let check = sample_in_ball(manifold, &chart.center, chart.delta, options.n_validate, &mut rng)?;
    let teach = |xs: &[AmbientPoint]| -> Vec<Vec<f64>> {
        xs.iter()
            .map(|x| chart.analytic_map(manifold, x).coords)
            .collect()
    };
    let (ty, cy) = (teach(&train), teach(&check));
    let mut best: Option<(f64, ChartNet)> = None;
    for attempt in 0..=options.max_resamples as u64 {
        let net = fit_sigma2_net(&train, &ty, options, seed_value, attempt)?;
        let err = sup_error(&net, &check, &cy).max(sup_error(&net, &train, &ty));
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, net));
        }
        if err < options.tolerance {
            break;
        }
    }
    let (err, net) = best.expect("at least one attempt");
    if err >= options.tolerance {
        return Err(Error::FitResidual {
            achieved: err,
            target: options.tolerance,
        });
    }
    Ok(Chart {
        backend: ChartBackend::FittedNet { coeffs: net },
        ..chart.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::distortion_constants;
    use crate::geometry::ManifoldSpec;
    use std::f64::consts::PI;

    #[test]
    fn affine_teacher_is_reproduced() {
        let mut rng = seed::rng_for(1, &[]);
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| vec![0.3 * x[0] - 0.7 * x[1] + 0.1 * x[2] + 0.25, -x[2]])
            .collect();
        let opts = FitOptions {
            lm_iterations: 0,
            ..FitOptions::default()
        };
        let net = fit_sigma2_net(&xs, &ys, &opts, 2, 0).unwrap();
        net.validate(3).unwrap();
        assert!(sup_error(&net, &xs, &ys) < 1e-9);
    }

    #[test]
    fn circle_chart_fit_meets_tolerance() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let chart = Chart::analytic(m.embed(&[0.5]).unwrap(), 0.45 * PI);
        let fitted = fit_chart_net(&chart, &m, &FitOptions::default(), 9).unwrap();
        let ChartBackend::FittedNet { coeffs } = &fitted.backend else {
            panic!("expected fitted backend")
        };
        coeffs.validate(2).unwrap();
        let mut rng = seed::rng_for(77, &[]);
        let pts = sample_in_ball(&m, &chart.center, chart.delta, 1000, &mut rng).unwrap();
        let err = pts
            .iter()
            .map(|x| (fitted.map(&m, x).coords[0] - chart.map(&m, x).coords[0]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "sup error {err}");
        let (a0, b0) = distortion_constants(&chart, &m, 1000, 5).unwrap();
        let (a1, b1) = distortion_constants(&fitted, &m, 1000, 5).unwrap();
        assert!((a1 - a0).abs() <= 0.1 * a0 && (b1 - b0).abs() <= 0.1 * b0);
    }

    #[test]
    fn fit_is_deterministic() {
        let m = Manifold::new(ManifoldSpec::circle()).unwrap();
        let chart = Chart::analytic(m.embed(&[2.0]).unwrap(), 0.45 * PI);
        let opts = FitOptions {
            lm_iterations: 20,
            ..FitOptions::default()
        };
        let a = fit_chart_net(&chart, &m, &opts, 4);
        let b = fit_chart_net(&chart, &m, &opts, 4);
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a, b),
            (Err(Error::FitResidual { achieved: x, .. }), Err(Error::FitResidual { achieved: y, .. })) => {
                assert_eq!(x, y)
            }
            other => panic!("non-deterministic fit: {other:?}"),
        }
    }
}
