//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use localnet::charts::{build_atlas, distortion_constants, fit_chart_net, Atlas, AtlasOptions, Chart, ChartNet, FitOptions};
use localnet::estimator::{build_from_parts, gated_cell_eval, CellIndex};
use localnet::geometry::{Manifold, ManifoldSpec, NoiseSpec, TargetFunction};
use localnet::harness::{
    run_dimension_comparison, run_feedback_comparison, run_rate_sweep, ExperimentConfig, LEMMA1_M,
    LEMMA1_P,
};
use localnet::netcore::{cube_indicator_oracle, grid_coordinate, half_width, localization_eval, LocalizationNet};
use localnet::oracle::{cell_membership, lemma1_check, lemma2_check, Lemma2Options, PartitionOracle};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(name)).expect("shipped config loads")
}

fn within(elapsed: Duration, limit_s: u64) -> Outcome {
    if elapsed.as_secs_f64() < limit_s as f64 {
        Ok(String::new())
    } else {
        Err(format!("runtime {:.1}s exceeds {limit_s}s", elapsed.as_secs_f64()))
    }
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut mismatches, mut boundary, mut hits) = (0usize, 0usize, 0usize);
    for case in 0..100_000 {
        let r = rng.random_range(1..=3usize);
        let q = rng.random_range(1..=8u32);
        let j: Vec<u32> = (0..r).map(|_| rng.random_range(1..=2 * q)).collect();
        let h = half_width(q);
        let x: Vec<f64> = if case % 100 == 0 {
            // exact faces and corners of the cube, possibly mixed with interior
            boundary += 1;
            j.iter()
                .map(|&ji| {
                    let z = grid_coordinate(q, ji);
                    match rng.random_range(0..3) {
                        0 => z + h,
                        1 => z - h,
                        _ => z + rng.random_range(-h..h),
                    }
                })
                .collect()
        } else {
            j.iter()
                .map(|&ji| grid_coordinate(q, ji) + rng.random_range(-1.5 * h..1.5 * h))
                .collect()
        };
        let net = LocalizationNet::new(q, &j).map_err(|e| e.to_string())?;
        let got = localization_eval(&net, &x).map_err(|e| e.to_string())?;
        let want = cube_indicator_oracle(q, &j, &x);
        hits += (want == 1.0) as usize;
        if got != want {
            mismatches += 1;
        }
    }
    within(start.elapsed(), 5)?;
    if mismatches == 0 {
        Ok(format!("100000 cases ({boundary} boundary-exact, {hits} inside), 0 mismatches"))
    } else {
        Err(format!("{mismatches} mismatches"))
    }
}

fn axis_window(q: u32, v: f64) -> Vec<u32> {
    let g = ((v + 1.0) * q as f64).floor() as i64 + 1;
    ((g - 1)..=(g + 1))
        .filter(|&c| c >= 1 && c <= 2 * q as i64)
        .map(|c| c as u32)
        .collect()
}

fn product(axes: &[Vec<u32>]) -> Vec<Vec<u32>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut v = p.clone();
                    v.push(a);
                    v
                })
            })
            .collect()
    })
}

/// Cells found by evaluating the gated networks over a window of candidates.
fn network_cells(atlas: &Atlas, n: u32, x: &[f64]) -> Result<BTreeSet<CellIndex>, String> {
    let mut out = BTreeSet::new();
    let js: Vec<Vec<u32>> = x.iter().map(|&v| axis_window(atlas.q_star(), v)).collect();
    for j in product(&js) {
        if LocalizationNet::new(atlas.q_star(), &j).and_then(|g| g.eval(x)).map_err(|e| e.to_string())? == 0.0 {
            continue;
        }
        let Some(i) = atlas.chart_for_cube(&j).map_err(|e| e.to_string())? else { continue };
        let img = atlas.chart_map(i, x).coords;
        let ks: Vec<Vec<u32>> = img.iter().map(|&v| axis_window(n, v)).collect();
        for k in product(&ks) {
            if gated_cell_eval(atlas, &j, &k, n, x).map_err(|e| e.to_string())? == 1.0 {
                out.insert(CellIndex { j: j.clone(), k });
            }
        }
    }
    Ok(out)
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    for (spec, n, seed) in [(ManifoldSpec::circle(), 6u32, 3u64), (ManifoldSpec::sphere(), 4, 4)] {
        let m = Manifold::new(spec).map_err(|e| e.to_string())?;
        let atlas = build_atlas(&m, &AtlasOptions::default(), seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50_000 {
            let x = m.sample_point(&mut rng);
            let net = network_cells(&atlas, n, &x)?;
            let oracle: BTreeSet<CellIndex> =
                cell_membership(&atlas, n, &x).map_err(|e| e.to_string())?.into_iter().collect();
            if net != oracle || net.is_empty() {
                mismatches += 1;
            }
        }
    }
    within(start.elapsed(), 30)?;
    if mismatches == 0 {
        Ok("100000 circle/sphere points, 0 mismatches".into())
    } else {
        Err(format!("{mismatches} mismatches"))
    }
}

fn ac3() -> Outcome {
    let mut report = Vec::new();
    for (spec, seed) in [(ManifoldSpec::circle(), 5u64), (ManifoldSpec::sphere(), 6)] {
        let m = Manifold::new(spec).map_err(|e| e.to_string())?;
        let atlas = build_atlas(&m, &AtlasOptions::default(), seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..500).map(|_| m.sample_point(&mut rng)).collect();
        let y = vec![0.0; x.len()];
        let est = build_from_parts(&atlas, &x, &y, 1.0, 5).map_err(|e| e.to_string())?;
        let cap = 1usize << (m.ambient_dim() + m.intrinsic_dim());
        let (mut worst, mut violations) = (0, 0);
        let q_star = atlas.q_star() as f64;
        for t in 0..50_000 {
            let mut q = m.sample_point(&mut rng);
            if t % 4 == 0 {
                // snap coordinates onto ambient cube faces to exercise overlaps
                for v in q.iter_mut().filter(|_| rng.random_bool(0.7)) {
                    *v = (*v * q_star).round() / q_star;
                }
            }
            let c = est.lambda_sets(&q).map_err(|e| e.to_string())?.card_x();
            worst = worst.max(c);
            violations += (c > cap) as usize;
        }
        if violations > 0 {
            return Err(format!("{violations} queries exceed 2^(D+d) = {cap}"));
        }
        report.push(format!("D={} max |Lambda_x|={worst} <= {cap}", m.ambient_dim()));
    }
    Ok(report.join("; "))
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut checked = 0;
    for config in 0..200 {
        let spec = if config % 2 == 0 { ManifoldSpec::circle() } else { ManifoldSpec::sphere() };
        let m = Manifold::new(spec).map_err(|e| e.to_string())?;
        let atlas = build_atlas(&m, &AtlasOptions::default(), config).map_err(|e| e.to_string())?;
        let size = rng.random_range(1..=1000usize);
        let n = rng.random_range(1..=8u32);
        let x: Vec<Vec<f64>> = (0..size).map(|_| m.sample_point(&mut rng)).collect();
        let y: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let est = build_from_parts(&atlas, &x, &y, 1.0, n).map_err(|e| e.to_string())?;
        let oracle = PartitionOracle::new(&atlas, n, &x, &y).map_err(|e| e.to_string())?;
        let queries = (0..10).map(|_| m.sample_point(&mut rng)).chain(x.iter().take(5).cloned());
        for q in queries {
            let a = est.predict_interior(&q).map_err(|e| e.to_string())?;
            let b = oracle.average(&q).map_err(|e| e.to_string())?;
            if a.to_bits() != b.to_bits() {
                return Err(format!("config {config}: {a:e} != {b:e}"));
            }
            checked += 1;
        }
    }
    Ok(format!("200 configurations, {checked} queries bit-equal"))
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &m in &LEMMA1_M {
        for &p in &LEMMA1_P {
            let (bound, exact) = lemma1_check(m, p, 100_000, (m as u64) << 8 ^ (p * 1e4) as u64)
                .map_err(|e| e.to_string())?;
            worst = worst.max(bound.estimate / bound.target);
            if !bound.pass || !exact.pass {
                failures.push(format!("m={m} p={p}"));
            }
        }
    }
    within(start.elapsed(), 60)?;
    if failures.is_empty() {
        Ok(format!("12 cells x 1e5 trials, max estimate/bound {worst:.3}, exact pmf within 3 se"))
    } else {
        Err(format!("failed at {}", failures.join(", ")))
    }
}

fn ac6() -> Outcome {
    let m = Manifold::new(ManifoldSpec::circle()).map_err(|e| e.to_string())?;
    let atlas = build_atlas(&m, &AtlasOptions::default(), 6).map_err(|e| e.to_string())?;
    let target = TargetFunction::sine_ridge(2);
    let opts = Lemma2Options { seed: 6, ..Lemma2Options::default() };
    let r = lemma2_check(&atlas, &target, &NoiseSpec::default(), &opts).map_err(|e| e.to_string())?;
    let msg = format!(
        "cross {:.2e} (se {:.1e}), residual {:.2e} (se {:.1e})",
        r.cross.estimate, r.cross.std_error, r.residual.estimate, r.residual.std_error
    );
    if r.cross.pass && r.residual.pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig { threads: Some(1), ..load("circle_d3.json") };
    let r = run_rate_sweep(&cfg).map_err(|e| e.to_string())?;
    within(start.elapsed(), 600)?;
    let slope = r.slope.ok_or("slope undefined")?;
    let pairs = r.points.windows(2).count();
    let falling = r.points.windows(2).filter(|w| w[1].mse_mean <= w[0].mse_mean).count();
    let msg = format!(
        "D=3 slope {slope:.3} (theory {:.3}), MSE non-increasing on {falling}/{pairs} steps",
        r.theoretical_slope
    );
    if (-1.0..=-0.4).contains(&slope) && falling * 5 >= pairs * 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let cfg = load("circle_d3.json");
    let r = run_dimension_comparison(&cfg).map_err(|e| e.to_string())?;
    within(start.elapsed(), 900)?;
    let high = r.high.slope.ok_or("slope undefined")?;
    let low = r.low.slope.ok_or("slope undefined")?;
    let msg = format!("D=10 slope {high:.3}, D=3 slope {low:.3}");
    if high <= -0.4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac9() -> Outcome {
    let cfg = load("feedback_atoms.json");
    let r = run_feedback_comparison(&cfg).map_err(|e| e.to_string())?;
    let wins = r.feedback_wins[0];
    let msg = format!(
        "feedback wins {wins}/{}; mean MSE literal {:.3e}, feedback {:.3e}; mean |Lambda'|/|Lambda| {:.3}",
        r.trials,
        r.literal.points[0].mse_mean,
        r.feedback.points[0].mse_mean,
        r.feedback.points[0].lambda_ratio_mean.unwrap_or(f64::NAN)
    );
    if wins >= 18 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac10() -> Outcome {
    let m = Manifold::new(ManifoldSpec::circle()).map_err(|e| e.to_string())?;
    let delta = m.default_chart_radius();
    let center = m.embed(&[0.4]).map_err(|e| e.to_string())?;
    let analytic = Chart::analytic(center.clone(), delta);
    let (a, b) = distortion_constants(&analytic, &m, 2000, 10).map_err(|e| e.to_string())?;
    let inv = 1.0 / delta;
    if (a - inv).abs() > 1e-9 || (b - inv).abs() > 1e-9 {
        return Err(format!("analytic distortion ({a}, {b}) vs 1/delta = {inv}"));
    }
    let fitted = fit_chart_net(&analytic, &m, &FitOptions::default(), 10).map_err(|e| e.to_string())?;
    let net: &ChartNet = match &fitted.backend {
        localnet::charts::ChartBackend::FittedNet { coeffs } => coeffs,
        _ => return Err("fit returned an analytic chart".into()),
    };
    let width = ChartNet::width(m.ambient_dim());
    if net.outputs.iter().any(|units| units.len() != width) {
        return Err(format!("fitted width differs from (D+2)(D+1) = {width}"));
    }
    // fresh in-ball points by rejection, independent of the fit's sampler
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut sup: f64 = 0.0;
    let mut used = 0;
    while used < 5000 {
        let x = m.sample_point(&mut rng);
        if m.geodesic_distance(&center, &x).map_err(|e| e.to_string())? > delta {
            continue;
        }
        let want = analytic.map(&m, &x).coords;
        let got = fitted.map(&m, &x).coords;
        sup = want.iter().zip(&got).map(|(u, v)| (u - v).abs()).fold(sup, f64::max);
        used += 1;
    }
    let (fa, fb) = distortion_constants(&fitted, &m, 2000, 11).map_err(|e| e.to_string())?;
    let rel = ((fa - inv).abs() / inv).max((fb - inv).abs() / inv);
    let msg = format!("analytic exact; fitted width {width}, sup error {sup:.2e}, distortion within {:.2}%", 100.0 * rel);
    if sup < 1e-3 && rel <= 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = configs_dir().join("circle_d3.json");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_localnet"))
            .args(["rates", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("rates exited with {status}"));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("two runs, {} identical bytes", outputs[0].len()))
    } else {
        Err("outputs differ".into())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC-1", "localization net matches cube oracle", ac1),
        ("AC-2", "gated composite matches cell membership", ac2),
        ("AC-3", "active cell cardinality bound", ac3),
        ("AC-4", "interior mode equals partition average", ac4),
        ("AC-5", "counting lemma Monte-Carlo", ac5),
        ("AC-6", "error decomposition Monte-Carlo", ac6),
        ("AC-7", "rate exponent on the circle", ac7),
        ("AC-8", "rate follows intrinsic dimension", ac8),
        ("AC-9", "feedback beats literal under atoms", ac9),
        ("AC-10", "chart fidelity", ac10),
        ("AC-11", "byte-identical rate sweeps", ac11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, title, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || title.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id} {title}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {title}: {detail} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
