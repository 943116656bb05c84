use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::RateResult;
use crate::error::{Error, Result};
use crate::estimator::{DeepNetEstimator, Mode};
use crate::geometry::AmbientPoint;

/// One row of the rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub mode: Mode,
    pub ambient_dim: usize,
    pub m: usize,
    pub n_used: u32,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub log2_m: f64,
    pub log_mse: Option<f64>,
}

/// Flattens sweeps into table rows.
pub fn rate_rows(results: &[RateResult]) -> Vec<RateRow> {
    results
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| RateRow {
                mode: r.mode,
                ambient_dim: r.ambient_dim,
                m: p.m,
                n_used: p.n_used,
                mse_mean: p.mse_mean,
                mse_std: p.mse_std,
                log2_m: p.log2_m,
                log_mse: p.log_mse,
            })
        })
        .collect()
}

/// Writes the rate table as CSV.
pub fn write_rates_csv(path: &Path, results: &[RateResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rate_rows(results) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rates_csv(path: &Path) -> Result<Vec<RateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes any result as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Predicts every query and writes
/// `x_1..x_D,prediction,mode,lambda_x,lambda_xs,lambda_xs_prime` rows.
pub fn write_predictions(
    path: &Path,
    est: &DeepNetEstimator,
    queries: &[AmbientPoint],
    mode: Mode,
) -> Result<()> {
    let preds = est.predict_batch(queries, mode)?;
    let mut w = csv::Writer::from_path(path)?;
    let dim = queries.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
    header.extend(["prediction", "mode", "lambda_x", "lambda_xs", "lambda_xs_prime"].map(String::from));
    w.write_record(&header)?;
    for (x, p) in queries.iter().zip(preds) {
        let l = est.lambda_sets(x)?;
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        row.push(format!("{p:.16e}"));
        row.push(mode.to_string());
        row.extend([l.card_x(), l.card_xs(), l.card_xs_prime()].map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results` to `path`, choosing CSV for a `.csv` extension and
/// JSON otherwise.
pub fn emit_results(path: &Path, results: &[RateResult]) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_rates_csv(path, results),
        _ => write_json(path, &results),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_rate_sweep, ExperimentConfig};

    #[test]
    fn csv_and_json_round_trip() {
        let cfg = ExperimentConfig {
            m_values: vec![32, 64],
            trials: 2,
            test_points: 64,
            ..ExperimentConfig::default()
        };
        let r = vec![run_rate_sweep(&cfg).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("rates.csv");
        emit_results(&csv_path, &r).unwrap();
        assert_eq!(read_rates_csv(&csv_path).unwrap(), rate_rows(&r));
        let json_path = dir.path().join("rates.json");
        emit_results(&json_path, &r).unwrap();
        let back: Vec<RateResult> = read_json(&json_path).unwrap();
        assert_eq!(back, r);
    }
}
