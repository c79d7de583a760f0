//! Trace CSVs and run summaries.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qgsa_core::optimizers::{OptimizerTrace, StopReason};
use qgsa_core::shots_cost::{PricingProfile, Usage};

/// One line of a trace CSV. Columns appear in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub loss: f64,
    pub circuits: u64,
    pub shots: u64,
    /// Cumulative USD under the run's selected profile.
    pub cost: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub sign: i8,
}

pub fn trace_rows(trace: &OptimizerTrace, profile: &PricingProfile) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            t: r.t,
            loss: r.loss,
            circuits: r.circuits,
            shots: r.shots,
            cost: profile.cost(Usage {
                circuits: r.circuits,
                shots: r.shots,
            }),
            alpha: r.alpha,
            accepted: r.accepted,
            sign: r.sign,
        })
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<TraceRow>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCost {
    pub profile: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub iterations_run: usize,
    pub final_loss: f64,
    pub circuits: u64,
    pub shots: u64,
    pub update_circuits: u64,
    pub cost: f64,
    pub stop: StopReason,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub dataset: String,
    pub loss: String,
    pub optimizer: String,
    pub n_params: usize,
    pub n_examples: usize,
    pub iterations: usize,
    pub profile: String,
    pub final_loss_mean: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub final_loss_std: f64,
    pub final_loss_median: f64,
    pub total_circuits: u64,
    pub total_shots: u64,
    pub total_update_circuits: u64,
    pub total_cost: f64,
    /// Total cost under every known profile.
    pub costs: Vec<ProfileCost>,
    pub runs: Vec<SeedResult>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl RunSummary {
    pub fn finals(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_loss).collect()
    }

    /// Mean circuits per seed.
    pub fn circuits_per_seed(&self) -> f64 {
        self.total_circuits as f64 / self.runs.len() as f64
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_std(&[5.0]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            TraceRow {
                t: 0,
                loss: 0.1 + 0.2,
                circuits: 0,
                shots: 0,
                cost: 0.0,
                alpha: 0.1,
                accepted: false,
                sign: 0,
            },
            TraceRow {
                t: 1,
                loss: 1.0 / 3.0,
                circuits: 3,
                shots: 300,
                cost: 3.9,
                alpha: 0.1 / 1.1,
                accepted: true,
                sign: -1,
            },
        ];
        write_trace(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,loss,circuits,shots,cost,alpha,accepted,sign\n"));
        assert_eq!(read_trace(&path).unwrap(), rows);
    }
}
