//! Benchmark harness: trains classifiers with each optimizer over several
//! seeds, writes per-seed traces and summaries, and compares finished runs
//! by loss, circuit count and cloud cost.

pub mod config;
pub mod report;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use qgsa_core::optimizers::{run_optimizer, OptimizerTrace};
use qgsa_core::qml::random_theta;
use qgsa_core::rng::seeded;
use qgsa_core::shots_cost::{hoeffding_shots, shots_for_descent, shots_for_precision, Usage};
use qgsa_core::Objective;

use config::RunConfig;
use report::{
    mean, median, read_trace, sample_std, trace_file_name, trace_rows, write_trace, ProfileCost,
    RunSummary, SeedResult, TraceRow,
};
use svg::{line_chart, Series};

pub const SUMMARY_FILE: &str = "summary.json";

/// Runs every seed of the config at `config_path` and writes the artifacts
/// into `out` (default `runs/<name>`).
pub fn train(config_path: &Path, out: Option<&Path>, plots: bool) -> Result<RunSummary> {
    let config = RunConfig::from_path(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out = out.map_or_else(
        || PathBuf::from("runs").join(&config.name),
        Path::to_path_buf,
    );
    train_config(&config, base, &out, plots)
}

/// [`train`] for an already parsed config whose relative paths resolve
/// against `base`.
pub fn train_config(
    config: &RunConfig,
    base: &Path,
    out: &Path,
    plots: bool,
) -> Result<RunSummary> {
    config.validate()?;
    let data = config.dataset.load(base)?;
    let objective = config.objective(&data)?;
    let profiles = config.profiles(base)?;
    let profile = config.selected_profile(&profiles)?;
    let opt = config.optimizer_config()?;
    let theta0 = random_theta(objective.n_params(), &mut seeded(config.init_seed));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .context("starting worker pool")?;
    let traces: Vec<OptimizerTrace> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_optimizer(&opt, &objective, theta0.clone(), seed))
            .collect::<qgsa_core::Result<Vec<_>>>()
    })?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut all_rows = Vec::with_capacity(traces.len());
    for trace in &traces {
        let rows = trace_rows(trace, &profile);
        write_trace(&out.join(trace_file_name(trace.seed)), &rows)?;
        all_rows.push(rows);
    }

    let runs: Vec<SeedResult> = traces
        .iter()
        .map(|t| {
            let total = t.ledger.total();
            SeedResult {
                seed: t.seed,
                iterations_run: t.records.len() - 1,
                final_loss: t.final_loss(),
                circuits: total.circuits,
                shots: total.shots,
                update_circuits: t.update_circuits(),
                cost: profile.cost(total),
                stop: t.stop,
            }
        })
        .collect();
    let finals: Vec<f64> = runs.iter().map(|r| r.final_loss).collect();
    let total = Usage {
        circuits: runs.iter().map(|r| r.circuits).sum(),
        shots: runs.iter().map(|r| r.shots).sum(),
    };
    let summary = RunSummary {
        name: config.name.clone(),
        dataset: config.dataset.label(),
        loss: serde_json::to_value(config.loss)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        optimizer: config.optimizer.name().to_string(),
        n_params: objective.n_params(),
        n_examples: data.len(),
        iterations: config.iterations,
        profile: profile.name.clone(),
        final_loss_mean: mean(&finals),
        final_loss_std: sample_std(&finals),
        final_loss_median: median(&finals),
        total_circuits: total.circuits,
        total_shots: total.shots,
        total_update_circuits: runs.iter().map(|r| r.update_circuits).sum(),
        total_cost: profile.cost(total),
        costs: profiles
            .iter()
            .map(|p| ProfileCost {
                profile: p.name.clone(),
                cost: p.cost(total),
            })
            .collect(),
        runs,
    };
    std::fs::write(
        out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    if plots {
        let by_iter: Vec<Series> = traces
            .iter()
            .zip(&all_rows)
            .map(|(t, rows)| Series {
                label: format!("seed {}", t.seed),
                points: rows.iter().map(|r| (r.t as f64, r.loss)).collect(),
            })
            .collect();
        let by_circuits: Vec<Series> = traces
            .iter()
            .zip(&all_rows)
            .map(|(t, rows)| Series {
                label: format!("seed {}", t.seed),
                points: rows.iter().map(|r| (r.circuits as f64, r.loss)).collect(),
            })
            .collect();
        let title = format!("{} ({})", config.name, summary.optimizer);
        std::fs::write(
            out.join("loss_vs_iter.svg"),
            line_chart(&title, "iteration", "training loss", &by_iter),
        )?;
        std::fs::write(
            out.join("loss_vs_circuits.svg"),
            line_chart(&title, "circuit executions", "training loss", &by_circuits),
        )?;
    }
    Ok(summary)
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub dataset: String,
    pub loss: String,
    pub run: String,
    pub optimizer: String,
    pub seeds: usize,
    pub mean_final_loss: f64,
    pub total_circuits: u64,
    pub costs: Vec<ProfileCost>,
    /// Circuits per seed relative to the group's GD run.
    pub circuit_ratio_vs_gd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub plots: Vec<PathBuf>,
}

fn summary_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    if dir.join(SUMMARY_FILE).is_file() {
        dirs.push(dir.to_path_buf());
    }
    let entries = std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SUMMARY_FILE).is_file())
        .collect();
    subdirs.sort();
    dirs.extend(subdirs);
    Ok(dirs)
}

/// Seed-averaged `(circuits, loss)` curve, holding a finished run's last
/// record when other seeds ran longer.
fn mean_curve(run_dir: &Path, summary: &RunSummary) -> Result<Vec<(f64, f64)>> {
    let traces: Vec<Vec<TraceRow>> = summary
        .runs
        .iter()
        .map(|r| read_trace(&run_dir.join(trace_file_name(r.seed))))
        .collect::<Result<_>>()?;
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..len)
        .map(|t| {
            let at = |rows: &Vec<TraceRow>| rows[t.min(rows.len() - 1)].clone();
            let c: Vec<f64> = traces.iter().map(|r| at(r).circuits as f64).collect();
            let l: Vec<f64> = traces.iter().map(|r| at(r).loss).collect();
            (mean(&c), mean(&l))
        })
        .collect())
}

/// Tabulates every run summary under `runs_dir` and writes one overlaid
/// loss-versus-circuits chart per (dataset, loss) pair into `runs_dir`.
pub fn compare(runs_dir: &Path) -> Result<Comparison> {
    let dirs = summary_dirs(runs_dir)?;
    if dirs.len() < 2 {
        bail!(
            "need at least two finished runs under {}, found {}",
            runs_dir.display(),
            dirs.len()
        );
    }
    let mut groups: BTreeMap<(String, String), Vec<(PathBuf, RunSummary)>> = BTreeMap::new();
    for dir in dirs {
        let summary = RunSummary::read(&dir.join(SUMMARY_FILE))?;
        groups
            .entry((summary.dataset.clone(), summary.loss.clone()))
            .or_default()
            .push((dir, summary));
    }

    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for ((dataset, loss), runs) in &groups {
        let gd = runs
            .iter()
            .find(|(_, s)| s.optimizer == "gd")
            .map(|(_, s)| s.circuits_per_seed());
        let mut series = Vec::new();
        for (dir, s) in runs {
            rows.push(CompareRow {
                dataset: dataset.clone(),
                loss: loss.clone(),
                run: s.name.clone(),
                optimizer: s.optimizer.clone(),
                seeds: s.runs.len(),
                mean_final_loss: s.final_loss_mean,
                total_circuits: s.total_circuits,
                costs: s.costs.clone(),
                circuit_ratio_vs_gd: gd.filter(|&g| g > 0.0).map(|g| s.circuits_per_seed() / g),
            });
            series.push(Series {
                label: format!("{} ({})", s.name, s.optimizer),
                points: mean_curve(dir, s)?,
            });
        }
        let path = runs_dir.join(format!("compare_{dataset}_{loss}.svg"));
        std::fs::write(
            &path,
            line_chart(
                &format!("{dataset}, {loss} loss"),
                "circuit executions (mean over seeds)",
                "training loss (mean over seeds)",
                &series,
            ),
        )?;
        plots.push(path);
    }
    Ok(Comparison { rows, plots })
}

impl Comparison {
    /// Plain-text table with one cost column per pricing profile.
    pub fn render(&self) -> String {
        let mut profiles: Vec<String> = Vec::new();
        for row in &self.rows {
            for c in &row.costs {
                if !profiles.contains(&c.profile) {
                    profiles.push(c.profile.clone());
                }
            }
        }
        let mut header = vec![
            "dataset".to_string(),
            "loss".into(),
            "run".into(),
            "optimizer".into(),
            "seeds".into(),
            "mean final loss".into(),
            "total circuits".into(),
            "ratio vs gd".into(),
        ];
        header.extend(profiles.iter().map(|p| format!("{p} (USD)")));
        let mut table = vec![header];
        for row in &self.rows {
            let mut line = vec![
                row.dataset.clone(),
                row.loss.clone(),
                row.run.clone(),
                row.optimizer.clone(),
                row.seeds.to_string(),
                format!("{:.6}", row.mean_final_loss),
                row.total_circuits.to_string(),
                row.circuit_ratio_vs_gd
                    .map_or("-".into(), |r| format!("{r:.4}")),
            ];
            line.extend(profiles.iter().map(|p| {
                row.costs
                    .iter()
                    .find(|c| &c.profile == p)
                    .map_or("-".into(), |c| format!("{:.2}", c.cost))
            }));
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("  "));
            }
        }
        out
    }
}

/// What the `shots` command should compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotsQuery {
    Precision {
        epsilon: f64,
        delta: f64,
        range: Option<f64>,
    },
    Descent {
        gap: f64,
        delta: f64,
    },
}

/// The shot-count table printed by the `shots` command.
pub fn shots_table(query: ShotsQuery) -> Result<String> {
    let mut out = String::new();
    match query {
        ShotsQuery::Precision {
            epsilon,
            delta,
            range,
        } => {
            let _ = writeln!(out, "epsilon\tdelta\trange\tshots");
            let _ = writeln!(
                out,
                "{epsilon}\t{delta}\t1\t{}",
                shots_for_precision(epsilon, delta)?
            );
            if let Some(r) = range.filter(|&r| r != 1.0) {
                let _ = writeln!(
                    out,
                    "{epsilon}\t{delta}\t{r}\t{}",
                    hoeffding_shots(epsilon, delta, r)?
                );
            }
        }
        ShotsQuery::Descent { gap, delta } => {
            let _ = writeln!(out, "gap\tdelta\tshots");
            let _ = writeln!(out, "{gap}\t{delta}\t{}", shots_for_descent(gap, delta)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_table_examples() {
        let t = shots_table(ShotsQuery::Precision {
            epsilon: 0.01,
            delta: 0.05,
            range: None,
        })
        .unwrap();
        assert!(t.lines().nth(1).unwrap().ends_with("\t18445"));
        let t = shots_table(ShotsQuery::Precision {
            epsilon: 0.01,
            delta: 0.05,
            range: Some(2.0),
        })
        .unwrap();
        assert!(t.lines().nth(2).unwrap().ends_with("\t73778"));
        let t = shots_table(ShotsQuery::Descent {
            gap: 0.1,
            delta: 0.05,
        })
        .unwrap();
        assert!(t.lines().nth(1).unwrap().ends_with("\t185"));
        assert!(shots_table(ShotsQuery::Descent {
            gap: 0.1,
            delta: 1.5
        })
        .is_err());
    }
}
