//! `fedzmg run`: execute every (algorithm × seed) cell of a config and
//! persist the per-round series.

use anyhow::{bail, Result};
use std::path::{Path, PathBuf};

use fedzmg_core::engine::{run_experiment, DivergenceInfo};

use crate::config::{load_config, resolve_run_cells, RunCell};
use crate::csvio::{ManifestRow, RoundsRow};
use crate::parallel::parallel_map;
use crate::sink::ResultsSink;

use super::ARTIFACT_VERSION;

#[derive(Debug, Clone)]
pub struct CellReport {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: String,
    pub rounds_completed: usize,
    pub final_val_accuracy: Option<f64>,
    pub diverged: Option<DivergenceInfo>,
}

#[derive(Debug)]
pub struct RunReport {
    pub cells: Vec<CellReport>,
    pub rounds_path: PathBuf,
}

pub fn run(config_path: &Path, out_dir: &Path, workers: usize) -> Result<RunReport> {
    let cfg = load_config(config_path)?;
    let cells = resolve_run_cells(&cfg)?;
    execute_cells(cells, out_dir, workers)
}

/// Runs the cells on `workers` threads, merges their rows into the sink,
/// then fails if any cell hit a config error or diverged — results of the
/// healthy cells are on disk either way.
pub fn execute_cells(cells: Vec<RunCell>, out_dir: &Path, workers: usize) -> Result<RunReport> {
    let sink = ResultsSink::new(out_dir)?;
    let results = parallel_map(cells, workers, |cell| {
        let outcome = run_experiment(cell.experiment.clone());
        (cell, outcome)
    });

    let mut rows = Vec::new();
    let mut manifest = Vec::new();
    let mut reports = Vec::new();
    let mut cell_errors = Vec::new();
    let mut divergences = Vec::new();
    for (cell, outcome) in results {
        match outcome {
            Ok(output) => {
                for rec in &output.records {
                    rows.push(RoundsRow {
                        config_hash: cell.config_hash.clone(),
                        algorithm: cell.algorithm.clone(),
                        seed: cell.seed,
                        round: rec.round,
                        val_accuracy: rec.val_accuracy,
                        train_loss: rec.train_loss,
                    });
                }
                manifest.push((
                    ManifestRow {
                        config_hash: cell.config_hash.clone(),
                        algorithm: cell.algorithm.clone(),
                        seed: cell.seed,
                        artifact_version: ARTIFACT_VERSION.to_string(),
                    },
                    cell.cell_toml.clone(),
                ));
                if let Some(info) = &output.diverged {
                    divergences.push(format!(
                        "{} seed {} diverged at round {}, client {}, step {} (loss {:e})",
                        cell.algorithm, cell.seed, info.round, info.client_id, info.step, info.loss
                    ));
                }
                reports.push(CellReport {
                    algorithm: cell.algorithm,
                    seed: cell.seed,
                    config_hash: cell.config_hash,
                    rounds_completed: output.records.len(),
                    final_val_accuracy: output.records.iter().rev().find_map(|r| r.val_accuracy),
                    diverged: output.diverged,
                });
            }
            Err(e) => {
                cell_errors.push(format!("{} seed {}: {e}", cell.algorithm, cell.seed));
            }
        }
    }

    let rounds_path = sink.merge_rounds(rows)?;
    sink.record_cells(&manifest)?;

    for r in &reports {
        let acc = match r.final_val_accuracy {
            Some(a) => format!("{a:.4}"),
            None => "-".to_string(),
        };
        let status = if r.diverged.is_some() { " DIVERGED" } else { "" };
        println!(
            "run {} seed={} hash={} rounds={} final_acc={acc}{status}",
            r.algorithm, r.seed, r.config_hash, r.rounds_completed
        );
    }

    if !cell_errors.is_empty() {
        bail!("cell configuration errors:\n  {}", cell_errors.join("\n  "));
    }
    if !divergences.is_empty() {
        bail!(
            "training diverged (partial series were written to {}):\n  {}",
            rounds_path.display(),
            divergences.join("\n  ")
        );
    }
    Ok(RunReport {
        cells: reports,
        rounds_path,
    })
}
