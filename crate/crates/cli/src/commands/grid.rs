//! `fedzmg grid-search`: sweep (client_lr × server_lr), score each cell by
//! the mean validation accuracy of its final rounds, and mark the winner.

use anyhow::{bail, Result};
use std::path::{Path, PathBuf};

use fedzmg_core::engine::run_experiment;

use crate::config::{load_config, resolve_grid, GridPlan};
use crate::csvio::{GridRow, ManifestRow};
use crate::parallel::parallel_map;
use crate::sink::ResultsSink;

use super::ARTIFACT_VERSION;

#[derive(Debug)]
pub struct GridOutcome {
    pub rows: Vec<GridRow>,
    /// (client_lr, server_lr, score) of the winning cell.
    pub best: (f64, f64, f64),
    pub grid_path: PathBuf,
}

pub fn grid_search(config_path: &Path, out_dir: &Path, workers: usize) -> Result<GridOutcome> {
    let cfg = load_config(config_path)?;
    let plan = resolve_grid(&cfg)?;
    run_grid(plan, out_dir, workers)
}

pub fn run_grid(plan: GridPlan, out_dir: &Path, workers: usize) -> Result<GridOutcome> {
    let sink = ResultsSink::new(out_dir)?;
    let window = plan.selection_window;
    let total = plan.cells.len();
    let results = parallel_map(plan.cells, workers, |gc| {
        let outcome = run_experiment(gc.cell.experiment.clone());
        (gc, outcome)
    });

    let mut rows = Vec::with_capacity(total);
    let mut manifest = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, (gc, outcome)) in results.iter().enumerate() {
        let (score, diverged) = match outcome {
            Ok(output) => {
                let accs: Vec<f64> = output
                    .records
                    .iter()
                    .filter_map(|r| r.val_accuracy)
                    .collect();
                if output.diverged.is_some() || accs.len() < window {
                    // divergence cuts the series short; zero-fill the cell
                    (0.0, true)
                } else {
                    let tail = &accs[accs.len() - window..];
                    (tail.iter().sum::<f64>() / window as f64, false)
                }
            }
            // a cell the algorithm cannot accept (e.g. a plain-average
            // server with server_lr ≠ 1) is recorded, flagged, and skipped
            // for selection — never a reason to abort the sweep
            Err(_) => (0.0, true),
        };
        if outcome.is_ok() {
            manifest.push((
                ManifestRow {
                    config_hash: gc.cell.config_hash.clone(),
                    algorithm: gc.cell.algorithm.clone(),
                    seed: gc.cell.seed,
                    artifact_version: ARTIFACT_VERSION.to_string(),
                },
                gc.cell.cell_toml.clone(),
            ));
        }
        if !diverged && best.map_or(true, |(_, s)| score > s) {
            best = Some((i, score));
        }
        rows.push(GridRow {
            client_lr: gc.client_lr,
            server_lr: gc.server_lr,
            final10_mean_acc: score,
            diverged,
            is_best: false,
        });
    }

    let Some((best_idx, best_score)) = best else {
        bail!("all {total} grid cells diverged or failed; nothing to select");
    };
    rows[best_idx].is_best = true;

    sink.record_cells(&manifest)?;
    let grid_path = sink.write_grid(&rows)?;

    for row in &rows {
        println!(
            "grid client_lr={:.3e} server_lr={:.3e} acc={:.4}{}{}",
            row.client_lr,
            row.server_lr,
            row.final10_mean_acc,
            if row.diverged { " DIVERGED" } else { "" },
            if row.is_best { " BEST" } else { "" },
        );
    }
    let best_row = &rows[best_idx];
    println!(
        "grid-search best: client_lr={:.3e} server_lr={:.3e} acc={best_score:.4} ({} of {total} cells usable)",
        best_row.client_lr,
        best_row.server_lr,
        rows.iter().filter(|r| !r.diverged).count(),
    );
    Ok(GridOutcome {
        best: (best_row.client_lr, best_row.server_lr, best_score),
        rows,
        grid_path,
    })
}
