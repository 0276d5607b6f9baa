//! Results directory management with merge-by-hash semantics.
//!
//! Layout under the output directory:
//!
//! ```text
//! rounds.csv          per-round training series, keyed by config hash
//! summary.csv         analysis metrics (written by `analyze`)
//! grid.csv            grid-search cells (written by `grid-search`)
//! manifest.csv        config hash → (algorithm, seed, artifact version)
//! heterogeneity.csv   federation statistics (written by `data-report`)
//! configs/<hash>.toml resolved single-cell config for every manifest row
//! ```
//!
//! Re-running a config replaces exactly the rows carrying its hash and
//! leaves everything else byte-identical: merged files are fully sorted, so
//! the bytes depend only on the surviving row set, never on write order or
//! scheduling.

use anyhow::{Context, Result};
use std::fs;
use std::path::{Path, PathBuf};

use crate::csvio::{
    read_manifest_csv, read_rounds_csv, write_grid_csv, write_manifest_csv, write_rounds_csv,
    write_summary_csv, GridRow, ManifestRow, RoundsRow, SummaryRow,
};

pub struct ResultsSink {
    out_dir: PathBuf,
}

impl ResultsSink {
    pub fn new(out_dir: impl Into<PathBuf>) -> Result<Self> {
        let out_dir = out_dir.into();
        fs::create_dir_all(out_dir.join("configs"))
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(ResultsSink { out_dir })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn rounds_path(&self) -> PathBuf {
        self.out_dir.join("rounds.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("summary.csv")
    }

    pub fn grid_path(&self) -> PathBuf {
        self.out_dir.join("grid.csv")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.csv")
    }

    pub fn heterogeneity_path(&self) -> PathBuf {
        self.out_dir.join("heterogeneity.csv")
    }

    pub fn config_path(&self, hash: &str) -> PathBuf {
        self.out_dir.join("configs").join(format!("{hash}.toml"))
    }

    /// Merges new rounds rows into `rounds.csv`: existing rows whose config
    /// hash is being re-written are dropped, everything else is kept, and
    /// the result is sorted by (algorithm, seed, config_hash, round).
    pub fn merge_rounds(&self, new_rows: Vec<RoundsRow>) -> Result<PathBuf> {
        let path = self.rounds_path();
        let mut rows = if path.exists() {
            let incoming: std::collections::BTreeSet<&str> =
                new_rows.iter().map(|r| r.config_hash.as_str()).collect();
            read_rounds_csv(&path)?
                .into_iter()
                .filter(|r| !incoming.contains(r.config_hash.as_str()))
                .collect()
        } else {
            Vec::new()
        };
        rows.extend(new_rows);
        rows.sort_by(|a, b| {
            (&a.algorithm, a.seed, &a.config_hash, a.round)
                .cmp(&(&b.algorithm, b.seed, &b.config_hash, b.round))
        });
        write_rounds_csv(&path, &rows)?;
        Ok(path)
    }

    /// Merges manifest rows (dedup by hash, sorted by hash) and stores each
    /// cell's resolved config under `configs/<hash>.toml`.
    pub fn record_cells(&self, cells: &[(ManifestRow, String)]) -> Result<PathBuf> {
        let path = self.manifest_path();
        let mut rows: Vec<ManifestRow> = if path.exists() {
            let incoming: std::collections::BTreeSet<&str> =
                cells.iter().map(|(r, _)| r.config_hash.as_str()).collect();
            read_manifest_csv(&path)?
                .into_iter()
                .filter(|r| !incoming.contains(r.config_hash.as_str()))
                .collect()
        } else {
            Vec::new()
        };
        for (row, cell_toml) in cells {
            fs::write(self.config_path(&row.config_hash), cell_toml)
                .with_context(|| format!("storing config {}", row.config_hash))?;
            rows.push(row.clone());
        }
        rows.sort();
        write_manifest_csv(&path, &rows)?;
        Ok(path)
    }

    pub fn write_grid(&self, rows: &[GridRow]) -> Result<PathBuf> {
        let path = self.grid_path();
        write_grid_csv(&path, rows)?;
        Ok(path)
    }

    pub fn write_summary(&self, rows: &[SummaryRow]) -> Result<PathBuf> {
        let path = self.summary_path();
        write_summary_csv(&path, rows)?;
        Ok(path)
    }

    pub fn write_heterogeneity(&self, csv_text: &str) -> Result<PathBuf> {
        let path = self.heterogeneity_path();
        fs::write(&path, csv_text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(hash: &str, alg: &str, seed: u64, round: usize, loss: f64) -> RoundsRow {
        RoundsRow {
            config_hash: hash.into(),
            algorithm: alg.into(),
            seed,
            round,
            val_accuracy: Some(0.5),
            train_loss: loss,
        }
    }

    #[test]
    fn rerun_overwrites_only_its_own_rows() {
        let dir = tempfile::tempdir().unwrap();
        let sink = ResultsSink::new(dir.path()).unwrap();
        sink.merge_rounds(vec![
            row("aaaa", "fedavg", 1, 0, 1.0),
            row("aaaa", "fedavg", 1, 1, 0.9),
            row("bbbb", "fedzmg", 1, 0, 1.1),
        ])
        .unwrap();
        let before = fs::read_to_string(sink.rounds_path()).unwrap();

        // re-run config bbbb with different numbers
        sink.merge_rounds(vec![row("bbbb", "fedzmg", 1, 0, 0.7)]).unwrap();
        let after = fs::read_to_string(sink.rounds_path()).unwrap();
        assert_ne!(before, after);
        let rows = read_rounds_csv(&sink.rounds_path()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().any(|r| r.config_hash == "bbbb" && r.train_loss == 0.7));
        // the fedavg rows are untouched byte-wise
        let fedavg_lines_before: Vec<&str> =
            before.lines().filter(|l| l.contains("fedavg")).collect();
        let fedavg_lines_after: Vec<&str> =
            after.lines().filter(|l| l.contains("fedavg")).collect();
        assert_eq!(fedavg_lines_before, fedavg_lines_after);
    }

    #[test]
    fn merge_is_order_independent() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let a = row("aaaa", "fedavg", 1, 0, 1.0);
        let b = row("bbbb", "fedzmg", 2, 0, 2.0);
        let s1 = ResultsSink::new(dir1.path()).unwrap();
        s1.merge_rounds(vec![a.clone()]).unwrap();
        s1.merge_rounds(vec![b.clone()]).unwrap();
        let s2 = ResultsSink::new(dir2.path()).unwrap();
        s2.merge_rounds(vec![b]).unwrap();
        s2.merge_rounds(vec![a]).unwrap();
        assert_eq!(
            fs::read_to_string(s1.rounds_path()).unwrap(),
            fs::read_to_string(s2.rounds_path()).unwrap()
        );
    }

    #[test]
    fn manifest_round_trips_to_stored_configs() {
        let dir = tempfile::tempdir().unwrap();
        let sink = ResultsSink::new(dir.path()).unwrap();
        let cells = vec![
            (
                ManifestRow {
                    config_hash: "0123456789abcdef".into(),
                    algorithm: "fedzmg".into(),
                    seed: 1,
                    artifact_version: "0.1.0".into(),
                },
                "# cell 1\n".to_string(),
            ),
            (
                ManifestRow {
                    config_hash: "fedcba9876543210".into(),
                    algorithm: "fedavg".into(),
                    seed: 2,
                    artifact_version: "0.1.0".into(),
                },
                "# cell 2\n".to_string(),
            ),
        ];
        sink.record_cells(&cells).unwrap();
        for row in read_manifest_csv(&sink.manifest_path()).unwrap() {
            let stored = sink.config_path(&row.config_hash);
            assert!(stored.exists(), "{} missing", stored.display());
        }
    }
}
