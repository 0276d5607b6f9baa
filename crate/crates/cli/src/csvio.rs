//! CSV schemas and byte-stable serialization.
//!
//! Every float is written with 17 significant decimal digits (`{:.16e}`),
//! which round-trips any finite `f64` exactly — so identical results always
//! serialize to identical bytes, and files can be compared with `diff`.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .with_context(|| format!("bad {what}: {field:?}"))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .with_context(|| format!("bad {what}: {field:?}"))
}

pub const ROUNDS_HEADER: &str = "config_hash,algorithm,seed,round,val_accuracy,train_loss";

/// One training round of one (config, algorithm, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundsRow {
    pub config_hash: String,
    pub algorithm: String,
    pub seed: u64,
    pub round: usize,
    /// Empty cell when the round was not an evaluation round.
    pub val_accuracy: Option<f64>,
    pub train_loss: f64,
}

impl RoundsRow {
    pub fn to_line(&self) -> String {
        let acc = match self.val_accuracy {
            Some(a) => fmt_f64(a),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.config_hash,
            self.algorithm,
            self.seed,
            self.round,
            acc,
            fmt_f64(self.train_loss)
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("rounds row has {} fields, expected 6: {line:?}", fields.len());
        }
        Ok(RoundsRow {
            config_hash: fields[0].to_string(),
            algorithm: fields[1].to_string(),
            seed: fields[2]
                .parse::<u64>()
                .with_context(|| format!("bad seed: {:?}", fields[2]))?,
            round: parse_usize(fields[3], "round")?,
            val_accuracy: if fields[4].is_empty() {
                None
            } else {
                Some(parse_f64(fields[4], "val_accuracy")?)
            },
            train_loss: parse_f64(fields[5], "train_loss")?,
        })
    }
}

pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundsRow>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading rounds CSV {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ROUNDS_HEADER => {}
        Some(h) => bail!("unexpected rounds CSV header {h:?} in {}", path.display()),
        None => bail!("empty rounds CSV {}", path.display()),
    }
    lines
        .enumerate()
        .map(|(i, line)| RoundsRow::parse(line).with_context(|| format!("line {}", i + 2)))
        .collect()
}

pub fn write_rounds_csv(path: &Path, rows: &[RoundsRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(ROUNDS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub const GRID_HEADER: &str = "client_lr,server_lr,final10_mean_acc,diverged,is_best";

/// One grid-search cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub client_lr: f64,
    pub server_lr: f64,
    pub final10_mean_acc: f64,
    pub diverged: bool,
    pub is_best: bool,
}

impl GridRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_f64(self.client_lr),
            fmt_f64(self.server_lr),
            fmt_f64(self.final10_mean_acc),
            self.diverged,
            self.is_best
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("grid row has {} fields, expected 5: {line:?}", fields.len());
        }
        let parse_bool = |f: &str, what: &str| -> Result<bool> {
            match f {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => bail!("bad {what}: {f:?}"),
            }
        };
        Ok(GridRow {
            client_lr: parse_f64(fields[0], "client_lr")?,
            server_lr: parse_f64(fields[1], "server_lr")?,
            final10_mean_acc: parse_f64(fields[2], "final10_mean_acc")?,
            diverged: parse_bool(fields[3], "diverged")?,
            is_best: parse_bool(fields[4], "is_best")?,
        })
    }
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading grid CSV {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == GRID_HEADER => {}
        other => bail!("unexpected grid CSV header {other:?} in {}", path.display()),
    }
    lines
        .enumerate()
        .map(|(i, line)| GridRow::parse(line).with_context(|| format!("line {}", i + 2)))
        .collect()
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(GRID_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub const SUMMARY_HEADER: &str = "metric,algorithm,baseline,threshold,seed,value,statistic,flag";

/// One line of the analysis summary (tidy long format; unused columns stay
/// empty). `seed` is a seed number or `mean` for cross-seed aggregates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub algorithm: String,
    pub baseline: String,
    pub threshold: String,
    pub seed: String,
    pub value: String,
    pub statistic: String,
    pub flag: String,
}

impl SummaryRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.metric,
            self.algorithm,
            self.baseline,
            self.threshold,
            self.seed,
            self.value,
            self.statistic,
            self.flag
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!(
                "summary row has {} fields, expected 8: {line:?}",
                fields.len()
            );
        }
        Ok(SummaryRow {
            metric: fields[0].into(),
            algorithm: fields[1].into(),
            baseline: fields[2].into(),
            threshold: fields[3].into(),
            seed: fields[4].into(),
            value: fields[5].into(),
            statistic: fields[6].into(),
            flag: fields[7].into(),
        })
    }
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading summary CSV {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SUMMARY_HEADER => {}
        other => bail!(
            "unexpected summary CSV header {other:?} in {}",
            path.display()
        ),
    }
    lines
        .enumerate()
        .map(|(i, line)| SummaryRow::parse(line).with_context(|| format!("line {}", i + 2)))
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub const MANIFEST_HEADER: &str = "config_hash,algorithm,seed,artifact_version";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ManifestRow {
    pub config_hash: String,
    pub algorithm: String,
    pub seed: u64,
    pub artifact_version: String,
}

impl ManifestRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.config_hash, self.algorithm, self.seed, self.artifact_version
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!(
                "manifest row has {} fields, expected 4: {line:?}",
                fields.len()
            );
        }
        Ok(ManifestRow {
            config_hash: fields[0].into(),
            algorithm: fields[1].into(),
            seed: fields[2]
                .parse::<u64>()
                .with_context(|| format!("bad seed: {:?}", fields[2]))?,
            artifact_version: fields[3].into(),
        })
    }
}

pub fn read_manifest_csv(path: &Path) -> Result<Vec<ManifestRow>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MANIFEST_HEADER => {}
        other => bail!("unexpected manifest header {other:?} in {}", path.display()),
    }
    lines
        .enumerate()
        .map(|(i, line)| ManifestRow::parse(line).with_context(|| format!("line {}", i + 2)))
        .collect()
}

pub fn write_manifest_csv(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub const HETEROGENEITY_HEADER: &str = "row,volume,label_diversity,normalized_entropy,gini,kl_divergence,dominant_class_fraction";

/// Heterogeneity report as CSV: one row per client (`row` = client id) plus
/// `mean` and `std` aggregate rows.
pub fn render_heterogeneity_csv(report: &fedzmg_core::data::HeterogeneityReport) -> String {
    let mut out = String::new();
    out.push_str(HETEROGENEITY_HEADER);
    out.push('\n');
    for c in &report.per_client {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.client_id,
            c.volume,
            c.label_diversity,
            fmt_f64(c.normalized_entropy),
            fmt_f64(c.gini),
            fmt_f64(c.kl_divergence),
            fmt_f64(c.dominant_class_fraction)
        );
    }
    for (name, pick) in [
        ("mean", true),
        ("std", false),
    ] {
        let get = |m: &fedzmg_core::data::MetricSummary| if pick { m.mean } else { m.std };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            name,
            fmt_f64(get(&report.volume)),
            fmt_f64(get(&report.label_diversity)),
            fmt_f64(get(&report.normalized_entropy)),
            fmt_f64(get(&report.gini)),
            fmt_f64(get(&report.kl_divergence)),
            fmt_f64(get(&report.dominant_class_fraction))
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_exactly() {
        let cases = [
            0.05,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            6.02e23,
            -0.0,
            0.1 + 0.2,
        ];
        for &x in &cases {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} → {s} → {back}");
        }
    }

    #[test]
    fn rounds_row_round_trips() {
        let row = RoundsRow {
            config_hash: "00ff12abcd345678".into(),
            algorithm: "fedzmg".into(),
            seed: 3,
            round: 17,
            val_accuracy: Some(0.8125),
            train_loss: 0.04,
        };
        assert_eq!(RoundsRow::parse(&row.to_line()).unwrap(), row);
        let no_eval = RoundsRow {
            val_accuracy: None,
            ..row
        };
        let line = no_eval.to_line();
        assert!(line.contains(",,"));
        assert_eq!(RoundsRow::parse(&line).unwrap(), no_eval);
    }

    #[test]
    fn grid_row_round_trips() {
        let row = GridRow {
            client_lr: 0.001,
            server_lr: 10.0,
            final10_mean_acc: 0.0,
            diverged: true,
            is_best: false,
        };
        assert_eq!(GridRow::parse(&row.to_line()).unwrap(), row);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(RoundsRow::parse("a,b,c").is_err());
        assert!(RoundsRow::parse("h,alg,notanumber,1,,2.0").is_err());
        assert!(GridRow::parse("1,2,3,maybe,false").is_err());
    }
}
