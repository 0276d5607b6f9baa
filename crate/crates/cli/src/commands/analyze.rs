//! `fedzmg analyze`: turn a rounds CSV into the comparison metrics —
//! rounds-to-threshold at each requested threshold, post-threshold average
//! accuracy, final accuracy, and paired t-tests of the projected optimizer
//! against every baseline present.

use anyhow::{bail, Context, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fedzmg_core::analysis::{
    final_accuracy, paired_t_test, post_threshold_average, rounds_to_threshold, AccuracySeries,
};
use fedzmg_core::Error as CoreError;

use crate::csvio::{fmt_f64, read_rounds_csv, RoundsRow, SummaryRow};
use crate::sink::ResultsSink;

/// Significance level for the t-test flags.
pub const ALPHA: f64 = 0.05;

#[derive(Debug)]
pub struct AnalyzeOutcome {
    pub rows: Vec<SummaryRow>,
    pub summary_path: PathBuf,
}

pub fn analyze(
    rounds_path: &Path,
    out_dir: &Path,
    thresholds: &[f64],
    window: usize,
) -> Result<AnalyzeOutcome> {
    let rows = read_rounds_csv(rounds_path)?;
    let summary = summarize(&rows, thresholds, window)?;
    let sink = ResultsSink::new(out_dir)?;
    let summary_path = sink.write_summary(&summary)?;
    for row in &summary {
        println!("{}", row.to_line());
    }
    Ok(AnalyzeOutcome {
        rows: summary,
        summary_path,
    })
}

/// One evaluation series per (algorithm, seed), all belonging to a single
/// config hash each.
fn build_series(rows: &[RoundsRow]) -> Result<BTreeMap<(String, u64), AccuracySeries>> {
    let mut hashes: BTreeMap<(String, u64), BTreeSet<&str>> = BTreeMap::new();
    let mut points: BTreeMap<(String, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for row in rows {
        let key = (row.algorithm.clone(), row.seed);
        hashes
            .entry(key.clone())
            .or_default()
            .insert(row.config_hash.as_str());
        if let Some(acc) = row.val_accuracy {
            points.entry(key).or_default().push((row.round, acc));
        }
    }
    let mut series = BTreeMap::new();
    for ((alg, seed), set) in &hashes {
        if set.len() > 1 {
            bail!(
                "algorithm {alg} seed {seed} appears under {} different config hashes; \
                 analyze one configuration per (algorithm, seed) at a time",
                set.len()
            );
        }
        let mut pts = points.remove(&(alg.clone(), *seed)).unwrap_or_default();
        if pts.is_empty() {
            bail!("no evaluation points for algorithm {alg} seed {seed}");
        }
        pts.sort_by_key(|&(round, _)| round);
        let s = AccuracySeries::new(alg.clone(), *seed, pts)
            .with_context(|| format!("series for algorithm {alg} seed {seed}"))?;
        series.insert((alg.clone(), *seed), s);
    }
    Ok(series)
}

fn threshold_label(theta: f64) -> String {
    format!("{theta}")
}

pub fn summarize(
    rows: &[RoundsRow],
    thresholds: &[f64],
    window: usize,
) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        bail!("rounds CSV has no data rows");
    }
    if thresholds.is_empty() {
        bail!("need at least one threshold");
    }
    let series = build_series(rows)?;
    let algorithms: BTreeSet<String> = series.keys().map(|(a, _)| a.clone()).collect();
    let seeds_of = |alg: &str| -> Vec<u64> {
        series
            .keys()
            .filter(|(a, _)| a == alg)
            .map(|&(_, s)| s)
            .collect()
    };

    let mut out = Vec::new();

    // rounds to threshold
    for alg in &algorithms {
        for &theta in thresholds {
            let mut crossed = Vec::new();
            let seeds = seeds_of(alg);
            let total = seeds.len();
            for seed in seeds {
                let s = &series[&(alg.clone(), seed)];
                let r2t = rounds_to_threshold(s, theta, window)
                    .with_context(|| format!("rounds_to_threshold for {alg} seed {seed}"))?;
                let (value, flag) = match r2t {
                    Some(round) => {
                        crossed.push(round as f64);
                        (round.to_string(), String::new())
                    }
                    None => (String::new(), "never".to_string()),
                };
                out.push(SummaryRow {
                    metric: "rounds_to_threshold".into(),
                    algorithm: alg.clone(),
                    threshold: threshold_label(theta),
                    seed: seed.to_string(),
                    value,
                    flag,
                    ..Default::default()
                });
            }
            let (value, flag) = if crossed.is_empty() {
                (String::new(), "never".to_string())
            } else {
                let mean = crossed.iter().sum::<f64>() / crossed.len() as f64;
                let flag = if crossed.len() == total {
                    String::new()
                } else {
                    "partial".to_string()
                };
                (fmt_f64(mean), flag)
            };
            out.push(SummaryRow {
                metric: "rounds_to_threshold".into(),
                algorithm: alg.clone(),
                threshold: threshold_label(theta),
                seed: "mean".into(),
                value,
                flag,
                ..Default::default()
            });
        }
    }

    // final accuracy
    let mut finals: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
    for alg in &algorithms {
        let mut values = Vec::new();
        for seed in seeds_of(alg) {
            let s = &series[&(alg.clone(), seed)];
            let acc = final_accuracy(s)
                .with_context(|| format!("final_accuracy for {alg} seed {seed}"))?;
            finals.entry(alg.clone()).or_default().insert(seed, acc);
            values.push(acc);
            out.push(SummaryRow {
                metric: "final_accuracy".into(),
                algorithm: alg.clone(),
                seed: seed.to_string(),
                value: fmt_f64(acc),
                ..Default::default()
            });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        out.push(SummaryRow {
            metric: "final_accuracy".into(),
            algorithm: alg.clone(),
            seed: "mean".into(),
            value: fmt_f64(mean),
            ..Default::default()
        });
    }

    // post-threshold average: per seed shared by all algorithms, then mean
    let shared_seeds: Vec<u64> = {
        let mut shared: Option<BTreeSet<u64>> = None;
        for alg in &algorithms {
            let s: BTreeSet<u64> = seeds_of(alg).into_iter().collect();
            shared = Some(match shared {
                None => s,
                Some(prev) => prev.intersection(&s).copied().collect(),
            });
        }
        shared.unwrap_or_default().into_iter().collect()
    };
    for &theta in thresholds {
        let mut per_alg: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &seed in &shared_seeds {
            let map: BTreeMap<String, AccuracySeries> = algorithms
                .iter()
                .map(|alg| (alg.clone(), series[&(alg.clone(), seed)].clone()))
                .collect();
            let result = post_threshold_average(&map, theta, window)
                .with_context(|| format!("post_threshold_average at θ={theta} seed {seed}"))?;
            match result {
                Some(averages) => {
                    for (alg, avg) in averages {
                        per_alg.entry(alg.clone()).or_default().push(avg);
                        out.push(SummaryRow {
                            metric: "post_threshold_avg".into(),
                            algorithm: alg,
                            threshold: threshold_label(theta),
                            seed: seed.to_string(),
                            value: fmt_f64(avg),
                            ..Default::default()
                        });
                    }
                }
                None => {
                    for alg in &algorithms {
                        out.push(SummaryRow {
                            metric: "post_threshold_avg".into(),
                            algorithm: alg.clone(),
                            threshold: threshold_label(theta),
                            seed: seed.to_string(),
                            flag: "undefined".into(),
                            ..Default::default()
                        });
                    }
                }
            }
        }
        for alg in &algorithms {
            let (value, flag) = match per_alg.get(alg) {
                Some(vals) if !vals.is_empty() => {
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let flag = if vals.len() == shared_seeds.len() {
                        String::new()
                    } else {
                        "partial".to_string()
                    };
                    (fmt_f64(mean), flag)
                }
                _ => (String::new(), "undefined".to_string()),
            };
            out.push(SummaryRow {
                metric: "post_threshold_avg".into(),
                algorithm: alg.clone(),
                threshold: threshold_label(theta),
                seed: "mean".into(),
                value,
                flag,
                ..Default::default()
            });
        }
    }

    // paired t-tests: projected optimizer vs every baseline, paired by seed
    if algorithms.contains("fedzmg") {
        for baseline in algorithms.iter().filter(|a| a.as_str() != "fedzmg") {
            let common: Vec<u64> = {
                let a: BTreeSet<u64> = finals["fedzmg"].keys().copied().collect();
                let b: BTreeSet<u64> = finals[baseline].keys().copied().collect();
                a.intersection(&b).copied().collect()
            };
            let mut row = SummaryRow {
                metric: "paired_t_test".into(),
                algorithm: "fedzmg".into(),
                baseline: baseline.clone(),
                seed: common.len().to_string(),
                ..Default::default()
            };
            if common.len() < 2 {
                row.flag = "insufficient-data".into();
                out.push(row);
                continue;
            }
            let a: Vec<f64> = common.iter().map(|s| finals["fedzmg"][s]).collect();
            let b: Vec<f64> = common.iter().map(|s| finals[baseline][s]).collect();
            match paired_t_test(&a, &b) {
                Ok(test) => {
                    row.value = fmt_f64(test.p_value);
                    row.statistic = fmt_f64(test.t_statistic);
                    row.flag = if test.p_value < ALPHA {
                        "significant".into()
                    } else {
                        "not-significant".into()
                    };
                }
                Err(CoreError::DegenerateVariance) => {
                    row.flag = "degenerate".into();
                }
                Err(e) => return Err(e).context("paired t-test"),
            }
            out.push(row);
        }
    }

    Ok(out)
}
