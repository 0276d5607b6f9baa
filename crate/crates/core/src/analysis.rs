//! Accuracy-series metrics, the paired significance test, and the numerical
//! verification harness for the optimizer's convergence theory.
//!
//! The series metrics mirror how federated runs are usually judged: a
//! trailing moving average smooths round-to-round noise, "rounds to
//! threshold" asks when the smoothed curve *stays* above a target, and the
//! final/post-threshold averages compare plateau quality. All of them are
//! deliberately dumb scans — the test suite checks them against brute-force
//! re-implementations.

pub mod special;
pub mod theory;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// A per-round accuracy trace for one (algorithm, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySeries {
    pub algorithm: String,
    pub seed: u64,
    points: Vec<(usize, f64)>,
}

impl AccuracySeries {
    /// Validates that rounds strictly increase and values lie in [0, 1].
    pub fn new(
        algorithm: impl Into<String>,
        seed: u64,
        points: Vec<(usize, f64)>,
    ) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Config(alloc::format!(
                    "rounds must strictly increase ({} then {})",
                    pair[0].0,
                    pair[1].0
                )));
            }
        }
        if let Some(&(round, v)) = points.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(alloc::format!(
                "accuracy {v} at round {round} outside [0,1]"
            )));
        }
        Ok(AccuracySeries {
            algorithm: algorithm.into(),
            seed,
            points,
        })
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }
}

/// Trailing moving average: point i of the result is the mean of source
/// points i..i+window, stamped with the round of the *last* point in the
/// window. Defined from the window-th point onward.
pub fn moving_average(series: &AccuracySeries, window: usize) -> Result<AccuracySeries> {
    if window == 0 {
        return Err(Error::Config("window must be ≥ 1".into()));
    }
    if series.len() < window {
        return Err(Error::SampleSize {
            needed: window,
            got: series.len(),
        });
    }
    let points = series
        .points
        .windows(window)
        .map(|w| {
            let mean = w.iter().map(|&(_, v)| v).sum::<f64>() / window as f64;
            (w[window - 1].0, mean)
        })
        .collect();
    AccuracySeries::new(series.algorithm.clone(), series.seed, points)
}

/// How "reaches the threshold" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// The moving average crosses θ and never drops below it again.
    #[default]
    Consistent,
    /// The moving average's first crossing counts, dips afterwards ignored.
    FirstCrossing,
}

/// Round at which the `window`-point moving average reaches θ under `rule`;
/// `None` if it never does.
pub fn rounds_to_threshold_with(
    series: &AccuracySeries,
    theta: f64,
    window: usize,
    rule: ThresholdRule,
) -> Result<Option<usize>> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::Config(alloc::format!(
            "threshold {theta} outside (0,1)"
        )));
    }
    let ma = moving_average(series, window)?;
    let hit = match rule {
        ThresholdRule::FirstCrossing => ma.points.iter().find(|&&(_, v)| v >= theta),
        ThresholdRule::Consistent => {
            // the answer is the point right after the last dip below θ
            match ma.points.iter().rposition(|&(_, v)| v < theta) {
                None => ma.points.first(),
                Some(last_below) => ma.points.get(last_below + 1),
            }
        }
    };
    Ok(hit.map(|&(round, _)| round))
}

/// [`rounds_to_threshold_with`] under the default consistent reading.
pub fn rounds_to_threshold(
    series: &AccuracySeries,
    theta: f64,
    window: usize,
) -> Result<Option<usize>> {
    rounds_to_threshold_with(series, theta, window, ThresholdRule::Consistent)
}

/// Number of trailing rounds that define "final" accuracy.
pub const FINAL_WINDOW: usize = 100;

/// Mean accuracy over the last [`FINAL_WINDOW`] recorded rounds. Shorter
/// series are an error, never silently truncated.
pub fn final_accuracy(series: &AccuracySeries) -> Result<f64> {
    if series.len() < FINAL_WINDOW {
        return Err(Error::SampleSize {
            needed: FINAL_WINDOW,
            got: series.len(),
        });
    }
    let tail = &series.points[series.len() - FINAL_WINDOW..];
    Ok(tail.iter().map(|&(_, v)| v).sum::<f64>() / FINAL_WINDOW as f64)
}

/// Mean accuracy per algorithm from the round where the *slowest* algorithm
/// reaches θ (so all algorithms are averaged over a common window). `None`
/// if any algorithm never reaches θ — the comparison is undefined then.
pub fn post_threshold_average(
    series_by_alg: &BTreeMap<String, AccuracySeries>,
    theta: f64,
    window: usize,
) -> Result<Option<BTreeMap<String, f64>>> {
    if series_by_alg.is_empty() {
        return Err(Error::Config("no series given".into()));
    }
    let mut start = 0usize;
    for series in series_by_alg.values() {
        match rounds_to_threshold(series, theta, window)? {
            Some(round) => start = start.max(round),
            None => return Ok(None),
        }
    }
    let mut out = BTreeMap::new();
    for (name, series) in series_by_alg {
        let tail: Vec<f64> = series
            .points
            .iter()
            .filter(|&&(round, _)| round >= start)
            .map(|&(_, v)| v)
            .collect();
        if tail.is_empty() {
            return Ok(None);
        }
        out.insert(name.clone(), tail.iter().sum::<f64>() / tail.len() as f64);
    }
    Ok(Some(out))
}

/// Result of a paired two-sided t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Two-sided, n−1 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
    pub mean_diff: f64,
    /// Sample standard deviation of the differences (divisor n−1).
    pub std_diff: f64,
}

/// Paired t-test on matched samples: `t = D̄ / (s_D/√n)` with `D = a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Dimension(alloc::format!(
            "paired samples of different sizes ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::SampleSize { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs
        .iter()
        .map(|d| (d - mean_diff) * (d - mean_diff))
        .sum::<f64>()
        / (n - 1) as f64;
    let std_diff = var.sqrt();
    if std_diff == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t_statistic = mean_diff / (std_diff / (n as f64).sqrt());
    let p_value = special::student_t_two_sided_p(t_statistic, n - 1)?;
    Ok(TTestResult {
        t_statistic,
        p_value,
        n,
        mean_diff,
        std_diff,
    })
}
