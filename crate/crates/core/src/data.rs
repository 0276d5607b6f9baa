//! Synthetic non-IID federation generation and heterogeneity reporting.
//!
//! Clients are made unequal along two independent axes:
//!
//! - **label skew** — per-client class proportions drawn from a symmetric
//!   Dirichlet(α); small α concentrates mass on few classes, large α
//!   approaches uniform.
//! - **intensity shift** — every feature of client k is shifted by the same
//!   scalar `b_k ~ U(−s, +s)`, i.e. by `b_k·1`. This nuisance direction is
//!   exactly the component the zero-mean projection removes, which is what
//!   makes these federations useful probes.
//!
//! Class mean vectors are shared across clients and centered to zero
//! component-mean, so the class signal lives entirely in the subspace
//! orthogonal to the shift direction; the two axes never entangle.
//!
//! Everything is deterministic given the recipe seed: each client draws from
//! its own counter-keyed streams, so output is independent of generation
//! order and thread count.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Batch, Labels};
use crate::param::fnv1a_bytes;
use crate::rng::{purpose, Stream};

/// One client's local dataset.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    pub client_id: usize,
    /// Row-major `n_k × input_dim`.
    pub features: Matrix,
    pub labels: Labels,
}

impl ClientDataset {
    /// Local sample count; always equals the feature row count by
    /// construction.
    pub fn n_k(&self) -> usize {
        self.features.rows()
    }

    /// Content hash over shape, feature bits, and labels — order-sensitive,
    /// used to pin fixtures on disk.
    pub fn checksum(&self) -> u64 {
        let mut bytes =
            Vec::with_capacity(16 + self.features.as_slice().len() * 8 + self.labels.len() * 8);
        bytes.extend_from_slice(&(self.features.rows() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.features.cols() as u64).to_le_bytes());
        for v in self.features.as_slice() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        match &self.labels {
            Labels::Classes(ys) => {
                bytes.push(0);
                for &y in ys {
                    bytes.extend_from_slice(&(y as u64).to_le_bytes());
                }
            }
            Labels::Values(ys) => {
                bytes.push(1);
                for &y in ys {
                    bytes.extend_from_slice(&y.to_bits().to_le_bytes());
                }
            }
        }
        fnv1a_bytes(&bytes)
    }

    /// The whole dataset as one training batch.
    pub fn as_batch(&self) -> Batch {
        Batch {
            features: self.features.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Per-client sample budget: every client the same count, or a per-client
/// uniform draw from an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplesPerClient {
    Fixed(usize),
    Range { lo: usize, hi: usize },
}

impl SamplesPerClient {
    fn min(&self) -> usize {
        match *self {
            SamplesPerClient::Fixed(n) => n,
            SamplesPerClient::Range { lo, .. } => lo,
        }
    }
}

/// Full description of a synthetic federation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecipe {
    pub num_clients: usize,
    pub classes: usize,
    pub input_dim: usize,
    pub samples_per_client: SamplesPerClient,
    /// Symmetric Dirichlet concentration for label proportions.
    pub dirichlet_alpha: f64,
    /// Half-width of the per-client uniform intensity shift.
    pub bias_shift_scale: f64,
    /// Standard deviation of feature noise around the class mean.
    pub noise_scale: f64,
    pub seed: u64,
}

/// Above this concentration the Dirichlet is treated as an exactly-uniform
/// request, which is unsatisfiable when a client holds fewer samples than
/// there are classes.
const UNIFORM_ALPHA: f64 = 1e5;

impl DataRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Recipe("num_clients must be ≥ 1".into()));
        }
        if self.classes == 0 {
            return Err(Error::Recipe("classes must be ≥ 1".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::Recipe("input_dim must be ≥ 1".into()));
        }
        match self.samples_per_client {
            SamplesPerClient::Fixed(0) => {
                return Err(Error::Recipe("samples_per_client must be ≥ 1".into()))
            }
            SamplesPerClient::Range { lo, hi } if lo == 0 || lo > hi => {
                return Err(Error::Recipe(format!(
                    "samples_per_client range [{lo}, {hi}] must satisfy 1 ≤ lo ≤ hi"
                )))
            }
            _ => {}
        }
        if !(self.dirichlet_alpha > 0.0) || !self.dirichlet_alpha.is_finite() {
            return Err(Error::Recipe("dirichlet_alpha must be a positive real".into()));
        }
        if !(self.bias_shift_scale >= 0.0) || !self.bias_shift_scale.is_finite() {
            return Err(Error::Recipe("bias_shift_scale must be ≥ 0".into()));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::Recipe("noise_scale must be ≥ 0".into()));
        }
        if self.dirichlet_alpha >= UNIFORM_ALPHA && self.samples_per_client.min() < self.classes {
            return Err(Error::Recipe(format!(
                "uniform label request (α={}) with {} samples per client cannot cover {} classes",
                self.dirichlet_alpha,
                self.samples_per_client.min(),
                self.classes
            )));
        }
        Ok(())
    }
}

/// Shared class mean vectors: unit-variance Gaussian entries, each vector
/// centered to zero component-mean so the class signal is orthogonal to the
/// all-ones intensity direction.
fn class_means(recipe: &DataRecipe) -> Vec<Vec<f64>> {
    let mut stream = Stream::from_key(&[recipe.seed, purpose::FEATURES]);
    (0..recipe.classes)
        .map(|_| {
            let mut m: Vec<f64> = (0..recipe.input_dim).map(|_| stream.gaussian()).collect();
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            for v in &mut m {
                *v -= mean;
            }
            m
        })
        .collect()
}

/// Splits `total` into per-class counts proportional to `proportions`,
/// exactly: floor each share, then hand out the remainder by largest
/// fractional part (ties toward the lower class index).
fn largest_remainder_counts(proportions: &[f64], total: usize) -> Vec<usize> {
    let shares: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &idx in order.iter().take(total - assigned) {
        counts[idx] += 1;
    }
    counts
}

/// Generates the full federation described by the recipe. Deterministic:
/// identical recipes produce byte-identical datasets.
pub fn generate_federation(recipe: &DataRecipe) -> Result<Vec<ClientDataset>> {
    recipe.validate()?;
    let means = class_means(recipe);
    // Per-client volumes come from one dedicated stream so that changing any
    // single client's content never shifts another client's size.
    let mut volume_stream = Stream::from_key(&[recipe.seed, purpose::LABELS]);
    let volumes: Vec<usize> = (0..recipe.num_clients)
        .map(|_| match recipe.samples_per_client {
            SamplesPerClient::Fixed(n) => n,
            SamplesPerClient::Range { lo, hi } => lo + volume_stream.next_below(hi - lo + 1),
        })
        .collect();

    let mut clients = Vec::with_capacity(recipe.num_clients);
    for (k, &n_k) in volumes.iter().enumerate() {
        let mut label_stream = Stream::from_key(&[recipe.seed, purpose::LABELS, k as u64]);
        let proportions = if recipe.dirichlet_alpha >= UNIFORM_ALPHA {
            vec![1.0 / recipe.classes as f64; recipe.classes]
        } else {
            label_stream.dirichlet_symmetric(recipe.dirichlet_alpha, recipe.classes)
        };
        let counts = largest_remainder_counts(&proportions, n_k);

        let mut feature_stream = Stream::from_key(&[recipe.seed, purpose::FEATURES, k as u64]);
        // Always consume the shift draw so recipes that differ only in
        // bias_shift_scale produce the same labels and the same noise.
        let b_k = recipe.bias_shift_scale * feature_stream.uniform(-1.0, 1.0);
        let mut rows = Vec::with_capacity(n_k * recipe.input_dim);
        let mut labels = Vec::with_capacity(n_k);
        for (class, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                for &m in &means[class] {
                    rows.push(m + recipe.noise_scale * feature_stream.gaussian() + b_k);
                }
                labels.push(class);
            }
        }
        // Shuffle rows so mini-batches are not sorted by class.
        let mut order: Vec<usize> = (0..n_k).collect();
        feature_stream.shuffle(&mut order);
        let d = recipe.input_dim;
        let mut shuffled_rows = Vec::with_capacity(rows.len());
        let mut shuffled_labels = Vec::with_capacity(n_k);
        for &i in &order {
            shuffled_rows.extend_from_slice(&rows[i * d..(i + 1) * d]);
            shuffled_labels.push(labels[i]);
        }
        clients.push(ClientDataset {
            client_id: k,
            features: Matrix::from_vec(n_k, d, shuffled_rows),
            labels: Labels::Classes(shuffled_labels),
        });
    }
    Ok(clients)
}

/// Held-out evaluation batch for a recipe: class-balanced (labels cycle
/// through the classes), drawn from the same class-conditional distribution
/// but **without** any per-client intensity shift, 100 samples per class.
pub fn make_eval_batch(recipe: &DataRecipe) -> Result<Batch> {
    recipe.validate()?;
    let means = class_means(recipe);
    let n = 100 * recipe.classes;
    let mut stream = Stream::from_key(&[recipe.seed, purpose::EVAL]);
    let mut rows = Vec::with_capacity(n * recipe.input_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % recipe.classes;
        for &m in &means[class] {
            rows.push(m + recipe.noise_scale * stream.gaussian());
        }
        labels.push(class);
    }
    Ok(Batch {
        features: Matrix::from_vec(n, recipe.input_dim, rows),
        labels: Labels::Classes(labels),
    })
}

/// One client's distribution statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientStats {
    pub client_id: usize,
    /// Sample count.
    pub volume: usize,
    /// Number of distinct classes present.
    pub label_diversity: usize,
    /// Shannon entropy of the label histogram divided by log(classes);
    /// 1 for uniform, 0 for a single class.
    pub normalized_entropy: f64,
    /// Gini coefficient of the per-class count vector, zero-count classes
    /// included; 0 for uniform, (C−1)/C for a single class.
    pub gini: f64,
    /// KL divergence of the client label distribution from the pooled global
    /// one, with additive smoothing 1e-9.
    pub kl_divergence: f64,
    /// Share of the most common class.
    pub dominant_class_fraction: f64,
}

/// Mean and population standard deviation of one metric across clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> MetricSummary {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

/// Federation-level heterogeneity report.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub per_client: Vec<ClientStats>,
    pub volume: MetricSummary,
    pub label_diversity: MetricSummary,
    pub normalized_entropy: MetricSummary,
    pub gini: MetricSummary,
    pub kl_divergence: MetricSummary,
    pub dominant_class_fraction: MetricSummary,
}

const KL_SMOOTHING: f64 = 1e-9;

fn class_counts(client: &ClientDataset, classes: usize) -> Result<Vec<usize>> {
    let ys = match &client.labels {
        Labels::Classes(v) => v,
        Labels::Values(_) => {
            return Err(Error::Config(
                "heterogeneity report needs class labels".into(),
            ))
        }
    };
    let mut counts = vec![0usize; classes];
    for &y in ys {
        if y >= classes {
            return Err(Error::Dimension(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        counts[y] += 1;
    }
    Ok(counts)
}

/// Gini coefficient of a count vector (zeros included): mean absolute
/// pairwise difference over twice the mean.
fn gini_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 || counts.len() < 2 {
        return 0.0;
    }
    let mut abs_diff_sum = 0.0;
    for &a in counts {
        for &b in counts {
            abs_diff_sum += (a as f64 - b as f64).abs();
        }
    }
    abs_diff_sum / (2.0 * counts.len() as f64 * total as f64)
}

fn smoothed(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().map(|v| v + KL_SMOOTHING).sum();
    p.iter().map(|v| (v + KL_SMOOTHING) / total).collect()
}

/// Per-client label-distribution metrics plus their aggregate mean and
/// population standard deviation. KL is measured against the pooled label
/// distribution of exactly the clients passed in.
pub fn heterogeneity_report(
    clients: &[ClientDataset],
    classes: usize,
) -> Result<HeterogeneityReport> {
    if clients.is_empty() {
        return Err(Error::Dimension("heterogeneity report of no clients".into()));
    }
    if classes == 0 {
        return Err(Error::Dimension("zero classes".into()));
    }
    let all_counts: Vec<Vec<usize>> = clients
        .iter()
        .map(|c| class_counts(c, classes))
        .collect::<Result<_>>()?;
    let mut global = vec![0usize; classes];
    for counts in &all_counts {
        for (g, &c) in global.iter_mut().zip(counts) {
            *g += c;
        }
    }
    let global_total: usize = global.iter().sum();
    if global_total == 0 {
        return Err(Error::Dimension("no samples across clients".into()));
    }
    let q = smoothed(
        &global
            .iter()
            .map(|&c| c as f64 / global_total as f64)
            .collect::<Vec<_>>(),
    );

    let per_client: Vec<ClientStats> = clients
        .iter()
        .zip(&all_counts)
        .map(|(client, counts)| {
            let volume: usize = counts.iter().sum();
            let props: Vec<f64> = counts.iter().map(|&c| c as f64 / volume as f64).collect();
            let entropy: f64 = props
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum();
            let normalized_entropy = if classes > 1 {
                entropy / (classes as f64).ln()
            } else {
                0.0
            };
            let p = smoothed(&props);
            let kl_divergence: f64 = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| pi * (pi / qi).ln())
                .sum::<f64>()
                .max(0.0);
            ClientStats {
                client_id: client.client_id,
                volume,
                label_diversity: counts.iter().filter(|&&c| c > 0).count(),
                normalized_entropy,
                gini: gini_of_counts(counts),
                kl_divergence,
                dominant_class_fraction: *counts.iter().max().unwrap() as f64 / volume as f64,
            }
        })
        .collect();

    let report = HeterogeneityReport {
        volume: summarize(per_client.iter().map(|c| c.volume as f64)),
        label_diversity: summarize(per_client.iter().map(|c| c.label_diversity as f64)),
        normalized_entropy: summarize(per_client.iter().map(|c| c.normalized_entropy)),
        gini: summarize(per_client.iter().map(|c| c.gini)),
        kl_divergence: summarize(per_client.iter().map(|c| c.kl_divergence)),
        dominant_class_fraction: summarize(
            per_client.iter().map(|c| c.dominant_class_fraction),
        ),
        per_client,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn recipe() -> DataRecipe {
        DataRecipe {
            num_clients: 6,
            classes: 4,
            input_dim: 5,
            samples_per_client: SamplesPerClient::Fixed(40),
            dirichlet_alpha: 0.5,
            bias_shift_scale: 2.0,
            noise_scale: 1.0,
            seed: 9,
        }
    }

    fn client_from_counts(id: usize, counts: &[usize]) -> ClientDataset {
        let n: usize = counts.iter().sum();
        let mut labels = Vec::new();
        for (class, &c) in counts.iter().enumerate() {
            labels.extend(core::iter::repeat(class).take(c));
        }
        ClientDataset {
            client_id: id,
            features: Matrix::zeros(n, 2),
            labels: Labels::Classes(labels),
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let r = recipe();
        let a = generate_federation(&r).unwrap();
        let b = generate_federation(&r).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.features.as_slice(), y.features.as_slice());
            assert_eq!(x.labels, y.labels);
            assert_eq!(x.checksum(), y.checksum());
        }
        let mut r2 = recipe();
        r2.seed = 10;
        let c = generate_federation(&r2).unwrap();
        assert_ne!(a[0].checksum(), c[0].checksum());
    }

    #[test]
    fn volumes_are_exact_and_ids_sequential() {
        let mut r = recipe();
        r.samples_per_client = SamplesPerClient::Range { lo: 10, hi: 30 };
        let clients = generate_federation(&r).unwrap();
        assert_eq!(clients.len(), 6);
        for (i, c) in clients.iter().enumerate() {
            assert_eq!(c.client_id, i);
            assert!(c.n_k() >= 10 && c.n_k() <= 30);
            assert_eq!(c.labels.len(), c.n_k());
        }
    }

    #[test]
    fn bias_shift_changes_features_not_labels() {
        let mut base = recipe();
        base.bias_shift_scale = 0.0;
        let mut shifted = recipe();
        shifted.bias_shift_scale = 50.0;
        let a = generate_federation(&base).unwrap();
        let b = generate_federation(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.labels, y.labels);
            assert_ne!(x.features.as_slice(), y.features.as_slice());
        }
    }

    #[test]
    fn near_uniform_alpha_gives_near_uniform_histograms() {
        // Monte Carlo over 50 seeds: total-variation distance from uniform
        // stays below 5% when the concentration is extreme.
        for seed in 0..50u64 {
            let r = DataRecipe {
                num_clients: 3,
                classes: 4,
                input_dim: 2,
                samples_per_client: SamplesPerClient::Fixed(200),
                dirichlet_alpha: 1e6,
                bias_shift_scale: 0.0,
                noise_scale: 1.0,
                seed,
            };
            let clients = generate_federation(&r).unwrap();
            for c in &clients {
                let counts = class_counts(c, 4).unwrap();
                let tv: f64 = counts
                    .iter()
                    .map(|&n| (n as f64 / 200.0 - 0.25).abs())
                    .sum::<f64>()
                    / 2.0;
                assert!(tv < 0.05, "seed {seed}: tv {tv}");
            }
        }
    }

    #[test]
    fn uniform_request_with_too_few_samples_is_rejected() {
        let mut r = recipe();
        r.dirichlet_alpha = 1e6;
        r.samples_per_client = SamplesPerClient::Fixed(3); // < 4 classes
        assert!(matches!(generate_federation(&r), Err(Error::Recipe(_))));
    }

    #[test]
    fn single_client_holds_everything() {
        let mut r = recipe();
        r.num_clients = 1;
        let clients = generate_federation(&r).unwrap();
        assert_eq!(clients.len(), 1);
        assert_eq!(clients[0].n_k(), 40);
    }

    #[test]
    fn eval_batch_is_balanced_and_unshifted() {
        let r = recipe();
        let eval = make_eval_batch(&r).unwrap();
        assert_eq!(eval.len(), 400);
        let ys = match &eval.labels {
            Labels::Classes(v) => v.clone(),
            _ => unreachable!(),
        };
        let mut counts = [0usize; 4];
        for y in ys {
            counts[y] += 1;
        }
        assert_eq!(counts, [100; 4]);
        // independent of the shift scale entirely
        let mut r2 = recipe();
        r2.bias_shift_scale = 500.0;
        let eval2 = make_eval_batch(&r2).unwrap();
        assert_eq!(eval.features.as_slice(), eval2.features.as_slice());
    }

    #[test]
    fn class_means_have_zero_component_mean() {
        let means = class_means(&recipe());
        for m in means {
            let avg = m.iter().sum::<f64>() / m.len() as f64;
            assert!(avg.abs() < 1e-12);
        }
    }

    #[test]
    fn largest_remainder_is_exact() {
        let counts = largest_remainder_counts(&[0.5, 0.3, 0.2], 7);
        assert_eq!(counts.iter().sum::<usize>(), 7);
        assert_eq!(counts, alloc::vec![4, 2, 1]);
        // ties go to the lower index
        let counts = largest_remainder_counts(&[0.25, 0.25, 0.25, 0.25], 5);
        assert_eq!(counts, alloc::vec![2, 1, 1, 1]);
    }

    #[test]
    fn uniform_clients_hit_the_metric_endpoints() {
        let clients = alloc::vec![
            client_from_counts(0, &[5, 5, 5, 5]),
            client_from_counts(1, &[8, 8, 8, 8]),
        ];
        let report = heterogeneity_report(&clients, 4).unwrap();
        for stats in &report.per_client {
            assert_relative_eq!(stats.normalized_entropy, 1.0, epsilon = 1e-9);
            assert_relative_eq!(stats.gini, 0.0, epsilon = 1e-12);
            assert!(stats.kl_divergence.abs() < 1e-9);
            assert_eq!(stats.label_diversity, 4);
            assert_relative_eq!(stats.dominant_class_fraction, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_class_client_hits_the_other_endpoints() {
        let clients = alloc::vec![client_from_counts(0, &[7, 0, 0, 0])];
        let report = heterogeneity_report(&clients, 4).unwrap();
        let s = &report.per_client[0];
        assert_relative_eq!(s.normalized_entropy, 0.0, epsilon = 1e-12);
        assert_eq!(s.label_diversity, 1);
        assert_relative_eq!(s.dominant_class_fraction, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.gini, 0.75, epsilon = 1e-12); // (C−1)/C with C=4
    }

    #[test]
    fn three_one_split_matches_hand_computation() {
        let clients = alloc::vec![client_from_counts(0, &[3, 1])];
        let report = heterogeneity_report(&clients, 2).unwrap();
        let s = &report.per_client[0];
        // H = −(0.75·ln 0.75 + 0.25·ln 0.25)/ln 2
        assert_relative_eq!(
            s.normalized_entropy,
            0.81127812445913286391,
            epsilon = 1e-10
        );
        assert_relative_eq!(s.dominant_class_fraction, 0.75, epsilon = 1e-12);
        assert_relative_eq!(s.gini, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn kl_ordering_tracks_concentration() {
        // Lower α → more skew → larger mean KL from the pooled distribution.
        let mut wins = 0;
        for seed in 0..10u64 {
            let mut lo = recipe();
            lo.dirichlet_alpha = 0.1;
            lo.seed = seed;
            lo.num_clients = 20;
            let mut hi = lo.clone();
            hi.dirichlet_alpha = 10.0;
            let kl = |r: &DataRecipe| {
                heterogeneity_report(&generate_federation(r).unwrap(), r.classes)
                    .unwrap()
                    .kl_divergence
                    .mean
            };
            if kl(&lo) > kl(&hi) {
                wins += 1;
            }
        }
        assert!(wins >= 9, "KL ordering held in only {wins}/10 seeds");
    }

    #[test]
    fn aggregate_std_is_population_std() {
        let clients = alloc::vec![
            client_from_counts(0, &[4, 0]),
            client_from_counts(1, &[0, 4]),
            client_from_counts(2, &[2, 2]),
        ];
        let report = heterogeneity_report(&clients, 2).unwrap();
        // entropies are 0, 0, 1 → mean 1/3, population var = 2/9
        assert_relative_eq!(report.normalized_entropy.mean, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(
            report.normalized_entropy.std,
            (2.0f64 / 9.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn report_rejects_bad_inputs() {
        assert!(heterogeneity_report(&[], 4).is_err());
        let clients = alloc::vec![client_from_counts(0, &[1, 1])];
        assert!(heterogeneity_report(&clients, 0).is_err());
    }
}
