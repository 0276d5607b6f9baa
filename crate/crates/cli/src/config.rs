//! Declarative experiment configuration.
//!
//! A config is a TOML file with typed sections — `[experiment]`, `[model]`,
//! `[data]`, `[optim]`, and optionally `[grid]` and `[theory]`. Parsing is
//! strict: unknown keys are errors, and range violations are reported with
//! their field path. One file describes a whole sweep; it is resolved into
//! *cells*, one per (algorithm × seed), each with a stable 64-bit FNV-1a
//! hash over its canonical rendering. The hash keys every CSV row the cell
//! produces and names the resolved single-cell config stored next to the
//! results, so any row in any output can be traced back to the exact
//! configuration that produced it.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use fedzmg_core::analysis::theory::TheoryConfig;
use fedzmg_core::data::{DataRecipe, SamplesPerClient};
use fedzmg_core::engine::{AdamParams, Algorithm, DataSource, ExperimentConfig, LrSchedule};
use fedzmg_core::model::{ModelKind, ModelSpec};
use fedzmg_core::optim::MomentumMode;
use fedzmg_core::param::fnv1a_bytes;

use crate::csvio::fmt_f64;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub data: DataSection,
    pub optim: OptimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheorySection>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Any of `fedavg`, `fedzmg`, `fedadam`; one run cell per (algorithm × seed).
    pub algorithms: Vec<String>,
    /// Training seeds; the five-run protocol 1..=5 by default. The data
    /// split seed lives in `[data]` and is independent, so every algorithm
    /// and seed sees identical splits.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub rounds: usize,
    pub cohort_size: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    #[serde(default = "one")]
    pub eval_every: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `linear`, `logistic`, or `mlp`.
    pub kind: String,
    pub input_dim: usize,
    #[serde(default)]
    pub classes: usize,
    #[serde(default)]
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SamplesSpec {
    Fixed(usize),
    Range(SampleRange),
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRange {
    pub lo: usize,
    pub hi: usize,
}

impl SamplesSpec {
    fn to_core(self) -> SamplesPerClient {
        match self {
            SamplesSpec::Fixed(n) => SamplesPerClient::Fixed(n),
            SamplesSpec::Range(SampleRange { lo, hi }) => SamplesPerClient::Range { lo, hi },
        }
    }

    fn bounds(self) -> (usize, usize) {
        match self {
            SamplesSpec::Fixed(n) => (n, n),
            SamplesSpec::Range(SampleRange { lo, hi }) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub num_clients: usize,
    pub classes: usize,
    pub input_dim: usize,
    /// Either a fixed count (`samples_per_client = 40`) or a uniform range
    /// (`samples_per_client = { lo = 10, hi = 30 }`).
    pub samples_per_client: SamplesSpec,
    pub dirichlet_alpha: f64,
    #[serde(default)]
    pub bias_shift_scale: f64,
    #[serde(default = "one_f64")]
    pub noise_scale: f64,
    pub seed: u64,
}

fn default_momentum_mode() -> String {
    "project-then-accumulate".into()
}

fn default_lr_schedule() -> String {
    "constant".into()
}

fn default_adam_beta1() -> f64 {
    0.9
}

fn default_adam_beta2() -> f64 {
    0.99
}

fn default_adam_epsilon() -> f64 {
    0.001
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OptimSection {
    pub client_lr: f64,
    /// Must stay 1.0 for `fedavg`/`fedzmg` (their server is a plain average).
    #[serde(default = "one_f64")]
    pub server_lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// `project-then-accumulate` (default) or `accumulate-then-project`.
    #[serde(default = "default_momentum_mode")]
    pub momentum_mode: String,
    /// `constant` (default) or `inverse` (requires `lr_beta` and `lr_gamma`;
    /// client step t uses `lr_beta / (t + lr_gamma)`).
    #[serde(default = "default_lr_schedule")]
    pub lr_schedule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_gamma: Option<f64>,
    #[serde(default = "default_adam_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_adam_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_epsilon")]
    pub adam_epsilon: f64,
}

fn default_grid_algorithm() -> String {
    "fedadam".into()
}

fn grid_rounds() -> usize {
    50
}

fn grid_window() -> usize {
    10
}

fn grid_cohort() -> usize {
    10
}

fn grid_epochs() -> usize {
    4
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Algorithm to sweep. Defaults to `fedadam`, the one whose server
    /// learning-rate axis is live; for `fedavg`/`fedzmg`, set
    /// `server_lrs = [1.0]`.
    #[serde(default = "default_grid_algorithm")]
    pub algorithm: String,
    /// Default: 9 points log-spaced over 10⁻³..10¹ inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_lrs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_lrs: Option<Vec<f64>>,
    #[serde(default = "grid_rounds")]
    pub rounds: usize,
    /// Cells are ranked by mean validation accuracy over the final
    /// `selection_window` rounds.
    #[serde(default = "grid_window")]
    pub selection_window: usize,
    #[serde(default = "grid_cohort")]
    pub cohort_size: usize,
    #[serde(default = "grid_epochs")]
    pub local_epochs: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            algorithm: default_grid_algorithm(),
            client_lrs: None,
            server_lrs: None,
            rounds: grid_rounds(),
            selection_window: grid_window(),
            cohort_size: grid_cohort(),
            local_epochs: grid_epochs(),
            seed: 1,
        }
    }
}

/// Nine points log-uniform over 10⁻³..10¹, endpoints included.
pub fn default_lr_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

fn t_clients() -> usize {
    10
}

fn t_dim() -> usize {
    16
}

fn t_samples() -> usize {
    64
}

fn t_batch() -> usize {
    8
}

fn t_sync() -> usize {
    4
}

fn t_het() -> f64 {
    0.5
}

fn t_shift() -> f64 {
    1.0
}

fn t_noise() -> f64 {
    0.5
}

fn t_steps() -> usize {
    10_000
}

fn t_warmup() -> usize {
    200
}

fn t_seed() -> u64 {
    42
}

fn lemma_dim() -> usize {
    8
}

fn lemma_trials() -> usize {
    100_000
}

fn lemma_sigma_sq() -> f64 {
    2.5
}

fn lemma_matrices() -> usize {
    10
}

fn lemma_seed() -> u64 {
    123
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default = "t_clients")]
    pub num_clients: usize,
    #[serde(default = "t_dim")]
    pub dim: usize,
    #[serde(default = "t_samples")]
    pub samples_per_client: usize,
    #[serde(default = "t_batch")]
    pub batch_size: usize,
    #[serde(default = "t_sync")]
    pub sync_every: usize,
    #[serde(default = "t_het")]
    pub heterogeneity: f64,
    #[serde(default = "t_shift")]
    pub bias_shift: f64,
    #[serde(default = "t_noise")]
    pub label_noise: f64,
    #[serde(default = "t_steps")]
    pub total_steps: usize,
    #[serde(default = "t_warmup")]
    pub warmup_draws: usize,
    #[serde(default = "t_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Variance-identity check: dimension of the random covariances.
    #[serde(default = "lemma_dim")]
    pub lemma_dim: usize,
    /// Monte Carlo draws per covariance.
    #[serde(default = "lemma_trials")]
    pub lemma_trials: usize,
    /// σ² of the isotropic analytic case.
    #[serde(default = "lemma_sigma_sq")]
    pub lemma_sigma_sq: f64,
    /// Number of random PSD covariances.
    #[serde(default = "lemma_matrices")]
    pub lemma_matrices: usize,
    #[serde(default = "lemma_seed")]
    pub lemma_seed: u64,
}

impl Default for TheorySection {
    fn default() -> Self {
        toml::from_str("").expect("empty theory section has full defaults")
    }
}

impl TheorySection {
    pub fn to_core(&self) -> TheoryConfig {
        TheoryConfig {
            num_clients: self.num_clients,
            dim: self.dim,
            samples_per_client: self.samples_per_client,
            batch_size: self.batch_size,
            sync_every: self.sync_every,
            heterogeneity: self.heterogeneity,
            bias_shift: self.bias_shift,
            label_noise: self.label_noise,
            total_steps: self.total_steps,
            warmup_draws: self.warmup_draws,
            seed: self.seed,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    let cfg: FileConfig = toml::from_str(text)?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn parse_algorithm(name: &str, field: &str) -> Result<Algorithm> {
    match name {
        "fedavg" => Ok(Algorithm::FedAvg),
        "fedzmg" => Ok(Algorithm::FedZmg),
        "fedadam" => Ok(Algorithm::FedAdam),
        other => bail!("{field}: unknown algorithm {other:?} (expected fedavg, fedzmg, or fedadam)"),
    }
}

fn parse_momentum_mode(name: &str) -> Result<MomentumMode> {
    match name {
        "project-then-accumulate" => Ok(MomentumMode::ProjectThenAccumulate),
        "accumulate-then-project" => Ok(MomentumMode::AccumulateThenProject),
        other => bail!(
            "optim.momentum_mode: unknown mode {other:?} \
             (expected project-then-accumulate or accumulate-then-project)"
        ),
    }
}

fn build_model_spec(model: &ModelSection, data: &DataSection) -> Result<ModelSpec> {
    let kind = match model.kind.as_str() {
        "linear" => {
            if model.classes != 0 {
                bail!("model.classes: must be omitted for kind = \"linear\"");
            }
            ModelKind::LinearRegression
        }
        "logistic" => {
            if model.classes < 2 {
                bail!("model.classes: logistic model needs ≥ 2 classes, got {}", model.classes);
            }
            ModelKind::LogisticRegression {
                classes: model.classes,
            }
        }
        "mlp" => {
            if model.classes < 2 {
                bail!("model.classes: mlp model needs ≥ 2 classes, got {}", model.classes);
            }
            if model.hidden == 0 {
                bail!("model.hidden: mlp model needs a hidden width ≥ 1");
            }
            ModelKind::Mlp {
                hidden: model.hidden,
                classes: model.classes,
            }
        }
        other => bail!("model.kind: unknown kind {other:?} (expected linear, logistic, or mlp)"),
    };
    if model.kind != "mlp" && model.hidden != 0 {
        bail!("model.hidden: only meaningful for kind = \"mlp\"");
    }
    if model.input_dim != data.input_dim {
        bail!(
            "model.input_dim ({}) must equal data.input_dim ({})",
            model.input_dim,
            data.input_dim
        );
    }
    if model.kind != "linear" && model.classes != data.classes {
        bail!(
            "model.classes ({}) must equal data.classes ({})",
            model.classes,
            data.classes
        );
    }
    Ok(ModelSpec {
        kind,
        input_dim: model.input_dim,
    })
}

fn validate(cfg: &FileConfig) -> Result<()> {
    let e = &cfg.experiment;
    if e.algorithms.is_empty() {
        bail!("experiment.algorithms: need at least one algorithm");
    }
    for a in &e.algorithms {
        parse_algorithm(a, "experiment.algorithms")?;
    }
    let mut sorted = e.algorithms.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != e.algorithms.len() {
        bail!("experiment.algorithms: duplicate entries");
    }
    if e.seeds.is_empty() {
        bail!("experiment.seeds: need at least one seed");
    }
    let mut seeds = e.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.len() != e.seeds.len() {
        bail!("experiment.seeds: duplicate entries");
    }
    if e.rounds == 0 {
        bail!("experiment.rounds: must be ≥ 1");
    }
    if e.cohort_size == 0 {
        bail!("experiment.cohort_size: must be ≥ 1");
    }
    if e.cohort_size > cfg.data.num_clients {
        bail!(
            "experiment.cohort_size ({}) must not exceed data.num_clients ({})",
            e.cohort_size,
            cfg.data.num_clients
        );
    }
    if e.local_epochs == 0 {
        bail!("experiment.local_epochs: must be ≥ 1");
    }
    if e.batch_size == 0 {
        bail!("experiment.batch_size: must be ≥ 1");
    }
    if e.eval_every == 0 {
        bail!("experiment.eval_every: must be ≥ 1");
    }

    let d = &cfg.data;
    if d.num_clients == 0 {
        bail!("data.num_clients: must be ≥ 1");
    }
    if d.classes == 0 {
        bail!("data.classes: must be ≥ 1");
    }
    if d.input_dim == 0 {
        bail!("data.input_dim: must be ≥ 1");
    }
    let (lo, hi) = d.samples_per_client.bounds();
    if lo == 0 {
        bail!("data.samples_per_client: must be ≥ 1");
    }
    if lo > hi {
        bail!("data.samples_per_client: lo ({lo}) must not exceed hi ({hi})");
    }
    if !(d.dirichlet_alpha.is_finite() && d.dirichlet_alpha > 0.0) {
        bail!(
            "data.dirichlet_alpha: must be finite and > 0, got {}",
            d.dirichlet_alpha
        );
    }
    if !(d.bias_shift_scale.is_finite() && d.bias_shift_scale >= 0.0) {
        bail!(
            "data.bias_shift_scale: must be finite and ≥ 0, got {}",
            d.bias_shift_scale
        );
    }
    if !(d.noise_scale.is_finite() && d.noise_scale >= 0.0) {
        bail!("data.noise_scale: must be finite and ≥ 0, got {}", d.noise_scale);
    }

    let o = &cfg.optim;
    if !(o.client_lr.is_finite() && o.client_lr >= 0.0) {
        bail!("optim.client_lr: must be finite and ≥ 0, got {}", o.client_lr);
    }
    if !(o.server_lr.is_finite() && o.server_lr > 0.0) {
        bail!("optim.server_lr: must be finite and > 0, got {}", o.server_lr);
    }
    for name in ["fedavg", "fedzmg"] {
        if e.algorithms.iter().any(|a| a == name) && o.server_lr != 1.0 {
            bail!(
                "optim.server_lr: must be 1.0 when experiment.algorithms includes {name:?} \
                 (its server is a plain weighted average), got {}",
                o.server_lr
            );
        }
    }
    if !(o.momentum.is_finite() && (0.0..1.0).contains(&o.momentum)) {
        bail!("optim.momentum: must lie in [0, 1), got {}", o.momentum);
    }
    if !(o.weight_decay.is_finite() && o.weight_decay >= 0.0) {
        bail!("optim.weight_decay: must be finite and ≥ 0, got {}", o.weight_decay);
    }
    parse_momentum_mode(&o.momentum_mode)?;
    match o.lr_schedule.as_str() {
        "constant" => {
            if o.lr_beta.is_some() || o.lr_gamma.is_some() {
                bail!("optim.lr_beta/lr_gamma: only meaningful with lr_schedule = \"inverse\"");
            }
        }
        "inverse" => {
            let beta = o
                .lr_beta
                .ok_or_else(|| anyhow::anyhow!("optim.lr_beta: required for lr_schedule = \"inverse\""))?;
            let gamma = o
                .lr_gamma
                .ok_or_else(|| anyhow::anyhow!("optim.lr_gamma: required for lr_schedule = \"inverse\""))?;
            if !(beta.is_finite() && beta > 0.0) {
                bail!("optim.lr_beta: must be finite and > 0, got {beta}");
            }
            if !(gamma.is_finite() && gamma > 0.0) {
                bail!("optim.lr_gamma: must be finite and > 0, got {gamma}");
            }
        }
        other => bail!("optim.lr_schedule: unknown schedule {other:?} (expected constant or inverse)"),
    }
    for (name, v) in [("optim.adam_beta1", o.adam_beta1), ("optim.adam_beta2", o.adam_beta2)] {
        if !(v.is_finite() && (0.0..1.0).contains(&v)) {
            bail!("{name}: must lie in [0, 1), got {v}");
        }
    }
    if !(o.adam_epsilon.is_finite() && o.adam_epsilon > 0.0) {
        bail!("optim.adam_epsilon: must be finite and > 0, got {}", o.adam_epsilon);
    }

    build_model_spec(&cfg.model, &cfg.data)?;

    if let Some(g) = &cfg.grid {
        parse_algorithm(&g.algorithm, "grid.algorithm")?;
        for (name, lrs) in [("grid.client_lrs", &g.client_lrs), ("grid.server_lrs", &g.server_lrs)] {
            if let Some(lrs) = lrs {
                if lrs.is_empty() {
                    bail!("{name}: must not be empty");
                }
                if let Some(bad) = lrs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    bail!("{name}: learning rates must be finite and > 0, got {bad}");
                }
            }
        }
        if g.rounds == 0 {
            bail!("grid.rounds: must be ≥ 1");
        }
        if g.selection_window == 0 || g.selection_window > g.rounds {
            bail!(
                "grid.selection_window ({}) must lie in 1..=grid.rounds ({})",
                g.selection_window,
                g.rounds
            );
        }
        if g.cohort_size == 0 || g.cohort_size > cfg.data.num_clients {
            bail!(
                "grid.cohort_size ({}) must lie in 1..=data.num_clients ({})",
                g.cohort_size,
                cfg.data.num_clients
            );
        }
        if g.local_epochs == 0 {
            bail!("grid.local_epochs: must be ≥ 1");
        }
    }
    Ok(())
}

pub(crate) fn build_recipe(d: &DataSection) -> DataRecipe {
    DataRecipe {
        num_clients: d.num_clients,
        classes: d.classes,
        input_dim: d.input_dim,
        samples_per_client: d.samples_per_client.to_core(),
        dirichlet_alpha: d.dirichlet_alpha,
        bias_shift_scale: d.bias_shift_scale,
        noise_scale: d.noise_scale,
        seed: d.seed,
    }
}

fn build_lr_schedule(o: &OptimSection) -> LrSchedule {
    match o.lr_schedule.as_str() {
        "inverse" => LrSchedule::Inverse {
            beta: o.lr_beta.expect("validated"),
            gamma: o.lr_gamma.expect("validated"),
        },
        _ => LrSchedule::Constant,
    }
}

/// One fully-resolved (algorithm × seed) execution unit.
#[derive(Debug, Clone)]
pub struct RunCell {
    pub algorithm: String,
    pub seed: u64,
    /// 16 hex digits of FNV-1a over the canonical cell rendering.
    pub config_hash: String,
    pub experiment: ExperimentConfig,
    /// The resolved single-cell config as a TOML document; stored as
    /// `configs/<hash>.toml` so every hash in a manifest resolves back to a
    /// runnable config.
    pub cell_toml: String,
}

/// Canonical key=value rendering of a cell; the hash input. Field order is
/// fixed, floats use the 17-significant-digit format, so the hash is stable
/// across runs, platforms, and field reordering in the source file.
fn canonical_cell_text(cfg: &FileConfig, algorithm: &str, seed: u64) -> String {
    let e = &cfg.experiment;
    let m = &cfg.model;
    let d = &cfg.data;
    let o = &cfg.optim;
    let (lo, hi) = d.samples_per_client.bounds();
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("algorithm", algorithm.into());
    kv("seed", seed.to_string());
    kv("rounds", e.rounds.to_string());
    kv("cohort_size", e.cohort_size.to_string());
    kv("local_epochs", e.local_epochs.to_string());
    kv("batch_size", e.batch_size.to_string());
    kv("eval_every", e.eval_every.to_string());
    kv("client_lr", fmt_f64(o.client_lr));
    kv("server_lr", fmt_f64(o.server_lr));
    kv("momentum", fmt_f64(o.momentum));
    kv("weight_decay", fmt_f64(o.weight_decay));
    kv("momentum_mode", o.momentum_mode.clone());
    kv("lr_schedule", o.lr_schedule.clone());
    kv("lr_beta", o.lr_beta.map(fmt_f64).unwrap_or_default());
    kv("lr_gamma", o.lr_gamma.map(fmt_f64).unwrap_or_default());
    kv("adam_beta1", fmt_f64(o.adam_beta1));
    kv("adam_beta2", fmt_f64(o.adam_beta2));
    kv("adam_epsilon", fmt_f64(o.adam_epsilon));
    kv("model.kind", m.kind.clone());
    kv("model.input_dim", m.input_dim.to_string());
    kv("model.classes", m.classes.to_string());
    kv("model.hidden", m.hidden.to_string());
    kv("data.num_clients", d.num_clients.to_string());
    kv("data.classes", d.classes.to_string());
    kv("data.input_dim", d.input_dim.to_string());
    kv("data.samples_lo", lo.to_string());
    kv("data.samples_hi", hi.to_string());
    kv("data.dirichlet_alpha", fmt_f64(d.dirichlet_alpha));
    kv("data.bias_shift_scale", fmt_f64(d.bias_shift_scale));
    kv("data.noise_scale", fmt_f64(d.noise_scale));
    kv("data.seed", d.seed.to_string());
    s
}

pub fn cell_hash(cfg: &FileConfig, algorithm: &str, seed: u64) -> String {
    format!(
        "{:016x}",
        fnv1a_bytes(canonical_cell_text(cfg, algorithm, seed).as_bytes())
    )
}

fn build_cell(cfg: &FileConfig, algorithm_name: &str, seed: u64) -> Result<RunCell> {
    let algorithm = parse_algorithm(algorithm_name, "experiment.algorithms")?;
    let model = build_model_spec(&cfg.model, &cfg.data)?;
    let o = &cfg.optim;
    let experiment = ExperimentConfig {
        algorithm,
        model,
        source: DataSource::Recipe(build_recipe(&cfg.data)),
        client_lr: o.client_lr,
        server_lr: o.server_lr,
        weight_decay: o.weight_decay,
        momentum: o.momentum,
        momentum_mode: match o.momentum_mode.as_str() {
            "accumulate-then-project" => MomentumMode::AccumulateThenProject,
            _ => MomentumMode::ProjectThenAccumulate,
        },
        local_epochs: cfg.experiment.local_epochs,
        cohort_size: cfg.experiment.cohort_size,
        rounds: cfg.experiment.rounds,
        batch_size: cfg.experiment.batch_size,
        eval_every: cfg.experiment.eval_every,
        seed,
        lr_schedule: build_lr_schedule(o),
        adam: AdamParams {
            beta1: o.adam_beta1,
            beta2: o.adam_beta2,
            epsilon: o.adam_epsilon,
        },
    };
    // the stored config narrows the sweep to this one cell and drops the
    // sweep-only sections
    let mut narrowed = cfg.clone();
    narrowed.experiment.algorithms = vec![algorithm_name.to_string()];
    narrowed.experiment.seeds = vec![seed];
    narrowed.grid = None;
    narrowed.theory = None;
    let cell_toml =
        toml::to_string_pretty(&narrowed).context("serializing resolved cell config")?;
    Ok(RunCell {
        algorithm: algorithm_name.to_string(),
        seed,
        config_hash: cell_hash(cfg, algorithm_name, seed),
        experiment,
        cell_toml,
    })
}

/// Expands a config into its (algorithm × seed) cells, algorithms in file
/// order, seeds in file order within each.
pub fn resolve_run_cells(cfg: &FileConfig) -> Result<Vec<RunCell>> {
    validate(cfg)?;
    let mut cells = Vec::with_capacity(cfg.experiment.algorithms.len() * cfg.experiment.seeds.len());
    for algorithm in &cfg.experiment.algorithms {
        for &seed in &cfg.experiment.seeds {
            cells.push(build_cell(cfg, algorithm, seed)?);
        }
    }
    Ok(cells)
}

/// A resolved grid search: row-major cells over client_lrs × server_lrs.
#[derive(Debug, Clone)]
pub struct GridPlan {
    pub algorithm: String,
    pub client_lrs: Vec<f64>,
    pub server_lrs: Vec<f64>,
    pub selection_window: usize,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub client_lr: f64,
    pub server_lr: f64,
    pub cell: RunCell,
}

/// Expands the `[grid]` section (or its defaults when absent) into one run
/// cell per (client_lr, server_lr) pair. Each cell reuses `[model]`, `[data]`
/// and batch settings from `[experiment]`, overrides the learning rates, and
/// runs on the grid's fixed cohort size, epoch count, and round budget.
pub fn resolve_grid(cfg: &FileConfig) -> Result<GridPlan> {
    validate(cfg)?;
    if cfg.model.kind == "linear" {
        bail!("model.kind: grid search ranks cells by validation accuracy and needs a classification model");
    }
    let g = cfg.grid.clone().unwrap_or_default();
    parse_algorithm(&g.algorithm, "grid.algorithm")?;
    let client_lrs = g.client_lrs.clone().unwrap_or_else(default_lr_grid);
    let server_lrs = g.server_lrs.clone().unwrap_or_else(default_lr_grid);

    let mut cells = Vec::with_capacity(client_lrs.len() * server_lrs.len());
    for &client_lr in &client_lrs {
        for &server_lr in &server_lrs {
            let mut narrowed = cfg.clone();
            narrowed.experiment.algorithms = vec![g.algorithm.clone()];
            narrowed.experiment.seeds = vec![g.seed];
            narrowed.experiment.rounds = g.rounds;
            narrowed.experiment.cohort_size = g.cohort_size;
            narrowed.experiment.local_epochs = g.local_epochs;
            narrowed.experiment.eval_every = 1;
            narrowed.optim.client_lr = client_lr;
            narrowed.optim.server_lr = server_lr;
            narrowed.grid = None;
            narrowed.theory = None;
            // cells with rates an algorithm cannot accept (a plain-average
            // server with server_lr ≠ 1) are still *cells*: the runner
            // records them as failed rather than rejecting the whole grid,
            // so skip validate() here and let execution classify them
            let cell = build_cell(&narrowed, &g.algorithm, g.seed)?;
            cells.push(GridCell {
                client_lr,
                server_lr,
                cell,
            });
        }
    }
    Ok(GridPlan {
        algorithm: g.algorithm,
        client_lrs,
        server_lrs,
        selection_window: g.selection_window,
        cells,
    })
}
