//! The federated round loop: broadcast, cohort sampling, local epochs,
//! aggregation.
//!
//! Rounds are strictly sequential; clients within a round are independent
//! jobs. Every random choice is drawn from a counter-keyed stream addressed
//! by `(seed, purpose, round, client)`, and aggregation always runs in
//! sorted-client order, so the final model is a pure function of the config:
//! callers may fan the per-client jobs out over any number of workers (or
//! none) and get bit-identical results.
//!
//! Communication per sampled client per round is exactly `d` values down
//! (the broadcast model) and `d` values up (the trained model) for every
//! algorithm — the projected update needs no auxiliary state on the wire,
//! and each [`LocalOutcome`] carries the actual counts so tests can hold
//! that line.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{generate_federation, make_eval_batch, ClientDataset, DataRecipe};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{self, Batch, Labels, ModelSpec};
use crate::optim::{
    adam_server_step, sgd_step, weighted_average, zmg_sgd_step_with_mode, AggregationWeights,
    ClientOptState, MomentumMode, ServerAdamState,
};
use crate::param::ParamSet;
use crate::rng::{purpose, Stream};

/// Which algorithm the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    FedAvg,
    FedZmg,
    FedAdam,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FedAvg => "fedavg",
            Algorithm::FedZmg => "fedzmg",
            Algorithm::FedAdam => "fedadam",
        }
    }
}

/// Client learning-rate schedule. `Inverse` decays as `β/(t+γ)` where `t`
/// counts a client's local steps cumulatively across rounds (as if it had
/// participated in every round, so the schedule is cohort-independent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    Inverse { beta: f64, gamma: f64 },
}

/// Server-side Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 0.001,
        }
    }
}

/// Where the federation comes from: generated on the fly from a recipe
/// (with a matching held-out eval batch), or injected directly.
#[derive(Debug, Clone)]
pub enum DataSource {
    Recipe(DataRecipe),
    Fixture {
        clients: Vec<ClientDataset>,
        eval: Option<Batch>,
    },
}

/// Everything a single run needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub model: ModelSpec,
    pub source: DataSource,
    pub client_lr: f64,
    /// Must be 1 for `fedavg`/`fedzmg` (plain weighted average); free for
    /// `fedadam`.
    pub server_lr: f64,
    /// Decoupled weight decay; used by `fedzmg` clients only.
    pub weight_decay: f64,
    /// Client momentum; used by `fedzmg` clients only.
    pub momentum: f64,
    pub momentum_mode: MomentumMode,
    /// Local epochs per round (E).
    pub local_epochs: usize,
    /// Sampled clients per round (C).
    pub cohort_size: usize,
    /// Total rounds (T).
    pub rounds: usize,
    pub batch_size: usize,
    /// Evaluate on the held-out batch when `round % eval_every == 0`.
    pub eval_every: usize,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub adam: AdamParams,
}

impl ExperimentConfig {
    fn validate(&self, num_clients: usize) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be ≥ 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be ≥ 1".into()));
        }
        if self.cohort_size == 0 || self.cohort_size > num_clients {
            return Err(Error::Config(format!(
                "cohort_size must satisfy 1 ≤ cohort_size ≤ num_clients ({} vs {num_clients})",
                self.cohort_size
            )));
        }
        if !self.client_lr.is_finite() || self.client_lr < 0.0 {
            return Err(Error::Config("client_lr must be finite and ≥ 0".into()));
        }
        if !self.server_lr.is_finite() || self.server_lr <= 0.0 {
            return Err(Error::Config("server_lr must be finite and > 0".into()));
        }
        if self.algorithm != Algorithm::FedAdam && self.server_lr != 1.0 {
            return Err(Error::Config(format!(
                "{} aggregates by plain weighted average; server_lr must be 1 (got {})",
                self.algorithm.name(),
                self.server_lr
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be finite and ≥ 0".into()));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if let LrSchedule::Inverse { beta, gamma } = self.lr_schedule {
            if !(beta > 0.0) || !(gamma > 0.0) || !beta.is_finite() || !gamma.is_finite() {
                return Err(Error::Config(
                    "inverse schedule needs positive finite beta and gamma".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One row of an experiment's history.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Present on evaluation rounds of classification runs; absent
    /// otherwise.
    pub val_accuracy: Option<f64>,
    /// Cohort-weighted mean training loss of the round.
    pub train_loss: f64,
    pub cohort: Vec<usize>,
    pub global_param_checksum: u64,
}

/// What one client sends back at the end of a round.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub client_id: usize,
    pub n_k: usize,
    pub params: ParamSet,
    pub mean_train_loss: f64,
    /// Values received in the broadcast (the global model).
    pub values_down: usize,
    /// Values transmitted back (the trained model).
    pub values_up: usize,
}

/// Training loss above this is treated as divergence.
pub const DIVERGENCE_LOSS_LIMIT: f64 = 1e6;

/// Uniform cohort sample without replacement, sorted ascending; a pure
/// function of `(seed, round)`.
pub fn sample_cohort(
    num_clients: usize,
    cohort_size: usize,
    round: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if cohort_size == 0 || cohort_size > num_clients {
        return Err(Error::Config(format!(
            "cohort_size {cohort_size} out of range for {num_clients} clients"
        )));
    }
    let mut stream = Stream::from_key(&[seed, purpose::COHORT, round as u64]);
    Ok(stream.sample_without_replacement(num_clients, cohort_size))
}

fn batch_of(client: &ClientDataset, idx: &[usize]) -> Batch {
    let d = client.features.cols();
    let mut rows = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        rows.extend_from_slice(client.features.row(i));
    }
    let labels = match &client.labels {
        Labels::Classes(ys) => Labels::Classes(idx.iter().map(|&i| ys[i]).collect()),
        Labels::Values(ys) => Labels::Values(idx.iter().map(|&i| ys[i]).collect()),
    };
    Batch {
        features: Matrix::from_vec(idx.len(), d, rows),
        labels,
    }
}

/// Runs one client's local training for one round: `E` epochs of mini-batch
/// passes, batch order reshuffled each epoch from the round's
/// `(seed, round, client)` stream. A zero learning rate leaves the
/// parameters untouched (the loss is still computed and guarded).
pub fn local_train(
    client: &ClientDataset,
    w_init: &ParamSet,
    cfg: &ExperimentConfig,
    round: usize,
) -> Result<LocalOutcome> {
    let n_k = client.n_k();
    let values_down = w_init.dim();
    let mut w = w_init.clone();
    let mut opt_state = ClientOptState::fresh(w_init);
    let mut shuffle_stream = Stream::from_key(&[
        cfg.seed,
        purpose::SHUFFLE,
        round as u64,
        client.client_id as u64,
    ]);
    let steps_per_epoch = n_k.div_ceil(cfg.batch_size);
    let mut loss_sum = 0.0;
    let mut step = 0usize;
    let mut indices: Vec<usize> = (0..n_k).collect();
    for epoch in 0..cfg.local_epochs {
        shuffle_stream.shuffle(&mut indices);
        for chunk in indices.chunks(cfg.batch_size) {
            let batch = batch_of(client, chunk);
            let (loss, grad) = model::loss_and_grad(&cfg.model, &w, &batch)?;
            if !loss.is_finite() || loss > DIVERGENCE_LOSS_LIMIT {
                return Err(Error::Divergence {
                    round,
                    client_id: client.client_id,
                    step,
                    loss,
                });
            }
            loss_sum += loss;
            let lr = match cfg.lr_schedule {
                LrSchedule::Constant => cfg.client_lr,
                LrSchedule::Inverse { beta, gamma } => {
                    let global_step =
                        (round * cfg.local_epochs + epoch) * steps_per_epoch + step % steps_per_epoch;
                    beta / (global_step as f64 + gamma)
                }
            };
            if lr > 0.0 {
                match cfg.algorithm {
                    Algorithm::FedZmg => {
                        let (w_next, state_next) = zmg_sgd_step_with_mode(
                            &w,
                            &grad,
                            &opt_state,
                            lr,
                            cfg.weight_decay,
                            cfg.momentum,
                            cfg.momentum_mode,
                        )?;
                        w = w_next;
                        opt_state = state_next;
                    }
                    Algorithm::FedAvg | Algorithm::FedAdam => {
                        w = sgd_step(&w, &grad, lr)?;
                    }
                }
            }
            step += 1;
        }
    }
    Ok(LocalOutcome {
        client_id: client.client_id,
        n_k,
        mean_train_loss: loss_sum / step as f64,
        values_up: w.dim(),
        values_down,
        params: w,
    })
}

/// Why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceInfo {
    pub round: usize,
    pub client_id: usize,
    pub step: usize,
    pub loss: f64,
}

/// A finished (or aborted) run: the per-round series, the last global
/// parameters, and the divergence report if training blew up (in which case
/// `records` holds the completed rounds before the failure).
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RoundRecord>,
    pub final_params: ParamSet,
    pub diverged: Option<DivergenceInfo>,
}

/// Live state of a round-by-round run. Exposes the per-client jobs so a
/// driver can execute them on parallel workers; `&Simulation` is all a job
/// needs, and `complete_round` re-sorts outcomes, so scheduling never
/// affects results.
pub struct Simulation {
    cfg: ExperimentConfig,
    clients: Vec<ClientDataset>,
    eval: Option<Batch>,
    global: ParamSet,
    adam: Option<ServerAdamState>,
    records: Vec<RoundRecord>,
}

impl Simulation {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let (clients, eval) = match &cfg.source {
            DataSource::Recipe(recipe) => {
                if recipe.input_dim != cfg.model.input_dim {
                    return Err(Error::Config(format!(
                        "recipe input_dim {} vs model input_dim {}",
                        recipe.input_dim, cfg.model.input_dim
                    )));
                }
                match cfg.model.classes() {
                    Some(classes) if classes == recipe.classes => {}
                    Some(classes) => {
                        return Err(Error::Config(format!(
                            "recipe has {} classes but the model expects {classes}",
                            recipe.classes
                        )))
                    }
                    None => {
                        return Err(Error::Config(
                            "generated federations are labeled by class; pick a classification \
                             model or inject a fixture"
                                .into(),
                        ))
                    }
                }
                let clients = generate_federation(recipe)?;
                let eval = Some(make_eval_batch(recipe)?);
                (clients, eval)
            }
            DataSource::Fixture { clients, eval } => (clients.clone(), eval.clone()),
        };
        if clients.is_empty() {
            return Err(Error::Config("no clients".into()));
        }
        cfg.validate(clients.len())?;
        for c in &clients {
            if c.features.cols() != cfg.model.input_dim {
                return Err(Error::Config(format!(
                    "client {} feature dim {} vs model input dim {}",
                    c.client_id,
                    c.features.cols(),
                    cfg.model.input_dim
                )));
            }
            if c.n_k() == 0 {
                return Err(Error::Config(format!("client {} is empty", c.client_id)));
            }
        }
        let global = cfg.model.init_params(cfg.seed);
        let adam = match cfg.algorithm {
            Algorithm::FedAdam => Some(ServerAdamState::new(
                global.dim(),
                cfg.adam.beta1,
                cfg.adam.beta2,
                cfg.adam.epsilon,
            )?),
            _ => None,
        };
        Ok(Simulation {
            cfg,
            clients,
            eval,
            global,
            adam,
            records: Vec::new(),
        })
    }

    /// The next round to run (also the number of completed rounds).
    pub fn next_round(&self) -> usize {
        self.records.len()
    }

    pub fn is_done(&self) -> bool {
        self.records.len() >= self.cfg.rounds
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn global_params(&self) -> &ParamSet {
        &self.global
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    /// The cohort for a round — pure, so drivers may call it ahead of time.
    pub fn cohort(&self, round: usize) -> Result<Vec<usize>> {
        sample_cohort(
            self.clients.len(),
            self.cfg.cohort_size,
            round,
            self.cfg.seed,
        )
    }

    /// One client's local work for `round`, against the current global
    /// model. Takes `&self` so cohort jobs can run concurrently.
    pub fn local_pass(&self, round: usize, client_id: usize) -> Result<LocalOutcome> {
        let client = self
            .clients
            .iter()
            .find(|c| c.client_id == client_id)
            .ok_or_else(|| Error::Config(format!("unknown client {client_id}")))?;
        local_train(client, &self.global, &self.cfg, round)
    }

    /// Aggregates a round's outcomes: sorts by client id, averages with
    /// weights proportional to local sample counts, applies the server rule,
    /// and evaluates if the round is an eval round.
    pub fn complete_round(
        &mut self,
        round: usize,
        mut outcomes: Vec<LocalOutcome>,
    ) -> Result<RoundRecord> {
        if round != self.next_round() {
            return Err(Error::Config(format!(
                "round {round} completed out of order (expected {})",
                self.next_round()
            )));
        }
        let expected = self.cohort(round)?;
        outcomes.sort_by_key(|o| o.client_id);
        let got: Vec<usize> = outcomes.iter().map(|o| o.client_id).collect();
        if got != expected {
            return Err(Error::Config(format!(
                "round {round} outcomes {got:?} do not match the sampled cohort {expected:?}"
            )));
        }
        let weights = AggregationWeights::from_counts(
            &outcomes
                .iter()
                .map(|o| (o.client_id, o.n_k))
                .collect::<Vec<_>>(),
        )?;
        let models: Vec<ParamSet> = outcomes.iter().map(|o| o.params.clone()).collect();
        let averaged = weighted_average(&models, &weights)?;
        self.global = match (&self.cfg.algorithm, self.adam.as_ref()) {
            (Algorithm::FedAdam, Some(state)) => {
                let mut pseudo = self.global.clone();
                for (p, a) in pseudo.values_mut().iter_mut().zip(averaged.values()) {
                    *p -= a;
                }
                let (next, state_next) =
                    adam_server_step(&self.global, &pseudo, state, self.cfg.server_lr)?;
                self.adam = Some(state_next);
                next
            }
            _ => averaged,
        };
        let train_loss = outcomes
            .iter()
            .zip(weights.entries())
            .map(|(o, &(_, p))| p * o.mean_train_loss)
            .sum();
        let val_accuracy = match (&self.eval, round.is_multiple_of(self.cfg.eval_every)) {
            (Some(eval), true) if self.cfg.model.classes().is_some() => {
                Some(model::accuracy(&self.cfg.model, &self.global, eval)?)
            }
            _ => None,
        };
        let record = RoundRecord {
            round,
            val_accuracy,
            train_loss,
            cohort: expected,
            global_param_checksum: self.global.checksum(),
        };
        self.records.push(record.clone());
        Ok(record)
    }

    /// Runs one full round sequentially.
    pub fn step_round(&mut self) -> Result<RoundRecord> {
        let round = self.next_round();
        let cohort = self.cohort(round)?;
        let outcomes: Vec<LocalOutcome> = cohort
            .iter()
            .map(|&id| self.local_pass(round, id))
            .collect::<Result<_>>()?;
        self.complete_round(round, outcomes)
    }

    /// Consumes the simulation, yielding the series and final parameters.
    pub fn finish(self) -> (Vec<RoundRecord>, ParamSet) {
        (self.records, self.global)
    }
}

/// Runs a full experiment sequentially. Divergence is reported in the
/// output (with the partial series) rather than as an error; config and
/// shape problems are errors.
pub fn run_experiment(cfg: ExperimentConfig) -> Result<ExperimentOutput> {
    let mut sim = Simulation::new(cfg)?;
    let mut diverged = None;
    while !sim.is_done() {
        match sim.step_round() {
            Ok(_) => {}
            Err(Error::Divergence {
                round,
                client_id,
                step,
                loss,
            }) => {
                diverged = Some(DivergenceInfo {
                    round,
                    client_id,
                    step,
                    loss,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (records, final_params) = sim.finish();
    Ok(ExperimentOutput {
        records,
        final_params,
        diverged,
    })
}
