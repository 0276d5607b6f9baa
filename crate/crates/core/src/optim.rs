//! Client-side update rules and server-side aggregation.
//!
//! Clients run either plain SGD ([`sgd_step`]) or the projected rule
//! ([`zmg_sgd_step`]): project the gradient to zero mean per weight column,
//! fold it into a momentum buffer, decay the weights multiplicatively, then
//! step. The decay is *decoupled* — it scales the weights directly instead of
//! being added to the gradient, so it is never distorted by the projection or
//! the momentum state.
//!
//! The server aggregates returned models as a sample-count-weighted average
//! ([`weighted_average`]); the adaptive variant treats the difference between
//! the old global model and that average as a pseudo-gradient and feeds it to
//! an Adam-style step ([`adam_server_step`]).
//!
//! A subtlety worth naming: with zero-initialized buffers the projected rule
//! makes every weight-matrix update zero-sum per column, so the per-column
//! sums of the weights are conserved (exactly, up to rounding) whenever decay
//! is off. Models that start at zero column sums keep them forever — which is
//! what makes the rule immune to constant-shift disturbances in the data.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::param::ParamSet;
use crate::zmg::apply_zmg_in_place;

/// Where the zero-mean projection sits relative to momentum accumulation.
///
/// The two orderings are mathematically identical when the buffer starts at
/// zero (the projection is linear, so projecting each increment or the whole
/// accumulated sum gives the same vector); both are kept so the equivalence
/// stays testable and the choice stays explicit in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentumMode {
    /// Project the gradient, then accumulate it into the buffer (default).
    #[default]
    ProjectThenAccumulate,
    /// Accumulate the raw gradient, project the buffer when stepping.
    AccumulateThenProject,
}

/// Per-client optimizer state. Round-local: a client re-creates it from zero
/// every time it receives the global model, and it is never transmitted.
#[derive(Debug, Clone)]
pub struct ClientOptState {
    /// Momentum accumulator, same layout as the model parameters.
    pub momentum_buffer: ParamSet,
    /// Number of optimizer steps taken this round.
    pub step_count: usize,
}

impl ClientOptState {
    /// Fresh zeroed state shaped like `params`.
    pub fn fresh(params: &ParamSet) -> Self {
        ClientOptState {
            momentum_buffer: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// Server-side Adam accumulator.
#[derive(Debug, Clone)]
pub struct ServerAdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl ServerAdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config(format!(
                "adam betas must lie in [0,1): got beta1={beta1}, beta2={beta2}"
            )));
        }
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("adam epsilon must be > 0: {epsilon}")));
        }
        Ok(ServerAdamState {
            first_moment: alloc::vec![0.0; dim],
            second_moment: alloc::vec![0.0; dim],
            beta1,
            beta2,
            epsilon,
        })
    }
}

/// Normalized aggregation weights over a cohort, sorted by client id.
#[derive(Debug, Clone)]
pub struct AggregationWeights {
    weights: Vec<(usize, f64)>,
}

impl AggregationWeights {
    /// Builds weights proportional to sample counts. Entries are sorted by
    /// client id so aggregation order never depends on scheduling.
    pub fn from_counts(counts: &[(usize, usize)]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Dimension("empty cohort".into()));
        }
        if let Some(&(id, _)) = counts.iter().find(|&&(_, n)| n == 0) {
            return Err(Error::Config(format!("client {id} has zero samples")));
        }
        let mut sorted: Vec<(usize, usize)> = counts.to_vec();
        sorted.sort_unstable_by_key(|&(id, _)| id);
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Config(format!(
                    "duplicate client id {} in cohort",
                    pair[0].0
                )));
            }
        }
        let total: usize = sorted.iter().map(|&(_, n)| n).sum();
        let weights = sorted
            .into_iter()
            .map(|(id, n)| (id, n as f64 / total as f64))
            .collect();
        Ok(AggregationWeights { weights })
    }

    /// `(client_id, p_k)` pairs in ascending client id order; the `p_k` sum
    /// to 1 up to rounding.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_shapes(w: &ParamSet, g: &ParamSet, op: &str) -> Result<()> {
    if !w.same_layout(g) {
        return Err(Error::Layout(format!(
            "{op}: parameter and gradient layouts differ"
        )));
    }
    Ok(())
}

/// Plain SGD: `w' = w − η·g`.
pub fn sgd_step(w: &ParamSet, g: &ParamSet, eta: f64) -> Result<ParamSet> {
    if eta <= 0.0 {
        return Err(Error::Config(format!("sgd_step: eta must be > 0, got {eta}")));
    }
    check_shapes(w, g, "sgd_step")?;
    g.validate_finite("sgd_step gradient")?;
    let mut out = w.clone();
    for (wv, gv) in out.values_mut().iter_mut().zip(g.values()) {
        *wv -= eta * gv;
    }
    Ok(out)
}

/// Projected SGD with momentum and decoupled weight decay:
///
/// ```text
/// ĝ  = zmg(g)                 (column-wise on matrices, biases untouched)
/// b' = m·b + ĝ
/// w' = w·(1 − λη) − η·b'
/// ```
///
/// With `m = 0` this is exactly the plain projected rule — decay the weights,
/// then step along the projected gradient.
pub fn zmg_sgd_step(
    w: &ParamSet,
    g: &ParamSet,
    state: &ClientOptState,
    eta: f64,
    lambda: f64,
    m: f64,
) -> Result<(ParamSet, ClientOptState)> {
    zmg_sgd_step_with_mode(w, g, state, eta, lambda, m, MomentumMode::default())
}

/// [`zmg_sgd_step`] with an explicit momentum/projection ordering.
pub fn zmg_sgd_step_with_mode(
    w: &ParamSet,
    g: &ParamSet,
    state: &ClientOptState,
    eta: f64,
    lambda: f64,
    m: f64,
    mode: MomentumMode,
) -> Result<(ParamSet, ClientOptState)> {
    if eta <= 0.0 {
        return Err(Error::Config(format!(
            "zmg_sgd_step: eta must be > 0, got {eta}"
        )));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!(
            "zmg_sgd_step: lambda must be >= 0, got {lambda}"
        )));
    }
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Config(format!(
            "zmg_sgd_step: momentum must lie in [0,1), got {m}"
        )));
    }
    check_shapes(w, g, "zmg_sgd_step")?;
    check_shapes(w, &state.momentum_buffer, "zmg_sgd_step buffer")?;
    g.validate_finite("zmg_sgd_step gradient")?;

    let mut buffer = state.momentum_buffer.clone();
    let step_direction = match mode {
        MomentumMode::ProjectThenAccumulate => {
            let mut ghat = g.clone();
            apply_zmg_in_place(&mut ghat);
            for (b, gh) in buffer.values_mut().iter_mut().zip(ghat.values()) {
                *b = m * *b + gh;
            }
            buffer.clone()
        }
        MomentumMode::AccumulateThenProject => {
            for (b, gv) in buffer.values_mut().iter_mut().zip(g.values()) {
                *b = m * *b + gv;
            }
            let mut projected = buffer.clone();
            apply_zmg_in_place(&mut projected);
            projected
        }
    };

    let decay = 1.0 - lambda * eta;
    let mut out = w.clone();
    for (wv, dv) in out.values_mut().iter_mut().zip(step_direction.values()) {
        *wv = *wv * decay - eta * dv;
    }
    Ok((
        out,
        ClientOptState {
            momentum_buffer: buffer,
            step_count: state.step_count + 1,
        },
    ))
}

/// Sample-count-weighted average of client models: `Σ p_k·w_k`.
///
/// `models` must be aligned with `weights.entries()` (ascending client id);
/// the engine guarantees that ordering, which is what makes aggregation
/// independent of which worker finished first.
pub fn weighted_average(models: &[ParamSet], weights: &AggregationWeights) -> Result<ParamSet> {
    if models.is_empty() {
        return Err(Error::Dimension("weighted_average: empty cohort".into()));
    }
    if models.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "weighted_average: {} models vs {} weights",
            models.len(),
            weights.len()
        )));
    }
    for m in &models[1..] {
        if !m.same_layout(&models[0]) {
            return Err(Error::Layout(
                "weighted_average: mismatched model layouts".into(),
            ));
        }
    }
    let mut out = models[0].zeros_like();
    for (model, &(_, p)) in models.iter().zip(weights.entries()) {
        for (o, v) in out.values_mut().iter_mut().zip(model.values()) {
            *o += p * v;
        }
    }
    Ok(out)
}

/// Adam-style server step on the pseudo-gradient
/// `Δ = w_global − weighted_average(client models)`:
///
/// ```text
/// m' = β1·m + (1−β1)·Δ
/// v' = β2·v + (1−β2)·Δ²
/// w' = w_global − η_s · m' / (√v' + ε)
/// ```
///
/// No bias correction is applied — the moments warm up from zero, which for a
/// server optimizer just damps the first few rounds.
pub fn adam_server_step(
    w_global: &ParamSet,
    pseudo_grad: &ParamSet,
    state: &ServerAdamState,
    eta_s: f64,
) -> Result<(ParamSet, ServerAdamState)> {
    if eta_s <= 0.0 {
        return Err(Error::Config(format!(
            "adam_server_step: eta_s must be > 0, got {eta_s}"
        )));
    }
    check_shapes(w_global, pseudo_grad, "adam_server_step")?;
    if state.first_moment.len() != w_global.dim() {
        return Err(Error::Layout(format!(
            "adam_server_step: state dim {} vs model dim {}",
            state.first_moment.len(),
            w_global.dim()
        )));
    }
    pseudo_grad.validate_finite("adam_server_step pseudo-gradient")?;

    let mut next = state.clone();
    let mut out = w_global.clone();
    for i in 0..w_global.dim() {
        let d = pseudo_grad.values()[i];
        next.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * d;
        next.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * d * d;
        out.values_mut()[i] -=
            eta_s * next.first_moment[i] / (next.second_moment[i].sqrt() + state.epsilon);
    }
    Ok((out, next))
}
