//! Small differentiable models with exact hand-derived gradients.
//!
//! Three model families cover the simulator's needs:
//!
//! - **linear regression** — a single weight vector, squared error
//!   `½(xᵀw − y)²`. Deliberately intercept-free: the whole parameter vector
//!   is one matrix column, so full-vector projection and the shape-aware
//!   dispatch coincide, which the convergence harness relies on.
//! - **logistic regression** — one weight matrix plus bias, softmax
//!   cross-entropy.
//! - **mlp** — one tanh hidden layer, then softmax cross-entropy. tanh keeps
//!   the loss smooth everywhere, so finite-difference checks converge
//!   cleanly.
//!
//! All losses are *means* over the batch, never sums, so learning rates are
//! batch-size invariant. Gradients come straight from the chain rule; the
//! finite-difference suite in the tests is the contract that they stay exact.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::optim::AggregationWeights;
use crate::param::{LayerKind, ParamSet};
use crate::rng::{purpose, Stream};

/// Which model family an experiment trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearRegression,
    LogisticRegression { classes: usize },
    Mlp { hidden: usize, classes: usize },
}

/// A model family plus its input dimension; fully determines the parameter
/// layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
}

impl ModelSpec {
    /// The parameter segments, in forward order.
    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        match self.kind {
            ModelKind::LinearRegression => vec![LayerKind::Matrix {
                in_dim: self.input_dim,
                out_dim: 1,
            }],
            ModelKind::LogisticRegression { classes } => vec![
                LayerKind::Matrix {
                    in_dim: self.input_dim,
                    out_dim: classes,
                },
                LayerKind::Bias { dim: classes },
            ],
            ModelKind::Mlp { hidden, classes } => vec![
                LayerKind::Matrix {
                    in_dim: self.input_dim,
                    out_dim: hidden,
                },
                LayerKind::Bias { dim: hidden },
                LayerKind::Matrix {
                    in_dim: hidden,
                    out_dim: classes,
                },
                LayerKind::Bias { dim: classes },
            ],
        }
    }

    /// Number of output classes, or `None` for regression.
    pub fn classes(&self) -> Option<usize> {
        match self.kind {
            ModelKind::LinearRegression => None,
            ModelKind::LogisticRegression { classes } => Some(classes),
            ModelKind::Mlp { classes, .. } => Some(classes),
        }
    }

    /// Total parameter count `d`.
    pub fn dim(&self) -> usize {
        self.layer_kinds().iter().map(|k| k.len()).sum()
    }

    /// Deterministic initialization: matrix entries uniform in
    /// `±1/√fan_in`, biases zero.
    pub fn init_params(&self, seed: u64) -> ParamSet {
        let kinds = self.layer_kinds();
        let mut params = ParamSet::zeros(&kinds);
        let mut stream = Stream::from_key(&[seed, purpose::INIT]);
        for i in 0..kinds.len() {
            if let LayerKind::Matrix { in_dim, .. } = kinds[i] {
                let bound = 1.0 / (in_dim as f64).sqrt();
                for v in params.segment_mut(i) {
                    *v = stream.uniform(-bound, bound);
                }
            }
        }
        params
    }

    fn validate_params(&self, w: &ParamSet) -> Result<()> {
        let expected = ModelSpec::dim(self);
        if w.dim() != expected {
            return Err(Error::Layout(format!(
                "model expects {expected} parameters, got {}",
                w.dim()
            )));
        }
        Ok(())
    }
}

/// Batch labels: class indices for classification, real targets for
/// regression.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A mini-batch: row-major feature matrix plus labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Labels,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.features.rows() == 0 {
            return Err(Error::Dimension("empty batch".into()));
        }
        if self.features.cols() != spec.input_dim {
            return Err(Error::Dimension(format!(
                "batch feature dim {} vs model input dim {}",
                self.features.cols(),
                spec.input_dim
            )));
        }
        if self.labels.len() != self.features.rows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                self.labels.len(),
                self.features.rows()
            )));
        }
        match (&self.labels, spec.classes()) {
            (Labels::Classes(ys), Some(classes)) => {
                if let Some(&bad) = ys.iter().find(|&&y| y >= classes) {
                    return Err(Error::Dimension(format!(
                        "label {bad} out of range for {classes} classes"
                    )));
                }
                Ok(())
            }
            (Labels::Values(_), None) => Ok(()),
            (Labels::Classes(_), None) => Err(Error::Dimension(
                "class labels passed to a regression model".into(),
            )),
            (Labels::Values(_), Some(_)) => Err(Error::Dimension(
                "real-valued labels passed to a classification model".into(),
            )),
        }
    }
}

/// Mean loss over the batch and its exact gradient.
pub fn loss_and_grad(spec: &ModelSpec, w: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)> {
    spec.validate_params(w)?;
    batch.validate(spec)?;
    match spec.kind {
        ModelKind::LinearRegression => linreg_loss_grad(spec, w, batch),
        ModelKind::LogisticRegression { classes } => softmax_loss_grad(spec, w, batch, classes),
        ModelKind::Mlp { hidden, classes } => mlp_loss_grad(spec, w, batch, hidden, classes),
    }
}

fn linreg_loss_grad(_spec: &ModelSpec, w: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)> {
    let ys = match &batch.labels {
        Labels::Values(v) => v,
        Labels::Classes(_) => unreachable!("validated"),
    };
    let n = batch.len() as f64;
    let wv = w.values();
    let mut grad = w.zeros_like();
    let mut loss = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let x = batch.features.row(i);
        let residual = linalg::dot(x, wv) - y;
        loss += 0.5 * residual * residual;
        let gv = grad.values_mut();
        for (g, &xj) in gv.iter_mut().zip(x) {
            *g += residual * xj / n;
        }
    }
    Ok((loss / n, grad))
}

/// Softmax probabilities for one row, written into `probs`. Logits are
/// max-shifted for stability.
/// −ln p with an underflow floor, so a confidently-wrong sample costs a
/// large finite amount instead of ∞. NaN probabilities (overflowed logits)
/// must stay NaN — `f64::max` would silently swallow them and hide a
/// diverging run behind a capped loss.
fn nll(p: f64) -> f64 {
    if p.is_nan() {
        f64::NAN
    } else {
        -p.max(1e-300).ln()
    }
}

fn softmax_row(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        total += *z;
    }
    for z in logits.iter_mut() {
        *z /= total;
    }
}

fn softmax_loss_grad(
    spec: &ModelSpec,
    w: &ParamSet,
    batch: &Batch,
    classes: usize,
) -> Result<(f64, ParamSet)> {
    let ys = match &batch.labels {
        Labels::Classes(v) => v,
        Labels::Values(_) => unreachable!("validated"),
    };
    let n = batch.len() as f64;
    let in_dim = spec.input_dim;
    let mut grad = w.zeros_like();
    let mut loss = 0.0;
    let mut probs = vec![0.0; classes];
    for (i, &y) in ys.iter().enumerate() {
        let x = batch.features.row(i);
        let weights = w.segment(0);
        let biases = w.segment(1);
        for (j, p) in probs.iter_mut().enumerate() {
            *p = linalg::dot(x, &weights[j * in_dim..(j + 1) * in_dim]) + biases[j];
        }
        softmax_row(&mut probs);
        loss += nll(probs[y]);
        for j in 0..classes {
            let err = (probs[j] - if j == y { 1.0 } else { 0.0 }) / n;
            let col = &mut grad.segment_mut(0)[j * in_dim..(j + 1) * in_dim];
            for (g, &xk) in col.iter_mut().zip(x) {
                *g += err * xk;
            }
            grad.segment_mut(1)[j] += err;
        }
    }
    Ok((loss / n, grad))
}

fn mlp_loss_grad(
    spec: &ModelSpec,
    w: &ParamSet,
    batch: &Batch,
    hidden: usize,
    classes: usize,
) -> Result<(f64, ParamSet)> {
    let ys = match &batch.labels {
        Labels::Classes(v) => v,
        Labels::Values(_) => unreachable!("validated"),
    };
    let n = batch.len() as f64;
    let in_dim = spec.input_dim;
    let mut grad = w.zeros_like();
    let mut loss = 0.0;
    let mut h = vec![0.0; hidden];
    let mut probs = vec![0.0; classes];
    for (i, &y) in ys.iter().enumerate() {
        let x = batch.features.row(i);
        // forward
        {
            let w1 = w.segment(0);
            let b1 = w.segment(1);
            for (k, hk) in h.iter_mut().enumerate() {
                *hk = (linalg::dot(x, &w1[k * in_dim..(k + 1) * in_dim]) + b1[k]).tanh();
            }
            let w2 = w.segment(2);
            let b2 = w.segment(3);
            for (j, p) in probs.iter_mut().enumerate() {
                *p = linalg::dot(&h, &w2[j * hidden..(j + 1) * hidden]) + b2[j];
            }
        }
        softmax_row(&mut probs);
        loss += nll(probs[y]);
        // backward
        let mut dh = vec![0.0; hidden];
        for j in 0..classes {
            let dz = (probs[j] - if j == y { 1.0 } else { 0.0 }) / n;
            {
                let col = &mut grad.segment_mut(2)[j * hidden..(j + 1) * hidden];
                for (g, &hk) in col.iter_mut().zip(&h) {
                    *g += dz * hk;
                }
            }
            grad.segment_mut(3)[j] += dz;
            let w2 = w.segment(2);
            for (k, d) in dh.iter_mut().enumerate() {
                *d += w2[j * hidden + k] * dz;
            }
        }
        for k in 0..hidden {
            let da = dh[k] * (1.0 - h[k] * h[k]); // tanh'
            {
                let col = &mut grad.segment_mut(0)[k * in_dim..(k + 1) * in_dim];
                for (g, &xj) in col.iter_mut().zip(x) {
                    *g += da * xj;
                }
            }
            grad.segment_mut(1)[k] += da;
        }
    }
    Ok((loss / n, grad))
}

/// Per-row class predictions (argmax logits, ties toward the lowest class
/// index), returned for reuse by accuracy and reporting.
fn predict_classes(spec: &ModelSpec, w: &ParamSet, batch: &Batch) -> Result<Vec<usize>> {
    let classes = spec
        .classes()
        .ok_or_else(|| Error::Config("accuracy is undefined for regression models".into()))?;
    spec.validate_params(w)?;
    batch.validate(spec)?;
    let in_dim = spec.input_dim;
    let mut out = Vec::with_capacity(batch.len());
    let mut logits = vec![0.0; classes];
    let mut h = vec![0.0; 0];
    if let ModelKind::Mlp { hidden, .. } = spec.kind {
        h = vec![0.0; hidden];
    }
    for i in 0..batch.len() {
        let x = batch.features.row(i);
        match spec.kind {
            ModelKind::LogisticRegression { .. } => {
                let weights = w.segment(0);
                let biases = w.segment(1);
                for (j, z) in logits.iter_mut().enumerate() {
                    *z = linalg::dot(x, &weights[j * in_dim..(j + 1) * in_dim]) + biases[j];
                }
            }
            ModelKind::Mlp { hidden, .. } => {
                let w1 = w.segment(0);
                let b1 = w.segment(1);
                for (k, hk) in h.iter_mut().enumerate() {
                    *hk = (linalg::dot(x, &w1[k * in_dim..(k + 1) * in_dim]) + b1[k]).tanh();
                }
                let w2 = w.segment(2);
                let b2 = w.segment(3);
                for (j, z) in logits.iter_mut().enumerate() {
                    *z = linalg::dot(&h, &w2[j * hidden..(j + 1) * hidden]) + b2[j];
                }
            }
            ModelKind::LinearRegression => unreachable!("classes() returned Some"),
        }
        // strict > keeps the first maximum, i.e. the lowest class index
        let mut best = 0;
        for j in 1..classes {
            if logits[j] > logits[best] {
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy(spec: &ModelSpec, w: &ParamSet, data: &Batch) -> Result<f64> {
    let preds = predict_classes(spec, w, data)?;
    let ys = match &data.labels {
        Labels::Classes(v) => v,
        Labels::Values(_) => unreachable!("validated as classification"),
    };
    let hits = preds.iter().zip(ys).filter(|&(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Exact minimizers of a weighted least-squares federation.
#[derive(Debug, Clone)]
pub struct QuadraticOptimum {
    /// Minimizer of the weighted global objective `Σ p_k·F_k`.
    pub global: ParamSet,
    /// Each client's own minimizer.
    pub per_client: Vec<ParamSet>,
    /// Global objective value at the global minimizer.
    pub f_star: f64,
    /// Each client's objective at its own minimizer.
    pub per_client_f_star: Vec<f64>,
    /// Heterogeneity gap `F* − Σ p_k·F_k*` — zero when all clients share the
    /// same optimum, positive otherwise.
    pub gamma: f64,
}

/// Mean squared-error objective of one client at `w`.
pub fn client_objective(client: &ClientDataset, w: &[f64]) -> f64 {
    let targets = match &client.labels {
        Labels::Values(v) => v,
        Labels::Classes(_) => panic!("quadratic objective needs regression labels"),
    };
    let mut total = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let r = linalg::dot(client.features.row(i), w) - y;
        total += 0.5 * r * r;
    }
    total / client.n_k() as f64
}

/// Solves the weighted normal equations for a linear-regression federation,
/// returning the global optimum, per-client optima, and the heterogeneity
/// gap. `clients` must be ordered to match `weights.entries()`.
pub fn quadratic_optimum(
    clients: &[ClientDataset],
    weights: &AggregationWeights,
) -> Result<QuadraticOptimum> {
    if clients.is_empty() {
        return Err(Error::Dimension("quadratic_optimum: no clients".into()));
    }
    if clients.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "quadratic_optimum: {} clients vs {} weights",
            clients.len(),
            weights.len()
        )));
    }
    let d = clients[0].features.cols();
    let spec = ModelSpec {
        kind: ModelKind::LinearRegression,
        input_dim: d,
    };
    let kinds = spec.layer_kinds();

    let mut global_a = Matrix::zeros(d, d);
    let mut global_b = vec![0.0; d];
    let mut per_client = Vec::with_capacity(clients.len());
    let mut per_client_f_star = Vec::with_capacity(clients.len());
    for (client, &(_, p)) in clients.iter().zip(weights.entries()) {
        let ys = match &client.labels {
            Labels::Values(v) => v,
            Labels::Classes(_) => {
                return Err(Error::Config(
                    "quadratic_optimum needs regression labels".into(),
                ))
            }
        };
        let n = client.n_k() as f64;
        let mut a = Matrix::zeros(d, d);
        let mut b = vec![0.0; d];
        for (i, &y) in ys.iter().enumerate() {
            let x = client.features.row(i);
            for r in 0..d {
                let xr = x[r] / n;
                for c in 0..d {
                    a.add_to(r, c, xr * x[c]);
                }
                b[r] += xr * y;
            }
        }
        for r in 0..d {
            for c in 0..d {
                global_a.add_to(r, c, p * a.get(r, c));
            }
            global_b[r] += p * b[r];
        }
        let w_k = linalg::solve_spd(&a, &b)?;
        per_client_f_star.push(client_objective(client, &w_k));
        per_client.push(ParamSet::from_values(&kinds, w_k)?);
    }

    let w_star = linalg::solve_spd(&global_a, &global_b)?;
    let f_star: f64 = clients
        .iter()
        .zip(weights.entries())
        .map(|(c, &(_, p))| p * client_objective(c, &w_star))
        .sum();
    let gamma = f_star
        - per_client_f_star
            .iter()
            .zip(weights.entries())
            .map(|(&f, &(_, p))| p * f)
            .sum::<f64>();
    Ok(QuadraticOptimum {
        global: ParamSet::from_values(&kinds, w_star)?,
        per_client,
        f_star,
        per_client_f_star,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch_cls(rows: Vec<Vec<f64>>, ys: Vec<usize>) -> Batch {
        let n = rows.len();
        let d = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Batch {
            features: Matrix::from_vec(n, d, flat),
            labels: Labels::Classes(ys),
        }
    }

    fn batch_reg(rows: Vec<Vec<f64>>, ys: Vec<f64>) -> Batch {
        let n = rows.len();
        let d = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Batch {
            features: Matrix::from_vec(n, d, flat),
            labels: Labels::Values(ys),
        }
    }

    #[test]
    fn overflowed_logits_poison_the_loss_instead_of_capping_it() {
        // weights large enough that the logit dot product overflows: the
        // resulting NaN must reach the caller so a divergence guard can
        // fire, rather than being flattened into the underflow cap
        let spec = ModelSpec {
            kind: ModelKind::LogisticRegression { classes: 2 },
            input_dim: 2,
        };
        let mut w = ParamSet::zeros(&spec.layer_kinds());
        for v in w.segment_mut(0) {
            *v = 1.6e308;
        }
        let batch = batch_cls(alloc::vec![alloc::vec![2.0, 2.0]], alloc::vec![0]);
        let (loss, _) = loss_and_grad(&spec, &w, &batch).unwrap();
        assert!(loss.is_nan(), "overflow must not report a finite loss: {loss}");

        // while a merely hopeless (finite) sample costs exactly the
        // underflow floor
        for v in w.segment_mut(0) {
            *v = 0.0;
        }
        w.segment_mut(0)[0] = 1e30; // class-0 logit huge, class-1 logit 0
        let batch = batch_cls(alloc::vec![alloc::vec![1.0, 0.0]], alloc::vec![1]);
        let (loss, _) = loss_and_grad(&spec, &w, &batch).unwrap();
        assert_relative_eq!(loss, -(1e-300f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn zero_logistic_weights_give_uniform_softmax() {
        let spec = ModelSpec {
            kind: ModelKind::LogisticRegression { classes: 4 },
            input_dim: 3,
        };
        let w = ParamSet::zeros(&spec.layer_kinds());
        let batch = batch_cls(alloc::vec![alloc::vec![1.0, -2.0, 0.5]], alloc::vec![2]);
        let (loss, grad) = loss_and_grad(&spec, &w, &batch).unwrap();
        assert_relative_eq!(loss, (4.0f64).ln(), max_relative = 1e-12);
        // gradient of the weight matrix is outer(x, p − onehot) with p = 1/4
        let x = [1.0, -2.0, 0.5];
        for j in 0..4 {
            let err = 0.25 - if j == 2 { 1.0 } else { 0.0 };
            for k in 0..3 {
                assert_relative_eq!(
                    grad.segment(0)[j * 3 + k],
                    err * x[k],
                    max_relative = 1e-12
                );
            }
            assert_relative_eq!(grad.segment(1)[j], err, max_relative = 1e-12);
        }
    }

    #[test]
    fn linreg_gradient_vanishes_at_normal_equations_solution() {
        let mut s = Stream::from_key(&[311]);
        let d = 4;
        let n = 12;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| s.gaussian()).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| s.gaussian()).collect();
        let batch = batch_reg(rows.clone(), ys.clone());
        // solve the normal equations on this batch directly
        let mut a = Matrix::zeros(d, d);
        let mut b = alloc::vec![0.0; d];
        for (row, &y) in rows.iter().zip(&ys) {
            for r in 0..d {
                for c in 0..d {
                    a.add_to(r, c, row[r] * row[c]);
                }
                b[r] += row[r] * y;
            }
        }
        let w_star = linalg::solve_spd(&a, &b).unwrap();
        let spec = ModelSpec {
            kind: ModelKind::LinearRegression,
            input_dim: d,
        };
        let w = ParamSet::from_values(&spec.layer_kinds(), w_star).unwrap();
        let (_, grad) = loss_and_grad(&spec, &w, &batch).unwrap();
        for g in grad.values() {
            assert!(g.abs() < 1e-9, "residual gradient {g}");
        }
    }

    #[test]
    fn accuracy_tie_breaks_toward_class_zero() {
        let spec = ModelSpec {
            kind: ModelKind::LogisticRegression { classes: 2 },
            input_dim: 2,
        };
        let w = ParamSet::zeros(&spec.layer_kinds()); // all logits equal
        let batch = batch_cls(
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0], alloc::vec![2.0, 2.0]],
            alloc::vec![0, 1, 0],
        );
        // ties everywhere → always predict class 0 → accuracy = fraction of 0s
        let acc = accuracy(&spec, &w, &batch).unwrap();
        assert_relative_eq!(acc, 2.0 / 3.0);
    }

    #[test]
    fn accuracy_rejects_regression_spec() {
        let spec = ModelSpec {
            kind: ModelKind::LinearRegression,
            input_dim: 2,
        };
        let w = ParamSet::zeros(&spec.layer_kinds());
        let batch = batch_reg(alloc::vec![alloc::vec![1.0, 0.0]], alloc::vec![0.5]);
        assert!(matches!(accuracy(&spec, &w, &batch), Err(Error::Config(_))));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let spec = ModelSpec {
            kind: ModelKind::LogisticRegression { classes: 3 },
            input_dim: 2,
        };
        let w = ParamSet::zeros(&spec.layer_kinds());
        let batch = batch_cls(alloc::vec![alloc::vec![1.0, 0.0]], alloc::vec![3]);
        assert!(loss_and_grad(&spec, &w, &batch).is_err());
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let spec = ModelSpec {
            kind: ModelKind::Mlp {
                hidden: 6,
                classes: 3,
            },
            input_dim: 9,
        };
        let a = spec.init_params(42);
        let b = spec.init_params(42);
        assert_eq!(a.values(), b.values());
        let c = spec.init_params(43);
        assert_ne!(a.values(), c.values());
        // first matrix bounded by 1/3, biases exactly zero
        let bound = 1.0 / 3.0;
        assert!(a.segment(0).iter().all(|v| v.abs() <= bound));
        assert!(a.segment(1).iter().all(|&v| v == 0.0));
        assert!(a.segment(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perfectly_separated_data_reaches_full_accuracy() {
        // two well-separated clusters, weights pointing at them
        let spec = ModelSpec {
            kind: ModelKind::LogisticRegression { classes: 2 },
            input_dim: 2,
        };
        let w = ParamSet::from_values(
            &spec.layer_kinds(),
            alloc::vec![10.0, 0.0, 0.0, 10.0, 0.0, 0.0],
        )
        .unwrap();
        let batch = batch_cls(
            alloc::vec![alloc::vec![1.0, -1.0], alloc::vec![-1.0, 1.0]],
            alloc::vec![0, 1],
        );
        assert_relative_eq!(accuracy(&spec, &w, &batch).unwrap(), 1.0);
        // and with labels swapped, accuracy collapses to zero
        let flipped = batch_cls(
            alloc::vec![alloc::vec![1.0, -1.0], alloc::vec![-1.0, 1.0]],
            alloc::vec![1, 0],
        );
        assert_relative_eq!(accuracy(&spec, &w, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_optimum_identity_features() {
        // single client, X = I, y = b → w* = b, Γ = 0
        let client = ClientDataset {
            client_id: 0,
            features: Matrix::from_vec(3, 3, alloc::vec![
                1.0, 0.0, 0.0,
                0.0, 1.0, 0.0,
                0.0, 0.0, 1.0,
            ]),
            labels: Labels::Values(alloc::vec![2.0, -1.0, 0.5]),
        };
        let weights = AggregationWeights::from_counts(&[(0, 3)]).unwrap();
        let opt = quadratic_optimum(&[client], &weights).unwrap();
        assert_relative_eq!(opt.global.values()[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(opt.global.values()[1], -1.0, max_relative = 1e-12);
        assert_relative_eq!(opt.global.values()[2], 0.5, max_relative = 1e-12);
        assert!(opt.gamma.abs() < 1e-12);
        assert!(opt.f_star.abs() < 1e-20);
    }

    #[test]
    fn identical_clients_have_zero_gap() {
        let mut s = Stream::from_key(&[313]);
        let make = |s: &mut Stream, id: usize| {
            let rows: Vec<f64> = (0..5 * 3).map(|_| s.gaussian()).collect();
            let w_true = [1.0, -2.0, 0.5];
            let features = Matrix::from_vec(5, 3, rows);
            let ys: Vec<f64> = (0..5)
                .map(|i| linalg::dot(features.row(i), &w_true))
                .collect();
            ClientDataset {
                client_id: id,
                features,
                labels: Labels::Values(ys),
            }
        };
        let a = make(&mut s, 0);
        let mut b = a.clone();
        b.client_id = 1;
        let weights = AggregationWeights::from_counts(&[(0, 5), (1, 5)]).unwrap();
        let opt = quadratic_optimum(&[a.clone(), b], &weights).unwrap();
        // the shared optimum is each client's own optimum
        for (g, c) in opt.global.values().iter().zip(opt.per_client[0].values()) {
            assert_relative_eq!(g, c, epsilon = 1e-10);
        }
        assert!(opt.gamma.abs() < 1e-12);
    }

    #[test]
    fn global_optimum_beats_coordinate_perturbations() {
        let mut s = Stream::from_key(&[317]);
        let clients: Vec<ClientDataset> = (0..3)
            .map(|id| {
                let n = 10;
                let d = 4;
                let rows: Vec<f64> = (0..n * d).map(|_| s.gaussian()).collect();
                let features = Matrix::from_vec(n, d, rows);
                let ys: Vec<f64> = (0..n).map(|_| s.gaussian()).collect();
                ClientDataset {
                    client_id: id,
                    features,
                    labels: Labels::Values(ys),
                }
            })
            .collect();
        let weights =
            AggregationWeights::from_counts(&[(0, 10), (1, 10), (2, 10)]).unwrap();
        let opt = quadratic_optimum(&clients, &weights).unwrap();
        let objective = |w: &[f64]| -> f64 {
            clients
                .iter()
                .zip(weights.entries())
                .map(|(c, &(_, p))| p * client_objective(c, w))
                .sum()
        };
        let base = objective(opt.global.values());
        assert_relative_eq!(base, opt.f_star, max_relative = 1e-12);
        for i in 0..4 {
            for sign in [-1.0, 1.0] {
                let mut w = opt.global.values().to_vec();
                w[i] += sign * 1e-3;
                assert!(objective(&w) >= base, "perturbation {i} improved objective");
            }
        }
        assert!(opt.gamma > 0.0, "random clients should have a positive gap");
    }
}
