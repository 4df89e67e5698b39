//! Multi-layer perceptron classifiers, cross-entropy, and SGD.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::rng;
use crate::tensor::{argmax, Tensor};
use crate::PROB_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Architecture of an MLP classifier. An empty `hidden_dims` gives a linear model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
    pub init_seed: u64,
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.input_dim > 0, "input_dim must be positive");
        ensure!(self.num_classes >= 2, "need at least 2 classes, got {}", self.num_classes);
        ensure!(
            self.hidden_dims.iter().all(|&h| h > 0),
            "hidden layer widths must be positive: {:?}",
            self.hidden_dims
        );
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in self.hidden_dims.iter().chain(core::iter::once(&self.num_classes)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }
}

/// How a classifier came to hold its current parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingStage {
    Initialized,
    Standard,
    AdversarialTraining,
    Trades,
    Adml,
}

impl TrainingStage {
    /// True for checkpoints produced by an adversarial-training defense.
    pub fn is_adversarially_trained(self) -> bool {
        matches!(self, Self::AdversarialTraining | Self::Trades | Self::Adml)
    }
}

/// A classifier with parameters ordered `[W0, b0, W1, b1, ...]`.
///
/// Weight matrices are stored `(fan_out, fan_in)`, so a layer computes
/// `x · Wᵀ + b` on a `(batch, fan_in)` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    spec: ClassifierSpec,
    params: Vec<Tensor>,
    stage: TrainingStage,
}

/// Differentiable scalar objectives used for input gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputObjective {
    /// Summed per-sample cross-entropy.
    CrossEntropy,
    /// Summed probability of one class; yields rows of the input Jacobian.
    ClassProbability(usize),
    /// Summed `-max(z_y - max_{j != y} z_j, -kappa)` on logits.
    CwMargin { kappa: f64 },
}

pub fn init_classifier(spec: ClassifierSpec) -> Result<Classifier> {
    Classifier::init(spec)
}

impl Classifier {
    /// He-style uniform initialization with bound `sqrt(6 / fan_in)`; biases start at zero.
    pub fn init(spec: ClassifierSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::rng_from(spec.init_seed);
        let mut params = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let bound = libm::sqrt(6.0 / fan_in as f64);
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            params.push(Tensor::new(vec![fan_out, fan_in], w)?);
            params.push(Tensor::zeros(&[fan_out]));
        }
        Ok(Self {
            spec,
            params,
            stage: TrainingStage::Initialized,
        })
    }

    /// Builds a classifier from explicit parameters, checking them against `spec`.
    pub fn from_parts(spec: ClassifierSpec, params: Vec<Tensor>, stage: TrainingStage) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        ensure!(
            params.len() == 2 * dims.len(),
            "expected {} parameter tensors, got {}",
            2 * dims.len(),
            params.len()
        );
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let (w, b) = (&params[2 * l], &params[2 * l + 1]);
            if w.shape() != [fan_out, fan_in] {
                return Err(Error::Shape {
                    op: "from_parts",
                    lhs: vec![fan_out, fan_in],
                    rhs: w.shape().to_vec(),
                });
            }
            if b.shape() != [fan_out] {
                return Err(Error::Shape {
                    op: "from_parts",
                    lhs: vec![fan_out],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        ensure!(params.iter().all(Tensor::all_finite), "parameters must be finite");
        Ok(Self { spec, params, stage })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn stage(&self) -> TrainingStage {
        self.stage
    }

    pub fn set_stage(&mut self, stage: TrainingStage) {
        self.stage = stage;
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Records every parameter on `tape`, differentiable when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone(), trainable))
            .collect()
    }

    /// Logits for a `(batch, input_dim)` input already recorded on `tape`.
    pub fn logits_var(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let xs = tape.value(x).shape();
        if xs.len() != 2 || xs[1] != self.spec.input_dim {
            return Err(Error::Shape {
                op: "classifier",
                lhs: vec![0, self.spec.input_dim],
                rhs: xs.to_vec(),
            });
        }
        let layers = params.len() / 2;
        let mut h = x;
        for l in 0..layers {
            let wt = tape.transpose(params[2 * l])?;
            let z = tape.matmul(h, wt)?;
            h = tape.add(z, params[2 * l + 1])?;
            if l + 1 < layers {
                h = match self.spec.activation {
                    Activation::Relu => tape.relu(h),
                };
            }
        }
        Ok(h)
    }

    pub fn probs_var(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let z = self.logits_var(tape, params, x)?;
        tape.softmax(z)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let z = self.logits_var(&mut tape, &params, xv)?;
        Ok(tape.value(z).clone())
    }

    /// Class probabilities, one simplex row per input row.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let p = self.probs_var(&mut tape, &params, xv)?;
        Ok(tape.value(p).clone())
    }

    /// Predicted class (argmax of `predict_proba`, lowest index on ties).
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows()).map(|i| argmax(p.row(i))).collect())
    }

    /// Gradient of the summed `objective` with respect to the input, at fixed parameters.
    ///
    /// Summation keeps each row of the result equal to the gradient of that
    /// sample's own term.
    pub fn input_gradient(&self, x: &Tensor, y: &[usize], objective: InputObjective) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let xv = tape.param(x.clone());
        let loss = match objective {
            InputObjective::CrossEntropy => {
                check_labels(y, x.rows(), self.spec.num_classes)?;
                let p = self.probs_var(&mut tape, &params, xv)?;
                let terms = cross_entropy_terms(&mut tape, p, y)?;
                tape.sum(terms)
            }
            InputObjective::ClassProbability(j) => {
                ensure!(j < self.spec.num_classes, "class {} out of range", j);
                let p = self.probs_var(&mut tape, &params, xv)?;
                let picked = tape.gather(p, &vec![j; x.rows()])?;
                tape.sum(picked)
            }
            InputObjective::CwMargin { kappa } => {
                check_labels(y, x.rows(), self.spec.num_classes)?;
                let z = self.logits_var(&mut tape, &params, xv)?;
                let margin = cw_margin(&mut tape, z, y)?;
                let clipped = tape.clamp(margin, -kappa, f64::INFINITY)?;
                let neg = tape.neg(clipped);
                tape.sum(neg)
            }
        };
        let grads = tape.backward(loss)?;
        let g = grads.get_or_zeros(xv, x.numel());
        Tensor::new(x.shape().to_vec(), g)
    }

    /// Per-sample Jacobians `∂f/∂x`, each of shape `(num_classes, input_dim)`.
    pub fn input_jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let (n, dim, d) = (x.rows(), x.cols(), self.spec.num_classes);
        let mut jac = vec![vec![0.0; d * dim]; n];
        for j in 0..d {
            let g = self.input_gradient(x, &[], InputObjective::ClassProbability(j))?;
            for (i, rows) in jac.iter_mut().enumerate() {
                rows[j * dim..(j + 1) * dim].copy_from_slice(g.row(i));
            }
        }
        jac.into_iter().map(|data| Tensor::new(vec![d, dim], data)).collect()
    }
}

pub(crate) fn check_labels(y: &[usize], rows: usize, classes: usize) -> Result<()> {
    ensure!(y.len() == rows, "{} labels for a batch of {}", y.len(), rows);
    ensure!(
        y.iter().all(|&c| c < classes),
        "label out of range for {} classes",
        classes
    );
    Ok(())
}

/// `z_y - max_{j != y} z_j` per row of a logit matrix.
pub fn cw_margin(tape: &mut Tape, logits: Var, y: &[usize]) -> Result<Var> {
    let z = tape.value(logits);
    let d = z.cols();
    ensure!(d >= 2, "margin needs at least 2 classes");
    let runner_up: Vec<usize> = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let row = z.row(i);
            let mut best = if yi == 0 { 1 } else { 0 };
            for j in 0..d {
                if j != yi && row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let true_logit = tape.gather(logits, y)?;
    let other = tape.gather(logits, &runner_up)?;
    tape.sub(true_logit, other)
}

/// Per-sample `-ln max(p[i, y_i], floor)` as an `(n,)` vector.
pub fn cross_entropy_terms(tape: &mut Tape, probs: Var, y: &[usize]) -> Result<Var> {
    let p = tape.value(probs);
    ensure!(p.shape().len() == 2, "cross-entropy expects (batch, classes) probabilities");
    check_labels(y, p.rows(), p.cols())?;
    let picked = tape.gather(probs, y)?;
    let floored = tape.clamp(picked, PROB_FLOOR, 1.0)?;
    let logp = tape.log(floored)?;
    Ok(tape.neg(logp))
}

/// Mean cross-entropy over the batch.
pub fn cross_entropy(tape: &mut Tape, probs: Var, y: &[usize]) -> Result<Var> {
    let terms = cross_entropy_terms(tape, probs, y)?;
    Ok(tape.mean(terms))
}

/// Mean cross-entropy of a probability matrix, without recording a graph.
pub fn cross_entropy_value(probs: &Tensor, y: &[usize]) -> Result<f64> {
    ensure!(probs.shape().len() == 2, "cross-entropy expects (batch, classes) probabilities");
    check_labels(y, probs.rows(), probs.cols())?;
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -libm::log(probs.row(i)[c].clamp(PROB_FLOOR, 1.0)))
        .sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// One triangular cycle: zero at both ends, the peak rate at the midpoint.
    #[default]
    Cyclic,
}

impl LrSchedule {
    /// Learning rate at training progress `u ∈ [0, 1]`.
    pub fn rate_at(self, peak: f64, u: f64) -> f64 {
        match self {
            Self::Constant => peak,
            Self::Cyclic => peak * (1.0 - libm::fabs(2.0 * u.clamp(0.0, 1.0) - 1.0)),
        }
    }

    /// Learning rate for optimizer step `step` of `total` (evaluated at the step's midpoint).
    pub fn rate(self, peak: f64, step: usize, total: usize) -> f64 {
        if total == 0 {
            return peak;
        }
        self.rate_at(peak, (step as f64 + 0.5) / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    pub seed: u64,
    /// Stop after this many epochs without improvement in validation robust accuracy.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.1,
            lr_schedule: LrSchedule::Cyclic,
            momentum: 0.9,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.batch_size > 0, "batch_size must be positive");
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be finite and non-negative"
        );
        ensure!(
            (0.0..1.0).contains(&self.momentum),
            "momentum must lie in [0, 1), got {}",
            self.momentum
        );
        ensure!(self.patience != Some(0), "patience must be positive when set");
        Ok(())
    }
}

/// SGD with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    buffers: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Self {
            momentum,
            buffers: Vec::new(),
        }
    }

    /// `buf ← momentum·buf + g; p ← p − lr·buf`, one gradient per parameter tensor.
    pub fn step(&mut self, model: &mut Classifier, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        ensure!(
            grads.len() == model.params.len(),
            "{} gradients for {} parameters",
            grads.len(),
            model.params.len()
        );
        for (p, g) in model.params.iter().zip(grads) {
            if p.numel() != g.len() {
                return Err(Error::Shape {
                    op: "sgd_step",
                    lhs: p.shape().to_vec(),
                    rhs: vec![g.len()],
                });
            }
        }
        if self.buffers.is_empty() {
            self.buffers = model.params.iter().map(|p| vec![0.0; p.numel()]).collect();
        }
        for ((p, g), buf) in model.params.iter_mut().zip(grads).zip(&mut self.buffers) {
            for ((w, &gv), b) in p.data_mut().iter_mut().zip(g).zip(buf.iter_mut()) {
                *b = self.momentum * *b + gv;
                *w -= lr * *b;
            }
        }
        Ok(())
    }
}
