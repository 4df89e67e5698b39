//! l∞-bounded first-order attacks and worst-example selection.
//!
//! All attacks keep `‖x_adv − x‖∞ ≤ γ` and `x_adv ∈ [0, 1]` by projecting
//! after every step. `sign(0) = 0`, so a point with a vanishing gradient stays
//! where it is. Random starts draw per-sample noise from a stream seeded with
//! `seed ⊕ sample_index`, which makes a sharded run agree with a serial one.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::sign;
use crate::error::{contract, ensure, Error, Result};
use crate::models::{Classifier, InputObjective};
use crate::rng;
use crate::tensor::{argmax, Tensor};

/// Step count of evaluation attacks.
pub const EVAL_STEPS: usize = 30;
/// Step count of the inner maximization during training.
pub const TRAIN_STEPS: usize = 10;
/// Default step size is `STEP_SIZE_FACTOR · γ / steps`.
pub const STEP_SIZE_FACTOR: f64 = 2.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Cross-entropy ascent.
    #[default]
    Ce,
    /// Logit-margin (Carlini–Wagner) ascent.
    Cw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// l∞ budget in input units.
    pub gamma: f64,
    pub steps: usize,
    /// Explicit step size; `None` means `2.3 · γ / steps`.
    pub step_size: Option<f64>,
    pub random_start: bool,
    pub objective: Objective,
    pub kappa: f64,
    pub seed: u64,
}

impl AttackConfig {
    /// 30-step random-start PGD.
    pub fn evaluation(gamma: f64, seed: u64) -> Self {
        Self {
            gamma,
            steps: EVAL_STEPS,
            step_size: None,
            random_start: true,
            objective: Objective::Ce,
            kappa: 0.0,
            seed,
        }
    }

    /// 10-step random-start PGD used inside training loops.
    pub fn training(gamma: f64, seed: u64) -> Self {
        Self {
            steps: TRAIN_STEPS,
            ..Self::evaluation(gamma, seed)
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
            .unwrap_or(STEP_SIZE_FACTOR * self.gamma / self.steps.max(1) as f64)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.gamma >= 0.0 && self.gamma.is_finite(),
            "gamma must be finite and non-negative, got {}",
            self.gamma
        );
        ensure!(self.kappa >= 0.0, "kappa must be non-negative, got {}", self.kappa);
        if self.steps > 0 && self.gamma > 0.0 {
            ensure!(
                self.step_size() > 0.0,
                "step_size must be positive, got {}",
                self.step_size()
            );
        }
        Ok(())
    }
}

/// Named attack families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Fgsm,
    /// PGD without random start.
    Bim,
    Pgd,
    /// PGD on the logit-margin objective.
    CwInf,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [Self::Fgsm, Self::Bim, Self::Pgd, Self::CwInf];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fgsm => "fgsm",
            Self::Bim => "bim",
            Self::Pgd => "pgd",
            Self::CwInf => "cw_inf",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgsm" => Ok(Self::Fgsm),
            "bim" => Ok(Self::Bim),
            "pgd" => Ok(Self::Pgd),
            "cw" | "cw_inf" | "cwinf" => Ok(Self::CwInf),
            other => Err(contract(alloc::format!("unknown attack '{other}'"))),
        }
    }
}

/// Clamps `x_adv` into the γ-ball around `x`, then into `[0, 1]`.
pub fn project_linf(x_adv: &Tensor, x: &Tensor, gamma: f64) -> Result<Tensor> {
    ensure!(gamma >= 0.0, "gamma must be non-negative, got {}", gamma);
    x_adv.zip_map(x, |a, c| a.clamp(c - gamma, c + gamma).clamp(0.0, 1.0))
}

fn objective_for(cfg: &AttackConfig) -> InputObjective {
    match cfg.objective {
        Objective::Ce => InputObjective::CrossEntropy,
        Objective::Cw => InputObjective::CwMargin { kappa: cfg.kappa },
    }
}

fn ascend(
    model: &Classifier,
    current: &Tensor,
    x: &Tensor,
    y: &[usize],
    objective: InputObjective,
    step: f64,
    gamma: f64,
) -> Result<Tensor> {
    let g = model.input_gradient(current, y, objective)?;
    let moved = current.zip_map(&g, |v, gv| v + step * sign(gv))?;
    project_linf(&moved, x, gamma)
}

/// Single signed-gradient step of size γ on the cross-entropy.
pub fn fgsm(model: &Classifier, x: &Tensor, y: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    ascend(model, x, x, y, InputObjective::CrossEntropy, cfg.gamma, cfg.gamma)
}

/// Projected signed-gradient ascent; BIM is this with `random_start = false`.
pub fn pgd(model: &Classifier, x: &Tensor, y: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    pgd_from(model, x, y, cfg, 0)
}

/// [`pgd`] for a shard whose first row is sample `index_offset` of a larger set.
pub fn pgd_from(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    cfg: &AttackConfig,
    index_offset: u64,
) -> Result<Tensor> {
    cfg.validate()?;
    ensure!(cfg.steps >= 1, "pgd needs at least one step");
    let objective = objective_for(cfg);
    let mut current = if cfg.random_start && cfg.gamma > 0.0 {
        let dim = x.cols();
        let mut noisy = x.clone();
        for (i, row) in noisy.data_mut().chunks_mut(dim).enumerate() {
            let mut r = rng::sample_rng(cfg.seed, index_offset + i as u64);
            for v in row.iter_mut() {
                *v += r.random_range(-cfg.gamma..=cfg.gamma);
            }
        }
        project_linf(&noisy, x, cfg.gamma)?
    } else {
        project_linf(x, x, cfg.gamma)?
    };
    let step = cfg.step_size();
    for _ in 0..cfg.steps {
        current = ascend(model, &current, x, y, objective, step, cfg.gamma)?;
    }
    Ok(current)
}

/// PGD on the margin `max(z_y − max_{j≠y} z_j, −κ)`, minimized by the attacker.
pub fn cw_inf(model: &Classifier, x: &Tensor, y: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    cw_inf_from(model, x, y, cfg, 0)
}

fn cw_inf_from(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    cfg: &AttackConfig,
    index_offset: u64,
) -> Result<Tensor> {
    ensure!(model.num_classes() >= 2, "cw needs at least two classes");
    let cfg = AttackConfig {
        objective: Objective::Cw,
        ..cfg.clone()
    };
    pgd_from(model, x, y, &cfg, index_offset)
}

/// Runs attack `kind` on a shard whose first row is sample `index_offset`.
pub fn run_attack_from(
    kind: AttackKind,
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    cfg: &AttackConfig,
    index_offset: u64,
) -> Result<Tensor> {
    match kind {
        AttackKind::Fgsm => fgsm(model, x, y, cfg),
        AttackKind::Bim => {
            let cfg = AttackConfig {
                random_start: false,
                objective: Objective::Ce,
                ..cfg.clone()
            };
            pgd_from(model, x, y, &cfg, index_offset)
        }
        AttackKind::Pgd => {
            let cfg = AttackConfig {
                objective: Objective::Ce,
                ..cfg.clone()
            };
            pgd_from(model, x, y, &cfg, index_offset)
        }
        AttackKind::CwInf => cw_inf_from(model, x, y, cfg, index_offset),
    }
}

pub fn run_attack(
    kind: AttackKind,
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    cfg: &AttackConfig,
) -> Result<Tensor> {
    run_attack_from(kind, model, x, y, cfg, 0)
}

/// Attacked samples whose prediction flipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstBatch {
    /// Row indices into the source batch.
    pub indices: Vec<usize>,
    pub input_dim: usize,
    /// Clean inputs, flattened row-major.
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    /// Perturbations `x_adv − x`, flattened row-major.
    pub t: Vec<f64>,
    /// Predicted class on `x + t`.
    pub attacked_class: Vec<usize>,
    /// Probability of `attacked_class` on `x + t`.
    pub confidence: Vec<f64>,
}

impl WorstBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn clean(&self) -> Option<Tensor> {
        self.matrix(&self.x)
    }

    pub fn perturbation(&self) -> Option<Tensor> {
        self.matrix(&self.t)
    }

    /// `x + t` as a matrix.
    pub fn adversarial(&self) -> Option<Tensor> {
        let sum: Vec<f64> = self.x.iter().zip(&self.t).map(|(a, b)| a + b).collect();
        self.matrix(&sum)
    }

    fn matrix(&self, data: &[f64]) -> Option<Tensor> {
        if self.is_empty() {
            return None;
        }
        Tensor::new(alloc::vec![self.len(), self.input_dim], data.to_vec()).ok()
    }
}

/// Which samples enter the reweighted term of the fine-tuning loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentSet {
    /// Only samples whose prediction flipped.
    #[default]
    Worst,
    /// Only samples whose prediction survived the attack.
    NonWorst,
    All,
}

impl FromStr for TreatmentSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst" => Ok(Self::Worst),
            "non_worst" | "non-worst" => Ok(Self::NonWorst),
            "all" => Ok(Self::All),
            other => Err(contract(alloc::format!("unknown treatment set '{other}'"))),
        }
    }
}

impl TreatmentSet {
    pub fn name(self) -> &'static str {
        match self {
            Self::Worst => "worst",
            Self::NonWorst => "non_worst",
            Self::All => "all",
        }
    }
}

/// Keeps the samples whose attacked prediction differs from the label.
pub fn select_worst(model: &Classifier, x: &Tensor, y: &[usize], x_adv: &Tensor) -> Result<WorstBatch> {
    select_treated(model, x, y, x_adv, TreatmentSet::Worst)
}

/// Generalised [`select_worst`] with the filter chosen by `set`.
pub fn select_treated(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    x_adv: &Tensor,
    set: TreatmentSet,
) -> Result<WorstBatch> {
    ensure!(x.shape() == x_adv.shape(), "x and x_adv shapes differ");
    ensure!(y.len() == x.rows(), "{} labels for {} rows", y.len(), x.rows());
    let probs = model.predict_proba(x_adv)?;
    let dim = x.cols();
    let mut out = WorstBatch {
        indices: Vec::new(),
        input_dim: dim,
        x: Vec::new(),
        y: Vec::new(),
        t: Vec::new(),
        attacked_class: Vec::new(),
        confidence: Vec::new(),
    };
    for (i, &label) in y.iter().enumerate() {
        let row = probs.row(i);
        let j = argmax(row);
        let flipped = j != label;
        let keep = match set {
            TreatmentSet::Worst => flipped,
            TreatmentSet::NonWorst => !flipped,
            TreatmentSet::All => true,
        };
        if !keep {
            continue;
        }
        out.indices.push(i);
        out.x.extend_from_slice(x.row(i));
        out.t.extend(x_adv.row(i).iter().zip(x.row(i)).map(|(a, c)| a - c));
        out.y.push(label);
        out.attacked_class.push(j);
        out.confidence.push(row[j]);
    }
    Ok(out)
}

/// Fraction of samples whose attacked prediction differs from the label.
pub fn flip_rate(model: &Classifier, x_adv: &Tensor, y: &[usize]) -> Result<f64> {
    let pred = model.predict(x_adv)?;
    let flips = pred.iter().zip(y).filter(|(p, l)| p != l).count();
    Ok(flips as f64 / y.len().max(1) as f64)
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ce => "ce",
            Self::Cw => "cw",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(Self::Ce),
            "cw" => Ok(Self::Cw),
            other => Err(contract(String::from("unknown objective '") + other + "'")),
        }
    }
}
