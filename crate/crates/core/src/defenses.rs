//! Adversarial training: standard AT, a TRADES-style baseline, and
//! worst-example reweighted fine-tuning with sample splitting.
//!
//! Fine-tuning works batch by batch on top of an adversarially trained
//! checkpoint:
//!
//! 1. attack the whole batch with PGD to get `t′`;
//! 2. split the batch into disjoint halves `D1`, `D2` (roles swap on
//!    alternate batches);
//! 3. `L_a` is the base defense loss on `D1`;
//! 4. on `D2`, keep the samples whose prediction the attack flipped, take the
//!    confidence `f_{j*}(x + t)` of the attacked class and weight each sample by
//!    `τ = 1/f_{j*} − 1`;
//! 5. `L_b` is the mean over those samples of `τ·CE(f(x + t), y) + CE(f(x), y)`;
//! 6. one SGD step on `L_a + L_b`.
//!
//! `τ` enters as a constant weight, so no gradient flows through it. An empty
//! worst set contributes `L_b = 0`.

use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::{pgd, select_treated, AttackConfig, TreatmentSet};
use crate::autodiff::{Tape, Var};
use crate::causal::approx_propensity;
use crate::data::LabeledDataset;
use crate::error::{contract, ensure, Error, Result};
use crate::eval::{accuracy_on, clean_accuracy, robust_accuracy};
use crate::models::{cross_entropy_terms, Classifier, LrSchedule, Sgd, TrainConfig, TrainingStage};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;
use crate::PROB_FLOOR;

/// Upper bound on the balancing ratio.
pub const TAU_MAX: f64 = 1e4;
/// Fine-tuning learning rate is the base rate divided by this.
pub const ADML_LR_DIVISOR: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    At,
    Trades,
    AdmlOverAt,
    AdmlOverTrades,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::At => "at",
            Self::Trades => "trades",
            Self::AdmlOverAt => "adml_over_at",
            Self::AdmlOverTrades => "adml_over_trades",
        }
    }

    /// The loss used on `D1` (or for plain training).
    pub fn base(self) -> BaseDefense {
        match self {
            Self::At | Self::AdmlOverAt => BaseDefense::At,
            Self::Trades | Self::AdmlOverTrades => BaseDefense::Trades,
        }
    }

    pub fn is_adml(self) -> bool {
        matches!(self, Self::AdmlOverAt | Self::AdmlOverTrades)
    }
}

impl FromStr for DefenseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at" => Ok(Self::At),
            "trades" => Ok(Self::Trades),
            "adml" | "adml_over_at" => Ok(Self::AdmlOverAt),
            "adml_over_trades" => Ok(Self::AdmlOverTrades),
            other => Err(contract(alloc::format!("unknown defense '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDefense {
    At,
    Trades,
}

/// Where the per-sample propensity behind `τ` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    /// The attacked top-class confidence of the sample itself.
    #[default]
    AttackedConfidence,
    /// Mean flipped confidence over `restarts` random-start attacks; samples no
    /// restart flips fall back to their own attacked confidence.
    Propensity { restarts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    /// Inner maximization used during training.
    pub attack: AttackConfig,
    pub trades_beta: f64,
    pub adml_epochs: usize,
    /// `None` means the base learning rate divided by [`ADML_LR_DIVISOR`].
    pub adml_learning_rate: Option<f64>,
    pub split_ratio: f64,
    pub use_split_crossfit: bool,
    pub treatment_set: TreatmentSet,
    pub tau_source: TauSource,
    pub seed: u64,
}

impl DefenseConfig {
    pub fn new(kind: DefenseKind, gamma: f64, seed: u64) -> Self {
        Self {
            kind,
            attack: AttackConfig::training(gamma, seed),
            trades_beta: 6.0,
            adml_epochs: 10,
            adml_learning_rate: None,
            split_ratio: 0.5,
            use_split_crossfit: true,
            treatment_set: TreatmentSet::Worst,
            tau_source: TauSource::AttackedConfidence,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        ensure!(
            self.split_ratio > 0.0 && self.split_ratio < 1.0,
            "split_ratio must lie in (0, 1), got {}",
            self.split_ratio
        );
        ensure!(self.trades_beta >= 0.0, "trades_beta must be non-negative");
        if let Some(lr) = self.adml_learning_rate {
            ensure!(lr >= 0.0 && lr.is_finite(), "adml_learning_rate must be non-negative");
        }
        if let TauSource::Propensity { restarts } = self.tau_source {
            ensure!(restarts >= 1, "propensity needs at least one restart");
        }
        Ok(())
    }

    /// Optimizer settings of the fine-tuning stage derived from the base run.
    pub fn adml_train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.adml_epochs,
            learning_rate: self
                .adml_learning_rate
                .unwrap_or(base.learning_rate / ADML_LR_DIVISOR),
            ..base.clone()
        }
    }
}

fn perturbed(x: &Tensor, t: &Tensor) -> Result<Tensor> {
    x.zip_map(t, |a, b| a + b)
}

/// Mean cross-entropy on `x + t′`.
pub fn at_loss(
    tape: &mut Tape,
    model: &Classifier,
    params: &[Var],
    x: &Tensor,
    y: &[usize],
    t_prime: &Tensor,
) -> Result<Var> {
    let xa = tape.constant(perturbed(x, t_prime)?);
    let p = model.probs_var(tape, params, xa)?;
    let terms = cross_entropy_terms(tape, p, y)?;
    Ok(tape.mean(terms))
}

/// `CE(f(x), y) + β · KL(f(x) ‖ f(x + t′))`, both averaged over the batch.
pub fn trades_loss(
    tape: &mut Tape,
    model: &Classifier,
    params: &[Var],
    x: &Tensor,
    y: &[usize],
    t_prime: &Tensor,
    beta: f64,
) -> Result<Var> {
    ensure!(beta >= 0.0, "beta must be non-negative, got {}", beta);
    let xc = tape.constant(x.clone());
    let pc = model.probs_var(tape, params, xc)?;
    let ce_terms = cross_entropy_terms(tape, pc, y)?;
    let ce = tape.mean(ce_terms);
    if beta == 0.0 {
        return Ok(ce);
    }
    let xa = tape.constant(perturbed(x, t_prime)?);
    let pa = model.probs_var(tape, params, xa)?;
    let pc_f = tape.clamp(pc, PROB_FLOOR, 1.0)?;
    let pa_f = tape.clamp(pa, PROB_FLOOR, 1.0)?;
    let log_pc = tape.log(pc_f)?;
    let log_pa = tape.log(pa_f)?;
    let diff = tape.sub(log_pc, log_pa)?;
    let weighted = tape.mul(pc, diff)?;
    let kl_sum = tape.sum(weighted);
    let kl = tape.scale(kl_sum, beta / x.rows() as f64);
    tape.add(ce, kl)
}

/// `τ = 1/c − 1` for attacked confidence `c`, with `c` floored at `1e-12` and `τ ≤ 1e4`.
pub fn balancing_ratio(confidence: f64) -> f64 {
    let c = confidence.clamp(PROB_FLOOR, 1.0);
    (1.0 / c - 1.0).clamp(0.0, TAU_MAX)
}

/// Random disjoint splits with alternating roles across successive batches.
#[derive(Debug, Clone)]
pub struct CrossFitter {
    rng: Rng,
    ratio: f64,
    batches: u64,
}

impl CrossFitter {
    pub fn new(ratio: f64, seed: u64) -> Result<Self> {
        ensure!(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0, 1), got {}", ratio);
        Ok(Self {
            rng: rng::rng_from(seed),
            ratio,
            batches: 0,
        })
    }

    /// Splits batch positions `0..n` into `(D1, D2)`.
    ///
    /// A fresh permutation is drawn for every batch; its first
    /// `round(ratio · n)` positions form `D1` on even batches and `D2` on odd
    /// ones. Both parts are always nonempty.
    pub fn split(&mut self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        ensure!(n >= 2, "cannot split a batch of {}", n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut self.rng);
        let head = (libm::round(self.ratio * n as f64) as usize).clamp(1, n - 1);
        let tail = perm.split_off(head);
        let swap = self.batches % 2 == 1;
        self.batches += 1;
        debug_assert_eq!(perm.len() + tail.len(), n);
        Ok(if swap { (tail, perm) } else { (perm, tail) })
    }
}

/// One-shot form of [`CrossFitter::split`] for batch number `batch_index`.
pub fn split_and_crossfit(n: usize, ratio: f64, rng: &mut Rng, batch_index: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    ensure!(n >= 2, "cannot split a batch of {}", n);
    ensure!(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0, 1), got {}", ratio);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let head = (libm::round(ratio * n as f64) as usize).clamp(1, n - 1);
    let tail = perm.split_off(head);
    Ok(if batch_index % 2 == 1 { (tail, perm) } else { (perm, tail) })
}

/// A batch together with its attack perturbation.
#[derive(Debug, Clone, Copy)]
pub struct Perturbed<'a> {
    pub x: &'a Tensor,
    pub y: &'a [usize],
    pub t: &'a Tensor,
}

/// The two terms of the fine-tuning objective.
#[derive(Debug, Clone, Copy)]
pub struct AdmlTerms {
    pub total: Var,
    pub l_a: f64,
    pub l_b: f64,
    /// Samples that entered `L_b`.
    pub treated: usize,
}

/// Options of the reweighted term.
#[derive(Debug, Clone, Copy)]
pub struct AdmlLossOptions<'a> {
    pub base: BaseDefense,
    pub trades_beta: f64,
    pub treatment_set: TreatmentSet,
    /// Per-sample propensities aligned with `D2` rows; `None` uses attacked confidence.
    pub propensity: Option<&'a [f64]>,
}

impl Default for AdmlLossOptions<'_> {
    fn default() -> Self {
        Self {
            base: BaseDefense::At,
            trades_beta: 6.0,
            treatment_set: TreatmentSet::Worst,
            propensity: None,
        }
    }
}

fn base_loss(
    tape: &mut Tape,
    model: &Classifier,
    params: &[Var],
    batch: Perturbed<'_>,
    base: BaseDefense,
    beta: f64,
) -> Result<Var> {
    match base {
        BaseDefense::At => at_loss(tape, model, params, batch.x, batch.y, batch.t),
        BaseDefense::Trades => trades_loss(tape, model, params, batch.x, batch.y, batch.t, beta),
    }
}

/// `L_a + L_b` on the split batch.
pub fn adml_loss(
    tape: &mut Tape,
    model: &Classifier,
    params: &[Var],
    d1: Perturbed<'_>,
    d2: Perturbed<'_>,
    opts: AdmlLossOptions<'_>,
) -> Result<AdmlTerms> {
    let l_a = base_loss(tape, model, params, d1, opts.base, opts.trades_beta)?;
    let l_a_value = tape.value(l_a).item();

    let x2_adv = perturbed(d2.x, d2.t)?;
    let treated = select_treated(model, d2.x, d2.y, &x2_adv, opts.treatment_set)?;
    if treated.is_empty() {
        return Ok(AdmlTerms {
            total: l_a,
            l_a: l_a_value,
            l_b: 0.0,
            treated: 0,
        });
    }
    if let Some(p) = opts.propensity {
        ensure!(p.len() == d2.y.len(), "{} propensities for {} D2 rows", p.len(), d2.y.len());
    }
    let tau: Vec<f64> = treated
        .indices
        .iter()
        .zip(&treated.confidence)
        .map(|(&i, &c)| balancing_ratio(opts.propensity.map_or(c, |p| p[i])))
        .collect();

    let n = treated.len();
    let xc = tape.constant(d2.x.select_rows(&treated.indices)?);
    let xa = tape.constant(x2_adv.select_rows(&treated.indices)?);
    let tau_v = tape.constant(Tensor::new(vec![n], tau)?);

    let pa = model.probs_var(tape, params, xa)?;
    let ce_adv = cross_entropy_terms(tape, pa, &treated.y)?;
    let weighted = tape.mul(tau_v, ce_adv)?;
    let pc = model.probs_var(tape, params, xc)?;
    let ce_clean = cross_entropy_terms(tape, pc, &treated.y)?;
    let per_sample = tape.add(weighted, ce_clean)?;
    let l_b = tape.mean(per_sample);
    let l_b_value = tape.value(l_b).item();
    let total = tape.add(l_a, l_b)?;
    Ok(AdmlTerms {
        total,
        l_a: l_a_value,
        l_b: l_b_value,
        treated: n,
    })
}

/// Value of [`adml_loss`] without keeping the graph.
pub fn adml_loss_value(
    model: &Classifier,
    d1: Perturbed<'_>,
    d2: Perturbed<'_>,
    opts: AdmlLossOptions<'_>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, false);
    let terms = adml_loss(&mut tape, model, &params, d1, d2, opts)?;
    Ok(tape.value(terms.total).item())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub clean_acc: f64,
    pub pgd_acc: f64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Classifier,
    pub history: History,
}

fn param_grads(tape: &Tape, params: &[Var], model: &Classifier, loss: Var) -> Result<Vec<Vec<f64>>> {
    let grads = tape.backward(loss)?;
    Ok(params
        .iter()
        .zip(model.params())
        .map(|(v, p)| grads.get_or_zeros(*v, p.numel()))
        .collect())
}

fn batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from(rng::derive(seed, &[0xBA7C, epoch as u64])));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

struct Monitor<'a> {
    data: &'a LabeledDataset,
    attack: AttackConfig,
}

impl Monitor<'_> {
    fn record(&self, model: &Classifier, epoch: usize, loss: f64, lr: f64) -> Result<EpochRecord> {
        let clean = clean_accuracy(model, self.data)?.overall;
        let cfg = self.attack.with_seed(rng::derive(self.attack.seed, &[0xE7A1, epoch as u64]));
        let robust = robust_accuracy(model, self.data, crate::attacks::AttackKind::Pgd, &cfg)?.overall;
        Ok(EpochRecord {
            epoch,
            clean_acc: clean,
            pgd_acc: robust,
            loss,
            lr,
        })
    }
}

/// Per-batch loss builder: returns the scalar loss recorded on the tape.
type BatchLoss<'f> =
    dyn FnMut(&mut Tape, &Classifier, &[Var], &Tensor, &[usize], u64) -> Result<Option<Var>> + 'f;

fn run_epochs(
    mut model: Classifier,
    train: &LabeledDataset,
    monitor: &Monitor<'_>,
    cfg: &TrainConfig,
    batch_loss: &mut BatchLoss<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure!(
        train.input_dim() == model.input_dim() && train.num_classes() == model.num_classes(),
        "dataset does not match the classifier"
    );
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model, history });
    }
    let per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = per_epoch * cfg.epochs;
    let mut opt = Sgd::new(cfg.momentum);
    let mut step = 0usize;
    let mut best: Option<(f64, Classifier)> = None;
    let mut stale = 0usize;
    let schedule: LrSchedule = cfg.lr_schedule;

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut lr = 0.0;
        for (b, idx) in batches(train.len(), cfg.batch_size, cfg.seed, epoch).into_iter().enumerate() {
            lr = schedule.rate(cfg.learning_rate, step, total_steps);
            step += 1;
            let (x, y) = train.batch(&idx)?;
            let batch_seed = rng::derive(cfg.seed, &[epoch as u64, b as u64]);
            let mut tape = Tape::new();
            let params = model.bind(&mut tape, true);
            let Some(loss) = batch_loss(&mut tape, &model, &params, &x, &y, batch_seed)? else {
                continue;
            };
            loss_sum += tape.value(loss).item();
            loss_count += 1;
            let grads = param_grads(&tape, &params, &model, loss)?;
            opt.step(&mut model, &grads, lr)?;
        }
        let mean_loss = if loss_count == 0 { 0.0 } else { loss_sum / loss_count as f64 };
        ensure!(mean_loss.is_finite(), "training loss diverged at epoch {}", epoch);
        let record = monitor.record(&model, epoch, mean_loss, lr)?;
        let score = record.pgd_acc;
        history.records.push(record);
        if let Some(patience) = cfg.patience {
            match &best {
                Some((b, _)) if score <= *b => {
                    stale += 1;
                    if stale >= patience {
                        break;
                    }
                }
                _ => {
                    best = Some((score, model.clone()));
                    stale = 0;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(TrainOutcome { model, history })
}

/// Adversarial training with the base loss of `defense` (AT or TRADES-style).
///
/// `monitor` is the dataset used for the per-epoch history and early stopping;
/// it defaults to the training set.
pub fn train_at(
    model: Classifier,
    train: &LabeledDataset,
    monitor: Option<&LabeledDataset>,
    cfg: &TrainConfig,
    defense: &DefenseConfig,
) -> Result<TrainOutcome> {
    defense.validate()?;
    let base = defense.kind.base();
    let attack = defense.attack.clone();
    let beta = defense.trades_beta;
    let mon = Monitor {
        data: monitor.unwrap_or(train),
        attack: attack.clone(),
    };
    let mut loss = |tape: &mut Tape, m: &Classifier, params: &[Var], x: &Tensor, y: &[usize], seed: u64| {
        let adv = pgd(m, x, y, &attack.with_seed(seed))?;
        let t = adv.zip_map(x, |a, b| a - b)?;
        base_loss(tape, m, params, Perturbed { x, y, t: &t }, base, beta).map(Some)
    };
    let mut out = run_epochs(model, train, &mon, cfg, &mut loss)?;
    if cfg.epochs > 0 {
        out.model.set_stage(match base {
            BaseDefense::At => TrainingStage::AdversarialTraining,
            BaseDefense::Trades => TrainingStage::Trades,
        });
    }
    Ok(out)
}

/// Plain clean-data training with mean cross-entropy.
pub fn train_standard(
    model: Classifier,
    train: &LabeledDataset,
    monitor: Option<&LabeledDataset>,
    cfg: &TrainConfig,
    attack: &AttackConfig,
) -> Result<TrainOutcome> {
    let mon = Monitor {
        data: monitor.unwrap_or(train),
        attack: attack.clone(),
    };
    let zero = |x: &Tensor| Tensor::zeros(x.shape());
    let mut loss = |tape: &mut Tape, m: &Classifier, params: &[Var], x: &Tensor, y: &[usize], _seed: u64| {
        at_loss(tape, m, params, x, y, &zero(x)).map(Some)
    };
    let mut out = run_epochs(model, train, &mon, cfg, &mut loss)?;
    if cfg.epochs > 0 {
        out.model.set_stage(TrainingStage::Standard);
    }
    Ok(out)
}

/// Worst-example reweighted fine-tuning of an adversarially trained checkpoint.
///
/// `base` is the optimizer configuration of the original run; epochs and the
/// learning rate come from [`DefenseConfig::adml_train_config`].
pub fn train_adml(
    model_at: Classifier,
    train: &LabeledDataset,
    monitor: Option<&LabeledDataset>,
    base: &TrainConfig,
    defense: &DefenseConfig,
) -> Result<TrainOutcome> {
    defense.validate()?;
    ensure!(
        model_at.stage().is_adversarially_trained(),
        "fine-tuning needs an adversarially trained checkpoint, got {:?}",
        model_at.stage()
    );
    let cfg = defense.adml_train_config(base);
    let attack = defense.attack.clone();
    let mon = Monitor {
        data: monitor.unwrap_or(train),
        attack: attack.clone(),
    };
    let opts_base = AdmlLossOptions {
        base: defense.kind.base(),
        trades_beta: defense.trades_beta,
        treatment_set: defense.treatment_set,
        propensity: None,
    };
    let mut splitter = CrossFitter::new(defense.split_ratio, rng::derive(defense.seed, &[0x5B1D]))?;
    let split = defense.use_split_crossfit;
    let tau_source = defense.tau_source;

    let mut loss = |tape: &mut Tape, m: &Classifier, params: &[Var], x: &Tensor, y: &[usize], seed: u64| {
        if split && y.len() < 2 {
            return Ok(None);
        }
        let adv = pgd(m, x, y, &attack.with_seed(seed))?;
        let t = adv.zip_map(x, |a, b| a - b)?;
        let (parts1, parts2);
        let (d1, d2) = if split {
            let (i1, i2) = splitter.split(y.len())?;
            let y1: Vec<usize> = i1.iter().map(|&i| y[i]).collect();
            let y2: Vec<usize> = i2.iter().map(|&i| y[i]).collect();
            parts1 = (x.select_rows(&i1)?, y1, t.select_rows(&i1)?);
            parts2 = (x.select_rows(&i2)?, y2, t.select_rows(&i2)?);
            (
                Perturbed { x: &parts1.0, y: &parts1.1, t: &parts1.2 },
                Perturbed { x: &parts2.0, y: &parts2.1, t: &parts2.2 },
            )
        } else {
            let whole = Perturbed { x, y, t: &t };
            (whole, whole)
        };
        let propensity = match tau_source {
            TauSource::AttackedConfidence => None,
            TauSource::Propensity { restarts } => {
                let cfg = attack.with_seed(rng::derive(seed, &[0x9A0B]));
                let est = approx_propensity(m, d2.x, d2.y, &cfg, restarts)?;
                let own = m.predict_proba(&perturbed(d2.x, d2.t)?)?;
                Some(
                    (0..d2.y.len())
                        .map(|i| {
                            if est.worst[i] {
                                est.p[i]
                            } else {
                                own.row(i).iter().copied().fold(0.0, f64::max)
                            }
                        })
                        .collect::<Vec<f64>>(),
                )
            }
        };
        let opts = AdmlLossOptions {
            propensity: propensity.as_deref(),
            ..opts_base
        };
        Ok(Some(adml_loss(tape, m, params, d1, d2, opts)?.total))
    };
    let mut out = run_epochs(model_at, train, &mon, &cfg, &mut loss)?;
    if cfg.epochs > 0 {
        out.model.set_stage(TrainingStage::Adml);
    }
    Ok(out)
}

/// Clean accuracy of a batch, exposed for quick checks in tests and tools.
pub fn batch_accuracy(model: &Classifier, x: &Tensor, y: &[usize]) -> Result<f64> {
    accuracy_on(model, x, y)
}
