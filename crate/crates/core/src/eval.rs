//! Clean and robust accuracy, per class, with bottom-k aggregation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::attacks::{run_attack_from, AttackConfig, AttackKind};
use crate::causal::RelativeRatio;
use crate::data::LabeledDataset;
use crate::error::{ensure, Result};
use crate::models::Classifier;
use crate::tensor::Tensor;

/// Rows per attack invocation during evaluation.
pub const EVAL_CHUNK: usize = 256;

/// Correct/total counts per class. Merging tallies from disjoint shards gives
/// the tally of their union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl ClassTally {
    pub fn new(num_classes: usize) -> Self {
        Self {
            correct: vec![0; num_classes],
            total: vec![0; num_classes],
        }
    }

    pub fn record(&mut self, predicted: &[usize], labels: &[usize]) {
        for (&p, &y) in predicted.iter().zip(labels) {
            self.total[y] += 1;
            if p == y {
                self.correct[y] += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &ClassTally) {
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }

    pub fn accuracy(&self) -> ClassAccuracy {
        let n: usize = self.total.iter().sum();
        let c: usize = self.correct.iter().sum();
        ClassAccuracy {
            overall: if n == 0 { 0.0 } else { c as f64 / n as f64 },
            per_class: self
                .correct
                .iter()
                .zip(&self.total)
                .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                .collect(),
            correct: self.correct.clone(),
            total: self.total.clone(),
        }
    }
}

/// Overall and per-class accuracy. Classes absent from the data report 0 with `total = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub overall: f64,
    pub per_class: Vec<f64>,
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl ClassAccuracy {
    /// Unweighted mean over classes.
    pub fn class_mean(&self) -> f64 {
        self.per_class.iter().sum::<f64>() / self.per_class.len() as f64
    }
}

pub fn clean_accuracy(model: &Classifier, data: &LabeledDataset) -> Result<ClassAccuracy> {
    ensure!(!data.is_empty(), "cannot evaluate an empty dataset");
    let mut tally = ClassTally::new(data.num_classes());
    let pred = model.predict(data.inputs())?;
    tally.record(&pred, data.labels());
    Ok(tally.accuracy())
}

/// Tally of attack `kind` on rows `start..end` of `data`, processed in chunks of
/// [`EVAL_CHUNK`] with sample indices preserved for seeding.
pub fn robust_tally(
    model: &Classifier,
    data: &LabeledDataset,
    start: usize,
    end: usize,
    kind: AttackKind,
    cfg: &AttackConfig,
) -> Result<ClassTally> {
    ensure!(start < end && end <= data.len(), "bad row range {}..{}", start, end);
    let mut tally = ClassTally::new(data.num_classes());
    let mut lo = start;
    while lo < end {
        let hi = (lo + EVAL_CHUNK).min(end);
        let idx: Vec<usize> = (lo..hi).collect();
        let (x, y) = data.batch(&idx)?;
        let adv = run_attack_from(kind, model, &x, &y, cfg, lo as u64)?;
        tally.record(&model.predict(&adv)?, &y);
        lo = hi;
    }
    Ok(tally)
}

/// Accuracy under attack, overall and grouped by true class.
pub fn robust_accuracy(
    model: &Classifier,
    data: &LabeledDataset,
    kind: AttackKind,
    cfg: &AttackConfig,
) -> Result<ClassAccuracy> {
    ensure!(!data.is_empty(), "cannot evaluate an empty dataset");
    Ok(robust_tally(model, data, 0, data.len(), kind, cfg)?.accuracy())
}

/// Number of classes in the bottom `k_percent`: `⌈k% · d⌉`.
pub fn bottom_k_count(num_classes: usize, k_percent: f64) -> usize {
    let raw = k_percent * num_classes as f64 / 100.0;
    let count = libm::ceil(raw - 1e-9) as usize;
    count.clamp(1, num_classes)
}

/// Class indices sorted by ascending accuracy (ties by index), first `⌈k% · d⌉`.
pub fn bottom_k_classes(per_class: &[f64], k_percent: f64) -> Result<Vec<usize>> {
    ensure!(!per_class.is_empty(), "no classes to rank");
    ensure!(
        k_percent > 0.0 && k_percent <= 100.0,
        "k_percent must lie in (0, 100], got {}",
        k_percent
    );
    let mut order: Vec<usize> = (0..per_class.len()).collect();
    order.sort_by(|&a, &b| per_class[a].total_cmp(&per_class[b]).then(a.cmp(&b)));
    order.truncate(bottom_k_count(per_class.len(), k_percent));
    Ok(order)
}

/// Mean accuracy of the worst `⌈k% · d⌉` classes.
pub fn bottom_k_cumulative(per_class: &[f64], k_percent: f64) -> Result<f64> {
    let classes = bottom_k_classes(per_class, k_percent)?;
    Ok(classes.iter().map(|&c| per_class[c]).sum::<f64>() / classes.len() as f64)
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// The bottom-k levels reported by default.
pub const DEFAULT_BOTTOM_K: [f64; 3] = [10.0, 30.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomK {
    pub k_percent: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub attack: AttackKind,
    pub config: AttackConfig,
    pub accuracy: ClassAccuracy,
    pub bottom_k: Vec<BottomK>,
}

/// Evaluation of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model_id: String,
    pub clean: ClassAccuracy,
    pub attacks: Vec<AttackResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub schema_version: u32,
    pub dataset_id: String,
    pub num_classes: usize,
    pub seed: u64,
    pub models: Vec<ModelEvaluation>,
    /// Present when a baseline and a fine-tuned model are compared.
    pub relative_ratio: Option<RelativeRatio>,
}

fn bottom_k_block(per_class: &[f64], ks: &[f64]) -> Result<Vec<BottomK>> {
    ks.iter()
        .map(|&k| {
            Ok(BottomK {
                k_percent: k,
                accuracy: bottom_k_cumulative(per_class, k)?,
            })
        })
        .collect()
}

/// Assembles the evaluation of `model` from already computed accuracies.
pub fn assemble_evaluation(
    model_id: String,
    clean: ClassAccuracy,
    attacks: Vec<(AttackKind, AttackConfig, ClassAccuracy)>,
    ks: &[f64],
) -> Result<ModelEvaluation> {
    let attacks = attacks
        .into_iter()
        .map(|(attack, config, accuracy)| {
            Ok(AttackResult {
                bottom_k: bottom_k_block(&accuracy.per_class, ks)?,
                attack,
                config,
                accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelEvaluation {
        model_id,
        clean,
        attacks,
    })
}

/// Serial evaluation of `model` under every attack in `attacks`.
pub fn evaluate_model(
    model_id: String,
    model: &Classifier,
    data: &LabeledDataset,
    attacks: &[(AttackKind, AttackConfig)],
    ks: &[f64],
) -> Result<ModelEvaluation> {
    let clean = clean_accuracy(model, data)?;
    let results = attacks
        .iter()
        .map(|(kind, cfg)| Ok((*kind, cfg.clone(), robust_accuracy(model, data, *kind, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    assemble_evaluation(model_id, clean, results, ks)
}

/// Clean-input accuracy as an [`AttackConfig`]-free helper over raw tensors.
pub fn accuracy_on(model: &Classifier, x: &Tensor, y: &[usize]) -> Result<f64> {
    let pred = model.predict(x)?;
    Ok(pred.iter().zip(y).filter(|(p, l)| p == l).count() as f64 / y.len().max(1) as f64)
}
