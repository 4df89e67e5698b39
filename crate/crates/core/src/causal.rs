//! Causal parameter of adversarial perturbations.
//!
//! The treatment is a worst perturbation `t` (one that flips the prediction).
//! Its propensity `p(T = t | x)` is approximated by the attacked top-class
//! confidence averaged over random restarts. With it:
//!
//! * the orthogonalized interventional expectation is
//!   `E[f(x + t) + (y − f(x + t)) / p]`;
//! * the per-sample causal parameter is `θ̂ = −(1/p − 1) · ∂f(x + t)/∂t`, reduced
//!   to a scalar magnitude and aggregated per true class.
//!
//! The residual models behind the partially linear setup are assumptions only
//! and are never materialized.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::attacks::{pgd, select_worst, AttackConfig, WorstBatch};
use crate::error::{contract, ensure, Error, Result};
use crate::eval::bottom_k_classes;
use crate::models::Classifier;
use crate::rng;
use crate::tensor::{argmax, Tensor};
use crate::PROB_FLOOR;

/// Default number of attack restarts for the propensity.
pub const DEFAULT_RESTARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityEstimate {
    /// `p(T = t | x)` per sample, at least [`PROB_FLOOR`].
    pub p: Vec<f64>,
    pub restarts: usize,
    /// `confidences[i][r]`: attacked-class confidence of restart `r`, `None` if it did not flip.
    pub confidences: Vec<Vec<Option<f64>>>,
    /// Whether at least one restart flipped the sample.
    pub worst: Vec<bool>,
}

/// Runs `m` random-start attacks and averages the attacked-class confidence
/// over the restarts that flipped the prediction.
///
/// Restart `r` uses seed `derive(attack.seed, [r])`.
pub fn approx_propensity(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    attack: &AttackConfig,
    m: usize,
) -> Result<PropensityEstimate> {
    ensure!(m >= 1, "propensity needs at least one restart");
    ensure!(attack.random_start, "propensity restarts need a random start");
    ensure!(y.len() == x.rows(), "{} labels for {} rows", y.len(), x.rows());
    let n = y.len();
    let mut confidences = vec![Vec::with_capacity(m); n];
    for r in 0..m {
        let cfg = attack.with_seed(rng::derive(attack.seed, &[r as u64]));
        let adv = pgd(model, x, y, &cfg)?;
        let probs = model.predict_proba(&adv)?;
        for (i, &label) in y.iter().enumerate() {
            let row = probs.row(i);
            let j = argmax(row);
            confidences[i].push((j != label).then_some(row[j]));
        }
    }
    let mut p = Vec::with_capacity(n);
    let mut worst = Vec::with_capacity(n);
    for c in &confidences {
        let flipped: Vec<f64> = c.iter().flatten().copied().collect();
        if flipped.is_empty() {
            p.push(PROB_FLOOR);
            worst.push(false);
        } else {
            let mean = flipped.iter().sum::<f64>() / flipped.len() as f64;
            p.push(mean.max(PROB_FLOOR));
            worst.push(true);
        }
    }
    Ok(PropensityEstimate {
        p,
        restarts: m,
        confidences,
        worst,
    })
}

fn one_hot_check(model: &Classifier, x: &Tensor, y: &[usize], p: &[f64]) -> Result<()> {
    ensure!(!y.is_empty(), "interventional expectation needs samples");
    ensure!(y.len() == x.rows(), "{} labels for {} rows", y.len(), x.rows());
    ensure!(p.len() == y.len(), "{} propensities for {} samples", p.len(), y.len());
    ensure!(
        p.iter().all(|&v| v > 0.0 && v <= 1.0),
        "propensities must lie in (0, 1]"
    );
    ensure!(
        y.iter().all(|&c| c < model.num_classes()),
        "label out of range for {} classes",
        model.num_classes()
    );
    Ok(())
}

/// `mean_i [ f(x_i + t_i) + (e_{y_i} − f(x_i + t_i)) / p_i ]` as a length-d vector.
pub fn interventional_expectation(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    t: &Tensor,
    p: &[f64],
) -> Result<Vec<f64>> {
    one_hot_check(model, x, y, p)?;
    let probs = model.predict_proba(&x.zip_map(t, |a, b| a + b)?)?;
    let d = model.num_classes();
    let mut acc = vec![0.0; d];
    for (i, &label) in y.iter().enumerate() {
        for (j, (a, &f)) in acc.iter_mut().zip(probs.row(i)).enumerate() {
            let target = if j == label { 1.0 } else { 0.0 };
            *a += f + (target - f) / p[i];
        }
    }
    let n = y.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Directional finite difference of [`interventional_expectation`] along each
/// sample's own `t / ‖t‖₂`, with the propensities held fixed.
///
/// Samples with `t = 0` have no direction and contribute zero.
pub fn finite_diff_theta(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    t: &Tensor,
    epsilon: f64,
    p: &[f64],
) -> Result<Vec<f64>> {
    ensure!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive, got {}", epsilon);
    ensure!(x.shape() == t.shape(), "x and t shapes differ");
    let dim = t.cols();
    let mut stepped = t.clone();
    for row in stepped.data_mut().chunks_mut(dim) {
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v += epsilon * *v / norm;
            }
        }
    }
    let base = interventional_expectation(model, x, y, t, p)?;
    let moved = interventional_expectation(model, x, y, &stepped, p)?;
    Ok(moved.iter().zip(&base).map(|(a, b)| (a - b) / epsilon).collect())
}

/// How a per-sample Jacobian is reduced to a magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    /// Mean absolute entry.
    #[default]
    MeanAbs,
    /// Euclidean norm of the flattened Jacobian.
    L2,
}

impl NormChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::MeanAbs => "mean_abs",
            Self::L2 => "l2",
        }
    }

    pub fn reduce(self, values: &[f64]) -> f64 {
        match self {
            Self::MeanAbs => values.iter().map(|v| v.abs()).sum::<f64>() / values.len().max(1) as f64,
            Self::L2 => libm::sqrt(values.iter().map(|v| v * v).sum::<f64>()),
        }
    }
}

impl FromStr for NormChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_abs" => Ok(Self::MeanAbs),
            "l2" => Ok(Self::L2),
            other => Err(contract(alloc::format!("unknown norm '{other}'"))),
        }
    }
}

/// Magnitudes of `θ̂` per sample and per true class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEstimate {
    pub model_id: String,
    pub dataset_id: String,
    pub attack: Option<AttackConfig>,
    pub norm: NormChoice,
    /// True label of each contributing sample.
    pub labels: Vec<usize>,
    pub propensity: Vec<f64>,
    /// Reduced `|θ̂|` of each sample.
    pub magnitudes: Vec<f64>,
    /// Mean magnitude per true class; zero for classes without samples.
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
    /// Mean over samples, i.e. the count-weighted mean of `per_class`.
    pub overall: f64,
}

impl CausalEstimate {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn with_metadata(mut self, model_id: &str, dataset_id: &str, attack: Option<AttackConfig>) -> Self {
        self.model_id = model_id.into();
        self.dataset_id = dataset_id.into();
        self.attack = attack;
        self
    }

    /// Count-weighted mean magnitude over `classes`; `None` if they hold no samples.
    pub fn magnitude_over(&self, classes: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for &c in classes {
            total += self.per_class[c] * self.class_counts[c] as f64;
            count += self.class_counts[c];
        }
        (count > 0).then(|| total / count as f64)
    }
}

/// `−(1/p_i − 1) · ∂f(x_i + t_i)/∂t` for every row of `worst`, each `(d, input_dim)`.
pub fn weighted_jacobians(worst: &WorstBatch, model: &Classifier, p: &[f64]) -> Result<Vec<Tensor>> {
    ensure!(!worst.is_empty(), "causal estimate needs a nonempty worst batch");
    ensure!(
        p.len() == worst.len(),
        "{} propensities for {} worst samples",
        p.len(),
        worst.len()
    );
    ensure!(
        p.iter().all(|&v| v > 0.0 && v <= 1.0),
        "propensities must lie in (0, 1]"
    );
    let adv = worst.adversarial().ok_or_else(|| contract("empty worst batch"))?;
    let jac = model.input_jacobian(&adv)?;
    Ok(jac
        .into_iter()
        .zip(p)
        .map(|(j, &pi)| {
            let w = -(1.0 / pi - 1.0);
            j.map(|v| w * v)
        })
        .collect())
}

/// Per-sample `θ̂` magnitudes aggregated by true label.
pub fn estimate_theta(
    worst: &WorstBatch,
    model: &Classifier,
    p: &[f64],
    norm: NormChoice,
) -> Result<CausalEstimate> {
    let terms = weighted_jacobians(worst, model, p)?;
    let d = model.num_classes();
    let magnitudes: Vec<f64> = terms.iter().map(|j| norm.reduce(j.data())).collect();
    let mut sums = vec![0.0; d];
    let mut counts = vec![0usize; d];
    for (&label, &m) in worst.y.iter().zip(&magnitudes) {
        sums[label] += m;
        counts[label] += 1;
    }
    let per_class = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let overall = magnitudes.iter().sum::<f64>() / magnitudes.len() as f64;
    Ok(CausalEstimate {
        model_id: String::new(),
        dataset_id: String::new(),
        attack: None,
        norm,
        labels: worst.y.clone(),
        propensity: p.to_vec(),
        magnitudes,
        per_class,
        class_counts: counts,
        overall,
    })
}

/// Attacks `x`, keeps the flipped samples, estimates their propensity with
/// `restarts` restarts and drops those no restart flips.
///
/// Returns the surviving worst batch with aligned propensities.
pub fn treatment_batch(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    attack: &AttackConfig,
    restarts: usize,
) -> Result<(WorstBatch, Vec<f64>)> {
    let adv = pgd(model, x, y, attack)?;
    let worst = select_worst(model, x, y, &adv)?;
    let clean = worst.clean().ok_or_else(|| contract("the attack flipped no sample"))?;
    let prop = approx_propensity(model, &clean, &worst.y, attack, restarts)?;
    let keep: Vec<usize> = (0..worst.len()).filter(|&i| prop.worst[i]).collect();
    ensure!(!keep.is_empty(), "no restart flipped any worst sample");
    let p = keep.iter().map(|&i| prop.p[i]).collect();
    Ok((subset_worst(&worst, &keep), p))
}

/// [`treatment_batch`] followed by [`estimate_theta`].
pub fn estimate_on(
    model: &Classifier,
    x: &Tensor,
    y: &[usize],
    attack: &AttackConfig,
    restarts: usize,
    norm: NormChoice,
) -> Result<CausalEstimate> {
    let (worst, p) = treatment_batch(model, x, y, attack, restarts)?;
    Ok(estimate_theta(&worst, model, &p, norm)?.with_metadata("", "", Some(attack.clone())))
}

fn subset_worst(w: &WorstBatch, keep: &[usize]) -> WorstBatch {
    let dim = w.input_dim;
    let rows = |v: &[f64]| -> Vec<f64> { keep.iter().flat_map(|&i| v[i * dim..(i + 1) * dim].iter().copied()).collect() };
    WorstBatch {
        indices: keep.iter().map(|&i| w.indices[i]).collect(),
        input_dim: dim,
        x: rows(&w.x),
        y: keep.iter().map(|&i| w.y[i]).collect(),
        t: rows(&w.t),
        attacked_class: keep.iter().map(|&i| w.attacked_class[i]).collect(),
        confidence: keep.iter().map(|&i| w.confidence[i]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRatio {
    pub k_percent: f64,
    pub classes: Vec<usize>,
    pub ratio: f64,
}

/// `ρ = 100 · |θ_fine-tuned| / |θ_baseline|` over bottom-k classes and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeRatio {
    pub norm: NormChoice,
    pub per_k: Vec<KRatio>,
    pub avg: f64,
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Result<f64> {
    match den {
        Some(d) if d > 0.0 => Ok(100.0 * num.unwrap_or(0.0) / d),
        _ => Err(contract("baseline causal magnitude is zero")),
    }
}

/// `ρ` over an explicit class subset.
pub fn ratio_over(adml: &CausalEstimate, at: &CausalEstimate, classes: &[usize]) -> Result<f64> {
    check_pair(adml, at)?;
    ensure!(
        classes.iter().all(|&c| c < at.num_classes()),
        "class index out of range"
    );
    ratio(adml.magnitude_over(classes), at.magnitude_over(classes))
}

fn check_pair(adml: &CausalEstimate, at: &CausalEstimate) -> Result<()> {
    ensure!(adml.norm == at.norm, "estimates use different norms");
    ensure!(
        adml.num_classes() == at.num_classes(),
        "estimates cover different class counts"
    );
    ensure!(
        adml.dataset_id == at.dataset_id,
        "estimates come from different datasets"
    );
    Ok(())
}

/// `ρ_k` for each `k` in `ks`, with bottom-k classes chosen by the baseline's
/// per-class robust accuracy, plus `ρ_Avg` over all samples.
pub fn relative_ratio(
    adml: &CausalEstimate,
    at: &CausalEstimate,
    at_robust_per_class: &[f64],
    ks: &[f64],
) -> Result<RelativeRatio> {
    check_pair(adml, at)?;
    ensure!(
        at_robust_per_class.len() == at.num_classes(),
        "{} accuracies for {} classes",
        at_robust_per_class.len(),
        at.num_classes()
    );
    let per_k = ks
        .iter()
        .map(|&k| {
            let classes = bottom_k_classes(at_robust_per_class, k)?;
            Ok(KRatio {
                k_percent: k,
                ratio: ratio(adml.magnitude_over(&classes), at.magnitude_over(&classes))?,
                classes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..at.num_classes()).collect();
    Ok(RelativeRatio {
        norm: at.norm,
        per_k,
        avg: ratio(adml.magnitude_over(&all), at.magnitude_over(&all))?,
    })
}
