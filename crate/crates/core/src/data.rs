//! Labelled datasets and synthetic benchmark generation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Inputs in `[0, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    inputs: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    split: Split,
}

impl LabeledDataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        ensure!(inputs.shape().len() == 2, "inputs must be (n, input_dim), got {:?}", inputs.shape());
        ensure!(
            inputs.rows() == labels.len(),
            "{} inputs but {} labels",
            inputs.rows(),
            labels.len()
        );
        ensure!(num_classes >= 2, "need at least 2 classes");
        ensure!(
            labels.iter().all(|&c| c < num_classes),
            "label out of range for {} classes",
            num_classes
        );
        ensure!(
            inputs.data().iter().all(|v| (0.0..=1.0).contains(v)),
            "inputs must lie in [0, 1]"
        );
        Ok(Self {
            inputs,
            labels,
            num_classes,
            split,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    /// Rows `idx` as an `(inputs, labels)` batch.
    pub fn batch(&self, idx: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let x = self.inputs.select_rows(idx)?;
        let y = idx.iter().map(|&i| self.labels[i]).collect();
        Ok((x, y))
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let (x, y) = self.batch(idx)?;
        Self::new(x, y, self.num_classes, self.split)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Class `c` centred at distance `margin[c]` from the origin along its own direction.
    GaussianMixture,
    /// Concentric rings whose radius gaps are the per-class margins.
    Rings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub num_classes: usize,
    pub samples_per_class: Vec<usize>,
    pub input_dim: usize,
    pub class_margin: Vec<f64>,
    pub noise_scale: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.num_classes >= 2, "need at least 2 classes, got {}", self.num_classes);
        ensure!(
            self.samples_per_class.len() == self.num_classes,
            "samples_per_class has {} entries for {} classes",
            self.samples_per_class.len(),
            self.num_classes
        );
        ensure!(
            self.class_margin.len() == self.num_classes,
            "class_margin has {} entries for {} classes",
            self.class_margin.len(),
            self.num_classes
        );
        ensure!(
            self.class_margin.iter().all(|&m| m > 0.0 && m.is_finite()),
            "class margins must be positive"
        );
        ensure!(self.samples_per_class.iter().all(|&n| n > 0), "every class needs samples");
        ensure!(self.input_dim >= 1, "input_dim must be positive");
        ensure!(
            self.input_dim >= 2 || (self.num_classes == 2 && self.kind == SyntheticKind::GaussianMixture),
            "a 1-D input only supports a 2-class Gaussian mixture"
        );
        ensure!(self.noise_scale >= 0.0, "noise_scale must be non-negative");
        ensure!(
            self.test_ratio > 0.0 && self.test_ratio < 1.0,
            "test_ratio must lie in (0, 1)"
        );
        Ok(())
    }
}

/// Train and test halves of a generated benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTest {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Direction of class `c` in the plane of the first two coordinates.
fn direction(c: usize, classes: usize, dim: usize) -> Vec<f64> {
    let mut u = vec![0.0; dim];
    if dim == 1 {
        u[0] = if c == 0 { -1.0 } else { 1.0 };
    } else {
        let angle = 2.0 * PI * c as f64 / classes as f64;
        u[0] = libm::cos(angle);
        u[1] = libm::sin(angle);
    }
    u
}

/// Generates a seeded benchmark whose per-class margins control how close each
/// class sits to the decision boundaries.
///
/// Raw points are mapped into `[0, 1]` with one shared affine scale (global
/// min/max over all coordinates), which preserves the geometry. The test split
/// is stratified: `round(test_ratio · count)` samples of every class, at least
/// one when the class has two or more samples and the ratio is positive.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<TrainTest> {
    spec.validate()?;
    let dim = spec.input_dim;
    let mut rng = rng::rng_from(rng::derive(spec.seed, &[0x5EED]));
    let mut raw: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut radius = 0.0;
    for c in 0..spec.num_classes {
        radius += spec.class_margin[c];
        let u = direction(c, spec.num_classes, dim);
        for _ in 0..spec.samples_per_class[c] {
            let mut point: Vec<f64> = match spec.kind {
                SyntheticKind::GaussianMixture => u.iter().map(|v| v * spec.class_margin[c]).collect(),
                SyntheticKind::Rings => {
                    let angle = rng.random_range(0.0..2.0 * PI);
                    let mut p = vec![0.0; dim];
                    p[0] = radius * libm::cos(angle);
                    p[1] = radius * libm::sin(angle);
                    p
                }
            };
            for v in point.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += spec.noise_scale * z;
            }
            raw.extend(point);
            labels.push(c);
        }
    }

    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let scaled: Vec<f64> = raw
        .iter()
        .map(|&v| if range > 0.0 { ((v - lo) / range).clamp(0.0, 1.0) } else { 0.0 })
        .collect();

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    let mut start = 0;
    for &count in &spec.samples_per_class {
        let mut idx: Vec<usize> = (start..start + count).collect();
        idx.shuffle(&mut rng);
        let mut n_test = libm::round(spec.test_ratio * count as f64) as usize;
        if count >= 2 {
            n_test = n_test.clamp(1, count - 1);
        }
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
        start += count;
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let all = Tensor::new(vec![labels.len(), dim], scaled)?;
    let build = |idx: &[usize], split: Split| -> Result<LabeledDataset> {
        ensure!(!idx.is_empty(), "{:?} split would be empty", split);
        let x = all.select_rows(idx)?;
        let y = idx.iter().map(|&i| labels[i]).collect();
        LabeledDataset::new(x, y, spec.num_classes, split)
    };
    Ok(TrainTest {
        train: build(&train_idx, Split::Train)?,
        test: build(&test_idx, Split::Test)?,
    })
}
