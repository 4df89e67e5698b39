//! Adversarial double machine learning at desk scale.
//!
//! This crate is `no_std` (it needs `alloc`). It carries the numerical side of the
//! project: a small reverse-mode autodiff engine over dense `f64` tensors, MLP
//! classifiers, synthetic datasets, l-inf attacks, adversarial training loops
//! (standard AT, a TRADES-style baseline and the worst-example reweighted
//! fine-tuning), estimators for the causal parameter of adversarial
//! perturbations, and per-class robustness evaluation.
//!
//! File formats, reports, plotting and the command-line driver live in the
//! `advcausal-lab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attacks;
pub mod autodiff;
pub mod causal;
pub mod data;
pub mod defenses;
mod error;
pub mod eval;
pub mod models;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Floor applied to probabilities before `ln` or reciprocal.
pub const PROB_FLOOR: f64 = 1e-12;
