//! Sharded evaluation over a read-only model snapshot.
//!
//! Every sample's attack is seeded by its global row index, so the result does
//! not depend on the number of threads.

use std::ops::Range;

use advcausal_core::attacks::{run_attack_from, AttackConfig, AttackKind};
use advcausal_core::data::LabeledDataset;
use advcausal_core::eval::{robust_tally, ClassAccuracy, ClassTally};
use advcausal_core::models::Classifier;
use advcausal_core::{Error, Tensor};

use crate::error::LabResult;

/// `threads` contiguous row ranges covering `0..n` (fewer if `n` is small).
pub fn shards(n: usize, threads: usize) -> Vec<Range<usize>> {
    let t = threads.clamp(1, n.max(1));
    let base = n / t;
    let extra = n % t;
    let mut out = Vec::with_capacity(t);
    let mut lo = 0;
    for i in 0..t {
        let len = base + usize::from(i < extra);
        if len > 0 {
            out.push(lo..lo + len);
        }
        lo += len;
    }
    out
}

fn run_sharded<T: Send>(
    n: usize,
    threads: usize,
    job: impl Fn(Range<usize>) -> advcausal_core::Result<T> + Sync,
) -> LabResult<Vec<T>> {
    let ranges = shards(n, threads);
    if ranges.len() <= 1 {
        return Ok(ranges.into_iter().map(&job).collect::<Result<Vec<_>, _>>()?);
    }
    let results: Vec<advcausal_core::Result<T>> = std::thread::scope(|s| {
        let handles: Vec<_> = ranges.into_iter().map(|r| s.spawn(|| job(r))).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}

pub fn robust_accuracy_par(
    model: &Classifier,
    data: &LabeledDataset,
    kind: AttackKind,
    cfg: &AttackConfig,
    threads: usize,
) -> LabResult<ClassAccuracy> {
    if data.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty dataset".into()).into());
    }
    let tallies = run_sharded(data.len(), threads, |r| robust_tally(model, data, r.start, r.end, kind, cfg))?;
    let mut total = ClassTally::new(data.num_classes());
    for t in &tallies {
        total.merge(t);
    }
    Ok(total.accuracy())
}

/// Adversarial inputs for every row of `data`.
pub fn attack_par(
    model: &Classifier,
    data: &LabeledDataset,
    kind: AttackKind,
    cfg: &AttackConfig,
    threads: usize,
) -> LabResult<Tensor> {
    let parts = run_sharded(data.len(), threads, |r| {
        let idx: Vec<usize> = r.clone().collect();
        let (x, y) = data.batch(&idx)?;
        run_attack_from(kind, model, &x, &y, cfg, r.start as u64)
    })?;
    let dim = data.input_dim();
    let flat: Vec<f64> = parts.into_iter().flat_map(Tensor::into_data).collect();
    Ok(Tensor::new(vec![data.len(), dim], flat)?)
}
