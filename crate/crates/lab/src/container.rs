//! Binary container for checkpoints and dataset caches.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ADVC" | version: u32 | kind: u8 | header_len: u64 | header (JSON) | count: u64 | count × f64
//! ```
//!
//! The f64 payload is stored as raw IEEE-754 bits, so a save/load round trip is
//! bit-exact.

use std::path::Path;

use advcausal_core::data::{LabeledDataset, Split};
use advcausal_core::models::{Classifier, ClassifierSpec, TrainingStage};
use advcausal_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{self, LabError, LabResult};

pub const MAGIC: &[u8; 4] = b"ADVC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Checkpoint = 1,
    Dataset = 2,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    spec: ClassifierSpec,
    stage: TrainingStage,
    shapes: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    num_classes: usize,
    split: Split,
    shape: Vec<usize>,
    labels: Vec<usize>,
}

fn encode(kind: Kind, header: &[u8], payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + header.len() + 8 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> LabResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(LabError::format(
                self.path,
                format!("byte {}", self.pos),
                format!("truncated while reading {what}"),
            ));
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> LabResult<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn fail(&self, at: usize, msg: impl Into<String>) -> LabError {
        LabError::format(self.path, format!("byte {at}"), msg)
    }
}

fn decode<'a>(bytes: &'a [u8], path: &'a Path, want: Kind) -> LabResult<(&'a [u8], Vec<f64>)> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(r.fail(0, "bad magic, not an ADVC container"));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(r.fail(4, format!("unsupported version {version}")));
    }
    let kind = r.take(1, "kind")?[0];
    if kind != want as u8 {
        return Err(r.fail(8, format!("container holds kind {kind}, expected {}", want as u8)));
    }
    let header_len = r.u64("header length")?;
    let header = r.take(usize::try_from(header_len).unwrap_or(usize::MAX), "header")?;
    let count_at = r.pos;
    let count = r.u64("payload length")?;
    let n = usize::try_from(count).ok().filter(|c| c.checked_mul(8).is_some());
    let Some(n) = n else {
        return Err(r.fail(count_at, "payload length overflows"));
    };
    let raw = r.take(n * 8, "payload")?;
    if r.pos != bytes.len() {
        return Err(r.fail(r.pos, "trailing bytes after payload"));
    }
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok((header, payload))
}

fn header_json<T: for<'de> Deserialize<'de>>(header: &[u8], path: &Path) -> LabResult<T> {
    serde_json::from_slice(header).map_err(|e| LabError::format(path, "header", e.to_string()))
}

pub fn encode_checkpoint(model: &Classifier) -> Vec<u8> {
    let header = CheckpointHeader {
        spec: model.spec().clone(),
        stage: model.stage(),
        shapes: model.params().iter().map(|p| p.shape().to_vec()).collect(),
    };
    let payload: Vec<f64> = model.params().iter().flat_map(|p| p.data().iter().copied()).collect();
    encode(
        Kind::Checkpoint,
        &serde_json::to_vec(&header).expect("checkpoint header serializes"),
        &payload,
    )
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> LabResult<Classifier> {
    let (header, payload) = decode(bytes, path, Kind::Checkpoint)?;
    let h: CheckpointHeader = header_json(header, path)?;
    let total: usize = h.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if total != payload.len() {
        return Err(LabError::format(
            path,
            "payload",
            format!("{} values for shapes totalling {total}", payload.len()),
        ));
    }
    let mut params = Vec::with_capacity(h.shapes.len());
    let mut offset = 0;
    for shape in h.shapes {
        let n: usize = shape.iter().product();
        params.push(Tensor::new(shape, payload[offset..offset + n].to_vec())?);
        offset += n;
    }
    Ok(Classifier::from_parts(h.spec, params, h.stage)?)
}

pub fn save_checkpoint(model: &Classifier, path: &Path) -> LabResult<()> {
    error::write(path, &encode_checkpoint(model))
}

pub fn load_checkpoint(path: &Path) -> LabResult<Classifier> {
    decode_checkpoint(&error::read(path)?, path)
}

pub fn encode_dataset(data: &LabeledDataset) -> Vec<u8> {
    let header = DatasetHeader {
        num_classes: data.num_classes(),
        split: data.split(),
        shape: data.inputs().shape().to_vec(),
        labels: data.labels().to_vec(),
    };
    encode(
        Kind::Dataset,
        &serde_json::to_vec(&header).expect("dataset header serializes"),
        data.inputs().data(),
    )
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> LabResult<LabeledDataset> {
    let (header, payload) = decode(bytes, path, Kind::Dataset)?;
    let h: DatasetHeader = header_json(header, path)?;
    let inputs = Tensor::new(h.shape, payload)?;
    Ok(LabeledDataset::new(inputs, h.labels, h.num_classes, h.split)?)
}

pub fn save_dataset(data: &LabeledDataset, path: &Path) -> LabResult<()> {
    error::write(path, &encode_dataset(data))
}

pub fn load_dataset(path: &Path) -> LabResult<LabeledDataset> {
    decode_dataset(&error::read(path)?, path)
}
