//! Binary checkpoint container.
//!
//! ```text
//! magic      4 bytes   "XLPC"
//! version    u32 LE    1
//! header_len u64 LE    byte length of the JSON header
//! header     JSON      {"task", "classes", "features", "adapter": {"rank", "alpha"} | null, "config"}
//! W0         f64 LE    classes × 2^bits, row-major
//! b          f64 LE    classes
//! A          f64 LE    rank × 2^bits, row-major (adapter only)
//! B          f64 LE    classes × rank, row-major (adapter only)
//! ```
//!
//! Floats are stored bit-exactly, so a load after a save reproduces the
//! classifier exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use super::linear::{LinearModel, LoraAdapter, Matrix};
use super::train::{Classifier, TrainConfig};
use super::{ModelError, Task};

pub const MAGIC: &[u8; 4] = b"XLPC";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct AdapterHeader {
    rank: usize,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    task: Task,
    classes: usize,
    features: FeatureConfig,
    adapter: Option<AdapterHeader>,
    config: TrainConfig,
}

fn write_floats(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_floats(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    (0..n)
        .map(|_| {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        })
        .collect()
}

pub fn write_checkpoint(classifier: &Classifier, mut w: impl Write) -> Result<(), ModelError> {
    let header = Header {
        task: classifier.task,
        classes: classifier.model.classes(),
        features: classifier.features,
        adapter: classifier.adapter.as_ref().map(|a| AdapterHeader {
            rank: a.rank(),
            alpha: a.alpha,
        }),
        config: classifier.config.clone(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let io = |e: std::io::Error| ModelError::Checkpoint(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    write_floats(&mut w, classifier.model.weights.as_slice()).map_err(io)?;
    write_floats(&mut w, &classifier.model.bias).map_err(io)?;
    if let Some(a) = &classifier.adapter {
        write_floats(&mut w, a.a.as_slice()).map_err(io)?;
        write_floats(&mut w, a.b.as_slice()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Classifier, ModelError> {
    let io = |e: std::io::Error| ModelError::Checkpoint(format!("truncated or unreadable checkpoint: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(ModelError::Checkpoint(format!("header length {len} is implausible")));
    }
    let mut header = vec![0u8; len as usize];
    r.read_exact(&mut header).map_err(io)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    header.features.validate()?;

    let dim = header.features.dim();
    let weights = Matrix::from_vec(
        header.classes,
        dim,
        read_floats(&mut r, header.classes * dim).map_err(io)?,
    )?;
    let bias = read_floats(&mut r, header.classes).map_err(io)?;
    let model = LinearModel::new(weights, bias)?;
    let adapter = match &header.adapter {
        Some(h) => {
            let a = Matrix::from_vec(h.rank, dim, read_floats(&mut r, h.rank * dim).map_err(io)?)?;
            let b = Matrix::from_vec(
                header.classes,
                h.rank,
                read_floats(&mut r, header.classes * h.rank).map_err(io)?,
            )?;
            Some(LoraAdapter::new(a, b, h.alpha)?)
        }
        None => None,
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes after checkpoint data".into()));
    }
    Classifier::new(header.task, header.features, model, adapter, header.config)
}

pub fn save_checkpoint(classifier: &Classifier, path: &Path) -> Result<(), ModelError> {
    let file = File::create(path).map_err(|e| ModelError::io(path, e))?;
    write_checkpoint(classifier, BufWriter::new(file))
}

pub fn load_checkpoint(path: &Path) -> Result<Classifier, ModelError> {
    let file = File::open(path).map_err(|e| ModelError::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
