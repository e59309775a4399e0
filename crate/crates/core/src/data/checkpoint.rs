//! Binary checkpoints: magic, version, JSON header, little-endian `f64`
//! payload and a SHA-256 trailer over everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Backbone, ModelHandle, OptimizerSpec, OptimizerState, Widths};
use crate::transform::{label_mapping, Shape};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SAFEAUGC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelHandle,
    pub optimizer: Option<OptimizerState>,
    /// Augmentation label order the model's head was trained with.
    pub mapping: Vec<String>,
    /// Hash of the resolved experiment configuration that produced it.
    pub config_hash: String,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(model: ModelHandle, optimizer: Option<OptimizerState>, config_hash: &str, epoch: usize) -> Self {
        Self {
            model,
            optimizer,
            mapping: label_mapping(),
            config_hash: config_hash.to_string(),
            epoch,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    backbone: Backbone,
    input: Shape,
    classes: usize,
    widths: Widths,
    mapping: Vec<String>,
    config_hash: String,
    epoch: usize,
    params: usize,
    optimizer: Option<OptimizerHeader>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    spec: OptimizerSpec,
    lr: f64,
    steps: u64,
    first: usize,
    second: usize,
}

fn push_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend(x.to_le_bytes());
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let header = Header {
        backbone: ckpt.model.backbone,
        input: ckpt.model.input,
        classes: ckpt.model.classes,
        widths: ckpt.model.widths,
        mapping: ckpt.mapping.clone(),
        config_hash: ckpt.config_hash.clone(),
        epoch: ckpt.epoch,
        params: ckpt.model.params.len(),
        optimizer: ckpt.optimizer.as_ref().map(|o| OptimizerHeader {
            spec: o.spec,
            lr: o.lr,
            steps: o.steps,
            first: o.first.len(),
            second: o.second.len(),
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(CHECKPOINT_VERSION.to_le_bytes());
    out.extend((json.len() as u64).to_le_bytes());
    out.extend(&json);
    push_f64s(&mut out, &ckpt.model.params);
    if let Some(o) = &ckpt.optimizer {
        push_f64s(&mut out, &o.first);
        push_f64s(&mut out, &o.second);
    }
    let digest = Sha256::digest(&out);
    out.extend(digest);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads and verifies a checkpoint. The stored label mapping must equal the
/// current catalog order.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = super::read_file(path)?;
    let integrity = |m: &str| Error::Integrity(format!("{}: {m}", path.display()));
    if bytes.len() < MAGIC.len() + 4 + 8 + 32 || &bytes[..8] != MAGIC {
        return Err(integrity("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(integrity("digest mismatch"));
    }
    let json_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
    let json = body.get(20..20 + json_len).ok_or_else(|| integrity("truncated header"))?;
    let header: Header = serde_json::from_slice(json)?;
    let mut rest = &body[20 + json_len..];
    let mut take = |n: usize| -> Result<Vec<f64>> {
        if rest.len() < n * 8 {
            return Err(integrity("truncated payload"));
        }
        let (head, tail) = rest.split_at(n * 8);
        rest = tail;
        Ok(head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let params = take(header.params)?;
    let optimizer = match &header.optimizer {
        Some(o) => Some(OptimizerState {
            spec: o.spec,
            lr: o.lr,
            steps: o.steps,
            first: take(o.first)?,
            second: take(o.second)?,
        }),
        None => None,
    };
    if !rest.is_empty() {
        return Err(integrity("trailing bytes"));
    }
    let expected = label_mapping();
    if header.mapping != expected {
        return Err(Error::MappingMismatch {
            expected,
            found: header.mapping,
        });
    }
    let model = ModelHandle {
        backbone: header.backbone,
        input: header.input,
        classes: header.classes,
        widths: header.widths,
        params,
    };
    if model.layout().total() != model.params.len() {
        return Err(integrity("parameter count does not match the architecture"));
    }
    Ok(Checkpoint {
        model,
        optimizer,
        mapping: header.mapping,
        config_hash: header.config_hash,
        epoch: header.epoch,
    })
}
