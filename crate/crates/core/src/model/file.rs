//! `WNC1` model files: magic, u32 LE header length, JSON header, then the
//! parameter tensors as f32 LE in manifest order.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ClassifierConfig;
use super::network::{ModelShape, Network};
use super::train::{EpochStats, TrainedModel};
use crate::dataset::NormStats;
use crate::error::{Error, Result};
use crate::wavelet::WaveletSpec;

pub const MAGIC: &[u8; 4] = b"WNC1";
const MAX_HEADER: u32 = 64 << 20;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ClassifierConfig,
    shape: ModelShape,
    prevalence: f64,
    norm: NormStats,
    wavelet_spec: Option<WaveletSpec>,
    history: Vec<EpochStats>,
    tensors: Vec<TensorEntry>,
}

pub fn write_model<W: Write>(model: &TrainedModel, mut w: W) -> Result<()> {
    let tensors = model.network.tensors();
    let header = Header {
        config: model.config.clone(),
        shape: model.network.shape,
        prevalence: model.prevalence,
        norm: model.norm.clone(),
        wavelet_spec: model.wavelet_spec,
        history: model.history.clone(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorEntry { name: name.clone(), shape: shape.clone() })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, _, data) in &tensors {
        let mut bytes = Vec::with_capacity(data.len() * 4);
        for v in data.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<TrainedModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("file too short for a model header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected WNC1")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|_| Error::Format("truncated model header".into()))?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(Error::Format(format!("model header of {len} bytes is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(|_| Error::Format("truncated model header".into()))?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Format(format!("model header: {e}")))?;
    if !(header.prevalence > 0.0 && header.prevalence < 1.0) {
        return Err(Error::Format(format!("prevalence {} outside (0, 1)", header.prevalence)));
    }

    // Build the architecture, then overwrite every tensor from the file.
    let mut network = Network::init(&header.config, header.shape, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected: Vec<(String, Vec<usize>)> = network
        .tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    let listed: Vec<(String, Vec<usize>)> = header.tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
    if expected != listed {
        return Err(Error::Format("tensor manifest does not match the configured architecture".into()));
    }
    for slot in network.tensors_mut() {
        let mut bytes = vec![0u8; slot.len() * 4];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated parameter data".into()))?;
        for (v, b) in slot.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        if slot.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite parameter".into()));
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after parameter data".into()));
    }
    Ok(TrainedModel {
        config: header.config,
        network,
        prevalence: header.prevalence,
        norm: header.norm,
        wavelet_spec: header.wavelet_spec,
        history: header.history,
    })
}
