//! Checkpoint directories: `manifest.json`, `weights.bin`, `tokenizer.json`.
//!
//! `weights.bin` layout (little endian): magic `CSTYW001`, u32 tensor count,
//! then per tensor: u32 name length, name bytes, u32 rank, u64 per dimension,
//! f64 values in row-major order.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{self, EncoderDims, Mode, ModelParams};
use super::tokenizer::CodeTokenizer;
use super::{EncoderConfig, Prediction, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::generation::clean_snippet;

const MAGIC: &[u8; 8] = b"CSTYW001";
const FORMAT: &str = "codestylo-checkpoint-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub encoder: EncoderConfig,
    pub train_config: TrainConfig,
    pub tokenizer: CodeTokenizer,
    pub params: ModelParams,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    encoder: EncoderConfig,
    train_config: TrainConfig,
    dims: EncoderDims,
    weights_sha256: String,
    tokenizer_sha256: String,
    history: TrainHistory,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_weights(params: &ModelParams) -> Vec<u8> {
    let tensors = params.named_tensors();
    let mut out = Vec::with_capacity(16 + 8 * params.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, values) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in &shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read_array<const N: usize>(cur: &mut Cursor<&[u8]>) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    cur.read_exact(&mut buf)
        .map_err(|_| Error::CheckpointMismatch("weights file is truncated".into()))?;
    Ok(buf)
}

pub fn decode_weights(bytes: &[u8], dims: EncoderDims) -> Result<ModelParams> {
    let mut cur = Cursor::new(bytes);
    if &read_array::<8>(&mut cur)? != MAGIC {
        return Err(Error::CheckpointMismatch("bad weights magic".into()));
    }
    let count = u32::from_le_bytes(read_array(&mut cur)?) as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u32::from_le_bytes(read_array(&mut cur)?) as usize;
        let mut name = vec![0u8; name_len];
        cur.read_exact(&mut name)
            .map_err(|_| Error::CheckpointMismatch("weights file is truncated".into()))?;
        let name = String::from_utf8(name).map_err(|_| Error::CheckpointMismatch("tensor name is not UTF-8".into()))?;
        let rank = u32::from_le_bytes(read_array(&mut cur)?) as usize;
        let shape: Vec<usize> = (0..rank)
            .map(|_| read_array::<8>(&mut cur).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<_>>()?;
        let n: usize = shape.iter().product();
        let values: Vec<f64> = (0..n)
            .map(|_| read_array::<8>(&mut cur).map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        tensors.push((name, shape, values));
    }
    if (cur.position() as usize) != bytes.len() {
        return Err(Error::CheckpointMismatch("trailing bytes after weights".into()));
    }
    ModelParams::from_tensors(dims, &tensors)
}

impl ModelCheckpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let weights = encode_weights(&self.params);
        let tokenizer = self.tokenizer.to_json()?;
        let manifest = Manifest {
            format: FORMAT.into(),
            encoder: self.encoder.clone(),
            train_config: self.train_config.clone(),
            dims: self.params.dims,
            weights_sha256: sha256_hex(&weights),
            tokenizer_sha256: self.tokenizer.hash(),
            history: self.history.clone(),
        };
        write_atomic(&dir.join("weights.bin"), &weights)?;
        write_atomic(&dir.join("tokenizer.json"), tokenizer.as_bytes())?;
        write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(())
    }

    /// Loads a checkpoint, verifying that weights and tokenizer match the
    /// hashes recorded in the manifest.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let manifest: Manifest = serde_json::from_slice(&read("manifest.json")?)?;
        if manifest.format != FORMAT {
            return Err(Error::CheckpointMismatch(format!("unknown checkpoint format {}", manifest.format)));
        }
        let weights = read("weights.bin")?;
        if sha256_hex(&weights) != manifest.weights_sha256 {
            return Err(Error::CheckpointMismatch("weights hash does not match manifest".into()));
        }
        let tok_text = String::from_utf8(read("tokenizer.json")?)
            .map_err(|_| Error::CheckpointMismatch("tokenizer is not UTF-8".into()))?;
        let tokenizer = CodeTokenizer::from_json(&tok_text)?;
        if tokenizer.hash() != manifest.tokenizer_sha256 {
            return Err(Error::CheckpointMismatch("tokenizer hash does not match manifest".into()));
        }
        if tokenizer.vocab_size() != manifest.dims.vocab_size {
            return Err(Error::CheckpointMismatch(format!(
                "tokenizer has {} entries, model expects {}",
                tokenizer.vocab_size(),
                manifest.dims.vocab_size
            )));
        }
        let params = decode_weights(&weights, manifest.dims)?;
        Ok(Self {
            encoder: manifest.encoder,
            train_config: manifest.train_config,
            tokenizer,
            params,
            history: manifest.history,
        })
    }

    /// Deterministic (eval mode) prediction for a code snippet.
    pub fn predict(&self, code: &str) -> Result<Prediction> {
        let seq = self.tokenizer.tokenize(&clean_snippet(code), self.params.dims.max_len)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, _) = model::forward(&self.params, &seq.ids, Mode::Eval, 0.0, &mut rng)?;
        Ok(Prediction::from_logits(logits))
    }

    pub fn predict_batch(&self, codes: &[&str]) -> Result<Vec<Prediction>> {
        use rayon::prelude::*;
        codes.par_iter().map(|c| self.predict(c)).collect()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
