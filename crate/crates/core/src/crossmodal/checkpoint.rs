//! Checkpoint layout: 8-byte magic, `u32` format version, `u32` header
//! length, a JSON header `{config, vocab, tensors: [{name, shape}]}`, then
//! every tensor in header order as little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::encoder::Encoders;
use super::params::{tensor_specs, Params};
use super::vocab::Vocab;
use super::ModelError;
use crate::Scalar;

const MAGIC: &[u8; 8] = b"MKGXMODL";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocab,
    tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn save_checkpoint<T: Scalar>(enc: &Encoders<T>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let header = Header {
        config: enc.config.clone(),
        vocab: enc.vocab.clone(),
        tensors: tensor_specs(enc)
            .into_iter()
            .map(|s| TensorEntry {
                name: s.name,
                shape: s.shape,
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut result = Ok(());
    enc.visit("", &mut |_, _, data| {
        for &x in data {
            if result.is_ok() {
                result = w.write_all(&(x.as_f64() as f32).to_le_bytes());
            }
        }
    });
    result?;
    w.flush()?;
    Ok(())
}

/// Rebuilds the encoders from the stored config and vocabulary, rejecting
/// any tensor whose name or shape differs from what the config implies.
pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Encoders<T>, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;
    if header.config.vocab_size != header.vocab.len() {
        return Err(bad(format!(
            "config vocab_size {} but {} vocabulary entries",
            header.config.vocab_size,
            header.vocab.len()
        )));
    }
    let mut enc = Encoders::<T>::new(header.config, header.vocab)?;
    let expected = tensor_specs(&enc);
    if expected.len() != header.tensors.len() {
        return Err(bad(format!("expected {} tensors, found {}", expected.len(), header.tensors.len())));
    }
    for (e, t) in expected.iter().zip(&header.tensors) {
        if e.name != t.name || e.shape != t.shape {
            return Err(bad(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                t.name, t.shape, e.name, e.shape
            )));
        }
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let total: usize = expected.iter().map(|s| s.shape.iter().product::<usize>()).sum();
    if data.len() != total * 4 {
        return Err(bad(format!("expected {} data bytes, found {}", total * 4, data.len())));
    }
    let mut values = data
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
    enc.visit_mut("", &mut |_, _, slot| {
        for x in slot.iter_mut() {
            *x = values.next().expect("length checked");
        }
    });
    Ok(enc)
}
