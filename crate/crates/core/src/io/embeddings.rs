use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Embedding;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

/// Norm deviation above which a record is renormalised with a warning.
const WARN_DEVIATION: f64 = 1e-3;
/// Records whose norm falls below this are rejected as collapsed.
const MIN_NORM: f64 = 0.5;

/// Reads an `EMB1` sidecar: magic, little-endian `u32` dimension, then one
/// record of `dim` little-endian `f32` values per detection.
pub fn read_embeddings(path: &Path, expected_count: Option<usize>) -> Result<Vec<Embedding>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(path, &bytes, expected_count)
}

fn parse_embeddings(path: &Path, bytes: &[u8], expected_count: Option<usize>) -> Result<Vec<Embedding>> {
    if bytes.len() < 8 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::format(path, "missing EMB1 header"));
    }
    let dim = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if dim == 0 {
        return Err(Error::format(path, "embedding dimension is zero"));
    }
    let payload = &bytes[8..];
    let record_len = dim * 4;
    let mut embeddings = Vec::with_capacity(payload.len() / record_len);
    for (index, chunk) in payload.chunks(record_len).enumerate() {
        if chunk.len() != record_len {
            return Err(Error::format(
                path,
                format!("record {index} is truncated: {} of {record_len} bytes", chunk.len()),
            ));
        }
        let values: Vec<f32> = chunk.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let norm = values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < MIN_NORM {
            return Err(Error::format(path, format!("record {index} has norm {norm}, too small to renormalize")));
        }
        if (norm - 1.0).abs() > WARN_DEVIATION {
            log::warn!("{}: record {index} has norm {norm:.4}; renormalizing", path.display());
        }
        let e = Embedding::normalized(values).map_err(|e| Error::format(path, format!("record {index}: {e}")))?;
        embeddings.push(e);
    }
    if let Some(n) = expected_count {
        if n != embeddings.len() {
            return Err(Error::format(path, format!("{} embeddings for {n} detections", embeddings.len())));
        }
    }
    Ok(embeddings)
}

pub(crate) fn encode_embeddings(dim: usize, embeddings: &[Embedding]) -> Result<Vec<u8>> {
    let mut bytes = Vec::with_capacity(8 + embeddings.len() * dim * 4);
    bytes.extend_from_slice(EMBEDDING_MAGIC);
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::EmbeddingDimension { expected: dim, actual: e.dim() });
        }
        for v in e.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

pub fn write_embeddings(path: &Path, dim: usize, embeddings: &[Embedding]) -> Result<()> {
    let bytes = encode_embeddings(dim, embeddings)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
