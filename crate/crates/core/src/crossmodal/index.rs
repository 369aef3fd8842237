use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::encoder::Encoders;
use super::ModelError;
use crate::ingest::RawImage;
use crate::Scalar;

const MAGIC: &[u8; 8] = b"MKGINDEX";
const VERSION: u32 = 1;

/// Precomputed image CLS embeddings, one row per image id. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex<T> {
    ids: Vec<String>,
    rows: Array2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexHit {
    pub id: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    ids: Vec<String>,
}

impl<T: Scalar> EmbeddingIndex<T> {
    /// Errors on a length mismatch, duplicate ids or non-finite entries.
    pub fn from_rows(ids: Vec<String>, rows: Array2<T>) -> Result<Self, ModelError> {
        if ids.len() != rows.nrows() {
            return Err(ModelError::InvalidInput(format!("{} ids for {} rows", ids.len(), rows.nrows())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(ModelError::InvalidInput(format!("duplicate image id {dup}")));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidInput("non-finite embedding".into()));
        }
        Ok(EmbeddingIndex { ids, rows })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn row_of(&self, id: &str) -> Option<Array1<T>> {
        self.ids.iter().position(|x| x == id).map(|r| self.rows.row(r).to_owned())
    }

    /// Top `k` rows by dot product with `query`, best first; ties go to the
    /// smaller id. `k` is clipped to the index size.
    pub fn top_k(&self, query: &Array1<T>, k: usize) -> Result<Vec<IndexHit>, ModelError> {
        if self.is_empty() {
            return Err(ModelError::EmptyIndex);
        }
        if k == 0 {
            return Err(ModelError::InvalidInput("k must be at least 1".into()));
        }
        if query.len() != self.dim() {
            return Err(ModelError::InvalidInput(format!("query dim {} != {}", query.len(), self.dim())));
        }
        let scores = self.rows.dot(query);
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite scores")
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        Ok(order
            .into_iter()
            .take(k)
            .map(|r| IndexHit {
                id: self.ids[r].clone(),
                score: scores[r].as_f64(),
            })
            .collect())
    }

    /// One text forward, then a scan of the index.
    pub fn match_text(&self, enc: &Encoders<T>, text: &str, k: usize) -> Result<Vec<IndexHit>, ModelError> {
        if self.is_empty() {
            return Err(ModelError::EmptyIndex);
        }
        self.top_k(&enc.text_cls(text)?, k)
    }

    /// Binary file: magic, version, JSON header length and header, then the
    /// row-major matrix as little-endian f32.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let header = serde_json::to_vec(&Header {
            dim: self.dim(),
            ids: self.ids.clone(),
        })
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for &x in self.rows.iter() {
            w.write_all(&(x.as_f64() as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not an index file"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if u32::from_le_bytes(word) != VERSION {
            return Err(bad("unsupported index version"));
        }
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| bad(&e.to_string()))?;
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        if data.len() != header.ids.len() * header.dim * 4 {
            return Err(bad("index data length does not match header"));
        }
        let values: Vec<T> = data
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        let rows = Array2::from_shape_vec((header.ids.len(), header.dim), values).map_err(|e| bad(&e.to_string()))?;
        Self::from_rows(header.ids, rows)
    }
}

/// Encodes every image once. Images are resampled to the configured
/// geometry before patchifying.
pub fn build_index<T: Scalar>(enc: &Encoders<T>, images: &[(String, RawImage)]) -> Result<EmbeddingIndex<T>, ModelError> {
    let mut rows = Array2::zeros((images.len(), enc.config.d_model));
    for (r, (_, img)) in images.iter().enumerate() {
        rows.row_mut(r).assign(&enc.image_cls(img)?);
    }
    EmbeddingIndex::from_rows(images.iter().map(|(id, _)| id.clone()).collect(), rows)
}
