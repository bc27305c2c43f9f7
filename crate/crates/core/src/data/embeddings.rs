//! Binary image-embedding files.
//!
//! ```text
//! "VEMB" | u32 version | u64 count | u32 image_dim | count × (u32 id length, id bytes, image_dim × f32)
//! ```
//!
//! All numbers little-endian. Entries are written in photo-id order.

use std::collections::BTreeMap;
use std::path::Path;

use super::DataError;
use crate::binio::{put_bytes_u32, put_u32, put_u64, write_atomic, Reader, Truncated};
use crate::model::ImageEmbedding;

pub const VEMB_MAGIC: &[u8; 4] = b"VEMB";
pub const VEMB_VERSION: u32 = 1;

impl From<Truncated> for DataError {
    fn from(_: Truncated) -> Self {
        DataError::Truncated
    }
}

/// Photo id to embedding, all of one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    image_dim: usize,
    vectors: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(image_dim: usize) -> Self {
        Self {
            image_dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn image_dim(&self) -> usize {
        self.image_dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, photo_id: impl Into<String>, values: Vec<f32>) -> Result<(), DataError> {
        let photo_id = photo_id.into();
        if values.len() != self.image_dim {
            return Err(DataError::DimMismatch {
                photo_id,
                expected: self.image_dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Corrupt(format!("photo {photo_id:?} has a non-finite value")));
        }
        if self.vectors.contains_key(&photo_id) {
            return Err(DataError::DuplicatePhoto(photo_id));
        }
        self.vectors.insert(photo_id, values);
        Ok(())
    }

    pub fn raw(&self, photo_id: &str) -> Option<&[f32]> {
        self.vectors.get(photo_id).map(Vec::as_slice)
    }

    pub fn get(&self, photo_id: &str) -> Option<ImageEmbedding> {
        self.raw(photo_id)
            .map(|v| ImageEmbedding::new(photo_id, v.iter().map(|&x| x as f64).collect()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Adds every entry of `other`; ids must not overlap.
    pub fn merge(&mut self, other: EmbeddingStore) -> Result<(), DataError> {
        for (id, v) in other.vectors {
            self.insert(id, v)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.len() * (8 + 4 * self.image_dim));
        out.extend_from_slice(VEMB_MAGIC);
        put_u32(&mut out, VEMB_VERSION);
        put_u64(&mut out, self.len() as u64);
        put_u32(&mut out, self.image_dim as u32);
        for (id, values) in &self.vectors {
            put_bytes_u32(&mut out, id.as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != VEMB_MAGIC {
            return Err(DataError::Corrupt("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VEMB_VERSION {
            return Err(DataError::VersionMismatch {
                found: version,
                expected: VEMB_VERSION,
            });
        }
        let count = r.u64()?;
        let dim = r.u32()? as usize;
        let mut store = Self::new(dim);
        for _ in 0..count {
            let id = std::str::from_utf8(r.bytes_u32()?)
                .map_err(|_| DataError::Corrupt("photo id is not UTF-8".into()))?
                .to_string();
            let values = (0..dim).map(|_| r.f32()).collect::<Result<Vec<_>, _>>()?;
            store.insert(id, values)?;
        }
        if r.remaining() != 0 {
            return Err(DataError::Corrupt(format!("{} trailing bytes", r.remaining())));
        }
        Ok(store)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore, DataError> {
    EmbeddingStore::from_bytes(&std::fs::read(path)?)
}

pub fn save_embeddings(path: &Path, store: &EmbeddingStore) -> Result<(), DataError> {
    write_atomic(path, &store.to_bytes())?;
    Ok(())
}
