//! Nearest-neighbor search over unit embeddings: an HNSW graph index and an
//! exact flat index used as its oracle.

mod hnsw;
mod io;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hnsw::HnswIndex;
pub use io::{Footprint, INDEX_MAGIC, INDEX_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HnswConfig {
    /// Links per element on upper levels; level 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    /// Level-assignment scale; `1 / ln(m)` when unset.
    pub level_lambda: Option<f64>,
    pub seed: u64,
}

impl Default for HnswConfig {
    fn default() -> Self {
        HnswConfig {
            m: 16,
            ef_construction: 200,
            ef_search: 200,
            level_lambda: None,
            seed: 0,
        }
    }
}

impl HnswConfig {
    pub fn lambda(&self) -> f64 {
        self.level_lambda.unwrap_or(1.0 / (self.m as f64).ln())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config("hnsw m must be >= 2".into()));
        }
        if self.m > u16::MAX as usize / 2 {
            return Err(Error::Config("hnsw m too large for the index format".into()));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(Error::Config("ef values must be >= 1".into()));
        }
        if let Some(l) = self.level_lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config("level_lambda must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: u32,
    pub dist: f32,
}

impl SearchHit {
    /// Ascending distance, ties by ascending id.
    pub fn order(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl Eq for SearchHit {}

impl PartialOrd for SearchHit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SearchHit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order(other)
    }
}

/// Cosine distance between unit vectors. Shared by every index so that
/// exact and approximate search rank identically.
#[inline]
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let dot = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
    1.0 - dot
}

/// Anything that answers top-K queries over a fixed set of vectors.
pub trait NeighborIndex: Send + Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Exact top-K by linear scan.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    dim: usize,
    vectors: Vec<f32>,
}

impl FlatIndex {
    pub fn new(vectors: &[Vec<f32>]) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut flat = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: v.len(),
                });
            }
            flat.extend_from_slice(v);
        }
        Ok(FlatIndex { dim, vectors: flat })
    }

    pub fn vector(&self, id: u32) -> &[f32] {
        &self.vectors[id as usize * self.dim..(id as usize + 1) * self.dim]
    }
}

impl NeighborIndex for FlatIndex {
    fn len(&self) -> usize {
        self.vectors.len().checked_div(self.dim).unwrap_or(0)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
        if self.len() == 0 {
            return Ok(Vec::new());
        }
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut hits: Vec<SearchHit> = (0..self.len() as u32)
            .map(|id| SearchHit {
                id,
                dist: cosine_distance(query, self.vector(id)),
            })
            .collect();
        if k < hits.len() {
            hits.select_nth_unstable(k);
            hits.truncate(k);
        }
        hits.sort_unstable();
        Ok(hits)
    }
}

/// Exact top-K over `vectors`, sorted by `(dist, id)`.
pub fn brute_force_search(vectors: &[Vec<f32>], query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
    FlatIndex::new(vectors)?.search(query, k)
}
