//! Shared-tower text encoder: hashed character n-grams projected to a dense
//! unit vector, compared by cosine distance.

mod loss;
mod selftrain;
mod train;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use loss::{triplet_gradient, triplet_loss, Gradient, Triplet};
pub use selftrain::{build_confident_set, known_positives, mine_hard_negatives, self_train, KnownPositives};
pub use train::{train, train_with_losses, triplets_from_pairs, TrainingConfig};

/// Number of hash buckets for n-gram features.
pub const FEATURE_BUCKETS: usize = 1 << 16;
pub const DEFAULT_DIM: usize = 64;
pub const BOUNDARY: char = '#';

/// Dense unit-norm embedding.
pub type Embedding = Vec<f32>;

/// Sparse bag of hashed n-grams, sorted by bucket index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    pub entries: Vec<(u32, u32)>,
}

impl FeatureVector {
    pub fn total(&self) -> u32 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn bucket_of(ngram: &str, buckets: usize) -> u32 {
    (fnv1a64(ngram.as_bytes()) % buckets as u64) as u32
}

/// Lowercases `text`, pads it with one [`BOUNDARY`] on each side and counts
/// every character bigram and trigram, hashed with FNV-1a 64 modulo `buckets`.
pub fn featurize_with(text: &str, buckets: usize) -> Result<FeatureVector> {
    if text.trim().is_empty() {
        return Err(Error::Input("cannot featurize empty text".into()));
    }
    let mut chars = vec![BOUNDARY];
    chars.extend(text.to_lowercase().chars());
    chars.push(BOUNDARY);

    let mut idx: Vec<u32> = Vec::with_capacity(2 * chars.len());
    let mut buf = String::new();
    for n in [2, 3] {
        for w in chars.windows(n) {
            buf.clear();
            buf.extend(w);
            idx.push(bucket_of(&buf, buckets));
        }
    }
    idx.sort_unstable();
    let mut entries: Vec<(u32, u32)> = Vec::with_capacity(idx.len());
    for i in idx {
        match entries.last_mut() {
            Some((last, c)) if *last == i => *c += 1,
            _ => entries.push((i, 1)),
        }
    }
    Ok(FeatureVector { entries })
}

pub fn featurize(text: &str) -> Result<FeatureVector> {
    featurize_with(text, FEATURE_BUCKETS)
}

/// Projection from `buckets` sparse features to `dim` outputs.
///
/// Stored feature-major: the `dim` weights of bucket `f` live at
/// `weights[f * dim..(f + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderParams {
    dim: usize,
    buckets: usize,
    weights: Vec<f32>,
    pub version: u32,
}

impl EmbedderParams {
    pub fn zeros(dim: usize, buckets: usize) -> Self {
        EmbedderParams {
            dim,
            buckets,
            weights: vec![0.0; dim * buckets],
            version: 0,
        }
    }

    /// Uniform random projection with per-entry variance `1 / dim`.
    pub fn random(dim: usize, buckets: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (3.0 / dim as f32).sqrt();
        let weights = (0..dim * buckets).map(|_| rng.gen_range(-a..a)).collect();
        EmbedderParams {
            dim,
            buckets,
            weights,
            version: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn column(&self, feature: u32) -> &[f32] {
        let f = feature as usize;
        &self.weights[f * self.dim..(f + 1) * self.dim]
    }

    pub(crate) fn column_mut(&mut self, feature: u32) -> &mut [f32] {
        let f = feature as usize;
        &mut self.weights[f * self.dim..(f + 1) * self.dim]
    }

    /// Weight at output row `row`, feature column `feature`.
    pub fn get(&self, row: usize, feature: u32) -> f32 {
        self.weights[feature as usize * self.dim + row]
    }

    pub fn set(&mut self, row: usize, feature: u32, value: f32) {
        self.weights[feature as usize * self.dim + row] = value;
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn featurize(&self, text: &str) -> Result<FeatureVector> {
        featurize_with(text, self.buckets)
    }

    /// Unnormalized projection in f64.
    pub fn project(&self, features: &FeatureVector) -> Vec<f64> {
        let mut out = vec![0.0f64; self.dim];
        for &(f, count) in &features.entries {
            let c = count as f64;
            for (o, &w) in out.iter_mut().zip(self.column(f)) {
                *o += c * w as f64;
            }
        }
        out
    }

    pub fn encode_features(&self, features: &FeatureVector) -> Embedding {
        let raw = self.project(features);
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return unit_basis(self.dim);
        }
        raw.iter().map(|x| (x / norm) as f32).collect()
    }

    /// Encodes `text` to a unit vector. An all-zero projection maps to `e_0`.
    pub fn encode(&self, text: &str) -> Result<Embedding> {
        Ok(self.encode_features(&self.featurize(text)?))
    }

    pub fn encode_all<'a, I>(&self, texts: I) -> Result<Vec<Embedding>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        texts.into_iter().map(|t| self.encode(t)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.weights.len());
        out.extend_from_slice(PARAMS_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.buckets as u32).to_le_bytes());
        for row in 0..self.dim {
            for f in 0..self.buckets {
                out.extend_from_slice(&self.weights[f * self.dim + row].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const CTX: &str = "embedder params";
        if bytes.len() < 16 {
            return Err(Error::format(CTX, bytes.len() as u64, "truncated header"));
        }
        if &bytes[0..4] != PARAMS_MAGIC {
            return Err(Error::format(CTX, 0, "bad magic"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(4);
        let dim = word(8) as usize;
        let buckets = word(12) as usize;
        if dim == 0 || buckets == 0 {
            return Err(Error::format(CTX, 8, "zero dimension"));
        }
        let expected = 16 + 4 * dim * buckets;
        if bytes.len() != expected {
            return Err(Error::format(
                CTX,
                bytes.len().min(expected) as u64,
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let mut weights = vec![0.0f32; dim * buckets];
        let mut at = 16;
        for row in 0..dim {
            for f in 0..buckets {
                weights[f * dim + row] = f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
                at += 4;
            }
        }
        let params = EmbedderParams {
            dim,
            buckets,
            weights,
            version,
        };
        if !params.all_finite() {
            return Err(Error::format(CTX, 16, "non-finite weight"));
        }
        Ok(params)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub const PARAMS_MAGIC: &[u8; 4] = b"QSEM";

fn unit_basis(dim: usize) -> Embedding {
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

/// Cosine distance `1 - <u, v>` between unit vectors, in `[0, 2]`.
pub fn distance(u: &[f32], v: &[f32]) -> f32 {
    1.0 - dot(u, v)
}

pub fn dot(u: &[f32], v: &[f32]) -> f32 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Similarity scores `1 - D(q, k)` for every pair, usable as a ranking.
pub fn pair_similarities(params: &EmbedderParams, pairs: &[crate::corpus::LabeledPair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            let q = params.encode(&p.query)?;
            let k = params.encode(&p.keyword)?;
            Ok(dot(&q, &k) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurize_enumerates_bigrams_and_trigrams() {
        let fv = featurize("ab").unwrap();
        let mut expected: Vec<u32> = ["#a", "ab", "b#", "#ab", "ab#"]
            .iter()
            .map(|g| bucket_of(g, FEATURE_BUCKETS))
            .collect();
        expected.sort_unstable();
        let mut got = Vec::new();
        for &(i, c) in &fv.entries {
            got.extend(std::iter::repeat_n(i, c as usize));
        }
        assert_eq!(got, expected);
        assert_eq!(fv.total(), 5);
    }

    #[test]
    fn featurize_lowercases_and_is_pure() {
        assert_eq!(featurize("AB").unwrap(), featurize("ab").unwrap());
        assert_eq!(featurize("price of x").unwrap(), featurize("price of x").unwrap());
        assert!(matches!(featurize("   "), Err(Error::Input(_))));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn zero_projection_encodes_to_e0() {
        let p = EmbedderParams::zeros(8, 64);
        assert_eq!(p.encode("anything").unwrap(), unit_basis(8));
    }

    #[test]
    fn encode_is_unit_norm_and_deterministic() {
        let p = EmbedderParams::random(DEFAULT_DIM, 1024, 3);
        for text in ["a", "how much is kalo mitu", "ÉCOLE prix", "x y z w"] {
            let e = p.encode(text).unwrap();
            let norm = e.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "{norm}");
            assert_eq!(e, p.encode(text).unwrap());
        }
    }

    #[test]
    fn distance_extremes() {
        let u = vec![1.0, 0.0];
        let v = vec![0.0, 1.0];
        let w = vec![-1.0, 0.0];
        assert_eq!(distance(&u, &u), 0.0);
        assert_eq!(distance(&u, &v), 1.0);
        assert_eq!(distance(&u, &w), 2.0);
    }

    #[test]
    fn params_bytes_layout() {
        let mut p = EmbedderParams::zeros(2, 3);
        p.set(1, 2, 5.0);
        p.version = 4;
        let bytes = p.to_bytes();
        assert_eq!(&bytes[0..4], b"QSEM");
        assert_eq!(bytes.len(), 16 + 4 * 6);
        // Row-major: row 1, column 2 is the last float.
        assert_eq!(f32::from_le_bytes(bytes[36..40].try_into().unwrap()), 5.0);
        assert_eq!(EmbedderParams::from_bytes(&bytes).unwrap(), p);
        assert!(matches!(
            EmbedderParams::from_bytes(&bytes[..30]),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            EmbedderParams::from_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
