//! Pair discriminants ("teachers") that score a query-keyword pair jointly,
//! plus ranking metrics and threshold calibration.

mod metrics;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClusterId, GroundTruth, KeywordRepository, LabeledPair};
use crate::embed::{dot, fnv1a64, EmbedderParams, Embedding};
use crate::error::{Error, Result};

pub use metrics::{
    calibrate_scores, calibrate_threshold, metric_auc, metric_recall_at_precision, threshold_sweep, OperatingPoint,
    Threshold,
};

/// Scores a (query, keyword) pair in `[0, 1]`; higher means synonymous.
pub trait Discriminant: Send + Sync {
    fn score(&self, query: &str, keyword: &str) -> Result<f64>;

    fn score_pairs(&self, pairs: &[LabeledPair]) -> Result<Vec<f64>> {
        pairs.iter().map(|p| self.score(&p.query, &p.keyword)).collect()
    }

    /// Scores one query against many keywords.
    fn score_many(&self, query: &str, keywords: &[&str]) -> Result<Vec<f64>> {
        keywords.iter().map(|k| self.score(query, k)).collect()
    }
}

impl<T: Discriminant + ?Sized> Discriminant for Arc<T> {
    fn score(&self, query: &str, keyword: &str) -> Result<f64> {
        (**self).score(query, keyword)
    }

    fn score_many(&self, query: &str, keywords: &[&str]) -> Result<Vec<f64>> {
        (**self).score_many(query, keywords)
    }
}

impl<T: Discriminant + ?Sized> Discriminant for Box<T> {
    fn score(&self, query: &str, keyword: &str) -> Result<f64> {
        (**self).score(query, keyword)
    }

    fn score_many(&self, query: &str, keywords: &[&str]) -> Result<Vec<f64>> {
        (**self).score_many(query, keywords)
    }
}

/// Ground-truth teacher: 1 for texts in the same cluster, 0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct OracleTeacher {
    cluster_of: HashMap<String, ClusterId>,
}

impl OracleTeacher {
    pub fn new(repo: &KeywordRepository, queries: &[String], truth: &GroundTruth) -> Self {
        let mut cluster_of = HashMap::with_capacity(repo.len() + queries.len());
        for k in repo.iter() {
            cluster_of.insert(k.text.clone(), truth.cluster_of[k.id as usize]);
        }
        for (q, &c) in queries.iter().zip(&truth.query_cluster) {
            cluster_of.insert(q.clone(), c);
        }
        OracleTeacher { cluster_of }
    }

    pub fn from_texts<I: IntoIterator<Item = (String, ClusterId)>>(texts: I) -> Self {
        OracleTeacher {
            cluster_of: texts.into_iter().collect(),
        }
    }

    pub fn cluster(&self, text: &str) -> Result<ClusterId> {
        self.cluster_of
            .get(text)
            .copied()
            .ok_or_else(|| Error::UnknownText(text.to_string()))
    }
}

impl Discriminant for OracleTeacher {
    fn score(&self, query: &str, keyword: &str) -> Result<f64> {
        Ok(if self.cluster(query)? == self.cluster(keyword)? {
            1.0
        } else {
            0.0
        })
    }
}

/// Oracle whose verdict is flipped on a fixed pseudo-random subset of pairs.
/// The flip depends only on the unordered pair and the seed.
#[derive(Debug, Clone)]
pub struct NoisyOracleTeacher {
    pub oracle: OracleTeacher,
    pub flip_rate: f64,
    pub seed: u64,
}

impl Discriminant for NoisyOracleTeacher {
    fn score(&self, query: &str, keyword: &str) -> Result<f64> {
        let clean = self.oracle.score(query, keyword)?;
        let (a, b) = if query <= keyword {
            (query, keyword)
        } else {
            (keyword, query)
        };
        let mut key = Vec::with_capacity(a.len() + b.len() + 9);
        key.extend_from_slice(&self.seed.to_le_bytes());
        key.extend_from_slice(a.as_bytes());
        key.push(0);
        key.extend_from_slice(b.as_bytes());
        let u = (fnv1a64(&key) >> 11) as f64 / (1u64 << 53) as f64;
        Ok(if u < self.flip_rate { 1.0 - clean } else { clean })
    }
}

pub const NUM_PAIR_FEATURES: usize = 5;

/// Interaction features of a pair, seen jointly by the learned teacher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    pub ngram_jaccard: f64,
    pub edit_similarity: f64,
    pub embedding_dot: f64,
    pub length_ratio: f64,
}

/// The per-text half of [`PairFeatures`].
#[derive(Debug, Clone)]
pub struct TextSide {
    ngrams: Vec<u32>,
    chars: Vec<char>,
    embedding: Embedding,
}

impl TextSide {
    pub fn new(embedder: &EmbedderParams, text: &str) -> Result<Self> {
        let features = embedder.featurize(text)?;
        Ok(TextSide {
            ngrams: features.entries.iter().map(|e| e.0).collect(),
            chars: text.to_lowercase().chars().collect(),
            embedding: embedder.encode_features(&features),
        })
    }
}

/// Size of the intersection of two sorted, duplicate-free lists.
fn sorted_overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl PairFeatures {
    pub fn compute(embedder: &EmbedderParams, query: &str, keyword: &str) -> Result<Self> {
        Ok(Self::from_sides(
            &TextSide::new(embedder, query)?,
            &TextSide::new(embedder, keyword)?,
        ))
    }

    pub fn from_sides(q: &TextSide, k: &TextSide) -> Self {
        let inter = sorted_overlap(&q.ngrams, &k.ngrams) as f64;
        let union = (q.ngrams.len() + k.ngrams.len()) as f64 - inter;
        let longest = q.chars.len().max(k.chars.len()) as f64;
        PairFeatures {
            ngram_jaccard: inter / union,
            edit_similarity: 1.0 - levenshtein(&q.chars, &k.chars) as f64 / longest,
            embedding_dot: dot(&q.embedding, &k.embedding) as f64,
            length_ratio: q.chars.len().min(k.chars.len()) as f64 / longest,
        }
    }

    /// Feature vector with the constant bias last.
    pub fn to_array(&self) -> [f64; NUM_PAIR_FEATURES] {
        [
            self.ngram_jaccard,
            self.edit_similarity,
            self.embedding_dot,
            self.length_ratio,
            1.0,
        ]
    }
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic model over [`PairFeatures`].
#[derive(Debug, Clone)]
pub struct LearnedTeacher {
    pub weights: [f32; NUM_PAIR_FEATURES],
    pub embedder: Arc<EmbedderParams>,
}

impl LearnedTeacher {
    pub fn features(&self, query: &str, keyword: &str) -> Result<[f64; NUM_PAIR_FEATURES]> {
        Ok(PairFeatures::compute(&self.embedder, query, keyword)?.to_array())
    }
}

impl LearnedTeacher {
    fn apply(&self, x: &[f64; NUM_PAIR_FEATURES]) -> f64 {
        sigmoid(x.iter().zip(&self.weights).map(|(a, &w)| a * w as f64).sum())
    }
}

impl Discriminant for LearnedTeacher {
    fn score(&self, query: &str, keyword: &str) -> Result<f64> {
        Ok(self.apply(&self.features(query, keyword)?))
    }

    fn score_many(&self, query: &str, keywords: &[&str]) -> Result<Vec<f64>> {
        let q = TextSide::new(&self.embedder, query)?;
        keywords
            .iter()
            .map(|k| Ok(self.apply(&PairFeatures::from_sides(&q, &TextSide::new(&self.embedder, k)?).to_array())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherConfig {
    /// L2 penalty on the non-bias weights.
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            l2: 1e-3,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting.
fn solve(
    mut a: [[f64; NUM_PAIR_FEATURES]; NUM_PAIR_FEATURES],
    mut b: [f64; NUM_PAIR_FEATURES],
) -> Option<[f64; NUM_PAIR_FEATURES]> {
    let n = NUM_PAIR_FEATURES;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; NUM_PAIR_FEATURES];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Fits L2-regularized logistic regression on pair features by Newton
/// iterations. Deterministic: no sampling is involved.
pub fn fit_learned(
    pairs: &[LabeledPair],
    embedder: Arc<EmbedderParams>,
    config: &TeacherConfig,
) -> Result<LearnedTeacher> {
    let n_pos = pairs.iter().filter(|p| p.synonymous).count();
    if n_pos == 0 || n_pos == pairs.len() {
        return Err(Error::DegenerateTraining(
            "teacher needs both positive and negative pairs".into(),
        ));
    }
    let xs: Vec<[f64; NUM_PAIR_FEATURES]> = pairs
        .iter()
        .map(|p| PairFeatures::compute(&embedder, &p.query, &p.keyword).map(|f| f.to_array()))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = pairs.iter().map(|p| f64::from(u8::from(p.synonymous))).collect();
    let n = pairs.len() as f64;
    let bias = NUM_PAIR_FEATURES - 1;

    let mut w = [0.0f64; NUM_PAIR_FEATURES];
    for _ in 0..config.max_iterations {
        let mut grad = [0.0; NUM_PAIR_FEATURES];
        let mut hess = [[0.0; NUM_PAIR_FEATURES]; NUM_PAIR_FEATURES];
        for (x, y) in xs.iter().zip(&ys) {
            let p = sigmoid(x.iter().zip(&w).map(|(a, b)| a * b).sum());
            let s = (p * (1.0 - p)).max(1e-12);
            for i in 0..NUM_PAIR_FEATURES {
                grad[i] += (p - y) * x[i] / n;
                for j in 0..NUM_PAIR_FEATURES {
                    hess[i][j] += s * x[i] * x[j] / n;
                }
            }
        }
        for i in 0..NUM_PAIR_FEATURES {
            if i != bias {
                grad[i] += config.l2 * w[i];
                hess[i][i] += config.l2;
            }
            hess[i][i] += 1e-9;
        }
        let Some(step) = solve(hess, grad) else {
            return Err(Error::DegenerateTraining("singular Hessian".into()));
        };
        let mut moved = 0.0;
        for i in 0..NUM_PAIR_FEATURES {
            w[i] -= step[i];
            moved += step[i] * step[i];
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTraining("weights diverged".into()));
        }
        if moved.sqrt() < config.tolerance {
            break;
        }
    }
    Ok(LearnedTeacher {
        weights: w.map(|v| v as f32),
        embedder,
    })
}

pub const TEACHER_MAGIC: &[u8; 4] = b"QSTC";

/// Contents of a teacher file. The oracle variant stores the path of the
/// corpus directory it reads ground truth from.
#[derive(Debug, Clone, PartialEq)]
pub enum TeacherFile {
    Oracle(PathBuf),
    Learned([f32; NUM_PAIR_FEATURES]),
}

impl TeacherFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = TEACHER_MAGIC.to_vec();
        match self {
            TeacherFile::Oracle(path) => {
                out.push(0);
                out.extend_from_slice(path.to_string_lossy().as_bytes());
            }
            TeacherFile::Learned(w) => {
                out.push(1);
                for v in w {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const CTX: &str = "teacher file";
        if bytes.len() < 5 {
            return Err(Error::format(CTX, bytes.len() as u64, "truncated header"));
        }
        if &bytes[..4] != TEACHER_MAGIC {
            return Err(Error::format(CTX, 0, "bad magic"));
        }
        match bytes[4] {
            0 => {
                let path = std::str::from_utf8(&bytes[5..]).map_err(|_| Error::format(CTX, 5, "path is not UTF-8"))?;
                Ok(TeacherFile::Oracle(PathBuf::from(path)))
            }
            1 => {
                let body = &bytes[5..];
                if body.len() != 4 * NUM_PAIR_FEATURES {
                    return Err(Error::format(
                        CTX,
                        5 + body.len().min(4 * NUM_PAIR_FEATURES) as u64,
                        "expected 5 weights",
                    ));
                }
                let mut w = [0.0f32; NUM_PAIR_FEATURES];
                for (i, c) in body.chunks_exact(4).enumerate() {
                    w[i] = f32::from_le_bytes(c.try_into().expect("4 bytes"));
                }
                Ok(TeacherFile::Learned(w))
            }
            tag => Err(Error::format(CTX, 4, format!("unknown variant tag {tag}"))),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, GeneratorConfig};

    #[test]
    fn oracle_scores() {
        let t = OracleTeacher::from_texts([("a".to_string(), 1), ("b".to_string(), 1), ("c".to_string(), 2)]);
        assert_eq!(t.score("a", "b").unwrap(), 1.0);
        assert_eq!(t.score("a", "c").unwrap(), 0.0);
        assert_eq!(t.score("c", "a").unwrap(), t.score("a", "c").unwrap());
        assert!(matches!(t.score("a", "zz"), Err(Error::UnknownText(_))));
    }

    #[test]
    fn noisy_oracle_is_symmetric_and_flips_some() {
        let texts: Vec<(String, u32)> = (0..60).map(|i| (format!("t{i}"), i % 6)).collect();
        let noisy = NoisyOracleTeacher {
            oracle: OracleTeacher::from_texts(texts.clone()),
            flip_rate: 0.2,
            seed: 9,
        };
        let mut flips = 0;
        let mut total = 0;
        for (a, _) in &texts {
            for (b, _) in &texts {
                let s = noisy.score(a, b).unwrap();
                assert_eq!(s, noisy.score(b, a).unwrap());
                flips += usize::from(s != noisy.oracle.score(a, b).unwrap());
                total += 1;
            }
        }
        let rate = flips as f64 / total as f64;
        assert!((0.15..0.25).contains(&rate), "{rate}");
    }

    #[test]
    fn levenshtein_basics() {
        let c = |s: &str| s.chars().collect::<Vec<_>>();
        assert_eq!(levenshtein(&c("kitten"), &c("sitting")), 3);
        assert_eq!(levenshtein(&c(""), &c("abc")), 3);
        assert_eq!(levenshtein(&c("same"), &c("same")), 0);
    }

    #[test]
    fn separable_toy_set_is_fit_perfectly() {
        let emb = Arc::new(EmbedderParams::random(16, 1 << 12, 2));
        let pairs = vec![
            LabeledPair::new("kalo mitu", "kalo mitu", true),
            LabeledPair::new("price of rasebo", "price of rasebo", true),
            LabeledPair::new("vetu", "vetu", true),
            LabeledPair::new("kalo mitu", "zzzzzzzz qqqqq", false),
            LabeledPair::new("vetu", "xoxoxoxoxoxo", false),
            LabeledPair::new("price of rasebo", "nnnnnn", false),
        ];
        let teacher = fit_learned(&pairs, emb.clone(), &TeacherConfig::default()).unwrap();
        for p in &pairs {
            let s = teacher.score(&p.query, &p.keyword).unwrap();
            assert_eq!(s >= 0.5, p.synonymous, "{p:?} -> {s}");
        }
        let again = fit_learned(&pairs, emb, &TeacherConfig::default()).unwrap();
        assert_eq!(teacher.weights, again.weights);
    }

    #[test]
    fn single_class_is_rejected() {
        let emb = Arc::new(EmbedderParams::random(8, 256, 2));
        let pairs = vec![LabeledPair::new("a", "b", true)];
        assert!(matches!(
            fit_learned(&pairs, emb, &TeacherConfig::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn learned_identity_beats_random_pairs() {
        let corpus = generate_synthetic(&GeneratorConfig {
            num_clusters: 60,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let emb = Arc::new(EmbedderParams::random(32, 1 << 14, 1));
        let pairs = crate::corpus::sample_pairs(
            &corpus,
            &(0..corpus.repo.len() as u32).collect::<Vec<_>>(),
            &Default::default(),
        );
        let teacher = fit_learned(&pairs, emb, &TeacherConfig::default()).unwrap();
        let texts: Vec<&str> = corpus.repo.texts().collect();
        for i in 0..100 {
            let a = texts[i % texts.len()];
            let b = texts[(i * 7 + 3) % texts.len()];
            assert!(teacher.score(a, a).unwrap() >= teacher.score(a, b).unwrap());
        }
    }

    #[test]
    fn teacher_file_layout() {
        let learned = TeacherFile::Learned([1.0, -2.0, 3.5, 0.0, 0.25]);
        let bytes = learned.to_bytes();
        assert_eq!(&bytes[..5], b"QSTC\x01");
        assert_eq!(bytes.len(), 25);
        assert_eq!(TeacherFile::from_bytes(&bytes).unwrap(), learned);
        let oracle = TeacherFile::Oracle(PathBuf::from("corpus/dir"));
        assert_eq!(TeacherFile::from_bytes(&oracle.to_bytes()).unwrap(), oracle);
        assert!(TeacherFile::from_bytes(&bytes[..10]).is_err());
        assert!(TeacherFile::from_bytes(b"QSTC\x07").is_err());
    }
}
