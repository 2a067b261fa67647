use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{latency_at_k, mean_recall, relevant_sets, LatencyStats};
use crate::ann::{HnswConfig, NeighborIndex};
use crate::corpus::{
    sample_pairs, split_pairs, GeneratorConfig, KeywordId, PairSamplingConfig, QueryAllocation, SizeDistribution,
    SyntheticCorpus,
};
use crate::embed::{train, triplets_from_pairs, EmbedderParams, TrainingConfig, DEFAULT_DIM, FEATURE_BUCKETS};
use crate::error::{Error, Result};
use crate::quotient::{compress, compression_ratio, pairwise_f1, CompressionConfig, PairwiseScores};
use crate::retrieve::{BaselinePipeline, RetrievalPipeline, Retriever};
use crate::teacher::{calibrate_threshold, fit_learned, Discriminant, TeacherConfig, Threshold};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub generator: GeneratorConfig,
    pub pairs: PairSamplingConfig,
    pub split: [f64; 3],
    pub dim: usize,
    pub buckets: usize,
    /// Retrieval embedder.
    pub training: TrainingConfig,
    /// Embedder behind the teacher's similarity feature.
    pub teacher_training: TrainingConfig,
    pub teacher: TeacherConfig,
    /// Dev-split precision the screening threshold is calibrated for.
    pub precision_target: f64,
    /// Dev-split precision the compression threshold is calibrated for.
    pub compression_precision_target: f64,
    /// Fixed thresholds; the calibrated ones are used when unset.
    pub tau_q: Option<f64>,
    pub tau_c: Option<f64>,
    pub tau_p: Option<f64>,
    pub compression: CompressionConfig,
    pub hnsw: HnswConfig,
    /// Relevant keywords sampled per query.
    pub max_relevant: usize,
    pub workers: usize,
    pub warmup: usize,
    /// Queries timed per latency run, after the warm-up; all when unset.
    pub latency_queries: Option<usize>,
    /// Root seed; every component seed is derived from it.
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            generator: GeneratorConfig {
                num_clusters: 10_000,
                cluster_size_range: [1, 200],
                vocabulary_size: 2_000,
                template_count: 64,
                queries_per_cluster: 1,
                size_distribution: SizeDistribution::PowerLaw { exponent: 1.85 },
                query_allocation: QueryAllocation::SizeProportional,
                ..GeneratorConfig::default()
            },
            pairs: PairSamplingConfig::default(),
            split: [0.8, 0.1, 0.1],
            dim: DEFAULT_DIM,
            buckets: FEATURE_BUCKETS,
            training: TrainingConfig {
                learning_rate: 1e-3,
                epochs: 10,
                self_train_rounds: 0,
                ..TrainingConfig::default()
            },
            teacher_training: TrainingConfig {
                margin: 0.6,
                learning_rate: 1e-3,
                epochs: 10,
                self_train_rounds: 0,
                ..TrainingConfig::default()
            },
            teacher: TeacherConfig::default(),
            precision_target: 0.95,
            compression_precision_target: 0.999,
            tau_q: None,
            tau_c: None,
            tau_p: None,
            compression: CompressionConfig::default(),
            hnsw: HnswConfig::default(),
            max_relevant: 10,
            workers: 10,
            warmup: 100,
            latency_queries: None,
            seed: 0,
        }
    }
}

impl BenchConfig {
    /// Copy with every nested seed derived from `seed`.
    pub fn resolved(&self) -> BenchConfig {
        let mut c = self.clone();
        let s = self.seed;
        c.generator.seed = s;
        c.pairs.seed = s.wrapping_add(1);
        c.training.seed = s.wrapping_add(3);
        c.teacher_training.seed = s.wrapping_add(8);
        c.hnsw.seed = s.wrapping_add(4);
        c.compression.seed = s.wrapping_add(5);
        c.compression.hnsw = c.hnsw.clone();
        c
    }

    fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(6)
    }

    fn relevant_seed(&self) -> u64 {
        self.seed.wrapping_add(7)
    }
}

/// SHA-256 over the canonical JSON of the resolved config.
pub fn config_hash(config: &BenchConfig) -> String {
    let json = serde_json::to_vec(&config.resolved()).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Quotient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: Method,
    pub recall_at_10: f64,
    pub recall_at_100: f64,
    /// Mean wall time per query, see `latency_*` for the CPU time.
    pub latency_at_10_ms: f64,
    pub latency_at_100_ms: f64,
    pub latency_at_10: LatencyStats,
    pub latency_at_100: LatencyStats,
    /// Serialized size of the ANN index.
    pub memory_bytes: u64,
    pub compression_ratio: f64,
    pub n_queries: usize,
    /// Queries without relevant keywords, left out of the recall means.
    pub n_queries_skipped: usize,
    pub n_keywords: usize,
    pub n_indexed: usize,
    pub tau_q: f64,
    pub embedder_version: u32,
    pub config_hash: String,
    pub config: BenchConfig,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub baseline: BenchReport,
    pub quotient: BenchReport,
    /// Screening threshold calibration.
    pub threshold: Threshold,
    /// Compression threshold calibration.
    pub compression_threshold: Threshold,
    pub compression: PairwiseScores,
    pub comparison: String,
}

/// Fails when the two sides were built from different embedder versions.
pub fn check_versions(what: &str, a: u32, b: u32) -> Result<()> {
    if a != b {
        return Err(Error::Consistency(format!("{what}: embedder version {a} vs {b}")));
    }
    Ok(())
}

/// Mean R@K over `queries` for each K in `ks`.
pub fn evaluate(
    retriever: &dyn Retriever,
    queries: &[String],
    relevant: &[Vec<KeywordId>],
    ks: &[usize],
) -> Result<Vec<(f64, usize)>> {
    ks.iter()
        .map(|&k| {
            let returned: Vec<Vec<KeywordId>> = queries
                .par_iter()
                .map(|q| retriever.retrieve(q, k).map(|r| r.keywords))
                .collect::<Result<_>>()?;
            Ok(mean_recall(&returned, relevant))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn report(
    method: Method,
    retriever: &dyn Retriever,
    queries: &[String],
    relevant: &[Vec<KeywordId>],
    ratio: f64,
    tau_q: f64,
    embedder_version: u32,
    config: &BenchConfig,
) -> Result<BenchReport> {
    let recalls = evaluate(retriever, queries, relevant, &[10, 100])?;
    let end = config
        .latency_queries
        .map_or(queries.len(), |n| (config.warmup + n).min(queries.len()));
    let timed = &queries[..end];
    let l10 = latency_at_k(retriever, timed, 10, config.workers, config.warmup)?;
    let l100 = latency_at_k(retriever, timed, 100, config.workers, config.warmup)?;
    Ok(BenchReport {
        method,
        recall_at_10: recalls[0].0,
        recall_at_100: recalls[1].0,
        latency_at_10_ms: l10.wall_ms,
        latency_at_100_ms: l100.wall_ms,
        latency_at_10: l10,
        latency_at_100: l100,
        memory_bytes: retriever.index().memory_footprint().total,
        compression_ratio: ratio,
        n_queries: queries.len(),
        n_queries_skipped: recalls[0].1,
        n_keywords: retriever.repo().len(),
        n_indexed: retriever.index().len(),
        tau_q,
        embedder_version,
        config_hash: config_hash(config),
        config: config.clone(),
    })
}

/// Trains the embedder and teacher from pairs sampled off `corpus`,
/// compresses the repository and measures both pipelines on the corpus
/// queries with identical embedder, teacher, threshold and index settings.
pub fn run_benchmark(corpus: &SyntheticCorpus, config: &BenchConfig) -> Result<BenchOutcome> {
    let config = config.resolved();
    let anchors: Vec<KeywordId> = (0..corpus.repo.len() as KeywordId).collect();
    let pairs = sample_pairs(corpus, &anchors, &config.pairs);
    let [r1, r2, r3] = config.split;
    let (train_pairs, dev, _) = split_pairs(&pairs, (r1, r2, r3), config.split_seed())?;

    let init = EmbedderParams::random(config.dim, config.buckets, config.init_seed());
    let triplets = triplets_from_pairs(&train_pairs, config.training.random_negatives, config.training.seed);
    let embedder = Arc::new(train(&init, &triplets, &config.training)?);
    let teacher_embedder = Arc::new(train(&init, &triplets, &config.teacher_training)?);
    let teacher = Arc::new(fit_learned(&train_pairs, teacher_embedder, &config.teacher)?);
    let threshold = calibrate_threshold(teacher.as_ref(), &dev, config.precision_target)?;
    let compression_threshold = calibrate_threshold(teacher.as_ref(), &dev, config.compression_precision_target)?;
    let tau_q = config.tau_q.unwrap_or(threshold.tau);
    let compression = CompressionConfig {
        tau_c: config.tau_c.unwrap_or(compression_threshold.tau).min(1.0),
        tau_p: config.tau_p.map(|t| t.min(1.0)),
        ..config.compression.clone()
    };

    let repo = Arc::new(corpus.repo.clone());
    let map = Arc::new(compress(&repo, &embedder, teacher.as_ref(), &compression)?);
    let f1 = pairwise_f1(&map, &corpus.truth)?;
    let ratio = compression_ratio(&map);
    let dyn_teacher: Arc<dyn Discriminant> = teacher;
    let quotient = RetrievalPipeline::build(
        repo.clone(),
        map,
        embedder.clone(),
        dyn_teacher.clone(),
        tau_q,
        &config.hnsw,
    )?;
    let baseline = BaselinePipeline::build(repo, embedder.clone(), dyn_teacher, tau_q, &config.hnsw)?;
    check_versions(
        "quotient vs baseline",
        quotient.embedder().version,
        baseline.embedder().version,
    )?;

    let relevant = relevant_sets(&corpus.truth, config.max_relevant, config.relevant_seed());
    let version = embedder.version;
    let b = report(
        Method::Baseline,
        &baseline,
        &corpus.queries,
        &relevant,
        1.0,
        tau_q,
        version,
        &config,
    )?;
    let q = report(
        Method::Quotient,
        &quotient,
        &corpus.queries,
        &relevant,
        ratio,
        tau_q,
        version,
        &config,
    )?;
    let comparison = comparison_markdown(&b, &q);
    Ok(BenchOutcome {
        baseline: b,
        quotient: q,
        threshold,
        compression_threshold,
        compression: f1,
        comparison,
    })
}

pub fn comparison_markdown(baseline: &BenchReport, quotient: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| metric | baseline | quotient |");
    let _ = writeln!(s, "|---|---:|---:|");
    let mut row = |name: &str, b: String, q: String| {
        let _ = writeln!(s, "| {name} | {b} | {q} |");
    };
    let pct = |x: f64| format!("{:.2}%", 100.0 * x);
    let ms = |x: f64| format!("{x:.3}");
    row("R@10", pct(baseline.recall_at_10), pct(quotient.recall_at_10));
    row("R@100", pct(baseline.recall_at_100), pct(quotient.recall_at_100));
    row(
        "latency@10 wall (ms)",
        ms(baseline.latency_at_10_ms),
        ms(quotient.latency_at_10_ms),
    );
    row(
        "latency@100 wall (ms)",
        ms(baseline.latency_at_100_ms),
        ms(quotient.latency_at_100_ms),
    );
    row(
        "latency@10 cpu (ms)",
        ms(baseline.latency_at_10.cpu_ms),
        ms(quotient.latency_at_10.cpu_ms),
    );
    row(
        "latency@100 cpu (ms)",
        ms(baseline.latency_at_100.cpu_ms),
        ms(quotient.latency_at_100.cpu_ms),
    );
    let mb = |x: u64| format!("{:.2}", x as f64 / (1024.0 * 1024.0));
    row(
        "index memory (MiB)",
        mb(baseline.memory_bytes),
        mb(quotient.memory_bytes),
    );
    row(
        "indexed keywords",
        baseline.n_indexed.to_string(),
        quotient.n_indexed.to_string(),
    );
    row(
        "compression ratio",
        format!("{:.2}", baseline.compression_ratio),
        format!("{:.2}", quotient.compression_ratio),
    );
    let _ = writeln!(
        s,
        "\n{} queries, {} keywords, {} workers, config {}",
        quotient.n_queries,
        quotient.n_keywords,
        quotient.latency_at_10.workers,
        &quotient.config_hash[..12]
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_nested_seeds_but_not_root() {
        let a = BenchConfig::default();
        let mut b = a.clone();
        b.training.seed = 99;
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn version_check() {
        assert!(check_versions("x", 3, 3).is_ok());
        assert!(matches!(check_versions("x", 3, 4), Err(Error::Consistency(_))));
    }
}
