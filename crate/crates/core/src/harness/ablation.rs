use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::strategy::{train_strategy, EmbedderTraining, Strategy};
use crate::corpus::{
    sample_pairs, split_pairs, with_label_noise, GeneratorConfig, KeywordId, LabeledPair, PairSamplingConfig,
    SyntheticCorpus,
};
use crate::embed::{pair_similarities, TrainingConfig};
use crate::error::Result;
use crate::teacher::{fit_learned, metric_auc, metric_recall_at_precision, TeacherConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub generator: GeneratorConfig,
    /// Weblog-like pairs, labeled by the oracle then corrupted.
    pub raw_pairs: PairSamplingConfig,
    pub label_noise: f64,
    /// Fraction of keywords anchoring the clean annotated pairs.
    pub clean_fraction: f64,
    pub clean_pairs: PairSamplingConfig,
    pub split: [f64; 3],
    /// Recipe for all four students.
    pub student: EmbedderTraining,
    /// Embedder behind the teacher's similarity feature.
    pub teacher_embedder: EmbedderTraining,
    pub teacher: TeacherConfig,
    pub precision_target: f64,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        let pretrain = TrainingConfig {
            learning_rate: 1e-3,
            epochs: 3,
            self_train_rounds: 2,
            ..TrainingConfig::default()
        };
        let finetune = TrainingConfig {
            learning_rate: 1e-3,
            epochs: 1,
            self_train_rounds: 0,
            ..TrainingConfig::default()
        };
        AblationConfig {
            generator: GeneratorConfig {
                num_clusters: 1_500,
                cluster_size_range: [2, 12],
                vocabulary_size: 600,
                template_count: 32,
                queries_per_cluster: 0,
                ..GeneratorConfig::default()
            },
            raw_pairs: PairSamplingConfig {
                positives_per_anchor: 1,
                negatives_per_anchor: 1,
                hard_negative_fraction: 0.5,
                seed: 0,
            },
            label_noise: 0.3,
            clean_fraction: 1.0,
            clean_pairs: PairSamplingConfig::default(),
            split: [0.8, 0.1, 0.1],
            student: EmbedderTraining {
                pretrain: pretrain.clone(),
                finetune: finetune.clone(),
                ..EmbedderTraining::default()
            },
            teacher_embedder: EmbedderTraining {
                pretrain: TrainingConfig {
                    margin: 0.6,
                    epochs: 30,
                    self_train_rounds: 0,
                    ..pretrain
                },
                finetune: TrainingConfig { epochs: 0, ..finetune },
                ..EmbedderTraining::default()
            },
            teacher: TeacherConfig::default(),
            precision_target: 0.95,
            seed: 0,
        }
    }
}

impl AblationConfig {
    /// Copy with every nested seed derived from `seed`.
    pub fn resolved(&self) -> AblationConfig {
        let mut c = self.clone();
        let s = self.seed;
        c.generator.seed = s;
        c.raw_pairs.seed = s.wrapping_add(1);
        c.clean_pairs.seed = s.wrapping_add(2);
        for (t, off) in [(&mut c.student, 10u64), (&mut c.teacher_embedder, 20)] {
            t.init_seed = s.wrapping_add(off);
            t.pretrain.seed = s.wrapping_add(off + 1);
            t.finetune.seed = s.wrapping_add(off + 2);
            t.hnsw.seed = s.wrapping_add(off + 3);
        }
        c
    }

    fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub auc: f64,
    pub recall_at_p95: f64,
}

/// Everything the four students share: noisy raw pairs, clean splits and
/// the teacher.
pub(crate) struct AblationData {
    pub raw: Vec<LabeledPair>,
    pub clean_train: Vec<LabeledPair>,
    pub clean_test: Vec<LabeledPair>,
}

pub(crate) fn ablation_data(corpus: &SyntheticCorpus, config: &AblationConfig) -> Result<AblationData> {
    let n = corpus.repo.len() as KeywordId;
    let all: Vec<KeywordId> = (0..n).collect();
    let raw = with_label_noise(
        &sample_pairs(corpus, &all, &config.raw_pairs),
        config.label_noise,
        config.seed.wrapping_add(4),
    );
    // Clean anchors are a strided subset so they do not depend on the RNG.
    let stride = (1.0 / config.clean_fraction.clamp(1e-6, 1.0)).round().max(1.0) as usize;
    let anchors: Vec<KeywordId> = all.iter().copied().step_by(stride).collect();
    let clean = sample_pairs(corpus, &anchors, &config.clean_pairs);
    let [r1, r2, r3] = config.split;
    let (clean_train, _, clean_test) = split_pairs(&clean, (r1, r2, r3), config.split_seed())?;
    Ok(AblationData {
        raw,
        clean_train,
        clean_test,
    })
}

/// Trains M0..M3 on the same data and scores each by the cosine similarity
/// of its embeddings on the clean test split.
pub fn run_ablation(corpus: &SyntheticCorpus, config: &AblationConfig) -> Result<Vec<AblationRow>> {
    let config = config.resolved();
    let data = ablation_data(corpus, &config)?;
    let teacher_embedder = train_strategy(
        Strategy::M0,
        &data.clean_train,
        &[],
        &corpus.repo,
        None,
        &config.teacher_embedder,
    )?;
    let teacher = fit_learned(&data.clean_train, Arc::new(teacher_embedder), &config.teacher)?;
    let labels: Vec<bool> = data.clean_test.iter().map(|p| p.synonymous).collect();

    Strategy::ALL
        .iter()
        .map(|&s| {
            let student = train_strategy(
                s,
                &data.raw,
                &data.clean_train,
                &corpus.repo,
                Some(&teacher),
                &config.student,
            )?;
            let scores = pair_similarities(&student, &data.clean_test)?;
            Ok(AblationRow {
                model: s.tag().to_string(),
                auc: metric_auc(&scores, &labels)?,
                recall_at_p95: metric_recall_at_precision(&scores, &labels, config.precision_target)?,
            })
        })
        .collect()
}

pub fn ablation_markdown(rows: &[AblationRow]) -> String {
    let mut s = String::from("| model | AUC | R@P95 |\n|---|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:.2}% | {:.2}% |",
            r.model,
            100.0 * r.auc,
            100.0 * r.recall_at_p95
        );
    }
    s
}
