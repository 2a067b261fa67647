use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ann::HnswConfig;
use crate::corpus::{KeywordRepository, LabeledPair};
use crate::embed::{
    build_confident_set, self_train, train, triplets_from_pairs, EmbedderParams, TrainingConfig, DEFAULT_DIM,
    FEATURE_BUCKETS,
};
use crate::error::{Error, Result};
use crate::teacher::Discriminant;

/// Embedder training recipes compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Pretrain on raw pairs.
    M0,
    /// Pretrain on the teacher-confident subset of raw pairs.
    M1,
    /// Raw pretraining followed by self-training.
    M2,
    /// Confident-set pretraining followed by self-training.
    M3,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::M0, Strategy::M1, Strategy::M2, Strategy::M3];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::M0 => "M0",
            Strategy::M1 => "M1",
            Strategy::M2 => "M2",
            Strategy::M3 => "M3",
        }
    }

    pub fn uses_confident_set(self) -> bool {
        matches!(self, Strategy::M1 | Strategy::M3)
    }

    pub fn self_trains(self) -> bool {
        matches!(self, Strategy::M2 | Strategy::M3)
    }

    pub fn needs_teacher(self) -> bool {
        self != Strategy::M0
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m0" => Ok(Strategy::M0),
            "m1" => Ok(Strategy::M1),
            "m2" => Ok(Strategy::M2),
            "m3" => Ok(Strategy::M3),
            _ => Err(Error::Config(format!("unknown strategy {s:?}, expected m0|m1|m2|m3"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderTraining {
    pub dim: usize,
    pub buckets: usize,
    pub init_seed: u64,
    /// Pretraining and, for M2/M3, each self-training round.
    pub pretrain: TrainingConfig,
    /// Fine-tuning on clean labeled pairs; skipped when `epochs` is 0 or no
    /// clean pairs are given.
    pub finetune: TrainingConfig,
    pub hnsw: HnswConfig,
}

impl Default for EmbedderTraining {
    fn default() -> Self {
        EmbedderTraining {
            dim: DEFAULT_DIM,
            buckets: FEATURE_BUCKETS,
            init_seed: 0,
            pretrain: TrainingConfig::default(),
            finetune: TrainingConfig {
                self_train_rounds: 0,
                ..TrainingConfig::default()
            },
            hnsw: HnswConfig::default(),
        }
    }
}

/// Trains an embedder following `strategy`: pretrain on the raw pairs (or
/// their confident subset), optionally self-train against the repository,
/// then fine-tune on `clean`.
pub fn train_strategy(
    strategy: Strategy,
    raw: &[LabeledPair],
    clean: &[LabeledPair],
    repo: &KeywordRepository,
    teacher: Option<&dyn Discriminant>,
    config: &EmbedderTraining,
) -> Result<EmbedderParams> {
    let teacher = match (strategy.needs_teacher(), teacher) {
        (true, None) => return Err(Error::Config(format!("strategy {} needs a teacher", strategy.tag()))),
        (_, t) => t,
    };
    let base: Vec<LabeledPair> = if strategy.uses_confident_set() {
        let unlabeled: Vec<(String, String)> = raw.iter().map(|p| (p.query.clone(), p.keyword.clone())).collect();
        let pre = &config.pretrain;
        build_confident_set(teacher.expect("checked"), &unlabeled, pre.upper_bound, pre.lower_bound)?
    } else {
        raw.to_vec()
    };
    if !base.iter().any(|p| p.synonymous) {
        return Err(Error::DegenerateTraining(format!(
            "{} pretraining set has no positive pairs",
            strategy.tag()
        )));
    }

    let init = EmbedderParams::random(config.dim, config.buckets, config.init_seed);
    let triplets = triplets_from_pairs(&base, config.pretrain.random_negatives, config.pretrain.seed);
    let mut params = train(&init, &triplets, &config.pretrain)?;

    if strategy.self_trains() {
        let mut seen = HashSet::new();
        let queries: Vec<String> = base
            .iter()
            .filter(|p| p.synonymous && seen.insert(p.query.as_str()))
            .map(|p| p.query.clone())
            .collect();
        params = self_train(
            &params,
            teacher.expect("checked"),
            &queries,
            repo,
            &base,
            &config.pretrain,
            &config.hnsw,
        )?;
    }

    if config.finetune.epochs > 0 && clean.iter().any(|p| p.synonymous) {
        let triplets = triplets_from_pairs(clean, config.finetune.random_negatives, config.finetune.seed);
        params = train(&params, &triplets, &config.finetune)?;
    }
    Ok(params)
}
