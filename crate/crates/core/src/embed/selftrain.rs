use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{train, triplets_from_pairs, EmbedderParams, TrainingConfig, Triplet};
use crate::ann::{HnswConfig, HnswIndex, NeighborIndex};
use crate::corpus::{KeywordRepository, LabeledPair};
use crate::error::{Error, Result};
use crate::teacher::Discriminant;

/// Query text -> keyword texts known to be synonymous with it.
pub type KnownPositives = HashMap<String, Vec<String>>;

pub fn known_positives(pairs: &[LabeledPair]) -> KnownPositives {
    let mut out = KnownPositives::new();
    for p in pairs.iter().filter(|p| p.synonymous) {
        out.entry(p.query.clone()).or_default().push(p.keyword.clone());
    }
    out
}

/// Keeps pairs the teacher is sure about: score `>= upper` becomes a
/// positive, score `<= lower` a negative, anything between is dropped.
pub fn build_confident_set(
    teacher: &dyn Discriminant,
    raw_pairs: &[(String, String)],
    upper: f64,
    lower: f64,
) -> Result<Vec<LabeledPair>> {
    if lower >= upper {
        return Err(Error::Config(format!(
            "lower bound {lower} must be below upper bound {upper}"
        )));
    }
    let scores: Vec<f64> = raw_pairs
        .par_iter()
        .map(|(q, k)| teacher.score(q, k))
        .collect::<Result<_>>()?;
    Ok(raw_pairs
        .iter()
        .zip(scores)
        .filter_map(|((q, k), s)| {
            if s >= upper {
                Some(LabeledPair::new(q.clone(), k.clone(), true))
            } else if s <= lower {
                Some(LabeledPair::new(q.clone(), k.clone(), false))
            } else {
                None
            }
        })
        .collect())
}

/// For each query with a known positive, retrieves its top-`k` keywords under
/// the current embedder and turns every retrieved keyword the teacher scores
/// at or below `lower` into the negative of a new triplet.
#[allow(clippy::too_many_arguments)]
pub fn mine_hard_negatives(
    params: &EmbedderParams,
    teacher: &dyn Discriminant,
    queries: &[String],
    repo: &KeywordRepository,
    positives: &KnownPositives,
    k: usize,
    lower: f64,
    hnsw: &HnswConfig,
) -> Result<Vec<Triplet>> {
    let vectors = params.encode_all(repo.texts())?;
    let index = HnswIndex::build(&vectors, hnsw)?;
    let per_query: Vec<Vec<Triplet>> = queries
        .par_iter()
        .map(|q| -> Result<Vec<Triplet>> {
            let Some(pos) = positives.get(q).filter(|p| !p.is_empty()) else {
                return Ok(Vec::new());
            };
            let known: HashSet<&str> = pos.iter().map(String::as_str).collect();
            let mut out = Vec::new();
            for hit in index.search(&params.encode(q)?, k)? {
                let text = repo.text(hit.id);
                if text == q || known.contains(text) {
                    continue;
                }
                if teacher.score(q, text)? <= lower {
                    out.push(Triplet::new(q.clone(), pos[out.len() % pos.len()].clone(), text));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

/// Iterates: index the repository with the current params, mine hard
/// negatives, fuse them with the triplets of `base_pairs`, retrain.
pub fn self_train(
    params: &EmbedderParams,
    teacher: &dyn Discriminant,
    queries: &[String],
    repo: &KeywordRepository,
    base_pairs: &[LabeledPair],
    config: &TrainingConfig,
    hnsw: &HnswConfig,
) -> Result<EmbedderParams> {
    config.validate()?;
    let base = triplets_from_pairs(base_pairs, config.random_negatives, config.seed);
    let positives = known_positives(base_pairs);
    let mut params = params.clone();
    for round in 0..config.self_train_rounds {
        let mined = mine_hard_negatives(
            &params,
            teacher,
            queries,
            repo,
            &positives,
            config.ann_top_k,
            config.lower_bound,
            hnsw,
        )?;
        let mut fused = base.clone();
        fused.extend(mined);
        let round_config = TrainingConfig {
            seed: config.seed.wrapping_add(round as u64 + 1),
            ..config.clone()
        };
        params = train(&params, &fused, &round_config)?;
    }
    Ok(params)
}
