use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_gradient_features, loss_features, FeatureTriplet, Gradient};
use super::{EmbedderParams, FeatureVector, Triplet};
use crate::corpus::LabeledPair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub self_train_rounds: usize,
    /// Neighbors retrieved per query when mining hard negatives.
    pub ann_top_k: usize,
    pub upper_bound: f64,
    pub lower_bound: f64,
    /// Random negatives drawn per labeled positive.
    pub random_negatives: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            margin: 0.2,
            learning_rate: 1e-4,
            batch_size: 128,
            epochs: 5,
            self_train_rounds: 2,
            ann_top_k: 20,
            upper_bound: 0.9,
            lower_bound: 0.1,
            random_negatives: 1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return bad("margin must be in (0, 2)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.ann_top_k == 0 {
            return bad("ann_top_k must be >= 1");
        }
        if !(self.upper_bound > 0.0 && self.upper_bound <= 1.0) {
            return bad("upper_bound must be in (0, 1]");
        }
        if !(self.lower_bound >= 0.0 && self.lower_bound < 1.0) {
            return bad("lower_bound must be in [0, 1)");
        }
        if self.lower_bound >= self.upper_bound {
            return bad("lower_bound must be below upper_bound");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("invalid Adam moments");
        }
        Ok(())
    }
}

/// Adam state, updated lazily: only columns with a gradient in the current
/// batch move.
struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn apply(&mut self, params: &mut EmbedderParams, grad: &Gradient, config: &TrainingConfig) {
        self.step += 1;
        let (b1, b2) = (config.beta1, config.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let dim = params.dim();
        for (&f, g) in grad {
            let base = f as usize * dim;
            let col = params.column_mut(f);
            for (j, &gj) in g.iter().enumerate() {
                let m = b1 * self.m[base + j] as f64 + (1.0 - b1) * gj;
                let v = b2 * self.v[base + j] as f64 + (1.0 - b2) * gj * gj;
                self.m[base + j] = m as f32;
                self.v[base + j] = v as f32;
                let step = config.learning_rate * (m / c1) / ((v / c2).sqrt() + config.epsilon);
                col[j] = (col[j] as f64 - step) as f32;
            }
        }
    }
}

/// Featurizes every distinct text once and returns triplets as index triples.
fn index_triplets(params: &EmbedderParams, triplets: &[Triplet]) -> Result<(Vec<FeatureVector>, Vec<[usize; 3]>)> {
    let mut table = Vec::new();
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(triplets.len());
    for t in triplets {
        let mut idx = [0; 3];
        for (slot, text) in [&t.query, &t.positive, &t.negative].into_iter().enumerate() {
            idx[slot] = match ids.get(text.as_str()) {
                Some(&i) => i,
                None => {
                    table.push(params.featurize(text)?);
                    ids.insert(text, table.len() - 1);
                    table.len() - 1
                }
            };
        }
        out.push(idx);
    }
    Ok((table, out))
}

fn refs<'a>(table: &'a [FeatureVector], idx: &[[usize; 3]]) -> Vec<FeatureTriplet<'a>> {
    idx.iter()
        .map(|[q, p, n]| (&table[*q], &table[*p], &table[*n]))
        .collect()
}

/// Trains with Adam and returns the params plus the full-set loss before
/// training and after every epoch.
pub fn train_with_losses(
    params: &EmbedderParams,
    triplets: &[Triplet],
    config: &TrainingConfig,
) -> Result<(EmbedderParams, Vec<f64>)> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(Error::Input("no triplets to train on".into()));
    }
    let mut params = params.clone();
    let (table, idx) = index_triplets(&params, triplets)?;
    let all = refs(&table, &idx);
    let mut losses = vec![loss_features(&params, &all, config.margin)];
    let mut adam = Adam::new(params.dim() * params.buckets());
    let mut order: Vec<usize> = (0..idx.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let batch_refs: Vec<FeatureTriplet<'_>> = batch.iter().map(|&i| all[i]).collect();
            let mut grad = Gradient::new();
            let loss = loss_and_gradient_features(&params, &batch_refs, config.margin, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            adam.apply(&mut params, &grad, config);
        }
        let loss = loss_features(&params, &all, config.margin);
        if !loss.is_finite() || !params.all_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
    }
    params.version += 1;
    Ok((params, losses))
}

/// Runs `config.epochs` passes of Adam over seeded-shuffled batches.
pub fn train(params: &EmbedderParams, triplets: &[Triplet], config: &TrainingConfig) -> Result<EmbedderParams> {
    Ok(train_with_losses(params, triplets, config)?.0)
}

/// Turns labeled pairs into triplets. Each positive `(q, k+)` is paired with
/// every labeled negative of `q` plus `random_negatives` keywords sampled from
/// the other pairs' keywords.
pub fn triplets_from_pairs(pairs: &[LabeledPair], random_negatives: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries: Vec<&str> = Vec::new();
    let mut pos: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut neg: HashMap<&str, Vec<&str>> = HashMap::new();
    for p in pairs {
        if !pos.contains_key(p.query.as_str()) && !neg.contains_key(p.query.as_str()) {
            queries.push(&p.query);
        }
        let bucket = if p.synonymous { &mut pos } else { &mut neg };
        bucket.entry(&p.query).or_default().push(&p.keyword);
        if p.synonymous {
            neg.entry(&p.query).or_default();
        } else {
            pos.entry(&p.query).or_default();
        }
    }
    let mut pool: Vec<&str> = pairs.iter().map(|p| p.keyword.as_str()).collect();
    pool.sort_unstable();
    pool.dedup();

    let mut out = Vec::new();
    for q in queries {
        let positives = &pos[q];
        let excluded: HashSet<&str> = positives.iter().copied().chain(std::iter::once(q)).collect();
        for &kp in positives {
            for &kn in &neg[q] {
                if kn != kp {
                    out.push(Triplet::new(q, kp, kn));
                }
            }
            if pool.len() > excluded.len() {
                let mut drawn = 0;
                while drawn < random_negatives {
                    let kn = pool[rng.gen_range(0..pool.len())];
                    if !excluded.contains(kn) {
                        out.push(Triplet::new(q, kp, kn));
                        drawn += 1;
                    }
                }
            }
        }
    }
    out
}
