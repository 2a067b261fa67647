use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EmbedderParams, FeatureVector};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub query: String,
    pub positive: String,
    pub negative: String,
}

impl Triplet {
    pub fn new(query: impl Into<String>, positive: impl Into<String>, negative: impl Into<String>) -> Self {
        Triplet {
            query: query.into(),
            positive: positive.into(),
            negative: negative.into(),
        }
    }
}

/// Sparse gradient w.r.t. the projection: bucket -> d/d(column).
pub type Gradient = BTreeMap<u32, Vec<f64>>;

/// Unit vector and the norm it was divided by (0 for the degenerate case).
pub(crate) struct Normalized {
    pub unit: Vec<f64>,
    pub norm: f64,
}

pub(crate) fn normalize(params: &EmbedderParams, features: &FeatureVector) -> Normalized {
    let raw = params.project(features);
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut unit = vec![0.0; params.dim()];
        unit[0] = 1.0;
        return Normalized { unit, norm };
    }
    Normalized {
        unit: raw.iter().map(|x| x / norm).collect(),
        norm,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hinge term `D(q,k+) - D(q,k-) + m` with cosine distance.
fn hinge(q: &Normalized, p: &Normalized, n: &Normalized, margin: f64) -> f64 {
    (1.0 - dot(&q.unit, &p.unit)) - (1.0 - dot(&q.unit, &n.unit)) + margin
}

/// Backpropagates `dL/d(unit)` through the normalization into the columns
/// touched by `features`.
fn push_back(features: &FeatureVector, v: &Normalized, grad_unit: &[f64], grad: &mut Gradient) {
    if v.norm == 0.0 {
        return;
    }
    let along = dot(&v.unit, grad_unit);
    let du: Vec<f64> = grad_unit
        .iter()
        .zip(&v.unit)
        .map(|(g, u)| (g - along * u) / v.norm)
        .collect();
    for &(f, count) in &features.entries {
        let col = grad.entry(f).or_insert_with(|| vec![0.0; du.len()]);
        for (c, d) in col.iter_mut().zip(&du) {
            *c += count as f64 * d;
        }
    }
}

pub(crate) type FeatureTriplet<'a> = (&'a FeatureVector, &'a FeatureVector, &'a FeatureVector);

pub(crate) fn loss_features(params: &EmbedderParams, triplets: &[FeatureTriplet<'_>], margin: f64) -> f64 {
    triplets
        .iter()
        .map(|(q, p, n)| {
            let h = hinge(
                &normalize(params, q),
                &normalize(params, p),
                &normalize(params, n),
                margin,
            );
            h.max(0.0)
        })
        .sum()
}

/// Accumulates the hinge subgradient into `grad` and returns the batch loss.
/// A hinge of exactly zero takes the zero subgradient.
pub(crate) fn loss_and_gradient_features(
    params: &EmbedderParams,
    triplets: &[FeatureTriplet<'_>],
    margin: f64,
    grad: &mut Gradient,
) -> f64 {
    let mut loss = 0.0;
    for (qf, pf, nf) in triplets {
        let q = normalize(params, qf);
        let p = normalize(params, pf);
        let n = normalize(params, nf);
        let h = hinge(&q, &p, &n, margin);
        if h <= 0.0 {
            continue;
        }
        loss += h;
        let g_q: Vec<f64> = n.unit.iter().zip(&p.unit).map(|(a, b)| a - b).collect();
        let g_p: Vec<f64> = q.unit.iter().map(|x| -x).collect();
        push_back(qf, &q, &g_q, grad);
        push_back(pf, &p, &g_p, grad);
        push_back(nf, &n, &q.unit, grad);
    }
    loss
}

fn featurize_triplets(params: &EmbedderParams, triplets: &[Triplet]) -> Result<Vec<[FeatureVector; 3]>> {
    triplets
        .iter()
        .map(|t| {
            Ok([
                params.featurize(&t.query)?,
                params.featurize(&t.positive)?,
                params.featurize(&t.negative)?,
            ])
        })
        .collect()
}

/// `sum_i max(0, D(q_i, k+_i) - D(q_i, k-_i) + m)`.
pub fn triplet_loss(params: &EmbedderParams, triplets: &[Triplet], margin: f64) -> Result<f64> {
    let feats = featurize_triplets(params, triplets)?;
    let refs: Vec<FeatureTriplet<'_>> = feats.iter().map(|[q, p, n]| (q, p, n)).collect();
    Ok(loss_features(params, &refs, margin))
}

pub fn triplet_gradient(params: &EmbedderParams, triplets: &[Triplet], margin: f64) -> Result<Gradient> {
    let feats = featurize_triplets(params, triplets)?;
    let refs: Vec<FeatureTriplet<'_>> = feats.iter().map(|[q, p, n]| (q, p, n)).collect();
    let mut grad = Gradient::new();
    loss_and_gradient_features(params, &refs, margin, &mut grad);
    Ok(grad)
}
