//! Online matching: embed the query, search the representative index, screen
//! candidates with the discriminant, expand survivors to their clusters. The
//! baseline searches the full repository instead and does not expand.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::ann::{HnswConfig, HnswIndex, NeighborIndex, SearchHit};
use crate::corpus::{KeywordId, KeywordRepository};
use crate::embed::EmbedderParams;
use crate::error::{Error, Result};
use crate::quotient::QuotientMap;
use crate::teacher::Discriminant;

/// Per-stage wall time in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub embed: f64,
    pub ann: f64,
    pub screen: f64,
    pub expand: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.embed + self.ann + self.screen + self.expand
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedRepresentative {
    pub id: KeywordId,
    pub dist: f32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query: String,
    /// Candidates that passed screening, by ascending distance.
    pub representatives: Vec<MatchedRepresentative>,
    /// Returned keyword ids ordered by (representative distance, id).
    pub keywords: Vec<KeywordId>,
    pub timings: StageTimings,
}

impl RetrievalResult {
    /// One JSON-lines record.
    pub fn to_json(&self, repo: &KeywordRepository) -> serde_json::Value {
        serde_json::json!({
            "query": self.query,
            "representatives": self.representatives.iter().map(|r| serde_json::json!({
                "id": r.id,
                "text": repo.text(r.id),
                "dist": r.dist,
                "score": r.score,
            })).collect::<Vec<_>>(),
            "keywords": self.keywords.iter().map(|&k| serde_json::json!({
                "id": k,
                "text": repo.text(k),
            })).collect::<Vec<_>>(),
            "timings_us": self.timings,
        })
    }
}

fn micros(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e6
}

fn check_query(query: &str) -> Result<()> {
    if query.trim().is_empty() {
        return Err(Error::Input("empty query".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
/// Stages I to III shared by both pipelines: embed, search, screen. Returns
/// the surviving hits with their scores.
fn search_and_screen(
    embedder: &EmbedderParams,
    index: &HnswIndex,
    ids: &dyn Fn(u32) -> KeywordId,
    repo: &KeywordRepository,
    teacher: &dyn Discriminant,
    tau_q: f64,
    query: &str,
    k: usize,
    timings: &mut StageTimings,
) -> Result<Vec<MatchedRepresentative>> {
    check_query(query)?;
    if k == 0 {
        return Err(Error::Input("k must be >= 1".into()));
    }
    let t = Instant::now();
    let v = embedder.encode(query)?;
    timings.embed = micros(t);

    let t = Instant::now();
    let hits: Vec<SearchHit> = index.search(&v, k)?;
    timings.ann = micros(t);

    let t = Instant::now();
    let texts: Vec<&str> = hits.iter().map(|h| repo.text(ids(h.id))).collect();
    let scores = teacher.score_many(query, &texts)?;
    let kept = hits
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s >= tau_q)
        .map(|(h, score)| MatchedRepresentative {
            id: ids(h.id),
            dist: h.dist,
            score,
        })
        .collect();
    timings.screen = micros(t);
    Ok(kept)
}

/// The quotient pipeline. Immutable once built.
#[derive(Clone)]
pub struct RetrievalPipeline {
    embedder: Arc<EmbedderParams>,
    index: HnswIndex,
    /// Index element -> representative keyword id.
    rep_ids: Vec<KeywordId>,
    teacher: Arc<dyn Discriminant>,
    tau_q: f64,
    map: Arc<QuotientMap>,
    repo: Arc<KeywordRepository>,
    expansion_cap: Option<usize>,
}

impl RetrievalPipeline {
    /// Embeds the representatives and indexes them.
    pub fn build(
        repo: Arc<KeywordRepository>,
        map: Arc<QuotientMap>,
        embedder: Arc<EmbedderParams>,
        teacher: Arc<dyn Discriminant>,
        tau_q: f64,
        hnsw: &HnswConfig,
    ) -> Result<Self> {
        let rep_ids = map.representatives();
        let index = build_index(&repo, &map, &embedder, hnsw)?;
        Self::from_parts(repo, map, embedder, teacher, tau_q, index, rep_ids)
    }

    /// Assembles a pipeline around an index built earlier, e.g. one read
    /// from disk. `rep_ids[i]` is the keyword behind index element `i`.
    pub fn from_parts(
        repo: Arc<KeywordRepository>,
        map: Arc<QuotientMap>,
        embedder: Arc<EmbedderParams>,
        teacher: Arc<dyn Discriminant>,
        tau_q: f64,
        index: HnswIndex,
        rep_ids: Vec<KeywordId>,
    ) -> Result<Self> {
        if map.num_keywords() != repo.len() {
            return Err(Error::Input(format!(
                "quotient map covers {} keywords, repository has {}",
                map.num_keywords(),
                repo.len()
            )));
        }
        if index.len() != rep_ids.len() || rep_ids.len() != map.num_clusters() {
            return Err(Error::Consistency(format!(
                "index has {} elements for {} representatives",
                index.len(),
                map.num_clusters()
            )));
        }
        if let Some(r) = rep_ids.iter().find(|&&r| !map.is_representative(r)) {
            return Err(Error::Consistency(format!("index element {r} is not a representative")));
        }
        if !index.is_empty() && index.dim() != embedder.dim() {
            return Err(Error::Dimension {
                expected: embedder.dim(),
                actual: index.dim(),
            });
        }
        Ok(RetrievalPipeline {
            embedder,
            index,
            rep_ids,
            teacher,
            tau_q,
            map,
            repo,
            expansion_cap: None,
        })
    }

    /// Caps the number of keywords a single query may return.
    pub fn with_expansion_cap(mut self, cap: Option<usize>) -> Self {
        self.expansion_cap = cap;
        self
    }

    pub fn index(&self) -> &HnswIndex {
        &self.index
    }

    pub fn repo(&self) -> &KeywordRepository {
        &self.repo
    }

    pub fn map(&self) -> &QuotientMap {
        &self.map
    }

    pub fn embedder(&self) -> &EmbedderParams {
        &self.embedder
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult> {
        let mut timings = StageTimings::default();
        let ids = |i: u32| self.rep_ids[i as usize];
        let reps = search_and_screen(
            &self.embedder,
            &self.index,
            &ids,
            &self.repo,
            self.teacher.as_ref(),
            self.tau_q,
            query,
            k,
            &mut timings,
        )?;

        let t = Instant::now();
        let cap = self.expansion_cap.unwrap_or(usize::MAX);
        let mut keywords = Vec::new();
        'outer: for r in &reps {
            for &m in expand(&self.map, r.id)? {
                if keywords.len() >= cap {
                    break 'outer;
                }
                keywords.push(m);
            }
        }
        timings.expand = micros(t);
        Ok(RetrievalResult {
            query: query.to_string(),
            representatives: reps,
            keywords,
            timings,
        })
    }
}

/// Index over the representative embeddings, in cluster order.
pub fn build_index(
    repo: &KeywordRepository,
    map: &QuotientMap,
    embedder: &EmbedderParams,
    hnsw: &HnswConfig,
) -> Result<HnswIndex> {
    let reps = map.representatives();
    let vectors = embedder.encode_all(reps.iter().map(|&r| repo.text(r)))?;
    HnswIndex::build(&vectors, hnsw)
}

/// All members of the cluster of `representative`.
pub fn expand(map: &QuotientMap, representative: KeywordId) -> Result<&[KeywordId]> {
    map.expand(representative)
}

/// ANN over every keyword, screened, no expansion.
#[derive(Clone)]
pub struct BaselinePipeline {
    embedder: Arc<EmbedderParams>,
    index: HnswIndex,
    teacher: Arc<dyn Discriminant>,
    tau_q: f64,
    repo: Arc<KeywordRepository>,
}

impl BaselinePipeline {
    pub fn build(
        repo: Arc<KeywordRepository>,
        embedder: Arc<EmbedderParams>,
        teacher: Arc<dyn Discriminant>,
        tau_q: f64,
        hnsw: &HnswConfig,
    ) -> Result<Self> {
        let vectors = embedder.encode_all(repo.texts())?;
        let index = HnswIndex::build(&vectors, hnsw)?;
        Self::from_parts(repo, embedder, teacher, tau_q, index)
    }

    pub fn from_parts(
        repo: Arc<KeywordRepository>,
        embedder: Arc<EmbedderParams>,
        teacher: Arc<dyn Discriminant>,
        tau_q: f64,
        index: HnswIndex,
    ) -> Result<Self> {
        if index.len() != repo.len() {
            return Err(Error::Consistency(format!(
                "index has {} elements for {} keywords",
                index.len(),
                repo.len()
            )));
        }
        Ok(BaselinePipeline {
            embedder,
            index,
            teacher,
            tau_q,
            repo,
        })
    }

    pub fn index(&self) -> &HnswIndex {
        &self.index
    }

    pub fn repo(&self) -> &KeywordRepository {
        &self.repo
    }

    pub fn embedder(&self) -> &EmbedderParams {
        &self.embedder
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult> {
        let mut timings = StageTimings::default();
        let matched = search_and_screen(
            &self.embedder,
            &self.index,
            &|i| i,
            &self.repo,
            self.teacher.as_ref(),
            self.tau_q,
            query,
            k,
            &mut timings,
        )?;
        let keywords = matched.iter().map(|m| m.id).collect();
        Ok(RetrievalResult {
            query: query.to_string(),
            representatives: matched,
            keywords,
            timings,
        })
    }
}

/// Either pipeline, for code that measures both.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult>;
    fn repo(&self) -> &KeywordRepository;
    fn index(&self) -> &HnswIndex;
}

impl Retriever for RetrievalPipeline {
    fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult> {
        RetrievalPipeline::retrieve(self, query, k)
    }

    fn repo(&self) -> &KeywordRepository {
        &self.repo
    }

    fn index(&self) -> &HnswIndex {
        &self.index
    }
}

impl Retriever for BaselinePipeline {
    fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult> {
        BaselinePipeline::retrieve(self, query, k)
    }

    fn repo(&self) -> &KeywordRepository {
        &self.repo
    }

    fn index(&self) -> &HnswIndex {
        &self.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::OracleTeacher;

    struct Rejects(&'static str);

    impl Discriminant for Rejects {
        fn score(&self, _: &str, keyword: &str) -> Result<f64> {
            Ok(if keyword == self.0 { 0.0 } else { 1.0 })
        }
    }

    fn fixture() -> (Arc<KeywordRepository>, Arc<QuotientMap>, Arc<EmbedderParams>) {
        let repo = KeywordRepository::from_texts([
            "kalo mitu",
            "kalo mitu cost",
            "price of kalo mitu",
            "rasebo vetu",
            "rasebo vetu fees",
        ])
        .unwrap();
        let map = QuotientMap::from_representatives(&[0, 0, 0, 3, 3]).unwrap();
        (
            Arc::new(repo),
            Arc::new(map),
            Arc::new(EmbedderParams::random(16, 4096, 3)),
        )
    }

    #[test]
    fn screening_drops_rejected_representative() {
        let (repo, map, emb) = fixture();
        let p = RetrievalPipeline::build(
            repo,
            map,
            emb,
            Arc::new(Rejects("rasebo vetu")),
            0.5,
            &HnswConfig::default(),
        )
        .unwrap();
        assert_eq!(p.index().len(), 2);
        let r = p.retrieve("how much is kalo mitu", 2).unwrap();
        assert_eq!(r.representatives.len(), 1);
        assert_eq!(r.keywords, vec![0, 1, 2]);
    }

    #[test]
    fn all_rejected_is_empty_not_error() {
        let (repo, map, emb) = fixture();
        let p = RetrievalPipeline::build(
            repo,
            map,
            emb,
            Arc::new(OracleTeacher::from_texts([
                ("q".to_string(), 9),
                ("kalo mitu".to_string(), 0),
                ("rasebo vetu".to_string(), 1),
            ])),
            0.5,
            &HnswConfig::default(),
        )
        .unwrap();
        let r = p.retrieve("q", 10).unwrap();
        assert!(r.keywords.is_empty() && r.representatives.is_empty());
        assert!(matches!(p.retrieve("  ", 10), Err(Error::Input(_))));
    }

    #[test]
    fn expansion_cap() {
        let (repo, map, emb) = fixture();
        let p = RetrievalPipeline::build(repo, map, emb, Arc::new(Rejects("")), 0.5, &HnswConfig::default())
            .unwrap()
            .with_expansion_cap(Some(4));
        assert_eq!(p.retrieve("kalo mitu", 2).unwrap().keywords.len(), 4);
    }

    #[test]
    fn baseline_exhaustive_k() {
        let (repo, _, emb) = fixture();
        let b = BaselinePipeline::build(repo.clone(), emb, Arc::new(Rejects("")), 0.5, &HnswConfig::default()).unwrap();
        let mut got = b.retrieve("kalo mitu", 10).unwrap().keywords;
        got.sort_unstable();
        assert_eq!(got, (0..repo.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn from_parts_rejects_mismatch() {
        let (repo, map, emb) = fixture();
        let index = HnswIndex::build(&emb.encode_all(repo.texts()).unwrap(), &HnswConfig::default()).unwrap();
        let r = RetrievalPipeline::from_parts(repo, map, emb, Arc::new(Rejects("")), 0.5, index, vec![0, 3]);
        assert!(matches!(r, Err(Error::Consistency(_))));
    }
}
