//! Keyword compression: synonym relations from ANN candidates screened by a
//! discriminant, connected components, representative selection and
//! purification, producing the quotient map from keywords to representatives.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{FlatIndex, HnswConfig, HnswIndex, NeighborIndex};
use crate::corpus::{GroundTruth, KeywordId, KeywordRepository};
use crate::embed::EmbedderParams;
use crate::error::{Error, Result};
use crate::teacher::Discriminant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynonymEdge {
    pub a: KeywordId,
    pub b: KeywordId,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSearch {
    #[default]
    Hnsw,
    /// Brute-force scan; slow, but exact.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressionConfig {
    /// ANN neighbors examined per keyword.
    pub k: usize,
    /// Edge acceptance threshold.
    pub tau_c: f64,
    /// Purification threshold; `tau_c` when unset.
    pub tau_p: Option<f64>,
    pub neighbor_search: NeighborSearch,
    pub hnsw: HnswConfig,
    pub seed: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            k: 20,
            tau_c: 0.5,
            tau_p: None,
            neighbor_search: NeighborSearch::Hnsw,
            hnsw: HnswConfig::default(),
            seed: 0,
        }
    }
}

impl CompressionConfig {
    pub fn tau_p(&self) -> f64 {
        self.tau_p.unwrap_or(self.tau_c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("compression k must be >= 1".into()));
        }
        for (name, t) in [("tau_c", self.tau_c), ("tau_p", self.tau_p())] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {t}")));
            }
        }
        self.hnsw.validate()
    }

    fn index_config(&self) -> HnswConfig {
        HnswConfig {
            seed: self.seed,
            ..self.hnsw.clone()
        }
    }
}

/// Scores the top-`k` neighbors of every keyword and keeps the pairs the
/// teacher accepts. Each unordered pair is scored once, as
/// `teacher(text[min], text[max])`. Edges come back sorted by `(a, b)`.
pub fn detect_relations(
    repo: &KeywordRepository,
    embedder: &EmbedderParams,
    teacher: &dyn Discriminant,
    config: &CompressionConfig,
) -> Result<Vec<SynonymEdge>> {
    config.validate()?;
    if repo.is_empty() {
        return Err(Error::Input("cannot compress an empty repository".into()));
    }
    let vectors = embedder.encode_all(repo.texts())?;
    let index: Box<dyn NeighborIndex> = match config.neighbor_search {
        NeighborSearch::Hnsw => Box::new(HnswIndex::build(&vectors, &config.index_config())?),
        NeighborSearch::Exact => Box::new(FlatIndex::new(&vectors)?),
    };
    let per_keyword: Vec<Vec<(KeywordId, KeywordId)>> = (0..repo.len() as KeywordId)
        .into_par_iter()
        .map(|id| -> Result<Vec<(KeywordId, KeywordId)>> {
            let hits = index.search(&vectors[id as usize], config.k + 1)?;
            Ok(hits
                .into_iter()
                .filter(|h| h.id != id)
                .take(config.k)
                .map(|h| (id.min(h.id), id.max(h.id)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut candidates: Vec<(KeywordId, KeywordId)> = per_keyword.into_iter().flatten().collect();
    candidates.par_sort_unstable();
    candidates.dedup();

    let scored: Vec<Option<SynonymEdge>> = candidates
        .par_iter()
        .map(|&(a, b)| -> Result<Option<SynonymEdge>> {
            let score = teacher.score(repo.text(a), repo.text(b))?;
            Ok((score >= config.tau_c).then_some(SynonymEdge { a, b, score }))
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}

/// Components of the graph on `n` vertices, each sorted, ordered by their
/// smallest member.
pub fn connected_components(edges: &[(KeywordId, KeywordId)], n: usize) -> Result<Vec<Vec<KeywordId>>> {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        if a as usize >= n || b as usize >= n {
            return Err(Error::Input(format!("edge ({a}, {b}) has an endpoint >= {n}")));
        }
        uf.union(a, b);
    }
    let mut slot: HashMap<u32, usize> = HashMap::new();
    let mut out: Vec<Vec<KeywordId>> = Vec::new();
    // Scanning ids in order makes each component's first member its
    // smallest, so components come out ordered and sorted.
    for id in 0..n as u32 {
        let root = uf.find(id);
        let i = *slot.entry(root).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[i].push(id);
    }
    Ok(out)
}

/// Accepted-edge count of every member, counting only edges with both ends
/// in `members`.
pub fn relation_degrees(members: &[KeywordId], edges: &[SynonymEdge]) -> BTreeMap<KeywordId, usize> {
    let mut degrees: BTreeMap<KeywordId, usize> = members.iter().map(|&m| (m, 0)).collect();
    for e in edges {
        if degrees.contains_key(&e.a) && degrees.contains_key(&e.b) {
            *degrees.get_mut(&e.a).expect("present") += 1;
            *degrees.get_mut(&e.b).expect("present") += 1;
        }
    }
    degrees
}

/// Member with the largest degree; ties go to the smallest id.
pub fn select_representative(degrees: &BTreeMap<KeywordId, usize>) -> Option<KeywordId> {
    degrees
        .iter()
        .max_by(|(ia, da), (ib, db)| da.cmp(db).then(ib.cmp(ia)))
        .map(|(&id, _)| id)
}

/// Splits `members` into those the teacher confirms against the
/// representative (kept, including the representative) and the rest.
pub fn purify_cluster(
    repo: &KeywordRepository,
    teacher: &dyn Discriminant,
    representative: KeywordId,
    members: &[KeywordId],
    tau_p: f64,
) -> Result<(Vec<KeywordId>, Vec<KeywordId>)> {
    if !members.contains(&representative) {
        return Err(Error::Input(format!("representative {representative} is not a member")));
    }
    let rep_text = repo.text(representative);
    let verdicts: Vec<bool> = members
        .iter()
        .map(|&m| Ok(m == representative || teacher.score(rep_text, repo.text(m))? >= tau_p))
        .collect::<Result<_>>()?;
    let mut kept = Vec::new();
    let mut evicted = Vec::new();
    for (&m, keep) in members.iter().zip(verdicts) {
        if keep {
            kept.push(m);
        } else {
            evicted.push(m);
        }
    }
    Ok((kept, evicted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymCluster {
    pub representative: KeywordId,
    /// Sorted, representative included.
    pub members: Vec<KeywordId>,
    /// Accepted edges per member inside the cluster. Empty for maps read
    /// back from a file, which does not record edges.
    pub degrees: BTreeMap<KeywordId, usize>,
}

impl SynonymCluster {
    fn singleton(id: KeywordId) -> Self {
        SynonymCluster {
            representative: id,
            members: vec![id],
            degrees: BTreeMap::from([(id, 0)]),
        }
    }
}

/// A partition of the keyword ids `0..n`, one representative per cluster.
/// Clusters are ordered by their smallest member.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMap {
    clusters: Vec<SynonymCluster>,
    cluster_of: Vec<u32>,
    rep_index: HashMap<KeywordId, usize>,
}

impl QuotientMap {
    /// Validates that `clusters` partition `0..n` and indexes them.
    pub fn from_clusters(mut clusters: Vec<SynonymCluster>, n: usize) -> Result<Self> {
        const UNSET: u32 = u32::MAX;
        for c in &mut clusters {
            c.members.sort_unstable();
        }
        clusters.sort_by_key(|c| c.members.first().copied());
        let mut cluster_of = vec![UNSET; n];
        let mut rep_index = HashMap::with_capacity(clusters.len());
        for (i, c) in clusters.iter().enumerate() {
            if c.members.binary_search(&c.representative).is_err() {
                return Err(Error::Input(format!(
                    "representative {} outside its cluster",
                    c.representative
                )));
            }
            for &m in &c.members {
                let slot = cluster_of
                    .get_mut(m as usize)
                    .ok_or_else(|| Error::Input(format!("member {m} outside 0..{n}")))?;
                if *slot != UNSET {
                    return Err(Error::Input(format!("keyword {m} appears in two clusters")));
                }
                *slot = i as u32;
            }
            rep_index.insert(c.representative, i);
        }
        if let Some(missing) = cluster_of.iter().position(|&c| c == UNSET) {
            return Err(Error::Input(format!("keyword {missing} is in no cluster")));
        }
        Ok(QuotientMap {
            clusters,
            cluster_of,
            rep_index,
        })
    }

    /// Every keyword its own representative.
    pub fn singletons(n: usize) -> Self {
        Self::from_clusters((0..n as KeywordId).map(SynonymCluster::singleton).collect(), n).expect("valid partition")
    }

    /// Map from `rep_of[member] = representative`.
    pub fn from_representatives(rep_of: &[KeywordId]) -> Result<Self> {
        let mut groups: BTreeMap<KeywordId, Vec<KeywordId>> = BTreeMap::new();
        for (m, &r) in rep_of.iter().enumerate() {
            groups.entry(r).or_default().push(m as KeywordId);
        }
        let clusters = groups
            .into_iter()
            .map(|(representative, members)| SynonymCluster {
                representative,
                members,
                degrees: BTreeMap::new(),
            })
            .collect();
        Self::from_clusters(clusters, rep_of.len())
    }

    pub fn num_keywords(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[SynonymCluster] {
        &self.clusters
    }

    /// Representatives in cluster order.
    pub fn representatives(&self) -> Vec<KeywordId> {
        self.clusters.iter().map(|c| c.representative).collect()
    }

    pub fn cluster_of(&self, id: KeywordId) -> Result<&SynonymCluster> {
        self.cluster_of
            .get(id as usize)
            .map(|&c| &self.clusters[c as usize])
            .ok_or(Error::UnknownId(u64::from(id)))
    }

    pub fn representative_of(&self, id: KeywordId) -> Result<KeywordId> {
        Ok(self.cluster_of(id)?.representative)
    }

    /// Members of the cluster `representative` stands for.
    pub fn expand(&self, representative: KeywordId) -> Result<&[KeywordId]> {
        self.rep_index
            .get(&representative)
            .map(|&i| self.clusters[i].members.as_slice())
            .ok_or(Error::UnknownId(u64::from(representative)))
    }

    pub fn is_representative(&self, id: KeywordId) -> bool {
        self.rep_index.contains_key(&id)
    }

    /// `member<TAB>representative`, one row per keyword in id order.
    pub fn to_tsv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (m, &c) in self.cluster_of.iter().enumerate() {
            out.extend_from_slice(format!("{m}\t{}\n", self.clusters[c as usize].representative).as_bytes());
        }
        out
    }

    pub fn parse_tsv(contents: &str) -> Result<Self> {
        const CTX: &str = "quotient map";
        let mut rep_of = Vec::new();
        let mut offset = 0u64;
        for (line_no, line) in contents.lines().enumerate() {
            let bad = |msg: String| Error::format(CTX, offset, msg);
            let (m, r) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("line {line_no}: expected two columns")))?;
            let m: usize = m
                .parse()
                .map_err(|_| bad(format!("line {line_no}: bad member id {m:?}")))?;
            let r: KeywordId = r
                .parse()
                .map_err(|_| bad(format!("line {line_no}: bad representative id {r:?}")))?;
            if m != line_no {
                return Err(bad(format!(
                    "line {line_no}: member ids must be dense and sorted, got {m}"
                )));
            }
            rep_of.push(r);
            offset += line.len() as u64 + 1;
        }
        Self::from_representatives(&rep_of)
    }

    /// Writes the TSV at `path` and a JSON sidecar next to it.
    pub fn write(&self, path: &Path, config: &serde_json::Value) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let json = serde_json::json!({
            "n_keywords": self.num_keywords(),
            "n_clusters": self.num_clusters(),
            "ratio": compression_ratio(self),
            "config": config,
        });
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `quotient.tsv` -> `quotient.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Keywords per cluster.
pub fn compression_ratio(map: &QuotientMap) -> f64 {
    if map.num_clusters() == 0 {
        return 1.0;
    }
    map.num_keywords() as f64 / map.num_clusters() as f64
}

/// Runs the full compression: relations, components, representatives,
/// purification. Evicted members become singleton clusters.
pub fn compress(
    repo: &KeywordRepository,
    embedder: &EmbedderParams,
    teacher: &dyn Discriminant,
    config: &CompressionConfig,
) -> Result<QuotientMap> {
    let edges = detect_relations(repo, embedder, teacher, config)?;
    let pairs: Vec<(KeywordId, KeywordId)> = edges.iter().map(|e| (e.a, e.b)).collect();
    let components = connected_components(&pairs, repo.len())?;

    let mut component_of = vec![0usize; repo.len()];
    for (i, c) in components.iter().enumerate() {
        for &m in c {
            component_of[m as usize] = i;
        }
    }
    let mut edges_of: Vec<Vec<SynonymEdge>> = vec![Vec::new(); components.len()];
    for e in edges {
        edges_of[component_of[e.a as usize]].push(e);
    }

    let tau_p = config.tau_p();
    let per_component: Vec<Vec<SynonymCluster>> = components
        .par_iter()
        .zip(edges_of.par_iter())
        .map(|(members, edges)| -> Result<Vec<SynonymCluster>> {
            if members.len() == 1 {
                return Ok(vec![SynonymCluster::singleton(members[0])]);
            }
            let degrees = relation_degrees(members, edges);
            let rep = select_representative(&degrees).expect("non-empty component");
            let (kept, evicted) = purify_cluster(repo, teacher, rep, members, tau_p)?;
            let mut out = vec![SynonymCluster {
                representative: rep,
                degrees: relation_degrees(&kept, edges),
                members: kept,
            }];
            out.extend(evicted.into_iter().map(SynonymCluster::singleton));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    QuotientMap::from_clusters(per_component.into_iter().flatten().collect(), repo.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the value defaulted to 1.
    pub vacuous: bool,
}

fn pairs_in(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Same-cluster pair agreement between `map` and the ground truth.
pub fn pairwise_f1(map: &QuotientMap, gt: &GroundTruth) -> Result<PairwiseScores> {
    if map.num_keywords() != gt.cluster_of.len() {
        return Err(Error::Input(format!(
            "map covers {} keywords, ground truth {}",
            map.num_keywords(),
            gt.cluster_of.len()
        )));
    }
    let mut truth_sizes: HashMap<u32, u64> = HashMap::new();
    for &c in &gt.cluster_of {
        *truth_sizes.entry(c).or_default() += 1;
    }
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    for (m, &c) in map.cluster_of.iter().enumerate() {
        *joint.entry((c, gt.cluster_of[m])).or_default() += 1;
    }
    let predicted: u64 = map.clusters.iter().map(|c| pairs_in(c.members.len() as u64)).sum();
    let actual: u64 = truth_sizes.values().map(|&s| pairs_in(s)).sum();
    let correct: u64 = joint.values().map(|&s| pairs_in(s)).sum();

    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let (precision, recall) = (ratio(correct, predicted), ratio(correct, actual));
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PairwiseScores {
        precision,
        recall,
        f1,
        vacuous: predicted == 0 || actual == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::OracleTeacher;

    fn edge(a: u32, b: u32) -> SynonymEdge {
        SynonymEdge { a, b, score: 1.0 }
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0));
        assert_eq!(uf.find(0), uf.find(1));
        assert_ne!(uf.find(0), uf.find(3));
        let r = uf.find(4);
        assert_eq!(uf.find(r), r);
    }

    #[test]
    fn components_examples() {
        assert_eq!(
            connected_components(&[(0, 1), (1, 2)], 4).unwrap(),
            vec![vec![0, 1, 2], vec![3]]
        );
        assert_eq!(connected_components(&[], 3).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert!(matches!(connected_components(&[(0, 3)], 3), Err(Error::Input(_))));
        assert_eq!(
            connected_components(&[(3, 1)], 4).unwrap(),
            vec![vec![0], vec![1, 3], vec![2]]
        );
    }

    #[test]
    fn representative_rule() {
        let (a, b, c) = (1, 2, 3);
        let degrees = BTreeMap::from([(a, 3), (b, 1), (c, 2)]);
        assert_eq!(select_representative(&degrees), Some(a));
        assert_eq!(select_representative(&BTreeMap::from([(7, 0)])), Some(7));
        assert_eq!(select_representative(&BTreeMap::from([(5, 2), (9, 2)])), Some(5));
        assert_eq!(select_representative(&BTreeMap::new()), None);
    }

    #[test]
    fn degrees_ignore_outside_edges() {
        let d = relation_degrees(&[0, 1, 2], &[edge(0, 1), edge(1, 2), edge(2, 5)]);
        assert_eq!(d, BTreeMap::from([(0, 1), (1, 2), (2, 1)]));
    }

    struct Chain;

    impl Discriminant for Chain {
        // a~b and b~c are accepted, a~c is not.
        fn score(&self, q: &str, k: &str) -> Result<f64> {
            let far = matches!((q, k), ("a", "c") | ("c", "a"));
            Ok(if far { 0.1 } else { 0.9 })
        }
    }

    #[test]
    fn purification_evicts_transitive_errors() {
        let repo = KeywordRepository::from_texts(["a", "b", "c"]).unwrap();
        let (kept, evicted) = purify_cluster(&repo, &Chain, 0, &[0, 1, 2], 0.5).unwrap();
        assert_eq!((kept, evicted), (vec![0, 1], vec![2]));
        assert!(purify_cluster(&repo, &Chain, 0, &[1, 2], 0.5).is_err());

        let oracle = OracleTeacher::from_texts([("a".into(), 0), ("b".into(), 0), ("c".into(), 0)]);
        let (_, evicted) = purify_cluster(&repo, &oracle, 1, &[0, 1, 2], 0.5).unwrap();
        assert!(evicted.is_empty());
    }

    #[test]
    fn map_partition_checks() {
        let c = |rep, members: &[u32]| SynonymCluster {
            representative: rep,
            members: members.to_vec(),
            degrees: BTreeMap::new(),
        };
        assert!(QuotientMap::from_clusters(vec![c(0, &[0, 1]), c(2, &[2])], 3).is_ok());
        assert!(QuotientMap::from_clusters(vec![c(0, &[0, 1]), c(1, &[1, 2])], 3).is_err());
        assert!(QuotientMap::from_clusters(vec![c(0, &[0, 1])], 3).is_err());
        assert!(QuotientMap::from_clusters(vec![c(2, &[0, 1]), c(2, &[2])], 3).is_err());
        assert!(QuotientMap::from_clusters(vec![c(0, &[0, 1, 3]), c(2, &[2])], 3).is_err());
    }

    #[test]
    fn ratio_and_expand() {
        let rep_of: Vec<u32> = (0..12).map(|i| i / 4 * 4).collect();
        let map = QuotientMap::from_representatives(&rep_of).unwrap();
        assert_eq!(map.num_clusters(), 3);
        assert_eq!(compression_ratio(&map), 4.0);
        assert_eq!(map.expand(4).unwrap(), &[4, 5, 6, 7]);
        assert!(map.expand(5).is_err());
        assert_eq!(compression_ratio(&QuotientMap::singletons(7)), 1.0);
        assert_eq!(QuotientMap::singletons(1).expand(0).unwrap(), &[0]);
        // 460M keywords onto 80M representatives.
        assert!((460.0f64 / 80.0 - 5.75).abs() < 1e-12);
    }

    #[test]
    fn tsv_round_trip() {
        let map = QuotientMap::from_representatives(&[1, 1, 2, 1]).unwrap();
        let tsv = map.to_tsv();
        assert_eq!(String::from_utf8(tsv.clone()).unwrap(), "0\t1\n1\t1\n2\t2\n3\t1\n");
        let back = QuotientMap::parse_tsv(std::str::from_utf8(&tsv).unwrap()).unwrap();
        assert_eq!(back, map);
        assert!(QuotientMap::parse_tsv("1\t1\n").is_err());
        assert!(QuotientMap::parse_tsv("0\tx\n").is_err());
        assert!(QuotientMap::parse_tsv("0\t1\n1\t0\n").is_err());
    }

    fn gt(cluster_of: Vec<u32>) -> GroundTruth {
        GroundTruth {
            cluster_of,
            query_cluster: Vec::new(),
        }
    }

    #[test]
    fn f1_examples() {
        let truth = gt(vec![0, 0, 1, 1, 1]);
        let same = QuotientMap::from_representatives(&[0, 0, 2, 2, 2]).unwrap();
        let s = pairwise_f1(&same, &truth).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.vacuous), (1.0, 1.0, 1.0, false));

        let s = pairwise_f1(&QuotientMap::singletons(3), &gt(vec![0, 0, 1])).unwrap();
        assert_eq!((s.precision, s.recall, s.vacuous), (1.0, 0.0, true));
        assert!(pairwise_f1(&QuotientMap::singletons(3), &truth).is_err());
    }

    #[test]
    fn tiny_compress() {
        let one = KeywordRepository::from_texts(["price of kalo mitu"]).unwrap();
        let oracle = OracleTeacher::from_texts([("price of kalo mitu".into(), 0)]);
        let params = EmbedderParams::random(8, 1024, 0);
        assert!(detect_relations(&one, &params, &oracle, &CompressionConfig::default())
            .unwrap()
            .is_empty());

        let two = KeywordRepository::from_texts(["kalo mitu", "kalo mitu cost"]).unwrap();
        let oracle = OracleTeacher::from_texts([("kalo mitu".into(), 0), ("kalo mitu cost".into(), 0)]);
        let config = CompressionConfig {
            k: 1,
            ..Default::default()
        };
        let edges = detect_relations(&two, &params, &oracle, &config).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].a, edges[0].b), (0, 1));
        let map = compress(&two, &params, &oracle, &config).unwrap();
        assert_eq!(map.num_clusters(), 1);
    }
}
