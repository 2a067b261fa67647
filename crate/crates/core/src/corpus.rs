//! Keyword repositories, ground truth, labeled pairs and the synthetic
//! synonym-cluster generator.
//!
//! The generator builds one base phrase per cluster out of a seeded
//! pseudo-word vocabulary and renders surface variants through paraphrase
//! templates ("price of X", "how much is X", "X cost", ...). Every vocabulary
//! word also owns one alias, an unrelated pseudo-word with the same meaning,
//! so some variants of a cluster share no surface form for that word.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type KeywordId = u32;
pub type ClusterId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keyword {
    pub id: KeywordId,
    pub text: String,
}

/// The keyword repository: dense ids `0..n`, unique texts.
#[derive(Debug, Clone, Default)]
pub struct KeywordRepository {
    keywords: Vec<Keyword>,
    by_text: HashMap<String, KeywordId>,
}

fn validate_text(text: &str) -> std::result::Result<(), &'static str> {
    if text.trim().is_empty() {
        return Err("empty keyword");
    }
    if text.trim() != text {
        return Err("leading or trailing whitespace");
    }
    if text.contains(['\t', '\n', '\r']) {
        return Err("tab or newline inside keyword");
    }
    Ok(())
}

impl KeywordRepository {
    pub fn from_texts<I, S>(texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut repo = KeywordRepository::default();
        for (line, text) in texts.into_iter().enumerate() {
            let text = text.into();
            validate_text(&text).map_err(|m| Error::format("keyword repository", line as u64, m))?;
            if repo.by_text.contains_key(&text) {
                return Err(Error::DuplicateKeyword { line, text });
            }
            let id = repo.keywords.len() as KeywordId;
            repo.by_text.insert(text.clone(), id);
            repo.keywords.push(Keyword { id, text });
        }
        Ok(repo)
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn get(&self, id: KeywordId) -> Option<&Keyword> {
        self.keywords.get(id as usize)
    }

    pub fn text(&self, id: KeywordId) -> &str {
        &self.keywords[id as usize].text
    }

    pub fn id_of(&self, text: &str) -> Option<KeywordId> {
        self.by_text.get(text).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Keyword> {
        self.keywords.iter()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|k| k.text.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for k in &self.keywords {
            out.extend_from_slice(k.text.as_bytes());
            out.push(b'\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Parses a repository from file contents: one keyword per LF-terminated
/// line, line number is the id.
pub fn parse_repository(contents: &str) -> Result<KeywordRepository> {
    let body = contents.strip_suffix('\n').unwrap_or(contents);
    if body.is_empty() {
        return Ok(KeywordRepository::default());
    }
    KeywordRepository::from_texts(body.split('\n'))
}

pub fn load_repository(path: &Path) -> Result<KeywordRepository> {
    let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_repository(&contents)
}

pub fn load_lines(path: &Path) -> Result<Vec<String>> {
    let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (line, text) in contents.lines().enumerate() {
        validate_text(text).map_err(|m| Error::format(path.display().to_string(), line as u64, m))?;
        out.push(text.to_string());
    }
    Ok(out)
}

/// Cluster assignment for every keyword and every query.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub cluster_of: Vec<ClusterId>,
    pub query_cluster: Vec<ClusterId>,
}

impl GroundTruth {
    pub fn cluster(&self, id: KeywordId) -> Result<ClusterId> {
        self.cluster_of
            .get(id as usize)
            .copied()
            .ok_or(Error::UnknownId(id as u64))
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_of
            .iter()
            .chain(&self.query_cluster)
            .map(|&c| c as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Keyword ids grouped by cluster id.
    pub fn members(&self) -> Vec<Vec<KeywordId>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (id, &c) in self.cluster_of.iter().enumerate() {
            out[c as usize].push(id as KeywordId);
        }
        out
    }

    fn tsv(rows: &[ClusterId]) -> Vec<u8> {
        let mut out = Vec::new();
        for (id, c) in rows.iter().enumerate() {
            writeln!(out, "{id}\t{c}").expect("write to vec");
        }
        out
    }

    pub fn keyword_tsv(&self) -> Vec<u8> {
        Self::tsv(&self.cluster_of)
    }

    pub fn query_tsv(&self) -> Vec<u8> {
        Self::tsv(&self.query_cluster)
    }

    pub fn parse_tsv(contents: &str, context: &str) -> Result<Vec<ClusterId>> {
        let mut out = Vec::new();
        for (line, row) in contents.lines().enumerate() {
            let bad = |m: &str| Error::format(context, line as u64, m.to_string());
            let (id, cluster) = row.split_once('\t').ok_or_else(|| bad("expected id<TAB>cluster"))?;
            let id: usize = id.parse().map_err(|_| bad("bad id"))?;
            let cluster: ClusterId = cluster.parse().map_err(|_| bad("bad cluster id"))?;
            if id != out.len() {
                return Err(bad("ids must be dense and ascending"));
            }
            out.push(cluster);
        }
        Ok(out)
    }
}

pub fn oracle_synonymous(gt: &GroundTruth, a: KeywordId, b: KeywordId) -> Result<bool> {
    Ok(gt.cluster(a)? == gt.cluster(b)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub query: String,
    pub keyword: String,
    pub synonymous: bool,
}

impl LabeledPair {
    pub fn new(query: impl Into<String>, keyword: impl Into<String>, synonymous: bool) -> Self {
        LabeledPair {
            query: query.into(),
            keyword: keyword.into(),
            synonymous,
        }
    }
}

pub fn pairs_to_tsv(pairs: &[LabeledPair]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.query, p.keyword, u8::from(p.synonymous)).expect("write to vec");
    }
    out
}

pub fn parse_pairs_tsv(contents: &str) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (line, row) in contents.lines().enumerate() {
        let bad = |m: &str| Error::format("labeled pairs", line as u64, m.to_string());
        let mut cols = row.split('\t');
        let (Some(q), Some(k), Some(l), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad("expected query<TAB>keyword<TAB>label"));
        };
        if q.trim().is_empty() || k.trim().is_empty() {
            return Err(bad("empty text"));
        }
        let synonymous = match l {
            "0" => false,
            "1" => true,
            _ => return Err(bad("label must be 0 or 1")),
        };
        out.push(LabeledPair::new(q, k, synonymous));
    }
    Ok(out)
}

/// Deterministic shuffled split. Dev and test sizes are `floor(n * r)`;
/// the remainder goes to train.
pub fn split_pairs<T: Clone>(pairs: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (r1, r2, r3) = ratios;
    if [r1, r2, r3].iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Config(format!(
            "split ratios must be non-negative, got {ratios:?}"
        )));
    }
    if (r1 + r2 + r3 - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    if pairs.is_empty() {
        return Err(Error::Input("cannot split an empty pair list".into()));
    }
    let n = pairs.len();
    let n_dev = ((n as f64) * r2 + 1e-9).floor() as usize;
    let n_test = ((n as f64) * r3 + 1e-9).floor() as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: std::ops::Range<usize>| order[range].iter().map(|&i| pairs[i].clone()).collect();
    Ok((
        pick(0..n_train),
        pick(n_train..n_train + n_dev),
        pick(n_train + n_dev..n),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    Uniform,
    /// P(s) proportional to s^-exponent on the configured range.
    PowerLaw {
        exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryAllocation {
    /// Exactly `queries_per_cluster` queries for every cluster.
    PerCluster,
    /// `queries_per_cluster * num_clusters` queries in total, spread in
    /// proportion to cluster size (largest remainder, ties to lower id).
    SizeProportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_clusters: usize,
    pub cluster_size_range: [usize; 2],
    pub vocabulary_size: usize,
    pub template_count: usize,
    pub queries_per_cluster: usize,
    pub seed: u64,
    pub size_distribution: SizeDistribution,
    pub query_allocation: QueryAllocation,
    /// Probability that a variant spells a base word with its alias.
    pub alias_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_clusters: 100,
            cluster_size_range: [1, 10],
            vocabulary_size: 400,
            template_count: 16,
            queries_per_cluster: 1,
            seed: 0,
            size_distribution: SizeDistribution::Uniform,
            query_allocation: QueryAllocation::PerCluster,
            alias_rate: 0.25,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.cluster_size_range;
        let bad = |m: String| Err(Error::Config(m));
        if self.num_clusters == 0 {
            return bad("num_clusters must be >= 1".into());
        }
        if lo == 0 || lo > hi {
            return bad(format!(
                "cluster_size_range must satisfy 1 <= min <= max, got [{lo},{hi}]"
            ));
        }
        if self.vocabulary_size < 2 {
            return bad("vocabulary_size must be >= 2".into());
        }
        if self.template_count == 0 || self.template_count > TEMPLATES.len() {
            return bad(format!("template_count must be in 1..={}", TEMPLATES.len()));
        }
        if !(0.0..=1.0).contains(&self.alias_rate) {
            return bad("alias_rate must be in [0,1]".into());
        }
        if let SizeDistribution::PowerLaw { exponent } = self.size_distribution {
            if !exponent.is_finite() || exponent < 0.0 {
                return bad("power-law exponent must be finite and >= 0".into());
            }
        }
        Ok(())
    }
}

const PREFIXES: [&str; 8] = [
    "",
    "price of ",
    "how much is ",
    "cost of ",
    "how much does ",
    "what is the price of ",
    "average cost of ",
    "how much for ",
];

const SUFFIXES: [&str; 8] = [
    "",
    " price",
    " cost",
    " fees",
    " how much",
    " price list",
    " charges",
    " rates",
];

/// Prefix/suffix index pairs, simplest rewrites first.
const TEMPLATES: [(u8, u8); 64] = {
    let mut out = [(0u8, 0u8); 64];
    let mut n = 0;
    let mut diag: i32 = 0;
    while diag < 15 {
        let mut p: i32 = 0;
        while p < 8 {
            let s = diag - p;
            if s >= 0 && s < 8 {
                out[n] = (p as u8, s as u8);
                n += 1;
            }
            p += 1;
        }
        diag += 1;
    }
    out
};

pub fn template_count_max() -> usize {
    TEMPLATES.len()
}

fn render(template: usize, phrase: &str) -> String {
    let (p, s) = TEMPLATES[template];
    format!("{}{}{}", PREFIXES[p as usize], phrase, SUFFIXES[s as usize])
}

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(ONSETS[rng.gen_range(0..ONSETS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub repo: KeywordRepository,
    pub queries: Vec<String>,
    pub truth: GroundTruth,
    /// Vocabulary word ids of each cluster's base phrase.
    pub bases: Vec<[u32; 2]>,
    pub vocabulary: Vec<String>,
    pub aliases: Vec<String>,
}

impl SyntheticCorpus {
    /// Keyword ids per cluster.
    pub fn cluster_members(&self) -> Vec<Vec<KeywordId>> {
        let mut out = vec![Vec::new(); self.bases.len()];
        for (id, &c) in self.truth.cluster_of.iter().enumerate() {
            out[c as usize].push(id as KeywordId);
        }
        out
    }

    /// Cluster ids whose base phrase shares a word with cluster `c`.
    pub fn confusable_clusters(&self) -> Vec<Vec<ClusterId>> {
        let mut by_word: HashMap<u32, Vec<ClusterId>> = HashMap::new();
        for (c, base) in self.bases.iter().enumerate() {
            for w in base {
                by_word.entry(*w).or_default().push(c as ClusterId);
            }
        }
        self.bases
            .iter()
            .enumerate()
            .map(|(c, base)| {
                let mut out: Vec<ClusterId> = base
                    .iter()
                    .flat_map(|w| by_word[w].iter().copied())
                    .filter(|&o| o != c as ClusterId)
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(path, e))
        };
        write(KEYWORDS_FILE, &self.repo.to_bytes())?;
        let mut q = Vec::new();
        for text in &self.queries {
            q.extend_from_slice(text.as_bytes());
            q.push(b'\n');
        }
        write(QUERIES_FILE, &q)?;
        write(TRUTH_FILE, &self.truth.keyword_tsv())?;
        write(QUERY_TRUTH_FILE, &self.truth.query_tsv())?;
        Ok(())
    }
}

pub const KEYWORDS_FILE: &str = "keywords.txt";
pub const QUERIES_FILE: &str = "queries.txt";
pub const TRUTH_FILE: &str = "ground_truth.tsv";
pub const QUERY_TRUTH_FILE: &str = "query_truth.tsv";

/// A corpus directory as written by [`SyntheticCorpus::write`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub repo: KeywordRepository,
    pub queries: Vec<String>,
    pub truth: GroundTruth,
}

pub fn read_corpus(dir: &Path) -> Result<CorpusFiles> {
    let repo = load_repository(&dir.join(KEYWORDS_FILE))?;
    let queries = load_lines(&dir.join(QUERIES_FILE))?;
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    };
    let cluster_of = GroundTruth::parse_tsv(&read(TRUTH_FILE)?, TRUTH_FILE)?;
    let query_cluster = GroundTruth::parse_tsv(&read(QUERY_TRUTH_FILE)?, QUERY_TRUTH_FILE)?;
    if cluster_of.len() != repo.len() {
        return Err(Error::Input(format!(
            "ground truth has {} rows for {} keywords",
            cluster_of.len(),
            repo.len()
        )));
    }
    if query_cluster.len() != queries.len() {
        return Err(Error::Input(format!(
            "query truth has {} rows for {} queries",
            query_cluster.len(),
            queries.len()
        )));
    }
    Ok(CorpusFiles {
        repo,
        queries,
        truth: GroundTruth {
            cluster_of,
            query_cluster,
        },
    })
}

fn draw_size(rng: &mut ChaCha8Rng, config: &GeneratorConfig, cdf: &[f64]) -> usize {
    let [lo, hi] = config.cluster_size_range;
    match config.size_distribution {
        SizeDistribution::Uniform => rng.gen_range(lo..=hi),
        SizeDistribution::PowerLaw { .. } => {
            let u: f64 = rng.gen();
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            lo + idx
        }
    }
}

fn size_cdf(config: &GeneratorConfig) -> Vec<f64> {
    let SizeDistribution::PowerLaw { exponent } = config.size_distribution else {
        return Vec::new();
    };
    let [lo, hi] = config.cluster_size_range;
    let weights: Vec<f64> = (lo..=hi).map(|s| (s as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn allocate_queries(config: &GeneratorConfig, sizes: &[usize]) -> Vec<usize> {
    match config.query_allocation {
        QueryAllocation::PerCluster => vec![config.queries_per_cluster; sizes.len()],
        QueryAllocation::SizeProportional => {
            let total_queries = config.queries_per_cluster * sizes.len();
            let total_size: usize = sizes.iter().sum();
            let mut alloc: Vec<usize> = sizes.iter().map(|s| s * total_queries / total_size).collect();
            let assigned: usize = alloc.iter().sum();
            let mut order: Vec<usize> = (0..sizes.len()).collect();
            // Largest fractional remainder first; ties to the lower cluster id.
            order.sort_by_key(|&c| (std::cmp::Reverse((sizes[c] * total_queries) % total_size), c));
            for &c in order.iter().take(total_queries - assigned) {
                alloc[c] += 1;
            }
            alloc
        }
    }
}

/// Generates a synthetic keyword repository with queries and ground truth.
/// A pure function of `config`.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let reserved: HashSet<&str> = PREFIXES
        .iter()
        .chain(SUFFIXES.iter())
        .flat_map(|s| s.split_whitespace())
        .collect();
    let mut seen_words: HashSet<String> = HashSet::new();
    let mut fresh_word = |rng: &mut ChaCha8Rng| -> Result<String> {
        for _ in 0..10_000 {
            let w = pseudo_word(rng);
            if !reserved.contains(w.as_str()) && seen_words.insert(w.clone()) {
                return Ok(w);
            }
        }
        Err(Error::GenerationExhausted("pseudo-word space exhausted".into()))
    };
    let vocabulary: Vec<String> = (0..config.vocabulary_size)
        .map(|_| fresh_word(&mut rng))
        .collect::<Result<_>>()?;
    let aliases: Vec<String> = (0..config.vocabulary_size)
        .map(|_| fresh_word(&mut rng))
        .collect::<Result<_>>()?;

    let v = config.vocabulary_size;
    if config.num_clusters > v * (v - 1) {
        return Err(Error::GenerationExhausted(format!(
            "{} clusters requested but only {} distinct base phrases exist",
            config.num_clusters,
            v * (v - 1)
        )));
    }
    let mut bases = Vec::with_capacity(config.num_clusters);
    let mut seen_bases = HashSet::new();
    while bases.len() < config.num_clusters {
        let a = rng.gen_range(0..v) as u32;
        let b = rng.gen_range(0..v) as u32;
        if a != b && seen_bases.insert((a, b)) {
            bases.push([a, b]);
        }
    }

    let cdf = size_cdf(config);
    let sizes: Vec<usize> = (0..config.num_clusters)
        .map(|_| draw_size(&mut rng, config, &cdf))
        .collect();
    let query_counts = allocate_queries(config, &sizes);

    let variants_per_base = config.template_count * 4;
    let mut keyword_texts = Vec::new();
    let mut cluster_of = Vec::new();
    let mut query_list = Vec::new();
    let mut query_cluster = Vec::new();
    let mut all_texts: HashSet<String> = HashSet::new();

    for (c, base) in bases.iter().enumerate() {
        let needed = sizes[c] + query_counts[c];
        if needed > variants_per_base {
            return Err(Error::GenerationExhausted(format!(
                "cluster {c} needs {needed} variants but {} templates x 4 spellings give {variants_per_base}",
                config.template_count
            )));
        }
        let mut used = vec![false; variants_per_base];
        let mut codes = Vec::with_capacity(needed);
        let mut misses = 0;
        while codes.len() < needed && misses < 64 {
            let t = rng.gen_range(0..config.template_count);
            let mask = usize::from(rng.gen_bool(config.alias_rate)) | usize::from(rng.gen_bool(config.alias_rate)) << 1;
            let code = t * 4 + mask;
            if used[code] {
                misses += 1;
            } else {
                used[code] = true;
                codes.push(code);
            }
        }
        // Dense clusters: take the remaining codes in order.
        let mut next = 0;
        while codes.len() < needed {
            if !used[next] {
                used[next] = true;
                codes.push(next);
            }
            next += 1;
        }

        for (i, code) in codes.into_iter().enumerate() {
            let (t, mask) = (code / 4, code % 4);
            let word = |slot: usize| {
                let w = base[slot] as usize;
                if mask >> slot & 1 == 1 {
                    aliases[w].as_str()
                } else {
                    vocabulary[w].as_str()
                }
            };
            let text = render(t, &format!("{} {}", word(0), word(1)));
            if !all_texts.insert(text.clone()) {
                return Err(Error::GenerationExhausted(format!("variant collision on {text:?}")));
            }
            if i < sizes[c] {
                keyword_texts.push(text);
                cluster_of.push(c as ClusterId);
            } else {
                query_list.push(text);
                query_cluster.push(c as ClusterId);
            }
        }
    }

    Ok(SyntheticCorpus {
        repo: KeywordRepository::from_texts(keyword_texts)?,
        queries: query_list,
        truth: GroundTruth {
            cluster_of,
            query_cluster,
        },
        bases,
        vocabulary,
        aliases,
    })
}

/// How labeled pairs are drawn from a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairSamplingConfig {
    pub positives_per_anchor: usize,
    pub negatives_per_anchor: usize,
    /// Fraction of negatives taken from clusters sharing a base word.
    pub hard_negative_fraction: f64,
    pub seed: u64,
}

impl Default for PairSamplingConfig {
    fn default() -> Self {
        PairSamplingConfig {
            positives_per_anchor: 1,
            negatives_per_anchor: 1,
            hard_negative_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Samples query-keyword pairs with oracle labels. Anchors are keyword ids;
/// the anchor's text plays the query side.
pub fn sample_pairs(corpus: &SyntheticCorpus, anchors: &[KeywordId], config: &PairSamplingConfig) -> Vec<LabeledPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let members = corpus.cluster_members();
    let confusable = corpus.confusable_clusters();
    let n = corpus.repo.len();
    let mut out = Vec::new();
    for &a in anchors {
        let c = corpus.truth.cluster_of[a as usize] as usize;
        let anchor_text = corpus.repo.text(a);
        let others: Vec<KeywordId> = members[c].iter().copied().filter(|&k| k != a).collect();
        for _ in 0..config.positives_per_anchor.min(others.len()) {
            let k = others[rng.gen_range(0..others.len())];
            out.push(LabeledPair::new(anchor_text, corpus.repo.text(k), true));
        }
        for _ in 0..config.negatives_per_anchor {
            let hard = !confusable[c].is_empty() && rng.gen_bool(config.hard_negative_fraction);
            let k = if hard {
                let oc = confusable[c][rng.gen_range(0..confusable[c].len())] as usize;
                let pool = &members[oc];
                if pool.is_empty() {
                    continue;
                }
                pool[rng.gen_range(0..pool.len())]
            } else {
                let k = rng.gen_range(0..n) as KeywordId;
                if corpus.truth.cluster_of[k as usize] as usize == c {
                    continue;
                }
                k
            };
            out.push(LabeledPair::new(anchor_text, corpus.repo.text(k), false));
        }
    }
    out
}

/// Flips each label independently with probability `p`.
pub fn with_label_noise(pairs: &[LabeledPair], p: f64, seed: u64) -> Vec<LabeledPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs
        .iter()
        .map(|pair| {
            let mut pair = pair.clone();
            if rng.gen_bool(p) {
                pair.synonymous = !pair.synonymous;
            }
            pair
        })
        .collect()
}
