use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cosine_distance, HnswConfig, NeighborIndex, SearchHit};
use crate::error::{Error, Result};

const MAX_LEVEL: usize = 32;

/// Hierarchical navigable small-world graph over unit vectors.
///
/// Neighbor selection keeps the closest candidates (no diversity heuristic).
/// When a list overflows its cap the dropped edge is removed in both
/// directions, so every stored edge is bidirectional.
#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    pub(super) config: HnswConfig,
    pub(super) dim: usize,
    pub(super) vectors: Vec<f32>,
    /// `links[node][level]` for levels `0..=node_level`.
    pub(super) links: Vec<Vec<Vec<u32>>>,
    pub(super) entry: Option<u32>,
    pub(super) top_level: usize,
}

/// Dense visited set, one bit per element.
struct Visited {
    bits: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            bits: vec![0; n.div_ceil(64)],
        }
    }

    fn grow(&mut self, n: usize) {
        self.bits.resize(n.div_ceil(64), 0);
    }

    fn clear(&mut self) {
        self.bits.iter_mut().for_each(|w| *w = 0);
    }

    /// Marks `id`; returns true if it was not marked before.
    fn insert(&mut self, id: u32) -> bool {
        let (w, b) = (id as usize / 64, id % 64);
        let fresh = self.bits[w] & (1 << b) == 0;
        self.bits[w] |= 1 << b;
        fresh
    }
}

/// Max-heap element (farthest first).
#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Far(SearchHit);

/// Min-heap element (closest first).
#[derive(PartialEq, Eq)]
struct Near(SearchHit);

impl PartialOrd for Near {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Near {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.cmp(&self.0)
    }
}

impl HnswIndex {
    pub fn empty(dim: usize, config: HnswConfig) -> Self {
        HnswIndex {
            config,
            dim,
            vectors: Vec::new(),
            links: Vec::new(),
            entry: None,
            top_level: 0,
        }
    }

    /// Inserts `vectors` in id order.
    pub fn build(vectors: &[Vec<f32>], config: &HnswConfig) -> Result<Self> {
        config.validate()?;
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut index = HnswIndex::empty(dim, config.clone());
        index.vectors.reserve(dim * vectors.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let lambda = config.lambda();
        let mut visited = Visited::new(vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: v.len(),
                });
            }
            let u: f64 = 1.0 - rng.gen::<f64>();
            let level = ((-u.ln() * lambda).floor() as usize).min(MAX_LEVEL);
            index.insert(v, level, &mut visited);
        }
        Ok(index)
    }

    pub fn config(&self) -> &HnswConfig {
        &self.config
    }

    pub fn entry_point(&self) -> Option<u32> {
        self.entry
    }

    pub fn top_level(&self) -> usize {
        self.top_level
    }

    pub fn vector(&self, id: u32) -> &[f32] {
        &self.vectors[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    pub fn level_of(&self, id: u32) -> usize {
        self.links[id as usize].len() - 1
    }

    pub fn neighbors(&self, id: u32, level: usize) -> &[u32] {
        &self.links[id as usize][level]
    }

    pub fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.config.m
        } else {
            self.config.m
        }
    }

    fn dist_to(&self, q: &[f32], id: u32) -> f32 {
        cosine_distance(q, self.vector(id))
    }

    fn hit(&self, q: &[f32], id: u32) -> SearchHit {
        SearchHit {
            id,
            dist: self.dist_to(q, id),
        }
    }

    /// Best-first search on one level. Returns up to `ef` hits, ascending.
    fn search_level(
        &self,
        q: &[f32],
        entries: &[SearchHit],
        ef: usize,
        level: usize,
        visited: &mut Visited,
    ) -> Vec<SearchHit> {
        let mut candidates: BinaryHeap<Near> = BinaryHeap::new();
        let mut results: BinaryHeap<Far> = BinaryHeap::new();
        for &e in entries {
            if visited.insert(e.id) {
                candidates.push(Near(e));
                results.push(Far(e));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        while let Some(Near(c)) = candidates.pop() {
            let worst = results.peek().expect("non-empty").0;
            if c.order(&worst).is_gt() && results.len() >= ef {
                break;
            }
            for &nb in &self.links[c.id as usize][level] {
                if !visited.insert(nb) {
                    continue;
                }
                let h = self.hit(q, nb);
                if results.len() < ef || h.order(&results.peek().expect("non-empty").0).is_lt() {
                    candidates.push(Near(h));
                    results.push(Far(h));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<SearchHit> = results.into_iter().map(|f| f.0).collect();
        out.sort_unstable();
        out
    }

    /// Greedy walk to the closest element on `level`.
    fn greedy(&self, q: &[f32], mut cur: SearchHit, level: usize) -> SearchHit {
        loop {
            let mut moved = false;
            for &nb in &self.links[cur.id as usize][level] {
                let h = self.hit(q, nb);
                if h.order(&cur).is_lt() {
                    cur = h;
                    moved = true;
                }
            }
            if !moved {
                return cur;
            }
        }
    }

    fn insert(&mut self, v: &[f32], level: usize, visited: &mut Visited) {
        let id = self.links.len() as u32;
        self.vectors.extend_from_slice(v);
        self.links.push(vec![Vec::new(); level + 1]);
        visited.grow(self.links.len());

        let Some(entry) = self.entry else {
            self.entry = Some(id);
            self.top_level = level;
            return;
        };

        let mut ep = self.hit(v, entry);
        for lc in (level + 1..=self.top_level).rev() {
            ep = self.greedy(v, ep, lc);
        }
        let mut entries = vec![ep];
        for lc in (0..=level.min(self.top_level)).rev() {
            visited.clear();
            let found = self.search_level(v, &entries, self.config.ef_construction, lc, visited);
            let chosen: Vec<u32> = found.iter().take(self.config.m).map(|h| h.id).collect();
            for &nb in &chosen {
                self.links[nb as usize][lc].push(id);
            }
            self.links[id as usize][lc] = chosen.clone();
            for &nb in &chosen {
                self.shrink(nb, lc);
            }
            entries = found;
        }
        if level > self.top_level {
            self.top_level = level;
            self.entry = Some(id);
        }
    }

    /// Trims `node`'s list on `level` to its cap by dropping the farthest
    /// neighbors, removing each dropped edge on both ends. Neighbors that
    /// would be left with no links on this level are dropped last.
    fn shrink(&mut self, node: u32, level: usize) {
        let cap = self.max_links(level);
        while self.links[node as usize][level].len() > cap {
            let base = self.vector(node).to_vec();
            let mut ranked: Vec<SearchHit> = self.links[node as usize][level]
                .iter()
                .map(|&nb| self.hit(&base, nb))
                .collect();
            ranked.sort_unstable();
            let victim = ranked
                .iter()
                .rev()
                .find(|h| self.links[h.id as usize][level].len() > 1)
                .unwrap_or_else(|| ranked.last().expect("over cap"))
                .id;
            self.links[node as usize][level].retain(|&x| x != victim);
            self.links[victim as usize][level].retain(|&x| x != node);
        }
    }

    /// Top-`k` search with a dynamic list of `max(ef, k)` on level 0.
    pub fn search_with_ef(&self, query: &[f32], k: usize, ef: usize) -> Result<Vec<SearchHit>> {
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut ep = self.hit(query, entry);
        for lc in (1..=self.top_level).rev() {
            ep = self.greedy(query, ep, lc);
        }
        let mut visited = Visited::new(self.links.len());
        let mut hits = self.search_level(query, &[ep], ef.max(k), 0, &mut visited);
        hits.truncate(k);
        Ok(hits)
    }

    /// Element ids reachable from the entry point over level-0 edges.
    pub fn reachable_from_entry(&self) -> usize {
        let Some(entry) = self.entry else {
            return 0;
        };
        let mut seen = vec![false; self.links.len()];
        let mut stack = vec![entry];
        seen[entry as usize] = true;
        let mut count = 0;
        while let Some(x) = stack.pop() {
            count += 1;
            for &nb in &self.links[x as usize][0] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    stack.push(nb);
                }
            }
        }
        count
    }
}

impl NeighborIndex for HnswIndex {
    fn len(&self) -> usize {
        self.links.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
        self.search_with_ef(query, k, self.config.ef_search)
    }
}
