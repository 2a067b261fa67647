//! Experiments over the whole stack: recall and latency measurement, the
//! baseline-versus-quotient benchmark, the training ablation and the CLI.

mod ablation;
mod bench;
pub mod cli;
mod strategy;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{GroundTruth, KeywordId};
use crate::error::{Error, Result};
use crate::retrieve::Retriever;

pub use ablation::{ablation_markdown, run_ablation, AblationConfig, AblationRow};
pub use bench::{
    check_versions, comparison_markdown, config_hash, evaluate, run_benchmark, BenchConfig, BenchOutcome, BenchReport,
    Method,
};
pub use strategy::{train_strategy, EmbedderTraining, Strategy};

/// `|returned ∩ relevant| / |relevant|`, or `None` for an empty relevant set.
pub fn recall_at_k(returned: &[KeywordId], relevant: &[KeywordId]) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let returned: HashSet<KeywordId> = returned.iter().copied().collect();
    let mut relevant = relevant.to_vec();
    relevant.sort_unstable();
    relevant.dedup();
    let hit = relevant.iter().filter(|k| returned.contains(k)).count();
    Some(hit as f64 / relevant.len() as f64)
}

/// The ground-truth synonyms of each query, sampled down to at most
/// `max_relevant` per query.
pub fn relevant_sets(truth: &GroundTruth, max_relevant: usize, seed: u64) -> Vec<Vec<KeywordId>> {
    let members = truth.members();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truth
        .query_cluster
        .iter()
        .map(|&c| {
            let all = members.get(c as usize).map(Vec::as_slice).unwrap_or(&[]);
            let mut picked: Vec<KeywordId> = if all.len() > max_relevant {
                all.choose_multiple(&mut rng, max_relevant).copied().collect()
            } else {
                all.to_vec()
            };
            picked.sort_unstable();
            picked
        })
        .collect()
}

/// Mean of per-query recalls, skipping queries without relevant keywords.
/// Returns the mean and the number of queries skipped.
pub fn mean_recall(returned: &[Vec<KeywordId>], relevant: &[Vec<KeywordId>]) -> (f64, usize) {
    let per_query: Vec<Option<f64>> = returned
        .iter()
        .zip(relevant)
        .map(|(r, rel)| recall_at_k(r, rel))
        .collect();
    let counted: Vec<f64> = per_query.iter().flatten().copied().collect();
    let skipped = per_query.len() - counted.len();
    let mean = if counted.is_empty() {
        0.0
    } else {
        counted.iter().sum::<f64>() / counted.len() as f64
    };
    (mean, skipped)
}

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    /// Wall time per query while `workers` searchers run concurrently.
    pub wall_ms: f64,
    pub wall_std_ms: f64,
    /// CPU time of the searching thread per query.
    pub cpu_ms: f64,
    pub cpu_std_ms: f64,
    pub n_queries: usize,
    pub workers: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the first `warmup` queries once untimed, then times every remaining
/// query with `workers` threads pulling from a shared cursor.
pub fn latency_at_k(
    retriever: &dyn Retriever,
    queries: &[String],
    k: usize,
    workers: usize,
    warmup: usize,
) -> Result<LatencyStats> {
    if workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let warmup = warmup.min(queries.len());
    for q in &queries[..warmup] {
        retriever.retrieve(q, k)?;
    }
    let timed = &queries[warmup..];
    let cursor = AtomicUsize::new(0);
    let samples: Mutex<Vec<(f64, f64)>> = Mutex::new(Vec::with_capacity(timed.len()));
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(q) = timed.get(i) else { break };
                    let (wall, cpu) = (Instant::now(), thread_cpu_seconds());
                    let out = retriever.retrieve(q, k);
                    let cpu = thread_cpu_seconds() - cpu;
                    let wall = wall.elapsed().as_secs_f64();
                    if let Err(e) = out {
                        failure.lock().expect("lock").get_or_insert(e);
                        break;
                    }
                    local.push((wall * 1e3, cpu * 1e3));
                }
                samples.lock().expect("lock").extend(local);
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let samples = samples.into_inner().expect("lock");
    let (wall_ms, wall_std_ms) = mean_std(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
    let (cpu_ms, cpu_std_ms) = mean_std(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
    Ok(LatencyStats {
        wall_ms,
        wall_std_ms,
        cpu_ms,
        cpu_std_ms,
        n_queries: samples.len(),
        workers,
    })
}
