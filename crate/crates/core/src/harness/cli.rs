//! The `qsr` command line. Every subcommand reads an optional JSON config,
//! applies flag overrides on top and writes its artifacts deterministically.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    ablation_markdown, run_ablation, run_benchmark, train_strategy, AblationConfig, BenchConfig, EmbedderTraining,
    Strategy,
};
use crate::ann::{HnswConfig, HnswIndex, NeighborIndex};
use crate::corpus::{
    generate_synthetic, load_lines, pairs_to_tsv, parse_pairs_tsv, read_corpus, sample_pairs, split_pairs,
    with_label_noise, CorpusFiles, GeneratorConfig, KeywordId, LabeledPair, PairSamplingConfig,
};
use crate::embed::EmbedderParams;
use crate::error::{Error, Result};
use crate::quotient::{compress, CompressionConfig, NeighborSearch, QuotientMap};
use crate::retrieve::{BaselinePipeline, RetrievalPipeline, Retriever};
use crate::teacher::{
    calibrate_threshold, fit_learned, Discriminant, LearnedTeacher, OracleTeacher, TeacherConfig, TeacherFile,
};

pub const TRAIN_PAIRS_FILE: &str = "train_pairs.tsv";
pub const DEV_PAIRS_FILE: &str = "dev_pairs.tsv";
pub const TEST_PAIRS_FILE: &str = "test_pairs.tsv";
pub const GEN_CONFIG_FILE: &str = "gen.json";

#[derive(Parser, Debug)]
#[command(name = "qsr", version, about = "Quotient-space synonymous keyword retrieval")]
struct Cli {
    /// Root seed; every nested seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus and labeled pair splits.
    Gen(GenArgs),
    /// Train an embedder.
    Train(TrainArgs),
    /// Fit a teacher and calibrate its threshold.
    FitTeacher(FitTeacherArgs),
    /// Compress the keyword repository into synonym clusters.
    Compress(CompressArgs),
    /// Build an ANN index over representatives, or over all keywords.
    Index(IndexArgs),
    /// Retrieve keywords for one query or a file of queries.
    Retrieve(RetrieveArgs),
    /// Run the baseline-versus-quotient benchmark.
    Bench(BenchArgs),
    /// Run the M0..M3 training ablation.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set generator.alias_rate=0.1`.
    #[arg(long = "set", value_name = "KEY=JSON")]
    sets: Vec<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    label_noise: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "m0")]
    strategy: String,
    /// Raw pairs; defaults to the corpus training split.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Clean pairs for fine-tuning.
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitTeacherArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    /// Embedder behind the similarity feature; not needed with `--oracle`.
    #[arg(long)]
    embedder: Option<PathBuf>,
    /// Use ground-truth labels instead of a learned model.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    precision_target: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompressArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embedder: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau_c: Option<f64>,
    #[arg(long)]
    tau_p: Option<f64>,
    /// Brute-force neighbor search instead of HNSW.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embedder: PathBuf,
    /// Index the representatives of this quotient map; without it every
    /// keyword is indexed.
    #[arg(long)]
    quotient: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    ef: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embedder: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Required when the index was built over representatives.
    #[arg(long)]
    quotient: Option<PathBuf>,
    #[arg(long, conflicts_with = "queries")]
    query: Option<String>,
    /// One query per line.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau_q: Option<f64>,
    /// Write JSON lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    latency_queries: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub generator: GeneratorConfig,
    pub pairs: PairSamplingConfig,
    /// Probability of flipping each pair label.
    pub label_noise: f64,
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            generator: GeneratorConfig::default(),
            pairs: PairSamplingConfig::default(),
            label_noise: 0.0,
            split: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn resolved(&self) -> GenConfig {
        let mut c = self.clone();
        c.generator.seed = self.seed;
        c.pairs.seed = self.seed.wrapping_add(1);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub embedder: EmbedderTraining,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mut embedder = EmbedderTraining::default();
        embedder.pretrain.learning_rate = 1e-3;
        embedder.pretrain.epochs = 10;
        embedder.finetune.learning_rate = 1e-3;
        embedder.finetune.epochs = 1;
        TrainConfig { embedder, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitTeacherConfig {
    pub teacher: TeacherConfig,
    pub precision_target: f64,
}

impl Default for FitTeacherConfig {
    fn default() -> Self {
        FitTeacherConfig {
            teacher: TeacherConfig::default(),
            precision_target: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieveConfig {
    pub k: usize,
    /// Screening threshold; read from the teacher sidecar when unset.
    pub tau_q: Option<f64>,
    pub expansion_cap: Option<usize>,
    pub ef_search: usize,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        RetrieveConfig {
            k: 10,
            tau_q: None,
            expansion_cap: None,
            ef_search: HnswConfig::default().ef_search,
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(a) => cmd_gen(a, seed),
        Command::Train(a) => cmd_train(a, seed),
        Command::FitTeacher(a) => cmd_fit_teacher(a),
        Command::Compress(a) => cmd_compress(a, seed),
        Command::Index(a) => cmd_index(a, seed),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Bench(a) => cmd_bench(a, seed),
        Command::Ablate(a) => cmd_ablate(a, seed),
    }
}

/// Recursively merges `patch` into `base`. Object keys missing from `base`
/// are rejected so that typos in config files do not pass silently.
fn merge(base: &mut Value, patch: Value, at: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(Error::Config(format!("unknown config key {path:?}"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// `a.b.c` + value -> `{"a":{"b":{"c":value}}}`.
fn nested(key: &str, value: Value) -> Value {
    key.rsplit('.').fold(value, |acc, part| {
        let mut m = serde_json::Map::new();
        m.insert(part.to_string(), acc);
        Value::Object(m)
    })
}

/// Default config, then the file, then `--set` pairs, then named flags.
fn load_config<C>(args: &ConfigArgs, flags: Vec<(&str, Value)>) -> Result<C>
where
    C: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(C::default())?;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("--config {}: {e}", path.display())))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("--config {}: {e}", path.display())))?;
        merge(&mut value, file, "")?;
    }
    for s in &args.sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set {s:?}: expected KEY=VALUE")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        merge(&mut value, nested(key, v), "").map_err(|e| Error::Config(format!("--set {key}: {e}")))?;
    }
    for (key, v) in flags {
        merge(&mut value, nested(key, v), "")?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

fn flag<T: Serialize>(key: &'static str, v: Option<T>) -> Option<(&'static str, Value)> {
    v.map(|v| (key, serde_json::to_value(v).expect("flag value serializes")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    parse_pairs_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn teacher_weights_embedder(path: &Path) -> PathBuf {
    path.with_extension("qsem")
}

fn teacher_sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Loads a teacher file; learned teachers read their embedder from the
/// sibling `.qsem` file.
pub fn load_teacher(path: &Path) -> Result<Arc<dyn Discriminant>> {
    Ok(match TeacherFile::read(path)? {
        TeacherFile::Oracle(dir) => {
            let CorpusFiles { repo, queries, truth } = read_corpus(&dir)?;
            Arc::new(OracleTeacher::new(&repo, &queries, &truth))
        }
        TeacherFile::Learned(weights) => {
            let embedder = Arc::new(EmbedderParams::read(&teacher_weights_embedder(path))?);
            Arc::new(LearnedTeacher { weights, embedder })
        }
    })
}

fn cmd_gen(a: GenArgs, seed: Option<u64>) -> Result<()> {
    let flags = [
        flag("generator.num_clusters", a.clusters),
        flag("label_noise", a.label_noise),
        flag("seed", seed),
    ];
    let config: GenConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    let config = config.resolved();
    if !(0.0..=1.0).contains(&config.label_noise) {
        return Err(Error::Config(format!(
            "--label-noise must be in [0,1], got {}",
            config.label_noise
        )));
    }
    let corpus = generate_synthetic(&config.generator)?;
    corpus.write(&a.out)?;
    let anchors: Vec<KeywordId> = (0..corpus.repo.len() as KeywordId).collect();
    let mut pairs = sample_pairs(&corpus, &anchors, &config.pairs);
    if config.label_noise > 0.0 {
        pairs = with_label_noise(&pairs, config.label_noise, config.seed.wrapping_add(2));
    }
    let [r1, r2, r3] = config.split;
    let (train, dev, test) = split_pairs(&pairs, (r1, r2, r3), config.seed.wrapping_add(3))?;
    for (name, split) in [
        (TRAIN_PAIRS_FILE, &train),
        (DEV_PAIRS_FILE, &dev),
        (TEST_PAIRS_FILE, &test),
    ] {
        let path = a.out.join(name);
        fs::write(&path, pairs_to_tsv(split)).map_err(|e| Error::io(path, e))?;
    }
    write_json(&a.out.join(GEN_CONFIG_FILE), &config)?;
    eprintln!(
        "wrote {} keywords, {} queries, {} pairs to {}",
        corpus.repo.len(),
        corpus.queries.len(),
        pairs.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let strategy: Strategy = a
        .strategy
        .parse()
        .map_err(|e| Error::Config(format!("--strategy: {e}")))?;
    let flags = [
        flag("embedder.pretrain.epochs", a.epochs),
        flag("embedder.pretrain.learning_rate", a.lr),
        flag("seed", seed),
    ];
    let config: TrainConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    let mut training = config.embedder.clone();
    let s = config.seed;
    training.init_seed = s;
    training.pretrain.seed = s.wrapping_add(1);
    training.finetune.seed = s.wrapping_add(2);
    training.hnsw.seed = s.wrapping_add(3);
    training.pretrain.validate()?;
    training.finetune.validate()?;

    let teacher = match (&a.teacher, strategy.needs_teacher()) {
        (Some(path), _) => Some(load_teacher(path)?),
        (None, true) => return Err(Error::Config(format!("--strategy {} needs --teacher", a.strategy))),
        (None, false) => None,
    };
    let repo = crate::corpus::load_repository(&a.corpus.join(crate::corpus::KEYWORDS_FILE))?;
    let raw = read_pairs(&a.pairs.clone().unwrap_or_else(|| a.corpus.join(TRAIN_PAIRS_FILE)))?;
    let clean = match &a.clean {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let params = train_strategy(strategy, &raw, &clean, &repo, teacher.as_deref(), &training)?;
    params.write(&a.out)?;
    write_json(
        &a.out.with_extension("json"),
        &serde_json::json!({
            "strategy": strategy,
            "embedder_version": params.version,
            "embedder_sha256": sha256_hex(&params.to_bytes()),
            "config": TrainConfig { embedder: training, seed: s },
        }),
    )?;
    eprintln!(
        "trained {} on {} raw pairs -> {}",
        strategy.tag(),
        raw.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_fit_teacher(a: FitTeacherArgs) -> Result<()> {
    let flags = [flag("precision_target", a.precision_target)];
    let config: FitTeacherConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    let dev = read_pairs(&a.corpus.join(DEV_PAIRS_FILE))?;
    let (file, teacher): (TeacherFile, Arc<dyn Discriminant>) = if a.oracle {
        let dir = fs::canonicalize(&a.corpus).map_err(|e| Error::io(&a.corpus, e))?;
        let CorpusFiles { repo, queries, truth } = read_corpus(&dir)?;
        (
            TeacherFile::Oracle(dir),
            Arc::new(OracleTeacher::new(&repo, &queries, &truth)),
        )
    } else {
        let path = a
            .embedder
            .as_ref()
            .ok_or_else(|| Error::Config("fit-teacher needs --embedder unless --oracle is given".into()))?;
        let embedder = EmbedderParams::read(path)?;
        let train = read_pairs(&a.corpus.join(TRAIN_PAIRS_FILE))?;
        let t = fit_learned(&train, Arc::new(embedder.clone()), &config.teacher)?;
        embedder.write(&teacher_weights_embedder(&a.out))?;
        (TeacherFile::Learned(t.weights), Arc::new(t))
    };
    file.write(&a.out)?;
    let threshold = calibrate_threshold(teacher.as_ref(), &dev, config.precision_target)?;
    write_json(
        &teacher_sidecar(&a.out),
        &serde_json::json!({ "threshold": threshold.to_json(), "config": config }),
    )?;
    eprintln!("teacher -> {} (tau {:.4})", a.out.display(), threshold.tau);
    Ok(())
}

fn cmd_compress(a: CompressArgs, seed: Option<u64>) -> Result<()> {
    let flags = [
        flag("k", a.k),
        flag("tau_c", a.tau_c),
        flag("tau_p", a.tau_p),
        flag("neighbor_search", a.exact.then_some(NeighborSearch::Exact)),
        flag("seed", seed),
    ];
    let config: CompressionConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    config.validate()?;
    let repo = crate::corpus::load_repository(&a.corpus.join(crate::corpus::KEYWORDS_FILE))?;
    let embedder = EmbedderParams::read(&a.embedder)?;
    let teacher = load_teacher(&a.teacher)?;
    let map = compress(&repo, &embedder, teacher.as_ref(), &config)?;
    map.write(&a.out, &serde_json::to_value(&config)?)?;
    eprintln!("{} keywords -> {} clusters", map.num_keywords(), map.num_clusters());
    Ok(())
}

fn cmd_index(a: IndexArgs, seed: Option<u64>) -> Result<()> {
    let flags = [
        flag("m", a.m),
        flag("ef_construction", a.ef),
        flag("ef_search", a.ef),
        flag("seed", seed),
    ];
    let config: HnswConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    config.validate()?;
    let repo = crate::corpus::load_repository(&a.corpus.join(crate::corpus::KEYWORDS_FILE))?;
    let embedder = EmbedderParams::read(&a.embedder)?;
    let (kind, ids): (&str, Vec<KeywordId>) = match &a.quotient {
        Some(q) => {
            let map = QuotientMap::read(q)?;
            if map.num_keywords() != repo.len() {
                return Err(Error::Input(format!(
                    "--quotient covers {} keywords, corpus has {}",
                    map.num_keywords(),
                    repo.len()
                )));
            }
            ("quotient", map.representatives())
        }
        None => ("baseline", (0..repo.len() as KeywordId).collect()),
    };
    let vectors = embedder.encode_all(ids.iter().map(|&i| repo.text(i)))?;
    let index = HnswIndex::build(&vectors, &config)?;
    index.write(&a.out)?;
    write_json(
        &a.out.with_extension("json"),
        &serde_json::json!({
            "kind": kind,
            "n_elements": index.len(),
            "embedder_version": embedder.version,
            "embedder_sha256": sha256_hex(&embedder.to_bytes()),
            "config": config,
        }),
    )?;
    eprintln!("indexed {} {kind} vectors -> {}", index.len(), a.out.display());
    Ok(())
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    let flags = [flag("k", a.k), flag("tau_q", a.tau_q)];
    let config: RetrieveConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    if config.k == 0 {
        return Err(Error::Config("--k must be >= 1".into()));
    }
    let queries = match (&a.query, &a.queries) {
        (Some(q), None) => vec![q.clone()],
        (None, Some(path)) => load_lines(path)?,
        _ => {
            return Err(Error::Config(
                "retrieve needs exactly one of --query or --queries".into(),
            ))
        }
    };

    let repo = Arc::new(crate::corpus::load_repository(
        &a.corpus.join(crate::corpus::KEYWORDS_FILE),
    )?);
    let embedder = EmbedderParams::read(&a.embedder)?;
    let teacher = load_teacher(&a.teacher)?;
    let sidecar = read_json(&a.index.with_extension("json"))?;
    if sidecar["embedder_sha256"].as_str() != Some(sha256_hex(&embedder.to_bytes()).as_str()) {
        return Err(Error::Consistency(format!(
            "--index {} was built with a different embedder than --embedder {}",
            a.index.display(),
            a.embedder.display()
        )));
    }
    let kind = sidecar["kind"].as_str().unwrap_or_default();
    match (kind, a.quotient.is_some()) {
        ("quotient", false) => return Err(Error::Config("--index holds representatives; pass --quotient".into())),
        ("baseline", true) => return Err(Error::Config("--index holds every keyword; drop --quotient".into())),
        _ => {}
    }
    let tau_q = match config.tau_q {
        Some(t) => t,
        None => read_json(&teacher_sidecar(&a.teacher))
            .ok()
            .and_then(|v| v["threshold"]["tau"].as_f64())
            .ok_or_else(|| Error::Config("no --tau-q given and no calibrated threshold next to --teacher".into()))?,
    };
    let runtime = HnswConfig {
        ef_search: config.ef_search,
        ..HnswConfig::default()
    };
    let index = HnswIndex::read(&a.index, &runtime)?;
    let embedder = Arc::new(embedder);
    let retriever: Box<dyn Retriever> = match &a.quotient {
        Some(q) => {
            let map = Arc::new(QuotientMap::read(q)?);
            let reps = map.representatives();
            Box::new(
                RetrievalPipeline::from_parts(repo.clone(), map, embedder, teacher, tau_q, index, reps)?
                    .with_expansion_cap(config.expansion_cap),
            )
        }
        None => Box::new(BaselinePipeline::from_parts(
            repo.clone(),
            embedder,
            teacher,
            tau_q,
            index,
        )?),
    };

    let mut out: Box<dyn std::io::Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    let sink = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for q in &queries {
        let result = retriever.retrieve(q, config.k)?;
        writeln!(out, "{}", result.to_json(&repo)).map_err(|e| Error::io(&sink, e))?;
    }
    out.flush().map_err(|e| Error::io(&sink, e))
}

fn cmd_bench(a: BenchArgs, seed: Option<u64>) -> Result<()> {
    let flags = [
        flag("generator.num_clusters", a.clusters),
        flag("latency_queries", a.latency_queries),
        flag("seed", seed),
    ];
    let config: BenchConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    let corpus = generate_synthetic(&config.resolved().generator)?;
    eprintln!(
        "bench: {} keywords, {} queries",
        corpus.repo.len(),
        corpus.queries.len()
    );
    let outcome = run_benchmark(&corpus, &config)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_json(&a.out.join("baseline.json"), &outcome.baseline)?;
    write_json(&a.out.join("quotient.json"), &outcome.quotient)?;
    let path = a.out.join("comparison.md");
    fs::write(&path, &outcome.comparison).map_err(|e| Error::io(path, e))?;
    print!("{}", outcome.comparison);
    Ok(())
}

fn cmd_ablate(a: AblateArgs, seed: Option<u64>) -> Result<()> {
    let flags = [flag("generator.num_clusters", a.clusters), flag("seed", seed)];
    let config: AblationConfig = load_config(&a.cfg, flags.into_iter().flatten().collect())?;
    let corpus = generate_synthetic(&config.resolved().generator)?;
    let rows = run_ablation(&corpus, &config)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_json(
        &a.out.join("ablation.json"),
        &serde_json::json!({ "rows": rows, "config": config.resolved() }),
    )?;
    let table = ablation_markdown(&rows);
    let path = a.out.join("ablation.md");
    fs::write(&path, &table).map_err(|e| Error::io(path, e))?;
    print!("{table}");
    Ok(())
}
