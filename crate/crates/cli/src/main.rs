use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tkrag_core::config::PipelineConfig;
use tkrag_core::embedding::{render_event_text, EmbeddingCache, EmbeddingProvider, HashingProvider, HttpEmbeddingProvider};
use tkrag_core::eval::{self, Answerer, EvalOptions, RagPipeline};
use tkrag_core::generation::{assemble_prompt, parse_answers, ChatClient, ChatModel, LlmClientConfig};
use tkrag_core::http::RetryPolicy;
use tkrag_core::index::{build_index, BuildParams, Index};
use tkrag_core::retrieval::{RetrievalError, RetrievalParams, RetrievalResult, Retriever};
use tkrag_core::tkg::{kg_stats, load_tkg};

const EMBED_URL_ENV: &str = "STAR_RAG_EMBED_URL";

/// Failure classes mapped to the process exit status.
enum Failure {
    /// Unreadable or invalid input: exit 1.
    Input(anyhow::Error),
    /// Embedding service or LLM failure: exit 2.
    External(anyhow::Error),
}

type CliResult = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn external<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::External(e.into())
}

/// Retrieval and generation over temporal event graphs.
#[derive(Parser, Debug)]
#[command(name = "tkrag", version)]
struct Cli {
    /// Flat TOML file with pipeline settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for sampling and pair subsampling [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label entities, build the rule graph and write the index file.
    BuildIndex(BuildArgs),
    /// Retrieve events for one question, optionally asking the LLM.
    Query(QueryArgs),
    /// Run Hit@k evaluation over a question file.
    Eval(EvalArgs),
    /// Print dataset statistics for an event file or an index.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Tab-separated event file.
    events: PathBuf,
    /// Where to write the index.
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
    /// Minimum support as a fraction of entities [default: 0.01]
    #[arg(long)]
    min_support_fraction: Option<f64>,
    /// Longest mined relation subset [default: 3]
    #[arg(long)]
    max_subset_len: Option<usize>,
    /// Labels kept per entity [default: 3]
    #[arg(long)]
    k_type: Option<usize>,
    /// Event pairs enumerated per candidate edge before subsampling [default: 1000000]
    #[arg(long)]
    pair_cap: Option<u64>,
}

#[derive(Args, Debug)]
struct RetrievalFlags {
    /// Anchor and result count [default: 10]
    #[arg(long)]
    k1: Option<usize>,
    /// Rule nodes kept after PageRank [default: 20]
    #[arg(long)]
    k2: Option<usize>,
    /// Restart probability [default: 0.2]
    #[arg(long)]
    alpha: Option<f64>,
    /// L1 convergence tolerance [default: 0.00001]
    #[arg(long)]
    epsilon: Option<f64>,
    /// PageRank iteration cap [default: 1000]
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Weight of rank hits against support size [default: 0.6]
    #[arg(long)]
    theta: Option<f64>,
    /// Rank discount [default: 0.7]
    #[arg(long)]
    beta: Option<f64>,
    /// Smoothing mass per seed [default: 1/number of seeds]
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args, Debug)]
struct EmbedFlags {
    /// Embedding backend: auto, hashing or http [default: auto]
    #[arg(long)]
    embedder: Option<String>,
    /// Embedding service base URL [default: $STAR_RAG_EMBED_URL]
    #[arg(long)]
    embed_url: Option<String>,
    /// Model name recorded in cache keys [default: default]
    #[arg(long)]
    embed_model: Option<String>,
    /// Dimension of the offline hashing embedder [default: 64]
    #[arg(long)]
    hashing_dim: Option<usize>,
    /// Embedding cache directory [default: none for hashing, <index dir>/tkrag-cache for http]
    #[arg(long)]
    cache_dir: Option<String>,
}

#[derive(Args, Debug)]
struct LlmFlags {
    /// Answer source: chat or echo-gold [default: chat]
    #[arg(long)]
    llm: Option<String>,
    /// Chat-completions base URL [default: http://localhost:8000/v1]
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Model name sent to the endpoint [default: default]
    #[arg(long)]
    llm_model: Option<String>,
    /// Completion token limit [default: 512]
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Sampling temperature [default: 0]
    #[arg(long)]
    temperature: Option<f64>,
    /// Per-request timeout in seconds [default: 60]
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Retries after a failed request [default: 3]
    #[arg(long)]
    retries: Option<u32>,
    /// Concurrent requests [default: 4]
    #[arg(long)]
    max_in_flight: Option<usize>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Index file from build-index.
    index: PathBuf,
    /// Question text.
    question: String,
    #[command(flatten)]
    retrieval: RetrievalFlags,
    #[command(flatten)]
    embed: EmbedFlags,
    #[command(flatten)]
    llm: LlmFlags,
    /// Ask the LLM for an answer [default: off]
    #[arg(long, overrides_with = "no_generate")]
    generate: bool,
    /// Print retrieved events only
    #[arg(long)]
    no_generate: bool,
    /// Print the diagnostics document (anchors, gamma, pi, rules) [default: off]
    #[arg(long)]
    trace: bool,
    /// Print the result as JSON [default: off]
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Index file from build-index.
    index: PathBuf,
    /// Question file, one JSON object per line.
    questions: PathBuf,
    #[command(flatten)]
    retrieval: RetrievalFlags,
    #[command(flatten)]
    embed: EmbedFlags,
    #[command(flatten)]
    llm: LlmFlags,
    /// Comma-separated Hit@k cutoffs [default: 1,5,10]
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Number of sampled runs averaged [default: 1]
    #[arg(long)]
    runs: Option<usize>,
    /// Questions sampled per run [default: all]
    #[arg(long)]
    sample: Option<usize>,
    /// Record latencies as zero for reproducible reports [default: off]
    #[arg(long)]
    no_timings: bool,
    /// Write the JSON report here
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write per-question records as JSON lines here
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Event file or index file.
    path: PathBuf,
}

fn base_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(input)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RetrievalFlags {
    fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.k1, self.k1);
        set(&mut c.k2, self.k2);
        set(&mut c.alpha, self.alpha);
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.max_iterations, self.max_iterations);
        set(&mut c.theta, self.theta);
        set(&mut c.beta, self.beta);
        if self.tau.is_some() {
            c.tau = self.tau;
        }
    }
}

impl EmbedFlags {
    fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.embedder, self.embedder.clone());
        if self.embed_url.is_some() {
            c.embed_url = self.embed_url.clone();
        }
        set(&mut c.embed_model, self.embed_model.clone());
        set(&mut c.hashing_dim, self.hashing_dim);
        if self.cache_dir.is_some() {
            c.cache_dir = self.cache_dir.clone();
        }
    }
}

impl LlmFlags {
    fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.llm, self.llm.clone());
        set(&mut c.llm_endpoint, self.llm_endpoint.clone());
        set(&mut c.llm_model, self.llm_model.clone());
        set(&mut c.max_tokens, self.max_tokens);
        set(&mut c.temperature, self.temperature);
        set(&mut c.timeout_secs, self.timeout_secs);
        set(&mut c.retries, self.retries);
        set(&mut c.max_in_flight, self.max_in_flight);
    }
}

fn build_params(c: &PipelineConfig) -> BuildParams {
    BuildParams {
        min_support_fraction: c.min_support_fraction,
        max_subset_len: c.max_subset_len,
        k_type: c.k_type,
        pair_cap: c.pair_cap,
        seed: c.seed,
    }
}

fn cmd_build_index(mut cfg: PipelineConfig, args: &BuildArgs) -> CliResult {
    set(&mut cfg.min_support_fraction, args.min_support_fraction);
    set(&mut cfg.max_subset_len, args.max_subset_len);
    set(&mut cfg.k_type, args.k_type);
    set(&mut cfg.pair_cap, args.pair_cap);
    cfg.validate().map_err(input)?;
    let kg = load_tkg(&args.events).map_err(input)?;
    println!("{}", kg_stats(&kg));
    let index = build_index(kg, build_params(&cfg)).map_err(input)?;
    let m = &index.graph.mdl;
    println!(
        "labels: {} types; rule graph: {} nodes, {} of {} candidate edges selected",
        index.labels.num_types(),
        index.num_nodes(),
        index.graph.edges.len(),
        index.graph.num_candidates
    );
    println!(
        "description length: {:.3} (model {:.3}, coverage {:.3}, temporal {:.3}, unexplained {:.3})",
        m.total(),
        m.model_cost,
        m.coverage_cost,
        m.temporal_cost,
        m.unexplained_cost
    );
    index
        .save(&args.out)
        .map_err(input)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn load_index(path: &Path) -> Result<Index, Failure> {
    Index::load(path).map_err(input)
}

struct Embedding {
    provider: Box<dyn EmbeddingProvider>,
    cache: Option<EmbeddingCache>,
}

fn embedding_setup(cfg: &PipelineConfig, index_path: &Path) -> Result<Embedding, Failure> {
    let url = cfg
        .embed_url
        .clone()
        .or_else(|| std::env::var(EMBED_URL_ENV).ok().filter(|u| !u.is_empty()));
    let use_http = match cfg.embedder.as_str() {
        "http" => true,
        "hashing" => false,
        _ => url.is_some(),
    };
    let explicit_cache = cfg.cache_dir.as_ref().map(EmbeddingCache::new);
    if use_http {
        let url = url.ok_or_else(|| input(anyhow!("http embedder needs --embed-url or {EMBED_URL_ENV}")))?;
        let policy = RetryPolicy {
            retries: cfg.retries,
            timeout: Duration::from_secs(cfg.timeout_secs),
            ..RetryPolicy::default()
        };
        let provider = HttpEmbeddingProvider::new(&url, &cfg.embed_model, policy).with_batching(64, cfg.max_in_flight);
        let dir = index_path.parent().unwrap_or(Path::new("."));
        let cache = explicit_cache.unwrap_or_else(|| EmbeddingCache::new(dir.join("tkrag-cache")));
        Ok(Embedding {
            provider: Box::new(provider),
            cache: Some(cache),
        })
    } else {
        Ok(Embedding {
            provider: Box::new(HashingProvider::new(cfg.hashing_dim, tkrag_core::embedding::hashing::DEFAULT_SEED)),
            cache: explicit_cache,
        })
    }
}

fn retrieval_failure(e: RetrievalError) -> Failure {
    match e {
        RetrievalError::Embedding(_) => external(e),
        other => input(other),
    }
}

fn chat_client(cfg: &PipelineConfig) -> ChatClient {
    let mut c = LlmClientConfig::new(&cfg.llm_endpoint, &cfg.llm_model);
    c.max_tokens = cfg.max_tokens;
    c.temperature = cfg.temperature;
    c.timeout = Duration::from_secs(cfg.timeout_secs);
    c.retries = cfg.retries;
    ChatClient::new(c)
}

fn result_json(index: &Index, r: &RetrievalResult) -> serde_json::Value {
    let kg = &index.kg;
    json!({
        "fallback": r.fallback,
        "events": r.events.iter().map(|e| json!({
            "event_id": e.event_id,
            "score": e.score,
            "text": render_event_text(kg, kg.event(e.event_id)),
        })).collect::<Vec<_>>(),
        "top_rules": r.top_rules,
    })
}

fn trace_json(index: &Index, r: &RetrievalResult) -> serde_json::Value {
    let kg = &index.kg;
    json!({
        "anchors": r.anchors.anchors.iter().map(|a| json!({
            "rank": a.rank,
            "event_id": a.event_id,
            "score": a.score,
            "text": render_event_text(kg, kg.event(a.event_id)),
        })).collect::<Vec<_>>(),
        "gamma": r.trace.gamma,
        "pi": r.trace.pi,
        "iterations": r.trace.iterations,
        "residual": r.trace.residual,
        "top_rules": r.trace.top_rules,
        "num_candidates": r.trace.num_candidates,
        "events": r.events,
    })
}

fn cmd_query(mut cfg: PipelineConfig, args: &QueryArgs) -> CliResult {
    args.retrieval.apply(&mut cfg);
    args.embed.apply(&mut cfg);
    args.llm.apply(&mut cfg);
    if args.generate {
        cfg.generate = true;
    }
    if args.no_generate {
        cfg.generate = false;
    }
    if args.trace {
        cfg.trace = true;
    }
    cfg.validate().map_err(input)?;
    if cfg.generate && cfg.llm == "echo-gold" {
        return Err(input(anyhow!("--llm echo-gold needs gold answers and only works with eval")));
    }
    let index = load_index(&args.index)?;
    let emb = embedding_setup(&cfg, &args.index)?;
    let retriever = Retriever::new(&index, emb.provider.as_ref(), emb.cache.as_ref()).map_err(retrieval_failure)?;
    let params = RetrievalParams::from(&cfg);
    let result = retriever.retrieve(&args.question, &params).map_err(retrieval_failure)?;

    let mut answer = None;
    if cfg.generate {
        let ids: Vec<_> = result.events.iter().map(|e| e.event_id).collect();
        let prompt = assemble_prompt(&index.kg, &ids, &args.question).map_err(input)?;
        let raw = chat_client(&cfg).complete(&prompt).map_err(external)?;
        answer = Some(parse_answers(&raw).map_err(external)?);
    }

    if args.json {
        let mut doc = result_json(&index, &result);
        if let Some(a) = &answer {
            doc["answer"] = serde_json::to_value(a).expect("answer serializes");
        }
        if cfg.trace {
            doc["trace"] = trace_json(&index, &result);
        }
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        return Ok(());
    }
    if result.fallback {
        println!("(no seed rule matched; showing semantic matches)");
    }
    for (i, e) in result.events.iter().enumerate() {
        println!("{}. [{:.4}] {}", i + 1, e.score, render_event_text(&index.kg, index.kg.event(e.event_id)));
    }
    if let Some(a) = &answer {
        println!("answer: {}", a.candidates.join(" | "));
    }
    if cfg.trace {
        println!("{}", serde_json::to_string_pretty(&trace_json(&index, &result)).expect("json"));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input)
}

fn cmd_eval(mut cfg: PipelineConfig, args: &EvalArgs) -> CliResult {
    args.retrieval.apply(&mut cfg);
    args.embed.apply(&mut cfg);
    args.llm.apply(&mut cfg);
    set(&mut cfg.ks, args.ks.clone());
    set(&mut cfg.runs, args.runs);
    if args.sample.is_some() {
        cfg.sample = args.sample;
    }
    if args.no_timings {
        cfg.timings = false;
    }
    cfg.validate().map_err(input)?;
    let questions = eval::load_questions(&args.questions).map_err(input)?;
    let index = load_index(&args.index)?;
    let emb = embedding_setup(&cfg, &args.index)?;
    let retriever = Retriever::new(&index, emb.provider.as_ref(), emb.cache.as_ref()).map_err(retrieval_failure)?;
    let client = chat_client(&cfg);
    let answerer = if cfg.llm == "echo-gold" {
        Answerer::EchoGold
    } else {
        Answerer::Model(&client)
    };
    let pipeline = RagPipeline {
        retriever: &retriever,
        params: RetrievalParams::from(&cfg),
        answerer,
    };
    let opts = EvalOptions {
        ks: cfg.ks.clone(),
        sample_size: cfg.sample,
        runs: cfg.runs,
        seed: cfg.seed,
        max_in_flight: cfg.max_in_flight,
        record_timings: cfg.timings,
    };
    let (report, records) = eval::evaluate(&questions, &pipeline, &opts).map_err(input)?;
    print!("{}", report.to_table());
    if let Some(p) = &args.report {
        write_file(p, &report.to_json())?;
    }
    if let Some(p) = &args.records {
        write_file(p, &eval::records_to_jsonl(&records))?;
    }
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.path)
        .with_context(|| format!("cannot read {}", args.path.display()))
        .map_err(input)?;
    if text.trim_start().starts_with('{') {
        let index = Index::from_json(&text)
            .with_context(|| format!("invalid index {}", args.path.display()))
            .map_err(input)?;
        println!("{}", kg_stats(&index.kg));
        let m = &index.graph.mdl;
        println!(
            "types: {} ({} mined)\nrule nodes: {}\nedges: {} selected of {} candidates\ndescription length: {:.3}",
            index.labels.num_types(),
            index.labels.num_mined,
            index.num_nodes(),
            index.graph.edges.len(),
            index.graph.num_candidates,
            m.total()
        );
    } else {
        let kg = load_tkg(&args.path).map_err(input)?;
        println!("{}", kg_stats(&kg));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let cfg = base_config(&cli)?;
    match &cli.command {
        Command::BuildIndex(a) => cmd_build_index(cfg, a),
        Command::Query(a) => cmd_query(cfg, a),
        Command::Eval(a) => cmd_eval(cfg, a),
        Command::Stats(a) => cmd_stats(a),
    }
}

/// The error chain, skipping causes whose text the previous message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if prev.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
        Err(Failure::External(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
