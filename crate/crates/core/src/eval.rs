//! Question loading, Hit@k scoring and the seeded evaluation harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::{assemble_prompt, count_tokens, parse_answers, ChatModel, TOKEN_ESTIMATOR};
use crate::retrieval::{RetrievalParams, Retriever};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read questions {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("question line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QType {
    Single,
    Multiple,
    #[default]
    Unknown,
}

impl QType {
    pub fn as_str(self) -> &'static str {
        match self {
            QType::Single => "single",
            QType::Multiple => "multiple",
            QType::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default, deserialize_with = "qtype_or_null")]
    pub qtype: QType,
}

fn qtype_or_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<QType, D::Error> {
    Ok(Option::<QType>::deserialize(d)?.unwrap_or_default())
}

pub fn parse_questions(reader: impl BufRead) -> Result<Vec<Question>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let q: Question = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if q.answers.iter().all(|a| a.trim().is_empty()) {
            return Err(EvalError::Parse {
                line: i + 1,
                reason: format!("question {:?} has no gold answers", q.id),
            });
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<Question>, EvalError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_questions(BufReader::new(file))
}

/// Case-folded, trimmed, with underscores read as spaces and runs of
/// whitespace collapsed.
pub fn normalize_answer(s: &str) -> String {
    s.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// 1 when one of the first `k` candidates matches any gold alias.
pub fn hit_at_k(candidates: &[String], gold: &[String], k: usize) -> u8 {
    let gold: Vec<String> = gold.iter().map(|g| normalize_answer(g)).collect();
    candidates
        .iter()
        .take(k)
        .any(|c| {
            let c = normalize_answer(c);
            gold.contains(&c)
        })
        .into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub candidates: Vec<String>,
    pub lenient: bool,
    pub prompt_tokens: usize,
    pub response_tokens: usize,
    pub retrieval_ms: f64,
    pub llm_ms: f64,
    pub fallback: bool,
}

/// One question in, ranked answer candidates out.
pub trait QaPipeline: Sync {
    fn run(&self, question: &Question) -> Result<PipelineOutput, String>;
}

pub enum Answerer<'a> {
    Model(&'a dyn ChatModel),
    /// Test double answering with the gold list.
    EchoGold,
}

pub struct RagPipeline<'a> {
    pub retriever: &'a Retriever<'a>,
    pub params: RetrievalParams,
    pub answerer: Answerer<'a>,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

impl QaPipeline for RagPipeline<'_> {
    fn run(&self, q: &Question) -> Result<PipelineOutput, String> {
        let t0 = Instant::now();
        let result = self.retriever.retrieve(&q.question, &self.params).map_err(|e| e.to_string())?;
        let retrieval_ms = elapsed_ms(t0);
        let ids: Vec<_> = result.events.iter().map(|e| e.event_id).collect();
        let prompt = assemble_prompt(&self.retriever.index.kg, &ids, &q.question).map_err(|e| e.to_string())?;
        let t1 = Instant::now();
        let raw = match &self.answerer {
            Answerer::Model(m) => m.complete(&prompt).map_err(|e| e.to_string())?,
            Answerer::EchoGold => format!("Thought: gold answers echoed.\nAnswer:\n{}", q.answers.join("\n")),
        };
        let llm_ms = elapsed_ms(t1);
        let answers = parse_answers(&raw).map_err(|e| e.to_string())?;
        Ok(PipelineOutput {
            candidates: answers.candidates,
            lenient: answers.lenient,
            prompt_tokens: prompt.token_count(),
            response_tokens: count_tokens(&raw),
            retrieval_ms,
            llm_ms,
            fallback: result.fallback,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub question_id: String,
    pub qtype: QType,
    pub answer_candidates: Vec<String>,
    pub lenient: bool,
    /// k -> 0/1.
    pub hits: BTreeMap<usize, u8>,
    pub prompt_tokens: usize,
    pub response_tokens: usize,
    pub retrieval_ms: f64,
    pub llm_ms: f64,
    pub fallback: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    /// Questions drawn per run; `None` uses all.
    pub sample_size: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub max_in_flight: usize,
    /// When false every latency is recorded as 0 so reports are reproducible byte for byte.
    pub record_timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![1, 5, 10],
            sample_size: None,
            runs: 1,
            seed: 42,
            max_in_flight: 4,
            record_timings: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTypeBreakdown {
    pub count: usize,
    /// k -> percent.
    pub hit_at_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    pub questions_per_run: usize,
    pub seed: u64,
    pub ks: Vec<usize>,
    /// k -> percent, mean and population variance over runs.
    pub hit_at_k: BTreeMap<usize, MeanVar>,
    pub per_qtype: BTreeMap<String, QTypeBreakdown>,
    pub mean_prompt_tokens: f64,
    pub mean_response_tokens: f64,
    pub mean_retrieval_ms: f64,
    pub mean_llm_ms: f64,
    pub errors: usize,
    pub fallbacks: usize,
    pub lenient_parses: usize,
    pub token_estimator: String,
}

/// Indices of the questions evaluated in one run, ascending.
pub fn sample_indices(n: usize, sample_size: Option<usize>, seed: u64, run: usize) -> Vec<usize> {
    let m = sample_size.map_or(n, |s| s.min(n));
    if m == n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

fn normalized_ks(ks: &[usize]) -> Result<Vec<usize>, EvalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::InvalidOption("ks must be non-empty and each k at least 1".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// Runs every sampled question through `pipeline`. Failures become records
/// with zero hits and the error text.
pub fn evaluate(
    questions: &[Question],
    pipeline: &dyn QaPipeline,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<RunRecord>), EvalError> {
    let ks = normalized_ks(&opts.ks)?;
    if opts.runs == 0 {
        return Err(EvalError::InvalidOption("runs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.max_in_flight.max(1))
        .build()
        .map_err(|e| EvalError::InvalidOption(e.to_string()))?;
    let mut records = Vec::new();
    for run in 0..opts.runs {
        let picked = sample_indices(questions.len(), opts.sample_size, opts.seed, run);
        let batch: Vec<RunRecord> = pool.install(|| {
            picked
                .par_iter()
                .map(|&i| score_one(run, &questions[i], pipeline, &ks, opts.record_timings))
                .collect()
        });
        records.extend(batch);
    }
    let report = aggregate(&records, &ks, opts.runs, opts.seed);
    Ok((report, records))
}

fn score_one(run: usize, q: &Question, pipeline: &dyn QaPipeline, ks: &[usize], timings: bool) -> RunRecord {
    let mut rec = RunRecord {
        run,
        question_id: q.id.clone(),
        qtype: q.qtype,
        answer_candidates: Vec::new(),
        lenient: false,
        hits: ks.iter().map(|&k| (k, 0)).collect(),
        prompt_tokens: 0,
        response_tokens: 0,
        retrieval_ms: 0.0,
        llm_ms: 0.0,
        fallback: false,
        error: None,
    };
    match pipeline.run(q) {
        Ok(out) => {
            for (&k, hit) in rec.hits.iter_mut() {
                *hit = hit_at_k(&out.candidates, &q.answers, k);
            }
            rec.answer_candidates = out.candidates;
            rec.lenient = out.lenient;
            rec.prompt_tokens = out.prompt_tokens;
            rec.response_tokens = out.response_tokens;
            if timings {
                rec.retrieval_ms = out.retrieval_ms;
                rec.llm_ms = out.llm_ms;
            }
            rec.fallback = out.fallback;
        }
        Err(e) => {
            log::warn!("question {} failed: {e}", q.id);
            rec.error = Some(e);
        }
    }
    rec
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Recomputes a report from persisted records.
pub fn aggregate(records: &[RunRecord], ks: &[usize], runs: usize, seed: u64) -> EvalReport {
    let run_ids: Vec<usize> = {
        let mut r: Vec<usize> = records.iter().map(|r| r.run).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let per_run = |run: usize| records.iter().filter(move |r| r.run == run);
    let mut hit_at_k = BTreeMap::new();
    if !records.is_empty() {
        for &k in ks {
            let accs: Vec<f64> = run_ids
                .iter()
                .map(|&run| 100.0 * mean(per_run(run).map(|r| r.hits[&k] as f64)))
                .collect();
            let m = mean(accs.iter().copied());
            let var = mean(accs.iter().map(|a| (a - m) * (a - m)));
            hit_at_k.insert(k, MeanVar { mean: m, variance: var });
        }
    }
    let mut per_qtype = BTreeMap::new();
    for qt in [QType::Single, QType::Multiple, QType::Unknown] {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.qtype == qt).collect();
        if rs.is_empty() {
            continue;
        }
        let hits = ks
            .iter()
            .map(|&k| (k, 100.0 * mean(rs.iter().map(|r| r.hits[&k] as f64))))
            .collect();
        per_qtype.insert(
            qt.as_str().to_string(),
            QTypeBreakdown {
                count: rs.len(),
                hit_at_k: hits,
            },
        );
    }
    let evaluated_runs = run_ids.len();
    EvalReport {
        runs: if records.is_empty() { 0 } else { runs.max(evaluated_runs) },
        questions_per_run: records.len().checked_div(evaluated_runs).unwrap_or(0),
        seed,
        ks: ks.to_vec(),
        hit_at_k,
        per_qtype,
        mean_prompt_tokens: mean(records.iter().map(|r| r.prompt_tokens as f64)),
        mean_response_tokens: mean(records.iter().map(|r| r.response_tokens as f64)),
        mean_retrieval_ms: mean(records.iter().map(|r| r.retrieval_ms)),
        mean_llm_ms: mean(records.iter().map(|r| r.llm_ms)),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        fallbacks: records.iter().filter(|r| r.fallback).count(),
        lenient_parses: records.iter().filter(|r| r.lenient).count(),
        token_estimator: TOKEN_ESTIMATOR.to_string(),
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "runs: {}  questions/run: {}  seed: {}", self.runs, self.questions_per_run, self.seed);
        if self.hit_at_k.is_empty() {
            let _ = writeln!(t, "no questions evaluated");
            return t;
        }
        let _ = write!(t, "{:<10}", "");
        for k in &self.ks {
            let _ = write!(t, "{:>10}", format!("Hit@{k}"));
        }
        let _ = writeln!(t);
        let _ = write!(t, "{:<10}", "all");
        for k in &self.ks {
            let _ = write!(t, "{:>10.2}", self.hit_at_k[k].mean);
        }
        let _ = writeln!(t);
        let _ = write!(t, "{:<10}", "(var)");
        for k in &self.ks {
            let _ = write!(t, "{:>10.2}", self.hit_at_k[k].variance);
        }
        let _ = writeln!(t);
        for (name, b) in &self.per_qtype {
            let _ = write!(t, "{:<10}", name);
            for k in &self.ks {
                let _ = write!(t, "{:>10.2}", b.hit_at_k[k]);
            }
            let _ = writeln!(t, "   (n={})", b.count);
        }
        let _ = writeln!(
            t,
            "tokens: prompt {:.1}, response {:.1} ({})",
            self.mean_prompt_tokens, self.mean_response_tokens, self.token_estimator
        );
        let _ = writeln!(
            t,
            "latency ms: retrieval {:.2}, llm {:.2}",
            self.mean_retrieval_ms, self.mean_llm_ms
        );
        let _ = writeln!(t, "errors: {}  fallbacks: {}  lenient parses: {}", self.errors, self.fallbacks, self.lenient_parses);
        t
    }
}

pub fn records_to_jsonl(records: &[RunRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}
