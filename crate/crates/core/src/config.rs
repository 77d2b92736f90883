//! Pipeline parameters, loadable from a flat TOML file (`key = value`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("invalid parameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k1: usize,
    pub k2: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub theta: f64,
    pub beta: f64,
    /// Defaults to `1 / |seeds|` when unset.
    pub tau: Option<f64>,
    pub min_support_fraction: f64,
    pub max_subset_len: usize,
    pub k_type: usize,
    pub pair_cap: u64,
    pub seed: u64,
    /// Base URL of the embedding service; falls back to `STAR_RAG_EMBED_URL`.
    pub embed_url: Option<String>,
    pub embed_model: String,
    pub hashing_dim: usize,
    pub cache_dir: Option<String>,
    pub llm_endpoint: String,
    pub llm_model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub retries: u32,
    pub max_in_flight: usize,
    /// `auto`, `hashing` or `http`; `auto` picks `http` when an embedding URL is known.
    pub embedder: String,
    /// `chat` or `echo-gold`.
    pub llm: String,
    pub generate: bool,
    pub trace: bool,
    pub ks: Vec<usize>,
    pub runs: usize,
    pub sample: Option<usize>,
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k1: 10,
            k2: 20,
            alpha: 0.2,
            epsilon: 1e-5,
            max_iterations: 1000,
            theta: 0.6,
            beta: 0.7,
            tau: None,
            min_support_fraction: 0.01,
            max_subset_len: 3,
            k_type: 3,
            pair_cap: 1_000_000,
            seed: 42,
            embed_url: None,
            embed_model: "default".into(),
            hashing_dim: 64,
            cache_dir: None,
            llm_endpoint: "http://localhost:8000/v1".into(),
            llm_model: "default".into(),
            max_tokens: 512,
            temperature: 0.0,
            timeout_secs: 60,
            retries: 3,
            max_in_flight: 4,
            embedder: "auto".into(),
            llm: "chat".into(),
            generate: false,
            trace: false,
            ks: vec![1, 5, 10],
            runs: 1,
            sample: None,
            timings: true,
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { name, reason: reason.into() }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k1 == 0 {
            return Err(invalid("k1", "must be at least 1"));
        }
        if self.k2 == 0 {
            return Err(invalid("k2", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("{} must be positive", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid("theta", format!("{} not in [0, 1]", self.theta)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", format!("{} not in (0, 1)", self.beta)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(invalid("tau", format!("{tau} must be positive")));
            }
        }
        if !(self.min_support_fraction > 0.0 && self.min_support_fraction <= 1.0) {
            return Err(invalid("min_support_fraction", format!("{} not in (0, 1]", self.min_support_fraction)));
        }
        if self.max_subset_len == 0 {
            return Err(invalid("max_subset_len", "must be at least 1"));
        }
        if self.k_type == 0 {
            return Err(invalid("k_type", "must be at least 1"));
        }
        if self.pair_cap == 0 {
            return Err(invalid("pair_cap", "must be at least 1"));
        }
        if self.hashing_dim == 0 {
            return Err(invalid("hashing_dim", "must be at least 1"));
        }
        if self.max_in_flight == 0 {
            return Err(invalid("max_in_flight", "must be at least 1"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid("temperature", "must be non-negative"));
        }
        if !matches!(self.embedder.as_str(), "auto" | "hashing" | "http") {
            return Err(invalid("embedder", format!("{:?} is not auto, hashing or http", self.embedder)));
        }
        if !matches!(self.llm.as_str(), "chat" | "echo-gold") {
            return Err(invalid("llm", format!("{:?} is not chat or echo-gold", self.llm)));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(invalid("ks", "must list positive cutoffs"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        Ok(())
    }
}
