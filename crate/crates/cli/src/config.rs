//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use medctx_core::context::{SvmParams, DEFAULT_EMBED_DIM, DEFAULT_EPOCHS, DEFAULT_LAMBDA};
use medctx_core::eval::ReportFormat;
use medctx_core::preprocess::{Scheme, TaskMode, DEFAULT_MAX_SEQ_LEN};
use medctx_core::synth::GenConfig;
use medctx_core::{Error, Result};

/// Smallest accepted `max_seq_len`.
pub const MIN_MAX_SEQ_LEN: usize = 8;

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Unset means the per-command default (7 for `gen`, 42 elsewhere).
    pub seed: Option<u64>,
    pub jobs: usize,
    pub scheme: Scheme,
    pub lowercase: bool,
    pub max_seq_len: usize,
    pub task: TaskMode,
    pub vocab: Option<String>,
    pub merges: Option<String>,
    pub dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub balanced: bool,
    pub format: ReportFormat,
    pub macro_average: bool,
    /// `train.*` / `test.*` generator keys, applied in order.
    pub gen: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            jobs: 1,
            scheme: Scheme::WordPiece,
            lowercase: true,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            task: TaskMode::Task2,
            vocab: None,
            merges: None,
            dim: DEFAULT_EMBED_DIM,
            lambda: DEFAULT_LAMBDA,
            epochs: DEFAULT_EPOCHS,
            balanced: false,
            format: ReportFormat::Text,
            macro_average: false,
            gen: Vec::new(),
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = Some(parse_num(key, value)?),
            "jobs" => self.jobs = parse_num(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "lowercase" => self.lowercase = parse_bool(key, value)?,
            "max_seq_len" => self.max_seq_len = parse_num(key, value)?,
            "task" => self.task = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "vocab" => self.vocab = Some(value.to_string()),
            "merges" => self.merges = Some(value.to_string()),
            "dim" => self.dim = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "balanced" => self.balanced = parse_bool(key, value)?,
            "format" => self.format = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "macro" => self.macro_average = parse_bool(key, value)?,
            k if k.starts_with("train.") || k.starts_with("test.") => {
                // checked eagerly so typos fail even for commands that ignore them
                GenConfig::default().set(k, value)?;
                self.gen.push((k.to_string(), value.to_string()));
            }
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_seq_len < MIN_MAX_SEQ_LEN {
            return Err(Error::Config(format!(
                "max_seq_len must be at least {MIN_MAX_SEQ_LEN}, got {}",
                self.max_seq_len
            )));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            lambda: self.lambda,
            epochs: self.epochs,
            seed: self.seed_or(42),
            balanced: self.balanced,
        }
    }

    pub fn gen_config(&self) -> Result<GenConfig> {
        let mut g = GenConfig::default();
        for (k, v) in &self.gen {
            g.set(k, v)?;
        }
        g.seed = self.seed_or(g.seed);
        Ok(g)
    }

    /// Canonical settings (no paths) recorded in manifests and hashed.
    pub fn settings(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.map_or("default".into(), |s| s.to_string()));
        put("scheme", self.scheme.to_string());
        put("lowercase", self.lowercase.to_string());
        put("max_seq_len", self.max_seq_len.to_string());
        put("task", format!("{:?}", self.task).to_lowercase());
        put("dim", self.dim.to_string());
        put("lambda", format!("{:e}", self.lambda));
        put("epochs", self.epochs.to_string());
        put("balanced", self.balanced.to_string());
        put("format", self.format.to_string());
        put("macro", self.macro_average.to_string());
        for (k, v) in &self.gen {
            m.insert(k.clone(), v.clone());
        }
        m
    }
}
