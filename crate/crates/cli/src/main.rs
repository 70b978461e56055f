//! `medctx`: medication extraction and context classification pipeline.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors (including validation violations).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use medctx_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "medctx", version, about = "Medication mention extraction and context classification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (default 7 for gen, 42 for hashing and training)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for document-parallel stages
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Subword scheme: wordpiece or bpe
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Lowercase text before subword lookup (true / false)
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    lowercase: Option<String>,
    /// Model input length including the two special positions
    #[arg(long, global = true)]
    max_seq_len: Option<usize>,
    /// Report format: text, json or csv
    #[arg(long, global = true)]
    format: Option<String>,
    /// Report the task-3 overall score as a macro average
    #[arg(long = "macro", global = true)]
    macro_average: bool,
    /// Any configuration key, as key=value (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic train/test corpus
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check corpus directories for integrity violations
    Validate {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Print label histograms of corpus directories
    Histogram {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Tokenize, BIO-tag and chunk a corpus; extract task-3 instances
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// task1 (Drug tags) or task2 (event tags)
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        vocab: Option<String>,
        #[arg(long)]
        merges: Option<String>,
    },
    /// Tag notes with a lexicon built from a training corpus
    TagBaseline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write hashed context-window embeddings for Disposition mentions
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Train one linear SVM per context dimension
    TrainContext {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Precomputed embeddings (default: hashed embeddings)
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Weight instances by inverse class frequency
        #[arg(long)]
        balanced: bool,
    },
    /// Attach predicted context labels to Disposition mentions
    #[command(alias = "predict-context")]
    Predict {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Score predictions against gold annotations
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write report and manifest into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(common: &Common, command: &Command) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let mut flags: Vec<(&str, String)> = Vec::new();
    if let Some(v) = common.seed {
        flags.push(("seed", v.to_string()));
    }
    if let Some(v) = common.jobs {
        flags.push(("jobs", v.to_string()));
    }
    if let Some(v) = &common.scheme {
        flags.push(("scheme", v.clone()));
    }
    if let Some(v) = &common.lowercase {
        flags.push(("lowercase", v.clone()));
    }
    if let Some(v) = common.max_seq_len {
        flags.push(("max_seq_len", v.to_string()));
    }
    if let Some(v) = &common.format {
        flags.push(("format", v.clone()));
    }
    if common.macro_average {
        flags.push(("macro", "true".into()));
    }
    match command {
        Command::Preprocess { task, vocab, merges, .. } => {
            for (k, v) in [("task", task), ("vocab", vocab), ("merges", merges)] {
                if let Some(v) = v {
                    flags.push((k, v.clone()));
                }
            }
        }
        Command::Embed { dim: Some(d), .. } => flags.push(("dim", d.to_string())),
        Command::TrainContext {
            dim,
            lambda,
            epochs,
            balanced,
            ..
        } => {
            if let Some(v) = dim {
                flags.push(("dim", v.to_string()));
            }
            if let Some(v) = lambda {
                flags.push(("lambda", v.to_string()));
            }
            if let Some(v) = epochs {
                flags.push(("epochs", v.to_string()));
            }
            if *balanced {
                flags.push(("balanced", "true".into()));
            }
        }
        _ => {}
    }
    for (k, v) in flags {
        cfg.set(k, &v).map_err(|e| Error::Usage(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = resolve(&cli.common, &cli.command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Gen { out } => commands::gen(&cfg, out),
        Command::Validate { dirs } => commands::validate(dirs),
        Command::Histogram { dirs } => commands::histogram_cmd(&cfg, dirs),
        Command::Preprocess { corpus, out, .. } => commands::preprocess(&cfg, corpus, out),
        Command::TagBaseline { train, input, out } => commands::tag_baseline(&cfg, train, input, out),
        Command::Embed { corpus, out, .. } => commands::embed(&cfg, corpus, out),
        Command::TrainContext {
            train, out, embeddings, ..
        } => commands::train_context(&cfg, train, embeddings.as_deref(), out),
        Command::Predict {
            models,
            input,
            out,
            embeddings,
        } => commands::predict(&cfg, models, input, embeddings.as_deref(), out),
        Command::Evaluate { gold, pred, out } => commands::evaluate_cmd(&cfg, gold, pred, out.as_deref()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { commands::EXIT_DATA })
        }
    }
}
