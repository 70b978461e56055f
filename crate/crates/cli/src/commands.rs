//! Subcommand implementations. Each reads its declared inputs, writes only
//! into its output directory and finishes with a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use medctx_core::baseline::build_lexicon;
use medctx_core::brat::{load_annotations, load_corpus, write_corpus};
use medctx_core::context::{
    classify_corpus, hash_embed, load_embeddings, train_svm, EmbeddingRecord, EmbeddingTable, LinearSvmModel,
};
use medctx_core::eval::{evaluate, render_report, Averaging, ReportFormat};
use medctx_core::postprocess::attach_context;
use medctx_core::preprocess::{
    extract_task3_instances, preprocess_note, write_jsonl, BioSequence, Scheme, SubwordVocab, Task3Instance,
};
use medctx_core::synth::{generate_to_dir, histogram, render_histogram, SplitCounts};
use medctx_core::{validate_corpus, ContextDimension, Corpus, Error, MedicationMention, Result, Split};

use crate::config::RunConfig;
use crate::manifest::Manifest;

/// Exit status for a finished command that found problems in its data.
pub const EXIT_DATA: u8 = 2;

const EMBEDDER_FILE: &str = "embedder.txt";
const EMBEDDINGS_FILE: &str = "embeddings.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn require_exists(label: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{label} {} does not exist", path.display())))
    }
}

/// Creates `out`, refusing to write into any of the inputs.
fn prepare_out(out: &Path, inputs: &[&Path]) -> Result<()> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let out_c = out.canonicalize().map_err(io_err(out))?;
    for input in inputs {
        if let Ok(c) = input.canonicalize() {
            if c == out_c {
                return Err(Error::Usage(format!(
                    "output directory {} is also an input; refusing to modify inputs",
                    out.display()
                )));
            }
        }
    }
    Ok(())
}

fn split_of(dir: &Path) -> Split {
    match dir.file_name().and_then(|n| n.to_str()) {
        Some("test") => Split::Test,
        _ => Split::Train,
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn load(dir: &Path, label: &str) -> Result<Corpus> {
    require_exists(label, dir)?;
    let loaded = load_corpus(dir, split_of(dir))?;
    warn_all(&loaded.warnings);
    Ok(loaded.corpus)
}

fn vocab(cfg: &RunConfig) -> Result<SubwordVocab> {
    match (cfg.scheme, &cfg.vocab, &cfg.merges) {
        (Scheme::WordPiece, Some(v), _) => SubwordVocab::wordpiece_from_file(v, cfg.lowercase),
        (Scheme::ByteBpe, Some(v), Some(m)) => SubwordVocab::bpe_from_files(v, m, cfg.lowercase),
        (Scheme::ByteBpe, Some(_), None) | (Scheme::ByteBpe, None, Some(_)) => {
            Err(Error::Usage("bpe needs both a vocab and a merges file".into()))
        }
        (Scheme::WordPiece, None, _) => Ok(SubwordVocab::test_wordpiece(cfg.lowercase)),
        (Scheme::ByteBpe, None, None) => Ok(SubwordVocab::test_bpe(cfg.lowercase)),
    }
}

pub fn gen(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let config = cfg.gen_config()?;
    config.validate()?;
    let mut settings = cfg.settings();
    settings.insert("seed".into(), config.seed.to_string());
    let manifest = Manifest::new("gen", settings);
    prepare_out(out, &[])?;
    let (train, test) = generate_to_dir(&config, out)?;
    manifest.finish(out)?;
    println!(
        "generated {} train notes / {} mentions and {} test notes / {} mentions in {}",
        train.notes.len(),
        train.mentions.len(),
        test.notes.len(),
        test.mentions.len(),
        out.display()
    );
    Ok(0)
}

pub fn validate(dirs: &[PathBuf]) -> Result<u8> {
    let mut status = 0;
    for dir in dirs {
        let corpus = load(dir, "corpus")?;
        let violations = validate_corpus(&corpus);
        for v in &violations {
            println!("{}: {v}", dir.display());
        }
        println!(
            "{}: {} notes, {} mentions, {} violations",
            dir.display(),
            corpus.notes.len(),
            corpus.mentions.len(),
            violations.len()
        );
        if !violations.is_empty() {
            status = EXIT_DATA;
        }
    }
    Ok(status)
}

fn histogram_csv(columns: &[(String, SplitCounts)]) -> String {
    let refs: Vec<(&str, &SplitCounts)> = columns.iter().map(|(n, c)| (n.as_str(), c)).collect();
    render_histogram(&refs)
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn histogram_cmd(cfg: &RunConfig, dirs: &[PathBuf]) -> Result<u8> {
    let mut columns = Vec::new();
    for dir in dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .map_or_else(|| dir.display().to_string(), String::from);
        columns.push((name, histogram(&load(dir, "corpus")?)));
    }
    match cfg.format {
        ReportFormat::Json => {
            let map: BTreeMap<&str, &SplitCounts> = columns.iter().map(|(n, c)| (n.as_str(), c)).collect();
            println!("{}", serde_json::to_string_pretty(&map)?);
        }
        ReportFormat::Csv => print!("{}", histogram_csv(&columns)),
        ReportFormat::Text => {
            let refs: Vec<(&str, &SplitCounts)> = columns.iter().map(|(n, c)| (n.as_str(), c)).collect();
            print!("{}", render_histogram(&refs));
        }
    }
    Ok(0)
}

fn task3_jsonl(instances: &[Task3Instance]) -> Result<String> {
    let mut out = String::new();
    for i in instances {
        let labels = i.labels.map(|l| {
            ContextDimension::ALL
                .iter()
                .map(|d| (d.as_str(), l.get(*d)))
                .collect::<BTreeMap<_, _>>()
        });
        let row = json!({
            "key": i.key,
            "window": i.window,
            "mention_span": [i.mention_span.start, i.mention_span.end],
            "labels": labels,
        });
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn preprocess(cfg: &RunConfig, corpus_dir: &Path, out: &Path) -> Result<u8> {
    let vocab = vocab(cfg)?;
    let corpus = load(corpus_dir, "corpus")?;
    let mut manifest = Manifest::new("preprocess", cfg.settings());
    manifest.input("corpus", corpus_dir)?;
    for (label, p) in [("vocab", &cfg.vocab), ("merges", &cfg.merges)] {
        if let Some(p) = p {
            manifest.input(label, Path::new(p))?;
        }
    }
    prepare_out(out, &[corpus_dir])?;

    let by_doc = corpus.mentions_by_doc();
    let per_note: Vec<Vec<BioSequence>> = corpus
        .notes
        .par_iter()
        .map(|note| {
            let mentions = by_doc.get(note.doc_id()).cloned().unwrap_or_default();
            preprocess_note(note, &mentions, &vocab, cfg.task, cfg.max_seq_len)
        })
        .collect::<Result<_>>()?;
    let sequences: Vec<BioSequence> = per_note.into_iter().flatten().collect();
    write_file(&out.join("sequences.jsonl"), &write_jsonl(&sequences)?)?;
    let instances = extract_task3_instances(&corpus)?;
    write_file(&out.join("task3.jsonl"), &task3_jsonl(&instances)?)?;
    manifest.finish(out)?;
    println!(
        "{} sequences, {} task-3 instances written to {}",
        sequences.len(),
        instances.len(),
        out.display()
    );
    Ok(0)
}

pub fn tag_baseline(cfg: &RunConfig, train_dir: &Path, input_dir: &Path, out: &Path) -> Result<u8> {
    let train = load(train_dir, "training corpus")?;
    let input = load(input_dir, "input corpus")?;
    let mut manifest = Manifest::new("tag-baseline", cfg.settings());
    manifest.input("train", train_dir)?;
    manifest.input("input", input_dir)?;
    prepare_out(out, &[train_dir, input_dir])?;

    let lexicon = build_lexicon(&train);
    let tagged: Vec<Vec<MedicationMention>> = input.notes.par_iter().map(|n| lexicon.tag(n)).collect::<Result<_>>()?;
    let predicted = Corpus {
        notes: input.notes.clone(),
        mentions: tagged.into_iter().flatten().collect(),
        split: input.split,
    };
    write_corpus(out, &predicted)?;
    write_file(&out.join("lexicon.tsv"), &lexicon.to_tsv())?;
    manifest.finish(out)?;
    println!(
        "lexicon of {} surfaces tagged {} mentions in {} notes",
        lexicon.len(),
        predicted.mentions.len(),
        predicted.notes.len()
    );
    Ok(0)
}

fn hash_table(instances: &[Task3Instance], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let embedded: Vec<(EmbeddingRecord, Option<String>)> =
        instances.par_iter().map(|i| hash_embed(i, dim, seed)).collect();
    let mut table = EmbeddingTable::new(dim);
    for (record, warning) in embedded {
        if let Some(w) = warning {
            eprintln!("warning: {w}");
        }
        table.insert(record)?;
    }
    Ok(table)
}

pub fn embed(cfg: &RunConfig, corpus_dir: &Path, out: &Path) -> Result<u8> {
    let corpus = load(corpus_dir, "corpus")?;
    let mut manifest = Manifest::new("embed", cfg.settings());
    manifest.input("corpus", corpus_dir)?;
    prepare_out(out, &[corpus_dir])?;
    let instances = extract_task3_instances(&corpus)?;
    let table = hash_table(&instances, cfg.dim, cfg.seed_or(42))?;
    write_file(&out.join(EMBEDDINGS_FILE), &table.to_text())?;
    manifest.finish(out)?;
    println!("{} embeddings of dimension {} written to {}", table.len(), table.dim(), out.display());
    Ok(0)
}

/// How the models in a model directory expect their inputs to be embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Embedder {
    Hash { dim: usize, seed: u64 },
    External { dim: usize },
}

impl Embedder {
    fn to_text(self) -> String {
        match self {
            Embedder::Hash { dim, seed } => format!("kind=hash\ndim={dim}\nseed={seed}\n"),
            Embedder::External { dim } => format!("kind=external\ndim={dim}\n"),
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let kv: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        let num = |k: &str| -> Result<u64> {
            kv.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("{EMBEDDER_FILE}: missing or bad {k}")))
        };
        match kv.get("kind") {
            Some(&"hash") => Ok(Embedder::Hash {
                dim: num("dim")? as usize,
                seed: num("seed")?,
            }),
            Some(&"external") => Ok(Embedder::External { dim: num("dim")? as usize }),
            _ => Err(Error::Format(format!("{EMBEDDER_FILE}: unknown embedder kind"))),
        }
    }
}

fn embeddings_for(instances: &[Task3Instance], embedder: Embedder, external: Option<&Path>) -> Result<EmbeddingTable> {
    match (embedder, external) {
        (_, Some(path)) => {
            require_exists("embeddings", path)?;
            let table = load_embeddings(path)?;
            let expected = match embedder {
                Embedder::Hash { dim, .. } | Embedder::External { dim } => dim,
            };
            if table.dim() != expected {
                return Err(Error::Shape {
                    expected,
                    actual: table.dim(),
                });
            }
            Ok(table)
        }
        (Embedder::Hash { dim, seed }, None) => hash_table(instances, dim, seed),
        (Embedder::External { .. }, None) => Err(Error::Usage(
            "these models were trained on external embeddings; pass --embeddings".into(),
        )),
    }
}

pub fn train_context(cfg: &RunConfig, train_dir: &Path, embeddings: Option<&Path>, out: &Path) -> Result<u8> {
    let train = load(train_dir, "training corpus")?;
    let mut manifest = Manifest::new("train-context", cfg.settings());
    manifest.input("train", train_dir)?;
    let mut inputs = vec![train_dir];
    if let Some(e) = embeddings {
        require_exists("embeddings", e)?;
        manifest.input("embeddings", e)?;
        inputs.push(e);
    }
    prepare_out(out, &inputs)?;

    let instances = extract_task3_instances(&train)?;
    if instances.is_empty() {
        return Err(Error::Integrity("training corpus has no Disposition mentions".into()));
    }
    let embedder = match embeddings {
        Some(p) => Embedder::External {
            dim: load_embeddings(p)?.dim(),
        },
        None => Embedder::Hash {
            dim: cfg.dim,
            seed: cfg.seed_or(42),
        },
    };
    let table = embeddings_for(&instances, embedder, embeddings)?;
    let missing: Vec<String> = instances
        .iter()
        .filter(|i| table.get(&i.key).is_none())
        .map(|i| i.key.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Completeness { what: "embeddings", ids: missing });
    }
    let params = cfg.svm_params();
    let models: Vec<LinearSvmModel> = ContextDimension::ALL
        .par_iter()
        .map(|dim| {
            let data: Vec<(&EmbeddingRecord, &str)> = instances
                .iter()
                .map(|i| {
                    let labels = i.labels.unwrap_or_default();
                    (table.get(&i.key).expect("checked"), labels.get(*dim))
                })
                .collect();
            train_svm(&data, *dim, params)
        })
        .collect::<Result<_>>()?;
    for model in &models {
        write_file(&out.join(format!("{}.model", model.dimension)), &model.to_text())?;
    }
    write_file(&out.join(EMBEDDER_FILE), &embedder.to_text())?;
    manifest.finish(out)?;
    println!("trained {} context models on {} instances", models.len(), instances.len());
    Ok(0)
}

pub fn predict(
    cfg: &RunConfig,
    models_dir: &Path,
    input_dir: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<u8> {
    require_exists("model directory", models_dir)?;
    let input = load(input_dir, "input corpus")?;
    let mut manifest = Manifest::new("predict", cfg.settings());
    manifest.input("models", models_dir)?;
    manifest.input("input", input_dir)?;
    let mut inputs = vec![models_dir, input_dir];
    if let Some(e) = embeddings {
        manifest.input("embeddings", e)?;
        inputs.push(e);
    }
    prepare_out(out, &inputs)?;

    let models: Vec<LinearSvmModel> = ContextDimension::ALL
        .iter()
        .map(|d| {
            let path = models_dir.join(format!("{d}.model"));
            LinearSvmModel::from_text(&read_file(&path)?).map_err(|e| Error::File {
                path,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let embedder = Embedder::parse(&read_file(&models_dir.join(EMBEDDER_FILE))?)?;

    let instances = extract_task3_instances(&input)?;
    let table = embeddings_for(&instances, embedder, embeddings)?;
    let keys: Vec<String> = instances.iter().map(|i| i.key.clone()).collect();
    let predictions = classify_corpus(&models, &table, &keys)?;
    let mut predicted = input.clone();
    warn_all(&attach_context(&mut predicted.mentions, &predictions)?);
    write_corpus(out, &predicted)?;
    manifest.finish(out)?;
    println!("predicted context for {} Disposition mentions", keys.len());
    Ok(0)
}

pub fn evaluate_cmd(cfg: &RunConfig, gold_dir: &Path, pred_dir: &Path, out: Option<&Path>) -> Result<u8> {
    let gold = load(gold_dir, "gold corpus")?;
    require_exists("prediction directory", pred_dir)?;
    let loaded = load_annotations(pred_dir, &gold.notes, gold.split)?;
    warn_all(&loaded.warnings);
    let report = evaluate(&gold, &loaded.corpus)?;
    let averaging = if cfg.macro_average { Averaging::Macro } else { Averaging::Micro };
    let rendered = render_report(&report, cfg.format, averaging)?;
    print!("{rendered}");
    if let Some(out) = out {
        let mut manifest = Manifest::new("evaluate", cfg.settings());
        manifest.input("gold", gold_dir)?;
        manifest.input("pred", pred_dir)?;
        prepare_out(out, &[gold_dir, pred_dir])?;
        write_file(&out.join(format!("report.{}", cfg.format)), &rendered)?;
        manifest.finish(out)?;
    }
    Ok(0)
}
