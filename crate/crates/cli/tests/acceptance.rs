//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when all
//! criteria pass. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use medctx_core::brat::{emit_ann, parse_ann};
use medctx_core::context::{hash_embed, train_svm, EmbeddingRecord, SvmParams, DEFAULT_EMBED_DIM};
use medctx_core::eval::{
    evaluate_task1, evaluate_task2, evaluate_task3, f_score, match_spans, precision, recall, ConfusionCounts, MatchMode,
};
use medctx_core::postprocess::{decode_mentions, merge_chunk_predictions, WordLabel};
use medctx_core::preprocess::{
    extract_task3_instances, preprocess_note, project_bio, tokenize_words, EntityType, SubwordToken, SubwordVocab, Tag,
    TaskMode, WordToken,
};
use medctx_core::synth::{generate, GenConfig};
use medctx_core::{
    Action, Actor, Certainty, ClinicalNote, ContextDimension, ContextLabels, Corpus, EventLabel, MedicationMention,
    Negation, Span, Split, Temporality,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_medctx")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn medctx")
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------------------------------------------------------------- oracles

/// Maximum bipartite matching size by augmenting paths.
fn max_matching(n_left: usize, n_right: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let adj: Vec<Vec<usize>> = (0..n_left).map(|g| (0..n_right).filter(|&p| edge(g, p)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n_right];
    fn augment(g: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &p in &adj[g] {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            if owner[p].is_none() || augment(owner[p].unwrap(), adj, seen, owner) {
                owner[p] = Some(g);
                return true;
            }
        }
        false
    }
    let mut size = 0;
    for g in 0..n_left {
        let mut seen = vec![false; n_right];
        if augment(g, &adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

fn oracle_counts(gold: &[&MedicationMention], pred: &[&MedicationMention], strict: bool, labeled: bool) -> ConfusionCounts {
    let tp = max_matching(gold.len(), pred.len(), |g, p| {
        let (a, b) = (gold[g], pred[p]);
        let spans = if strict {
            a.span == b.span
        } else {
            a.span.start.max(b.span.start) < a.span.end.min(b.span.end)
        };
        spans && (!labeled || a.event == b.event)
    }) as u64;
    ConfusionCounts {
        tp,
        fp: pred.len() as u64 - tp,
        fn_: gold.len() as u64 - tp,
    }
}

fn direct_prf(c: &ConfusionCounts) -> (f64, f64, f64) {
    let p = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

// ---------------------------------------------------------------- fuzz helpers

fn random_event(rng: &mut ChaCha8Rng) -> Option<EventLabel> {
    match rng.gen_range(0..4) {
        0 => None,
        i => Some(EventLabel::ALL[i - 1]),
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> ContextLabels {
    ContextLabels {
        action: Action::ALL[rng.gen_range(0..Action::ALL.len())],
        temporality: Temporality::ALL[rng.gen_range(0..Temporality::ALL.len())],
        certainty: Certainty::ALL[rng.gen_range(0..Certainty::ALL.len())],
        actor: Actor::ALL[rng.gen_range(0..Actor::ALL.len())],
        negation: Negation::ALL[rng.gen_range(0..Negation::ALL.len())],
    }
}

fn mention(doc: &str, id: usize, span: Span, event: Option<EventLabel>) -> MedicationMention {
    MedicationMention {
        mention_id: format!("T{id}"),
        doc_id: doc.to_string(),
        span,
        surface: String::new(),
        event,
        context: None,
    }
}

/// Keeps the earliest of any overlapping mentions (sorted by span).
fn make_disjoint(mut ms: Vec<MedicationMention>) -> Vec<MedicationMention> {
    ms.sort_by_key(|m| m.span);
    let mut out: Vec<MedicationMention> = Vec::new();
    for m in ms {
        if m.span.is_empty() {
            continue;
        }
        if out.last().is_none_or(|l| l.span.end <= m.span.start) {
            out.push(m);
        }
    }
    out
}

fn fuzz_document(rng: &mut ChaCha8Rng, doc: &str) -> (Vec<MedicationMention>, Vec<MedicationMention>, usize) {
    let n = rng.gen_range(0..=50);
    let mut gold = Vec::new();
    let mut pos = 0;
    for i in 0..n {
        pos += rng.gen_range(0..6);
        let len = rng.gen_range(1..9);
        gold.push(mention(doc, i + 1, Span::new(pos, pos + len), random_event(rng)));
        pos += len;
    }
    let text_len = pos + 20;
    let mut pred = Vec::new();
    if rng.gen_range(0..5) == 0 {
        // independent random prediction set
        let mut p = 0;
        for i in 0..rng.gen_range(0..=50) {
            p += rng.gen_range(0..8);
            let len = rng.gen_range(1..9);
            pred.push(mention(doc, i + 1, Span::new(p, p + len), random_event(rng)));
            p += len;
        }
    } else {
        for g in &gold {
            let mut m = g.clone();
            match rng.gen_range(0..8) {
                0 => continue,
                1 => m.span.start = (m.span.start + rng.gen_range(0..3)).min(m.span.end - 1),
                2 => m.span.end += rng.gen_range(1..4),
                3 => m.span.start = m.span.start.saturating_sub(rng.gen_range(1..3)),
                4 => m.event = random_event(rng),
                5 => {
                    let shift = rng.gen_range(1..12);
                    m.span = Span::new(m.span.start + shift, m.span.end + shift);
                }
                _ => {}
            }
            pred.push(m);
        }
        for _ in 0..rng.gen_range(0..5) {
            let s = rng.gen_range(0..text_len - 10);
            pred.push(mention(doc, 0, Span::new(s, s + rng.gen_range(1..9)), random_event(rng)));
        }
    }
    (gold, make_disjoint(pred), text_len)
}

fn corpus_of(docs: Vec<(String, usize, Vec<MedicationMention>)>) -> Corpus {
    let mut c = Corpus::new(Split::Test);
    for (doc, len, ms) in docs {
        c.notes.push(ClinicalNote::new(doc, "x".repeat(len)).unwrap());
        c.mentions.extend(ms);
    }
    c
}

// ---------------------------------------------------------------- criteria

fn c1_gold_fixed_point() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let gen = run_cli(&["gen", "--seed", "7", "--out", out.to_str().unwrap()]);
    ensure!(gen.status.success(), "gen failed: {}", String::from_utf8_lossy(&gen.stderr));
    let mut checked = 0;
    for split in ["train", "test"] {
        let d = out.join(split);
        let d = d.to_str().unwrap();
        let o = run_cli(&["evaluate", "--gold", d, "--pred", d, "--format", "json"]);
        ensure!(o.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&o.stderr));
        let report: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
        let mut stack = vec![("".to_string(), &report)];
        while let Some((path, v)) = stack.pop() {
            match v {
                Value::Object(map) => {
                    for (k, child) in map {
                        if ["precision", "recall", "f_score"].contains(&k.as_str()) {
                            ensure!(child.as_f64() == Some(1.0), "{split}{path}.{k} = {child}");
                            checked += 1;
                        } else {
                            stack.push((format!("{path}.{k}"), child));
                        }
                    }
                }
                Value::Array(items) => stack.extend(items.iter().map(|c| (path.clone(), c))),
                _ => {}
            }
        }
    }
    // task1 2 + task2 8 + task3 (5 + overall + macro + combined) * 2, times 3 metrics, two splits
    ensure!(checked == 2 * 3 * (2 + 8 + 16), "only {checked} metric cells found");
    Ok(format!("{checked} metric cells equal 1.0 on train and test"))
}

fn c2_distribution() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let gen = run_cli(&["gen", "--seed", "7", "--out", out.to_str().unwrap()]);
    ensure!(gen.status.success(), "gen failed");
    let o = run_cli(&[
        "histogram",
        "--format",
        "json",
        out.join("train").to_str().unwrap(),
        out.join("test").to_str().unwrap(),
    ]);
    ensure!(o.status.success(), "histogram failed: {}", String::from_utf8_lossy(&o.stderr));
    let h: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;

    // (path, train count, test count)
    let expected: &[(&str, u64, u64)] = &[
        ("drug", 7229, 1783),
        ("events.Disposition", 1412, 335),
        ("events.NoDisposition", 5260, 1326),
        ("events.Undetermined", 557, 122),
        ("context.Action.Start", 568, 131),
        ("context.Action.Stop", 340, 67),
        ("context.Action.Increase", 129, 22),
        ("context.Action.Decrease", 54, 13),
        ("context.Action.UniqueDose", 285, 88),
        ("context.Action.OtherChange", 1, 0),
        ("context.Action.Unknown", 35, 14),
        ("context.Temporality.Past", 744, 173),
        ("context.Temporality.Present", 494, 132),
        ("context.Temporality.Future", 145, 29),
        ("context.Temporality.Unknown", 29, 1),
        ("context.Certainty.Certain", 1176, 281),
        ("context.Certainty.Hypothetical", 134, 33),
        ("context.Certainty.Conditional", 100, 15),
        ("context.Certainty.Unknown", 2, 6),
        ("context.Actor.Physician", 1278, 311),
        ("context.Actor.Patient", 106, 17),
        ("context.Actor.Unknown", 28, 7),
        ("context.Negation.Negated", 32, 6),
        ("context.Negation.NotNegated", 1380, 329),
    ];
    for (path, train, test) in expected {
        for (split, want) in [("train", train), ("test", test)] {
            let mut v = &h[split];
            for part in path.split('.') {
                v = &v[part];
            }
            ensure!(v.as_u64() == Some(*want), "{split} {path}: got {v}, want {want}");
        }
    }
    Ok(format!("{} label counts exact on both splits", expected.len()))
}

fn c3_metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut docs_gold = Vec::new();
    let mut docs_pred = Vec::new();
    let mut totals: BTreeMap<(bool, bool), ConfusionCounts> = BTreeMap::new();
    let mut mentions = 0;
    for d in 0..200 {
        let doc = format!("doc{d:03}");
        let (gold, pred, len) = fuzz_document(&mut rng, &doc);
        mentions += gold.len();
        let g: Vec<&MedicationMention> = gold.iter().collect();
        let p: Vec<&MedicationMention> = pred.iter().collect();
        for strict in [true, false] {
            let mode = if strict { MatchMode::Strict } else { MatchMode::Lenient };
            for labeled in [false, true] {
                let got = match_spans(&g, &p, mode, labeled).map_err(|e| e.to_string())?.counts;
                let want = oracle_counts(&g, &p, strict, labeled);
                ensure!(got == want, "{doc} strict={strict} labeled={labeled}: {got:?} != oracle {want:?}");
                let (dp, dr, df) = direct_prf(&got);
                ensure!((precision(&got) - dp).abs() <= 1e-12, "precision mismatch in {doc}");
                ensure!((recall(&got) - dr).abs() <= 1e-12, "recall mismatch in {doc}");
                ensure!((f_score(precision(&got), recall(&got)) - df).abs() <= 1e-12, "F mismatch in {doc}");
                if !labeled {
                    *totals.entry((strict, labeled)).or_default() += want;
                }
            }
            // task-2 style: only mentions carrying an event label
            let g2: Vec<&MedicationMention> = gold.iter().filter(|m| m.event.is_some()).collect();
            let p2: Vec<&MedicationMention> = pred.iter().filter(|m| m.event.is_some()).collect();
            *totals.entry((strict, true)).or_default() += oracle_counts(&g2, &p2, strict, true);
        }
        docs_gold.push((doc.clone(), len, gold));
        docs_pred.push((doc, len, pred));
    }
    let gold = corpus_of(docs_gold);
    let pred = corpus_of(docs_pred);
    let t1 = evaluate_task1(&gold, &pred).map_err(|e| e.to_string())?;
    let t2 = evaluate_task2(&gold, &pred).map_err(|e| e.to_string())?;
    for (strict, cell1, cell2) in [(true, &t1.strict, &t2.strict.micro), (false, &t1.lenient, &t2.lenient.micro)] {
        let w1 = totals[&(strict, false)];
        let w2 = totals[&(strict, true)];
        ensure!(cell1.counts == w1, "task1 strict={strict}: {:?} != {w1:?}", cell1.counts);
        ensure!(cell2.counts == w2, "task2 strict={strict}: {:?} != {w2:?}", cell2.counts);
        for (cell, w) in [(cell1, w1), (cell2, w2)] {
            let (p, r, f) = direct_prf(&w);
            let m = cell.metrics;
            ensure!(
                (m.precision - p).abs() <= 1e-12 && (m.recall - r).abs() <= 1e-12 && (m.f_score - f).abs() <= 1e-12,
                "corpus metrics differ from direct evaluation"
            );
        }
        ensure!(t1.strict.counts.tp <= t1.lenient.counts.tp, "strict TP exceeds lenient TP");
    }
    Ok(format!("200 documents / {mentions} gold mentions agree with the brute-force matcher"))
}

fn c4_separation() -> Check {
    let (_, test) = generate(&GenConfig::default()).map_err(|e| e.to_string())?;
    ensure!(test.mentions.iter().all(|m| m.span.len() >= 2), "generated mention shorter than 2 chars");
    let mut shifted = test.clone();
    for m in &mut shifted.mentions {
        m.span.start += 1;
    }
    let t1 = evaluate_task1(&test, &shifted).map_err(|e| e.to_string())?;
    let t2 = evaluate_task2(&test, &shifted).map_err(|e| e.to_string())?;
    ensure!(t1.strict.metrics.f_score == 0.0, "task1 strict F = {}", t1.strict.metrics.f_score);
    ensure!(t1.lenient.metrics.f_score == 1.0, "task1 lenient F = {}", t1.lenient.metrics.f_score);
    ensure!(t2.strict.micro.metrics.f_score == 0.0, "task2 strict F = {}", t2.strict.micro.metrics.f_score);
    ensure!(t2.lenient.micro.metrics.f_score == 1.0, "task2 lenient F = {}", t2.lenient.micro.metrics.f_score);
    Ok(format!("{} shifted mentions: strict F 0.0, lenient F 1.0", shifted.mentions.len()))
}

fn c5_pipeline_identity() -> Check {
    let (train, _) = generate(&GenConfig::default()).map_err(|e| e.to_string())?;
    let by_doc = train.mentions_by_doc();
    let mut details = Vec::new();
    for (scheme, vocab) in [("wordpiece", SubwordVocab::test_wordpiece(true)), ("bpe", SubwordVocab::test_bpe(true))] {
        for mode in [TaskMode::Task1, TaskMode::Task2] {
            for max_len in [512, 24] {
                let mut aligned = 0;
                let mut mismatches = 0;
                for note in &train.notes {
                    let ms = by_doc.get(note.doc_id()).cloned().unwrap_or_default();
                    let words = tokenize_words(note, Span::new(0, note.char_len())).map_err(|e| e.to_string())?;
                    let starts: BTreeSet<usize> = words.iter().map(|w| w.span.start).collect();
                    let ends: BTreeSet<usize> = words.iter().map(|w| w.span.end).collect();
                    let gold: BTreeSet<(Span, Option<EventLabel>)> = ms
                        .iter()
                        .filter(|m| starts.contains(&m.span.start) && ends.contains(&m.span.end))
                        .map(|m| (m.span, if mode == TaskMode::Task1 { None } else { m.event }))
                        .collect();
                    aligned += gold.len();
                    let seqs = preprocess_note(note, &ms, &vocab, mode, max_len).map_err(|e| e.to_string())?;
                    let decoded: BTreeSet<(Span, Option<EventLabel>)> = merge_chunk_predictions(&seqs, mode)
                        .into_iter()
                        .map(|d| (d.span, d.entity.event()))
                        .collect();
                    mismatches += gold.symmetric_difference(&decoded).count();
                }
                ensure!(aligned == train.mentions.len(), "{} mentions not word-aligned", train.mentions.len() - aligned);
                ensure!(mismatches == 0, "{scheme} {mode:?} max_seq_len={max_len}: {mismatches} mismatches");
                details.push(format!("{scheme}/{mode:?}/{max_len}"));
            }
        }
    }
    Ok(format!("{} mentions, 0 mismatches under {}", train.mentions.len(), details.join(", ")))
}

fn random_word(rng: &mut ChaCha8Rng, unicode: bool) -> String {
    const ASCII: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    const PUNCT: &[u8] = b"!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    const WIDE: &[char] = &['é', 'ü', 'ß', 'ø', 'Ω', 'ж', 'µ', '中', '文', 'ğ', '😀', '٣'];
    if rng.gen_range(0..10) == 0 {
        return (PUNCT[rng.gen_range(0..PUNCT.len())] as char).to_string();
    }
    let max = if rng.gen_range(0..50) == 0 { 100 } else { 16 };
    let len = rng.gen_range(1..=max);
    (0..len)
        .map(|_| {
            if unicode && rng.gen_range(0..4) == 0 {
                WIDE[rng.gen_range(0..WIDE.len())]
            } else {
                ASCII[rng.gen_range(0..ASCII.len())] as char
            }
        })
        .collect()
}

fn random_bio(rng: &mut ChaCha8Rng, n: usize) -> Vec<Tag> {
    let types: Vec<EntityType> = std::iter::once(EntityType::Drug)
        .chain(EventLabel::ALL.iter().map(|e| EntityType::Event(*e)))
        .collect();
    let mut tags: Vec<Tag> = Vec::with_capacity(n);
    for _ in 0..n {
        let prev = tags.last().and_then(|t| t.entity());
        tags.push(match (rng.gen_range(0..3), prev) {
            (0, Some(e)) => Tag::I(e),
            (1, _) => Tag::B(types[rng.gen_range(0..types.len())]),
            _ => Tag::O,
        });
    }
    tags
}

fn c6_tokenizer_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let schemes = [
        ("wordpiece", SubwordVocab::test_wordpiece(false), false),
        ("bpe", SubwordVocab::test_bpe(false), true),
    ];
    for (name, vocab, unicode) in &schemes {
        for i in 0..10_000 {
            let text = random_word(&mut rng, *unicode);
            let word = WordToken {
                span: Span::new(0, text.chars().count()),
                text: text.clone(),
            };
            let pieces = vocab.tokenize(&word, 0);
            ensure!(!pieces.is_empty(), "{name}: no pieces for {text:?}");
            let joined = vocab.join(&pieces);
            ensure!(joined.as_deref() == Some(text.as_str()), "{name} word {i}: {text:?} joined to {joined:?}");
            ensure!(
                pieces.iter().all(|p| p.span.start >= word.span.start && p.span.end <= word.span.end),
                "{name}: piece span outside word {text:?}"
            );
        }
    }

    // tags -> mentions -> tags, over one pseudo-subword per word
    for i in 0..10_000 {
        let n = rng.gen_range(0..40);
        let tags = random_bio(&mut rng, n);
        let words: Vec<WordLabel> = tags
            .iter()
            .enumerate()
            .map(|(w, t)| WordLabel {
                word_index: w,
                span: Span::new(2 * w, 2 * w + 1),
                tag: *t,
            })
            .collect();
        let decoded = decode_mentions(&words, TaskMode::Task2);
        let mentions: Vec<MedicationMention> = decoded
            .iter()
            .enumerate()
            .map(|(k, (span, entity))| mention("d", k + 1, *span, entity.event()))
            .collect();
        let refs: Vec<&MedicationMention> = mentions.iter().collect();
        let subwords: Vec<SubwordToken> = words
            .iter()
            .map(|w| SubwordToken {
                text: "x".into(),
                word_index: w.word_index,
                span: w.span,
            })
            .collect();
        // Drug-typed mentions carry no event, so re-encode each type under its own mode
        let has_drug = decoded.iter().any(|(_, e)| *e == EntityType::Drug);
        let has_event = decoded.iter().any(|(_, e)| *e != EntityType::Drug);
        let reencoded = if has_drug && has_event {
            let drug: Vec<&MedicationMention> = refs.iter().copied().filter(|m| m.event.is_none()).collect();
            let ev: Vec<&MedicationMention> = refs.iter().copied().filter(|m| m.event.is_some()).collect();
            let a = project_bio(&subwords, &drug, TaskMode::Task1).map_err(|e| e.to_string())?;
            let b = project_bio(&subwords, &ev, TaskMode::Task2).map_err(|e| e.to_string())?;
            a.into_iter().zip(b).map(|(x, y)| if x == Tag::O { y } else { x }).collect()
        } else if has_drug {
            project_bio(&subwords, &refs, TaskMode::Task1).map_err(|e| e.to_string())?
        } else {
            project_bio(&subwords, &refs, TaskMode::Task2).map_err(|e| e.to_string())?
        };
        ensure!(reencoded == tags, "sequence {i}: {tags:?} re-encoded as {reencoded:?}");
    }
    Ok("10,000 words per scheme rejoin exactly; 10,000 BIO sequences survive decode/encode".into())
}

fn c7_brat_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    const WORDS: &[&str] = &["aspirin", "stop", "the", "dose", "ünïcode", "中文", "x", "heparin", "\n", "mg"];
    let mut total = 0;
    for set in 0..1000 {
        let n_words = rng.gen_range(1..60);
        let mut text = String::new();
        let mut word_spans = Vec::new();
        for _ in 0..n_words {
            let w = WORDS[rng.gen_range(0..WORDS.len())];
            let start = text.chars().count();
            text.push_str(w);
            if w != "\n" {
                word_spans.push(Span::new(start, start + w.chars().count()));
            }
            text.push(' ');
        }
        let note = ClinicalNote::new(format!("d{set}"), text).unwrap();
        let mut mentions: Vec<MedicationMention> = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..rng.gen_range(0..15) {
            if word_spans.is_empty() {
                break;
            }
            let a = rng.gen_range(0..word_spans.len());
            let b = (a + rng.gen_range(0..3)).min(word_spans.len() - 1);
            let span = Span::new(word_spans[a].start, word_spans[b].end);
            let event = random_event(&mut rng);
            if !seen.insert((span, event)) {
                continue;
            }
            let mut m = mention(note.doc_id(), 0, span, event);
            m.surface = note.slice(span).unwrap().to_string();
            if event == Some(EventLabel::Disposition) {
                m.context = Some(random_context(&mut rng));
            }
            mentions.push(m);
        }
        // canonical order and numbering
        mentions.sort_by(|a, b| {
            (a.span, a.event.map(|e| e.index()), &a.surface).cmp(&(b.span, b.event.map(|e| e.index()), &b.surface))
        });
        for (i, m) in mentions.iter_mut().enumerate() {
            m.mention_id = format!("T{}", i + 1);
        }
        let ann = emit_ann(&mentions).map_err(|e| e.to_string())?;
        let back = parse_ann(&ann, &note).map_err(|e| format!("set {set}: {e}\n{ann}"))?;
        ensure!(back == mentions, "set {set}: round trip differs\n{ann}");
        let mut shuffled = mentions.clone();
        shuffled.shuffle(&mut rng);
        ensure!(emit_ann(&shuffled).map_err(|e| e.to_string())? == ann, "set {set}: emission depends on input order");
        total += mentions.len();
    }
    Ok(format!("1,000 mention sets ({total} mentions) round-trip; emission byte-deterministic"))
}

fn c8_svm() -> Check {
    // two classes split by the sign of x, one point per quadrant
    let points = [((1.0, 1.0), "Negated"), ((1.0, -1.0), "Negated"), ((-1.0, 1.0), "NotNegated"), ((-1.0, -1.0), "NotNegated")];
    let records: Vec<EmbeddingRecord> = points
        .iter()
        .enumerate()
        .map(|(i, ((x, y), _))| EmbeddingRecord {
            mention_id: format!("p{i}"),
            vector: vec![*x, *y],
        })
        .collect();
    let data: Vec<(&EmbeddingRecord, &str)> = records.iter().zip(points.iter()).map(|(r, (_, l))| (r, *l)).collect();
    let params = SvmParams {
        epochs: 200,
        seed: 42,
        ..SvmParams::default()
    };
    let a = train_svm(&data, ContextDimension::Negation, params).map_err(|e| e.to_string())?;
    for (r, label) in &data {
        ensure!(a.predict(r).unwrap() == *label, "toy point {} misclassified", r.mention_id);
    }
    let b = train_svm(&data, ContextDimension::Negation, params).map_err(|e| e.to_string())?;
    let bits = |m: &medctx_core::context::LinearSvmModel| -> Vec<u64> {
        m.weights.iter().flatten().chain(&m.biases).map(|v| v.to_bits()).collect()
    };
    ensure!(bits(&a) == bits(&b), "weights differ between identical runs");

    let (train, test) = generate(&GenConfig::default()).map_err(|e| e.to_string())?;
    let embed = |c: &Corpus| -> BTreeMap<String, EmbeddingRecord> {
        extract_task3_instances(c)
            .unwrap()
            .iter()
            .map(|i| (i.key.clone(), hash_embed(i, DEFAULT_EMBED_DIM, 42).0))
            .collect()
    };
    let (train_x, test_x) = (embed(&train), embed(&test));
    let dispositions: Vec<&MedicationMention> = train.mentions.iter().filter(|m| m.is_disposition()).collect();
    let mut summary = Vec::new();
    for dim in ContextDimension::ALL {
        let data: Vec<(&EmbeddingRecord, &str)> = dispositions
            .iter()
            .map(|m| (&train_x[&m.key()], m.context.unwrap().get(*dim)))
            .collect();
        let model = train_svm(&data, *dim, SvmParams::default()).map_err(|e| e.to_string())?;
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, l) in &data {
            *freq.entry(*l).or_default() += 1;
        }
        let majority = freq.iter().max_by_key(|(_, n)| **n).map(|(c, _)| c.to_string()).unwrap();
        let relabel = |f: &dyn Fn(&str) -> String| {
            let mut out = test.clone();
            for m in out.mentions.iter_mut().filter(|m| m.is_disposition()) {
                let mut ctx = m.context.unwrap();
                ctx.set(*dim, &f(&m.key())).unwrap();
                m.context = Some(ctx);
            }
            out
        };
        let svm_pred = relabel(&|k| model.predict(&test_x[k]).unwrap().to_string());
        let base_pred = relabel(&|_| majority.clone());
        let f = |p: &Corpus| evaluate_task3(&test, p).unwrap().lenient.per_dimension[dim].metrics.f_score;
        let (svm_f, base_f) = (f(&svm_pred), f(&base_pred));
        let effective: BTreeSet<&str> = test.mentions.iter().filter_map(|m| m.context.map(|c| c.get(*dim))).collect();
        if effective.len() >= 2 {
            ensure!(svm_f > base_f, "{dim}: SVM F {svm_f:.4} does not beat majority F {base_f:.4}");
        }
        summary.push(format!("{dim} {svm_f:.3}>{base_f:.3}"));
    }
    Ok(format!("toy set separated, runs bit-identical; {}", summary.join(", ")))
}

fn c9_combined_dominance() -> Check {
    let (_, gold) = generate(&GenConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut equality_cases = 0;
    for set in 0..100 {
        let label_noise = set % 2 == 0;
        let mut pred = gold.clone();
        pred.mentions.retain(|_| rng.gen_range(0..10) != 0);
        for m in pred.mentions.iter_mut().filter(|m| m.is_disposition()) {
            if label_noise && rng.gen_range(0..3) == 0 {
                let dim = ContextDimension::ALL[rng.gen_range(0..5)];
                let classes = dim.classes();
                let mut ctx = m.context.unwrap();
                ctx.set(dim, classes[rng.gen_range(0..classes.len())]).unwrap();
                m.context = Some(ctx);
            }
            if label_noise && rng.gen_range(0..10) == 0 {
                m.span.start += 1;
            }
        }
        let report = evaluate_task3(&gold, &pred).map_err(|e| e.to_string())?;
        for (mode, r) in [("strict", &report.strict), ("lenient", &report.lenient)] {
            let dims: Vec<f64> = r.per_dimension.values().map(|c| c.metrics.f_score).collect();
            let min = dims.iter().cloned().fold(f64::INFINITY, f64::min);
            let combined = r.combined.metrics.f_score;
            ensure!(combined <= min, "set {set} {mode}: combined {combined} > min dimension {min}");
            for c in r.per_dimension.values() {
                ensure!(r.combined.counts.tp <= c.counts.tp, "set {set} {mode}: combined TP exceeds a dimension TP");
            }
            if !label_noise {
                ensure!(dims.iter().all(|f| *f == combined), "set {set} {mode}: all labels correct but combined {combined} != {dims:?}");
                equality_cases += 1;
            }
        }
    }
    Ok(format!("100 prediction sets; equality held in all {equality_cases} fully-correct cases"))
}

fn c10_demo() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new("bash")
        .arg(repo_root().join("scripts/demo.sh"))
        .arg(dir.path().join("work"))
        .env("MEDCTX", bin())
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure!(out.status.success(), "demo exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    for needle in ["Task 1: medication detection", "Task 2: event classification", "Task 3: context classification", "Combined", "Overall (micro)"] {
        ensure!(stdout.contains(needle), "report lacks {needle:?}");
    }
    ensure!(dir.path().join("work/report/report.text").is_file(), "report file missing");
    Ok("demo script exit 0 with task 1-3 tables".into())
}

fn main() -> ExitCode {
    let criteria: Vec<(u8, &str, Option<Duration>, fn() -> Check)> = vec![
        (1, "gold fixed point", Some(Duration::from_secs(30)), c1_gold_fixed_point),
        (2, "distribution exactness", None, c2_distribution),
        (3, "metric oracle equivalence", None, c3_metric_oracle),
        (4, "strict/lenient separation", None, c4_separation),
        (5, "pipeline identity", None, c5_pipeline_identity),
        (6, "tokenizer and BIO round trips", None, c6_tokenizer_round_trips),
        (7, "standoff round trip", None, c7_brat_round_trip),
        (8, "SVM correctness", Some(Duration::from_secs(120)), c8_svm),
        (9, "combined-metric dominance", None, c9_combined_dominance),
        (10, "end-to-end demo", Some(Duration::from_secs(300)), c10_demo),
    ];
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.1?}, limit {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({elapsed:.1?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({elapsed:.1?}): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
