//! Standoff annotation I/O.
//!
//! A document is a pair of files: `<id>.txt` holds the raw note and
//! `<id>.ann` holds tab-separated records referencing it by character offset:
//!
//! ```text
//! T1	Disposition 5 12	aspirin
//! A1	Action T1 Start
//! ```
//!
//! TextBound labels are `Drug` (task-1 only) or one of the event labels.
//! Attribute names are the five context dimensions. Offsets count Unicode
//! scalar values after newline normalization to LF. Discontinuous spans and
//! Event / Relation / Normalization records are not supported.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::{
    ClinicalNote, ContextDimension, ContextLabels, Corpus, EventLabel, MedicationMention, Span, Split,
};
use crate::error::{Error, Result};

/// TextBound label used for mentions that carry no event label.
pub const DRUG_LABEL: &str = "Drug";

/// One parsed line of an `.ann` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StandoffRecord {
    TextBound {
        record_id: String,
        label: String,
        span: Span,
        surface: String,
    },
    Attribute {
        record_id: String,
        name: String,
        target: String,
        value: String,
    },
}

impl StandoffRecord {
    pub fn record_id(&self) -> &str {
        match self {
            StandoffRecord::TextBound { record_id, .. } | StandoffRecord::Attribute { record_id, .. } => {
                record_id
            }
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_offset(raw: &str, line: usize) -> Result<usize> {
    if raw.contains(';') {
        return Err(parse_error(line, format!("discontinuous span {raw:?} is not supported")));
    }
    raw.parse()
        .map_err(|_| parse_error(line, format!("non-numeric offset {raw:?}")))
}

/// Parses a single non-empty `.ann` line (1-based `line` for messages).
pub fn parse_record(text: &str, line: usize) -> Result<StandoffRecord> {
    let fields: Vec<&str> = text.split('\t').collect();
    let id = fields[0];
    match id.chars().next() {
        Some('T') => {
            if fields.len() != 3 {
                return Err(parse_error(
                    line,
                    format!("TextBound needs 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            if fields[1].contains(';') {
                return Err(parse_error(
                    line,
                    format!("discontinuous span in {:?} is not supported", fields[1]),
                ));
            }
            let parts: Vec<&str> = fields[1].split(' ').collect();
            if parts.len() != 3 {
                return Err(parse_error(
                    line,
                    format!("expected \"Label start end\", found {:?}", fields[1]),
                ));
            }
            let start = parse_offset(parts[1], line)?;
            let end = parse_offset(parts[2], line)?;
            Ok(StandoffRecord::TextBound {
                record_id: id.to_string(),
                label: parts[0].to_string(),
                span: Span::new(start, end),
                surface: fields[2].to_string(),
            })
        }
        Some('A') => {
            if fields.len() != 2 {
                return Err(parse_error(
                    line,
                    format!("Attribute needs 2 tab-separated fields, found {}", fields.len()),
                ));
            }
            let parts: Vec<&str> = fields[1].split(' ').collect();
            if parts.len() != 3 {
                return Err(parse_error(
                    line,
                    format!("expected \"Name Target Value\", found {:?}", fields[1]),
                ));
            }
            Ok(StandoffRecord::Attribute {
                record_id: id.to_string(),
                name: parts[0].to_string(),
                target: parts[1].to_string(),
                value: parts[2].to_string(),
            })
        }
        _ => Err(parse_error(line, format!("unsupported record id {id:?}"))),
    }
}

/// Surface form as written to an `.ann` line (newlines flattened to spaces).
fn flat_surface(s: &str) -> String {
    s.replace('\n', " ")
}

/// Parses `.ann` text against its note into medication mentions.
///
/// Disposition mentions always receive context labels: dimensions without an
/// attribute default to `Unknown` (`NotNegated` for negation). Other mentions
/// never carry context. TextBounds with labels outside `Drug` and the event
/// labels are skipped.
pub fn parse_ann(ann_text: &str, note: &ClinicalNote) -> Result<Vec<MedicationMention>> {
    let mut mentions: Vec<MedicationMention> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut textbound_ids: HashSet<String> = HashSet::new();
    let mut record_ids: HashSet<String> = HashSet::new();
    let mut attributes: Vec<(usize, String, String, String)> = Vec::new();

    for (idx, raw) in ann_text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_record(raw, line)?;
        if !record_ids.insert(record.record_id().to_string()) {
            return Err(parse_error(line, format!("duplicate record id {}", record.record_id())));
        }
        match record {
            StandoffRecord::TextBound {
                record_id,
                label,
                span,
                surface,
            } => {
                textbound_ids.insert(record_id.clone());
                let event = if label == DRUG_LABEL {
                    None
                } else if let Ok(e) = label.parse::<EventLabel>() {
                    Some(e)
                } else {
                    continue;
                };
                if span.start >= span.end || span.end > note.char_len() {
                    return Err(Error::Integrity(format!(
                        "line {line}: span {span} invalid for note {} of length {}",
                        note.doc_id(),
                        note.char_len()
                    )));
                }
                let actual = note.slice(span)?;
                if flat_surface(actual) != surface {
                    return Err(Error::Integrity(format!(
                        "line {line}: surface {surface:?} does not match note text {actual:?} at span {span}"
                    )));
                }
                by_id.insert(record_id.clone(), mentions.len());
                mentions.push(MedicationMention {
                    mention_id: record_id,
                    doc_id: note.doc_id().to_string(),
                    span,
                    surface: actual.to_string(),
                    context: if event == Some(EventLabel::Disposition) {
                        Some(ContextLabels::default())
                    } else {
                        None
                    },
                    event,
                });
            }
            StandoffRecord::Attribute {
                name, target, value, ..
            } => attributes.push((line, name, target, value)),
        }
    }

    let mut assigned: HashSet<(String, ContextDimension)> = HashSet::new();
    for (line, name, target, value) in attributes {
        if !textbound_ids.contains(&target) {
            return Err(Error::Reference {
                line,
                message: format!("attribute targets unknown TextBound {target}"),
            });
        }
        let dim: ContextDimension = name
            .parse()
            .map_err(|_| parse_error(line, format!("unknown attribute name {name:?}")))?;
        let Some(&idx) = by_id.get(&target) else {
            // target has a label we do not model
            continue;
        };
        let mention = &mut mentions[idx];
        let Some(ctx) = mention.context.as_mut() else {
            return Err(Error::Integrity(format!(
                "line {line}: context attribute {name} on {target}, whose event is {}",
                mention.event.map_or(DRUG_LABEL, |e| e.as_str())
            )));
        };
        if !assigned.insert((target.clone(), dim)) {
            return Err(parse_error(line, format!("duplicate {name} attribute for {target}")));
        }
        ctx.set(dim, &value).map_err(|e| parse_error(line, e.to_string()))?;
    }
    Ok(mentions)
}

/// Deterministic `.ann` emission.
///
/// TextBounds are sorted by `(start, end)` and renumbered `T1..Tn`; then the
/// five context attributes of every mention with context follow in target
/// order, numbered `A1..Am`. A Disposition mention without context emits no
/// attributes (re-parsing assigns the defaults).
pub fn emit_ann(mentions: &[MedicationMention]) -> Result<String> {
    if let Some(first) = mentions.first() {
        if let Some(other) = mentions.iter().find(|m| m.doc_id != first.doc_id) {
            return Err(Error::Usage(format!(
                "emit_ann given mentions from documents {} and {}",
                first.doc_id, other.doc_id
            )));
        }
    }
    let mut sorted: Vec<&MedicationMention> = mentions.iter().collect();
    sorted.sort_by(|a, b| {
        (a.span, a.event, &a.surface).cmp(&(b.span, b.event, &b.surface))
    });

    let mut out = String::new();
    let mut attrs = String::new();
    let mut attr_id = 0;
    for (i, m) in sorted.iter().enumerate() {
        let tid = format!("T{}", i + 1);
        let label = m.event.map_or(DRUG_LABEL, |e| e.as_str());
        out.push_str(&format!(
            "{tid}\t{label} {} {}\t{}\n",
            m.span.start,
            m.span.end,
            flat_surface(&m.surface)
        ));
        if let Some(ctx) = &m.context {
            for dim in ContextDimension::ALL {
                attr_id += 1;
                attrs.push_str(&format!("A{attr_id}\t{} {tid} {}\n", dim.as_str(), ctx.get(*dim)));
            }
        }
    }
    out.push_str(&attrs);
    Ok(out)
}

/// Result of loading a corpus directory.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lists `<stem>` → (txt path, ann path) pairs in a directory, sorted by stem.
fn collect_pairs(dir: &Path) -> Result<BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut pairs: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        match ext {
            "txt" => pairs.entry(stem.to_string()).or_default().0 = Some(path.clone()),
            "ann" => pairs.entry(stem.to_string()).or_default().1 = Some(path.clone()),
            _ => {}
        }
    }
    Ok(pairs)
}

/// Loads every `<id>.txt` / `<id>.ann` pair in `dir`.
///
/// A `.txt` without `.ann` loads with zero mentions and an `.ann` without
/// `.txt` is skipped; both produce warnings.
pub fn load_corpus(dir: impl AsRef<Path>, split: Split) -> Result<LoadedCorpus> {
    let dir = dir.as_ref();
    let mut corpus = Corpus::new(split);
    let mut warnings = Vec::new();
    for (stem, (txt, ann)) in collect_pairs(dir)? {
        let Some(txt) = txt else {
            warnings.push(format!("{stem}.ann has no matching .txt; skipped"));
            continue;
        };
        let note = ClinicalNote::new(stem.clone(), read_text(&txt)?).map_err(|e| e.in_file(&txt))?;
        match ann {
            Some(ann) => {
                let text = read_text(&ann)?;
                let mentions = parse_ann(&text, &note).map_err(|e| e.in_file(&ann))?;
                corpus.mentions.extend(mentions);
            }
            None => warnings.push(format!("{stem}.txt has no matching .ann; loaded with 0 mentions")),
        }
        corpus.notes.push(note);
    }
    Ok(LoadedCorpus { corpus, warnings })
}

/// Loads `.ann` files from `dir` against already-loaded notes.
///
/// Used for prediction directories that may not carry copies of the notes. A
/// note without an `.ann` file contributes no mentions.
pub fn load_annotations(dir: impl AsRef<Path>, notes: &[ClinicalNote], split: Split) -> Result<LoadedCorpus> {
    let dir = dir.as_ref();
    let mut corpus = Corpus::new(split);
    let mut warnings = Vec::new();
    let known: HashSet<&str> = notes.iter().map(|n| n.doc_id()).collect();
    for (stem, (_, ann)) in collect_pairs(dir)? {
        if ann.is_some() && !known.contains(stem.as_str()) {
            warnings.push(format!("{stem}.ann does not correspond to any note; skipped"));
        }
    }
    for note in notes {
        let path = dir.join(format!("{}.ann", note.doc_id()));
        if path.is_file() {
            let text = read_text(&path)?;
            corpus
                .mentions
                .extend(parse_ann(&text, note).map_err(|e| e.in_file(&path))?);
        } else {
            warnings.push(format!("no {}.ann in {}; treated as empty", note.doc_id(), dir.display()));
        }
        corpus.notes.push(note.clone());
    }
    Ok(LoadedCorpus { corpus, warnings })
}

/// Writes every note and its mentions as `<id>.txt` / `<id>.ann` into `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let by_doc = corpus.mentions_by_doc();
    for note in &corpus.notes {
        let txt = dir.join(format!("{}.txt", note.doc_id()));
        fs::write(&txt, note.text()).map_err(|e| Error::io(&txt, e))?;
        let mentions: Vec<MedicationMention> = by_doc
            .get(note.doc_id())
            .map(|ms| ms.iter().map(|m| (*m).clone()).collect())
            .unwrap_or_default();
        let ann = dir.join(format!("{}.ann", note.doc_id()));
        fs::write(&ann, emit_ann(&mentions)?).map_err(|e| Error::io(&ann, e))?;
    }
    Ok(())
}
