//! Turns subword tag sequences back into character-offset mentions.
//!
//! Word labels come from each word's first subword. Runs of `B-X I-X*`
//! decode to one mention; an `I-X` that does not continue an open `X`
//! mention is treated as `B-X`. Mentions split across chunk boundaries by
//! preprocessing are re-joined.

use std::collections::{BTreeMap, HashSet};

use crate::corpus::{ClinicalNote, ContextDimension, ContextLabels, MedicationMention, Span};
use crate::error::{Error, Result};
use crate::preprocess::{BioSequence, EntityType, Tag, TaskMode};

/// Predicted sequences share the gold sequence layout.
pub type PredictedSequence = BioSequence;

/// Per-dimension label predictions keyed by corpus-wide mention key.
pub type DimensionPredictions = BTreeMap<ContextDimension, BTreeMap<String, String>>;

/// A word reconstructed from its subwords.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordLabel {
    pub word_index: usize,
    pub span: Span,
    pub tag: Tag,
}

/// A decoded mention before it is bound to a note.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedMention {
    pub doc_id: String,
    pub span: Span,
    pub entity: EntityType,
}

/// Collapses subwords to words; each word takes its first subword's label.
pub fn aggregate_word_labels(seq: &PredictedSequence) -> Vec<WordLabel> {
    let mut out: Vec<WordLabel> = Vec::new();
    for (sw, tag) in seq.subwords.iter().zip(&seq.labels) {
        match out.last_mut() {
            Some(w) if w.word_index == sw.word_index => w.span.end = w.span.end.max(sw.span.end),
            _ => out.push(WordLabel {
                word_index: sw.word_index,
                span: sw.span,
                tag: *tag,
            }),
        }
    }
    out
}

/// Decodes word labels into `(span, type)` mentions. Total over any input.
pub fn decode_mentions(words: &[WordLabel], mode: TaskMode) -> Vec<(Span, EntityType)> {
    let collapse = |t: EntityType| match mode {
        TaskMode::Task1 => EntityType::Drug,
        TaskMode::Task2 => t,
    };
    let mut out = Vec::new();
    let mut open: Option<(Span, EntityType)> = None;
    for w in words {
        match w.tag {
            Tag::O => out.extend(open.take()),
            Tag::B(t) => {
                out.extend(open.take());
                open = Some((w.span, collapse(t)));
            }
            Tag::I(t) => {
                let t = collapse(t);
                match open.as_mut() {
                    Some((span, ty)) if *ty == t => span.end = w.span.end,
                    _ => {
                        out.extend(open.take());
                        open = Some((w.span, t));
                    }
                }
            }
        }
    }
    out.extend(open);
    out
}

/// Decodes every chunk and re-joins mentions cut by chunk boundaries.
///
/// Two mentions merge when they carry the same type, come from consecutive
/// chunks of one sentence, and the first ends on the last word of its chunk
/// while the second starts on the first word of the next. Output is sorted by
/// `(doc_id, start, end)`.
pub fn merge_chunk_predictions(chunks: &[PredictedSequence], mode: TaskMode) -> Vec<DecodedMention> {
    let mut by_sentence: BTreeMap<(&str, usize), Vec<&PredictedSequence>> = BTreeMap::new();
    for c in chunks {
        by_sentence.entry((c.doc_id.as_str(), c.sentence_index)).or_default().push(c);
    }
    let mut out = Vec::new();
    for ((doc_id, _), mut group) in by_sentence {
        group.sort_by_key(|c| c.chunk_index);
        let mut merged: Vec<(Span, EntityType)> = Vec::new();
        // (chunk_index, last word end) of the previous chunk, if its final word closed a mention
        let mut carry: Option<(usize, usize)> = None;
        for c in group {
            let words = aggregate_word_labels(c);
            let mut decoded = decode_mentions(&words, mode);
            if let (Some((prev_chunk, prev_end)), Some(first_word)) = (carry, words.first()) {
                let joins = c.chunk_index == prev_chunk + 1
                    && decoded.first().is_some_and(|(s, _)| s.start == first_word.span.start)
                    && merged.last().is_some_and(|(s, t)| s.end == prev_end && Some(*t) == decoded.first().map(|d| d.1));
                if joins {
                    let (span, _) = decoded.remove(0);
                    merged.last_mut().expect("checked above").0.end = span.end;
                }
            }
            carry = words.last().map(|w| (c.chunk_index, w.span.end));
            merged.extend(decoded);
        }
        out.extend(merged.into_iter().map(|(span, entity)| DecodedMention {
            doc_id: doc_id.to_string(),
            span,
            entity,
        }));
    }
    out.sort_by(|a, b| (&a.doc_id, a.span).cmp(&(&b.doc_id, b.span)));
    out
}

/// Binds decoded mentions of one note to its text, numbering them `T1..Tn`.
pub fn bind_mentions(note: &ClinicalNote, decoded: &[DecodedMention]) -> Result<Vec<MedicationMention>> {
    let mut ds: Vec<&DecodedMention> = decoded.iter().filter(|d| d.doc_id == note.doc_id()).collect();
    ds.sort_by_key(|d| d.span);
    ds.iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(MedicationMention {
                mention_id: format!("T{}", i + 1),
                doc_id: note.doc_id().to_string(),
                span: d.span,
                surface: note.slice(d.span)?.to_string(),
                event: d.entity.event(),
                context: None,
            })
        })
        .collect()
}

/// Populates context labels of every Disposition mention.
///
/// Returns warnings for predictions addressed to non-Disposition mentions;
/// those mentions are left untouched.
pub fn attach_context(mentions: &mut [MedicationMention], predictions: &DimensionPredictions) -> Result<Vec<String>> {
    let mut missing = Vec::new();
    let mut warnings = Vec::new();
    let mut stray: HashSet<String> = HashSet::new();
    for m in mentions.iter() {
        let key = m.key();
        if m.is_disposition() {
            for dim in ContextDimension::ALL {
                if !predictions.get(dim).is_some_and(|p| p.contains_key(&key)) {
                    missing.push(format!("{key} ({dim})"));
                }
            }
        } else if predictions.values().any(|p| p.contains_key(&key)) && stray.insert(key.clone()) {
            warnings.push(format!("ignoring context predictions for non-Disposition mention {key}"));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Completeness {
            what: "context predictions",
            ids: missing,
        });
    }
    for m in mentions.iter_mut().filter(|m| m.is_disposition()) {
        let key = m.key();
        let mut ctx = ContextLabels::default();
        for dim in ContextDimension::ALL {
            ctx.set(*dim, &predictions[dim][&key])?;
        }
        m.context = Some(ctx);
    }
    Ok(warnings)
}
