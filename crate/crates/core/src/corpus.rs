//! Core domain types: notes, spans, mentions, label taxonomies and corpora.
//!
//! All offsets are counted in Unicode scalar values (`char`s), not bytes, and
//! every span is a half-open interval `[start, end)` over the owning note.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when the two intervals share at least one character.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start.max(other.start) < self.end.min(other.end)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

/// A clinical note: document id plus raw text.
///
/// The text is stored with LF line endings. A char-to-byte offset table is
/// built once so that slicing by character offsets stays O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClinicalNote {
    doc_id: String,
    text: String,
    byte_offsets: Vec<usize>,
}

impl ClinicalNote {
    /// Builds a note, normalizing CRLF and lone CR line endings to LF.
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let doc_id = doc_id.into();
        let mut text = text.into();
        if text.contains('\r') {
            text = text.replace("\r\n", "\n").replace('\r', "\n");
        }
        if doc_id.is_empty() {
            return Err(Error::Invariant("note doc_id must be nonempty".into()));
        }
        if text.is_empty() {
            return Err(Error::Invariant(format!("note {doc_id} has empty text")));
        }
        let mut byte_offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_offsets.push(text.len());
        Ok(ClinicalNote {
            doc_id,
            text,
            byte_offsets,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.byte_offsets.len() - 1
    }

    /// Returns the exact character subsequence covered by `span`.
    pub fn slice(&self, span: Span) -> Result<&str> {
        if span.start > span.end || span.end > self.char_len() {
            return Err(Error::Range {
                start: span.start,
                end: span.end,
                len: self.char_len(),
            });
        }
        Ok(&self.text[self.byte_offsets[span.start]..self.byte_offsets[span.end]])
    }

    /// Character at a char offset.
    pub fn char_at(&self, idx: usize) -> Option<char> {
        let b = *self.byte_offsets.get(idx)?;
        self.text[b..].chars().next()
    }

    /// Byte offset of a char offset (`idx == char_len()` is allowed).
    pub fn byte_offset(&self, idx: usize) -> usize {
        self.byte_offsets[idx]
    }
}

/// Free-function form of [`ClinicalNote::slice`].
pub fn slice(note: &ClinicalNote, span: Span) -> Result<&str> {
    note.slice(span)
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Every value, in taxonomy order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in taxonomy order.
            pub fn index(&self) -> usize {
                *self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::UnknownLabel {
                        kind: stringify!($name),
                        value: other.to_string(),
                    }),
                }
            }
        }
    };
}

label_enum!(
    /// Task-2 medication event label.
    EventLabel {
        Disposition => "Disposition",
        NoDisposition => "NoDisposition",
        Undetermined => "Undetermined",
    }
);

label_enum!(
    Action {
        Start => "Start",
        Stop => "Stop",
        Increase => "Increase",
        Decrease => "Decrease",
        UniqueDose => "UniqueDose",
        OtherChange => "OtherChange",
        Unknown => "Unknown",
    }
);

label_enum!(
    Temporality {
        Past => "Past",
        Present => "Present",
        Future => "Future",
        Unknown => "Unknown",
    }
);

label_enum!(
    Certainty {
        Certain => "Certain",
        Hypothetical => "Hypothetical",
        Conditional => "Conditional",
        Unknown => "Unknown",
    }
);

label_enum!(
    Actor {
        Physician => "Physician",
        Patient => "Patient",
        Unknown => "Unknown",
    }
);

label_enum!(
    Negation {
        Negated => "Negated",
        NotNegated => "NotNegated",
    }
);

label_enum!(
    /// The five task-3 context axes.
    ContextDimension {
        Action => "Action",
        Temporality => "Temporality",
        Certainty => "Certainty",
        Actor => "Actor",
        Negation => "Negation",
    }
);

impl ContextDimension {
    /// Class names of this dimension in taxonomy order.
    pub fn classes(&self) -> Vec<&'static str> {
        fn names<T: fmt::Display + Copy>(all: &[T], f: fn(&T) -> &'static str) -> Vec<&'static str> {
            all.iter().map(f).collect()
        }
        match self {
            ContextDimension::Action => names(Action::ALL, Action::as_str),
            ContextDimension::Temporality => names(Temporality::ALL, Temporality::as_str),
            ContextDimension::Certainty => names(Certainty::ALL, Certainty::as_str),
            ContextDimension::Actor => names(Actor::ALL, Actor::as_str),
            ContextDimension::Negation => names(Negation::ALL, Negation::as_str),
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes().len()
    }

    /// Index of `name` within this dimension's taxonomy.
    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes()
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Taxonomy {
                dimension: self.as_str(),
                value: name.to_string(),
            })
    }
}

/// Task-3 labels. Every dimension is always populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextLabels {
    pub action: Action,
    pub temporality: Temporality,
    pub certainty: Certainty,
    pub actor: Actor,
    pub negation: Negation,
}

impl Default for ContextLabels {
    fn default() -> Self {
        ContextLabels {
            action: Action::Unknown,
            temporality: Temporality::Unknown,
            certainty: Certainty::Unknown,
            actor: Actor::Unknown,
            negation: Negation::NotNegated,
        }
    }
}

impl ContextLabels {
    /// Label name for one dimension.
    pub fn get(&self, dim: ContextDimension) -> &'static str {
        match dim {
            ContextDimension::Action => self.action.as_str(),
            ContextDimension::Temporality => self.temporality.as_str(),
            ContextDimension::Certainty => self.certainty.as_str(),
            ContextDimension::Actor => self.actor.as_str(),
            ContextDimension::Negation => self.negation.as_str(),
        }
    }

    pub fn index(&self, dim: ContextDimension) -> usize {
        match dim {
            ContextDimension::Action => self.action.index(),
            ContextDimension::Temporality => self.temporality.index(),
            ContextDimension::Certainty => self.certainty.index(),
            ContextDimension::Actor => self.actor.index(),
            ContextDimension::Negation => self.negation.index(),
        }
    }

    /// Sets one dimension from its label name.
    pub fn set(&mut self, dim: ContextDimension, value: &str) -> Result<()> {
        let taxonomy = |_| Error::Taxonomy {
            dimension: dim.as_str(),
            value: value.to_string(),
        };
        match dim {
            ContextDimension::Action => self.action = value.parse().map_err(taxonomy)?,
            ContextDimension::Temporality => self.temporality = value.parse().map_err(taxonomy)?,
            ContextDimension::Certainty => self.certainty = value.parse().map_err(taxonomy)?,
            ContextDimension::Actor => self.actor = value.parse().map_err(taxonomy)?,
            ContextDimension::Negation => self.negation = value.parse().map_err(taxonomy)?,
        }
        Ok(())
    }

    /// True when the dimension holds its Unknown / NotNegated default.
    pub fn is_default(&self, dim: ContextDimension) -> bool {
        self.get(dim) == ContextLabels::default().get(dim)
    }
}

/// A medication mention within one note.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MedicationMention {
    /// Record id within the document (e.g. `T3`).
    pub mention_id: String,
    pub doc_id: String,
    pub span: Span,
    pub surface: String,
    /// `None` for task-1-only (plain Drug) mentions.
    pub event: Option<EventLabel>,
    pub context: Option<ContextLabels>,
}

impl MedicationMention {
    /// Corpus-wide key `doc_id:mention_id`, used by embedding and prediction tables.
    pub fn key(&self) -> String {
        mention_key(&self.doc_id, &self.mention_id)
    }

    pub fn is_disposition(&self) -> bool {
        self.event == Some(EventLabel::Disposition)
    }
}

pub fn mention_key(doc_id: &str, mention_id: &str) -> String {
    format!("{doc_id}:{mention_id}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::UnknownLabel {
                kind: "Split",
                value: other.to_string(),
            }),
        }
    }
}

/// Notes and their mentions for one split. Notes are kept sorted by doc id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub notes: Vec<ClinicalNote>,
    pub mentions: Vec<MedicationMention>,
    pub split: Split,
}

impl Corpus {
    pub fn new(split: Split) -> Self {
        Corpus {
            notes: Vec::new(),
            mentions: Vec::new(),
            split,
        }
    }

    pub fn note(&self, doc_id: &str) -> Option<&ClinicalNote> {
        self.notes.iter().find(|n| n.doc_id() == doc_id)
    }

    /// Mentions grouped per document, each group sorted by span.
    pub fn mentions_by_doc(&self) -> HashMap<&str, Vec<&MedicationMention>> {
        let mut out: HashMap<&str, Vec<&MedicationMention>> = HashMap::new();
        for m in &self.mentions {
            out.entry(m.doc_id.as_str()).or_default().push(m);
        }
        for ms in out.values_mut() {
            ms.sort_by_key(|m| (m.span, m.mention_id.clone()));
        }
        out
    }

    pub fn mentions_for<'a>(&'a self, doc_id: &'a str) -> impl Iterator<Item = &'a MedicationMention> + 'a {
        self.mentions.iter().filter(move |m| m.doc_id == doc_id)
    }
}

/// Checks every corpus invariant and returns one description per violation.
pub fn validate_corpus(corpus: &Corpus) -> Vec<String> {
    let mut violations = Vec::new();
    let mut notes: HashMap<&str, &ClinicalNote> = HashMap::new();
    for note in &corpus.notes {
        if notes.insert(note.doc_id(), note).is_some() {
            violations.push(format!("doc {}: duplicate doc_id", note.doc_id()));
        }
    }

    let mut seen_span_event: HashSet<(&str, Span, Option<EventLabel>)> = HashSet::new();
    let mut seen_id: HashSet<(&str, &str)> = HashSet::new();
    for m in &corpus.mentions {
        let who = format!("doc {} mention {}", m.doc_id, m.mention_id);
        let Some(note) = notes.get(m.doc_id.as_str()) else {
            violations.push(format!("{who}: doc_id does not resolve to a note"));
            continue;
        };
        if m.mention_id.is_empty() {
            violations.push(format!("{who}: empty mention_id"));
        }
        if !seen_id.insert((&m.doc_id, &m.mention_id)) {
            violations.push(format!("{who}: duplicate mention_id within document"));
        }
        if m.span.start >= m.span.end || m.span.end > note.char_len() {
            violations.push(format!(
                "{who}: span {} invalid for note of length {}",
                m.span,
                note.char_len()
            ));
            continue;
        }
        let actual = note.slice(m.span).expect("span checked above");
        if actual != m.surface {
            violations.push(format!(
                "{who}: surface {:?} does not match note text {:?} at {}",
                m.surface, actual, m.span
            ));
        }
        if m.context.is_some() && !m.is_disposition() {
            violations.push(format!(
                "{who}: context labels present but event is {}",
                m.event.map_or("absent", |e| e.as_str())
            ));
        }
        if !seen_span_event.insert((&m.doc_id, m.span, m.event)) {
            violations.push(format!("{who}: duplicate (span, event) {} within document", m.span));
        }
    }
    violations
}
