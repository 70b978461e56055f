//! BIO tag projection from character-offset mentions onto subword sequences,
//! and chunking of sequences to the encoder length limit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::subword::SubwordToken;
use crate::corpus::{EventLabel, MedicationMention, Span};
use crate::error::{Error, Result};

/// Positions reserved for the encoder's classification and separator tokens.
pub const RESERVED_POSITIONS: usize = 2;
pub const DEFAULT_MAX_SEQ_LEN: usize = 512;

/// Which tag inventory to project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskMode {
    /// `{B-Drug, I-Drug, O}`
    Task1,
    /// `{B-<event>, I-<event>, O}`
    Task2,
}

impl FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "task1" | "1" => Ok(TaskMode::Task1),
            "task2" | "2" => Ok(TaskMode::Task2),
            other => Err(Error::Usage(format!("unknown task mode {other:?}"))),
        }
    }
}

/// Entity type carried by a B/I tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Drug,
    Event(EventLabel),
}

impl EntityType {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Drug => "Drug",
            EntityType::Event(e) => e.as_str(),
        }
    }

    /// Event label carried by this type (`None` for plain Drug).
    pub fn event(&self) -> Option<EventLabel> {
        match self {
            EntityType::Drug => None,
            EntityType::Event(e) => Some(*e),
        }
    }

    pub fn for_mention(m: &MedicationMention, mode: TaskMode) -> Result<Self> {
        match mode {
            TaskMode::Task1 => Ok(EntityType::Drug),
            TaskMode::Task2 => m.event.map(EntityType::Event).ok_or_else(|| {
                Error::Invariant(format!(
                    "mention {} in {} has no event label for task-2 projection",
                    m.mention_id, m.doc_id
                ))
            }),
        }
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "Drug" {
            Ok(EntityType::Drug)
        } else {
            s.parse().map(EntityType::Event)
        }
    }
}

/// A BIO tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(EntityType),
    I(EntityType),
}

impl Tag {
    pub fn entity(&self) -> Option<EntityType> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(*t),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(t) => write!(f, "B-{}", t.as_str()),
            Tag::I(t) => write!(f, "I-{}", t.as_str()),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let bad = || Error::UnknownLabel {
            kind: "BIO tag",
            value: s.to_string(),
        };
        let (prefix, ty) = s.split_once('-').ok_or_else(bad)?;
        let ty: EntityType = ty.parse().map_err(|_| bad())?;
        match prefix {
            "B" => Ok(Tag::B(ty)),
            "I" => Ok(Tag::I(ty)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// True when no `I-X` follows `O` or a tag of a different type.
pub fn is_valid_bio(labels: &[Tag]) -> bool {
    let mut prev = Tag::O;
    for &t in labels {
        if let Tag::I(ty) = t {
            if prev.entity() != Some(ty) {
                return false;
            }
        }
        prev = t;
    }
    true
}

/// A tagged subword sequence for one sentence (or one chunk of it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioSequence {
    pub doc_id: String,
    pub sentence_index: usize,
    pub section_index: usize,
    pub chunk_index: usize,
    pub subwords: Vec<SubwordToken>,
    pub labels: Vec<Tag>,
}

impl BioSequence {
    pub fn len(&self) -> usize {
        self.subwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subwords.is_empty()
    }
}

fn check_disjoint(mentions: &[&MedicationMention]) -> Result<()> {
    let mut sorted: Vec<&MedicationMention> = mentions.to_vec();
    sorted.sort_by_key(|m| m.span);
    let collisions: Vec<String> = sorted
        .windows(2)
        .filter(|w| w[0].span.overlaps(&w[1].span))
        .map(|w| format!("{} {} / {} {}", w[0].mention_id, w[0].span, w[1].mention_id, w[1].span))
        .collect();
    if collisions.is_empty() {
        Ok(())
    } else {
        Err(Error::Overlap(format!(
            "in {}: {}",
            sorted[0].doc_id,
            collisions.join("; ")
        )))
    }
}

/// Projects mention spans onto subword tags.
///
/// Each mention's first overlapping subword gets `B-`, later overlapping ones
/// `I-`. A mention crossing the sentence boundary restarts with `B-` in each
/// sentence because projection only sees the current sentence's subwords.
pub fn project_bio(subwords: &[SubwordToken], mentions: &[&MedicationMention], mode: TaskMode) -> Result<Vec<Tag>> {
    check_disjoint(mentions)?;
    let mut labels = vec![Tag::O; subwords.len()];
    let mut taken = vec![false; subwords.len()];
    for m in mentions {
        let ty = EntityType::for_mention(m, mode)?;
        let mut first = true;
        for (i, sw) in subwords.iter().enumerate() {
            if taken[i] || !sw.span.overlaps(&m.span) {
                continue;
            }
            labels[i] = if first { Tag::B(ty) } else { Tag::I(ty) };
            taken[i] = true;
            first = false;
        }
    }
    Ok(labels)
}

/// Splits a sequence into chunks of at most `max_seq_len - 2` subwords
/// without separating the subwords of one word.
///
/// Chunks are packed greedily in order. A chunk that opens inside a mention
/// has its leading `I-X` relabeled `B-X`.
pub fn chunk(sequence: &BioSequence, max_seq_len: usize) -> Result<Vec<BioSequence>> {
    if max_seq_len <= RESERVED_POSITIONS {
        return Err(Error::Chunk(format!("max_seq_len {max_seq_len} leaves no room for subwords")));
    }
    let budget = max_seq_len - RESERVED_POSITIONS;

    // contiguous runs of equal word_index
    let mut words: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < sequence.subwords.len() {
        let w = sequence.subwords[i].word_index;
        let mut j = i + 1;
        while j < sequence.subwords.len() && sequence.subwords[j].word_index == w {
            j += 1;
        }
        words.push((i, j));
        i = j;
    }

    let mut chunks = Vec::new();
    let mut start = 0;
    let mut end = 0;
    let flush = |start: usize, end: usize, chunks: &mut Vec<BioSequence>| {
        let mut labels = sequence.labels[start..end].to_vec();
        if let Some(Tag::I(ty)) = labels.first().copied() {
            labels[0] = Tag::B(ty);
        }
        chunks.push(BioSequence {
            doc_id: sequence.doc_id.clone(),
            sentence_index: sequence.sentence_index,
            section_index: sequence.section_index,
            chunk_index: chunks.len(),
            subwords: sequence.subwords[start..end].to_vec(),
            labels,
        });
    };
    for (ws, we) in words {
        if we - ws > budget {
            let sw = &sequence.subwords[ws..we];
            let span = Span::new(sw[0].span.start, sw[sw.len() - 1].span.end);
            return Err(Error::Chunk(format!(
                "word {} at {span} in {} has {} subwords, more than the {budget} allowed by max_seq_len {max_seq_len}",
                sw[0].word_index,
                sequence.doc_id,
                we - ws
            )));
        }
        if we - start > budget {
            flush(start, end, &mut chunks);
            start = ws;
        }
        end = we;
    }
    if end > start || chunks.is_empty() {
        flush(start, end, &mut chunks);
    }
    Ok(chunks)
}

/// JSON-lines interchange form of a (gold or predicted) sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub doc_id: String,
    pub sentence_index: usize,
    #[serde(default)]
    pub section_index: usize,
    pub chunk_index: usize,
    pub tokens: Vec<String>,
    pub spans: Vec<(usize, usize)>,
    pub word_index: Vec<usize>,
    pub labels: Vec<Tag>,
}

impl From<&BioSequence> for SequenceRecord {
    fn from(s: &BioSequence) -> Self {
        SequenceRecord {
            doc_id: s.doc_id.clone(),
            sentence_index: s.sentence_index,
            section_index: s.section_index,
            chunk_index: s.chunk_index,
            tokens: s.subwords.iter().map(|t| t.text.clone()).collect(),
            spans: s.subwords.iter().map(|t| (t.span.start, t.span.end)).collect(),
            word_index: s.subwords.iter().map(|t| t.word_index).collect(),
            labels: s.labels.clone(),
        }
    }
}

impl TryFrom<SequenceRecord> for BioSequence {
    type Error = Error;

    fn try_from(r: SequenceRecord) -> Result<Self> {
        let n = r.tokens.len();
        if r.spans.len() != n || r.word_index.len() != n || r.labels.len() != n {
            return Err(Error::Format(format!(
                "sequence {} sentence {} chunk {}: tokens/spans/word_index/labels lengths differ ({}, {}, {}, {})",
                r.doc_id,
                r.sentence_index,
                r.chunk_index,
                n,
                r.spans.len(),
                r.word_index.len(),
                r.labels.len()
            )));
        }
        let subwords = r
            .tokens
            .into_iter()
            .zip(r.spans)
            .zip(r.word_index)
            .map(|((text, (s, e)), word_index)| SubwordToken {
                text,
                word_index,
                span: Span::new(s, e),
            })
            .collect();
        Ok(BioSequence {
            doc_id: r.doc_id,
            sentence_index: r.sentence_index,
            section_index: r.section_index,
            chunk_index: r.chunk_index,
            subwords,
            labels: r.labels,
        })
    }
}

/// Serializes sequences as JSON lines.
pub fn write_jsonl(sequences: &[BioSequence]) -> Result<String> {
    let mut out = String::new();
    for s in sequences {
        out.push_str(&serde_json::to_string(&SequenceRecord::from(s))?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses JSON-lines sequences; errors carry the 1-based line number.
pub fn read_jsonl(text: &str) -> Result<Vec<BioSequence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SequenceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(BioSequence::try_from(record).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
