//! Lexicon tagger: memorizes training mention surfaces with their most
//! frequent event label and tags new notes by leftmost-longest n-gram lookup.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::{ClinicalNote, Corpus, EventLabel, MedicationMention, Span};
use crate::error::{Error, Result};
use crate::preprocess::{segment_sentences, tokenize_str, tokenize_words, WordToken};

/// Longest n-gram (in word tokens) considered while tagging.
pub const MAX_NGRAM: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub label: EventLabel,
    /// Total training occurrences of the surface.
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

/// Case-folded lookup key: word tokens joined by single spaces.
pub fn surface_key(surface: &str) -> String {
    let words: Vec<String> = tokenize_str(surface, 0).into_iter().map(|w| w.text.to_lowercase()).collect();
    words.join(" ")
}

fn ngram_key(words: &[WordToken]) -> String {
    let parts: Vec<String> = words.iter().map(|w| w.text.to_lowercase()).collect();
    parts.join(" ")
}

/// One entry per distinct case-folded surface, labeled with the argmax event.
///
/// Ties go to the earlier label in `Disposition < NoDisposition <
/// Undetermined` order. Mentions without an event label are skipped.
pub fn build_lexicon(train: &Corpus) -> Lexicon {
    let mut counts: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for m in &train.mentions {
        let Some(event) = m.event else { continue };
        let key = surface_key(&m.surface);
        if key.is_empty() {
            continue;
        }
        counts.entry(key).or_default()[event.index()] += 1;
    }
    let entries = counts
        .into_iter()
        .map(|(key, c)| {
            let best = (0..3).fold(0, |best, i| if c[i] > c[best] { i } else { best });
            (
                key,
                LexiconEntry {
                    label: EventLabel::ALL[best],
                    count: c.iter().sum(),
                },
            )
        })
        .collect();
    Lexicon { entries }
}

impl Lexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&LexiconEntry> {
        self.entries.get(&surface_key(surface))
    }

    /// Sorted TSV: `surface<TAB>label<TAB>count` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, e) in &self.entries {
            let _ = writeln!(out, "{k}\t{}\t{}", e.label, e.count);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let [surface, label, count] = fields[..] else {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            };
            let label: EventLabel = label.parse().map_err(|e: Error| bad(e.to_string()))?;
            let count: usize = count.parse().map_err(|_| bad(format!("bad count {count:?}")))?;
            if count == 0 {
                return Err(bad("count must be at least 1".into()));
            }
            entries.insert(surface_key(surface), LexiconEntry { label, count });
        }
        Ok(Lexicon { entries })
    }

    /// Tags a note by leftmost-longest matching of up to [`MAX_NGRAM`] words
    /// within each sentence. Returned mentions are numbered `T1..Tn`.
    pub fn tag(&self, note: &ClinicalNote) -> Result<Vec<MedicationMention>> {
        let mut spans: Vec<(Span, EventLabel)> = Vec::new();
        for sentence in segment_sentences(note) {
            let words = tokenize_words(note, sentence)?;
            let mut i = 0;
            while i < words.len() {
                let longest = (1..=MAX_NGRAM.min(words.len() - i))
                    .rev()
                    .find_map(|n| self.entries.get(&ngram_key(&words[i..i + n])).map(|e| (n, e.label)));
                match longest {
                    Some((n, label)) => {
                        spans.push((Span::new(words[i].span.start, words[i + n - 1].span.end), label));
                        i += n;
                    }
                    None => i += 1,
                }
            }
        }
        spans
            .into_iter()
            .enumerate()
            .map(|(i, (span, label))| {
                Ok(MedicationMention {
                    mention_id: format!("T{}", i + 1),
                    doc_id: note.doc_id().to_string(),
                    span,
                    surface: note.slice(span)?.to_string(),
                    event: Some(label),
                    context: None,
                })
            })
            .collect()
    }
}

/// Free-function form of [`Lexicon::tag`].
pub fn tag(note: &ClinicalNote, lexicon: &Lexicon) -> Result<Vec<MedicationMention>> {
    lexicon.tag(note)
}
