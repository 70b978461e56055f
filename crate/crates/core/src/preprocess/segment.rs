//! Rule-based sentence and section segmentation.
//!
//! Boundaries fall at blank lines, around section-header lines (a line whose
//! trimmed text ends in `:` and has at most six words), and after `.`, `!` or
//! `?` when followed by whitespace and an uppercase letter. Single line breaks
//! inside running text are not boundaries.

use serde::{Deserialize, Serialize};

use crate::corpus::{ClinicalNote, Span};

/// Maximum word count for a colon-terminated line to count as a header.
pub const MAX_HEADER_WORDS: usize = 6;

/// A sentence-level segment tagged with its position in the note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub span: Span,
    pub sentence_index: usize,
    /// Incremented at every header line; text before the first header is section 0.
    pub section_index: usize,
    pub is_header: bool,
}

fn trim(chars: &[char], start: usize, end: usize) -> Option<Span> {
    let mut s = start;
    let mut e = end;
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    (s < e).then_some(Span::new(s, e))
}

fn is_header(chars: &[char], span: Span) -> bool {
    let line: String = chars[span.start..span.end].iter().collect();
    line.ends_with(':') && line.split_whitespace().count() <= MAX_HEADER_WORDS
}

fn split_terminators(chars: &[char], block: Span, out: &mut Vec<Span>) {
    let mut piece_start = block.start;
    let mut i = block.start;
    while i < block.end {
        if matches!(chars[i], '.' | '!' | '?') && i + 1 < block.end && chars[i + 1].is_whitespace() {
            let mut j = i + 1;
            while j < block.end && chars[j].is_whitespace() {
                j += 1;
            }
            if j < block.end && chars[j].is_uppercase() {
                out.extend(trim(chars, piece_start, i + 1));
                piece_start = i + 1;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    out.extend(trim(chars, piece_start, block.end));
}

/// Segments a note into ordered, non-overlapping sentence segments.
pub fn segment_note(note: &ClinicalNote) -> Vec<Segment> {
    let chars: Vec<char> = note.text().chars().collect();
    // (span, is_header) blocks before terminator splitting
    let mut blocks: Vec<(Span, bool)> = Vec::new();
    let mut block: Option<(usize, usize)> = None;

    let mut line_start = 0;
    while line_start <= chars.len() {
        let line_end = chars[line_start..]
            .iter()
            .position(|&c| c == '\n')
            .map_or(chars.len(), |p| line_start + p);
        match trim(&chars, line_start, line_end) {
            None => {
                if let Some((s, e)) = block.take() {
                    blocks.push((Span::new(s, e), false));
                }
            }
            Some(content) if is_header(&chars, content) => {
                if let Some((s, e)) = block.take() {
                    blocks.push((Span::new(s, e), false));
                }
                blocks.push((content, true));
            }
            Some(_) => {
                block = Some((block.map_or(line_start, |(s, _)| s), line_end));
            }
        }
        line_start = line_end + 1;
    }
    if let Some((s, e)) = block {
        blocks.push((Span::new(s, e), false));
    }

    let mut segments = Vec::new();
    let mut section = 0;
    let mut seen_header = false;
    for (span, header) in blocks {
        if header {
            if seen_header || !segments.is_empty() {
                section += 1;
            }
            seen_header = true;
            segments.push(Segment {
                span,
                sentence_index: segments.len(),
                section_index: section,
                is_header: true,
            });
            continue;
        }
        let mut pieces = Vec::new();
        split_terminators(&chars, span, &mut pieces);
        for p in pieces {
            segments.push(Segment {
                span: p,
                sentence_index: segments.len(),
                section_index: section,
                is_header: false,
            });
        }
    }
    segments
}

/// Sentence spans of a note, in order.
pub fn segment_sentences(note: &ClinicalNote) -> Vec<Span> {
    segment_note(note).into_iter().map(|s| s.span).collect()
}
