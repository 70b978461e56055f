use serde::{Deserialize, Serialize};

use crate::corpus::{ClinicalNote, Span};

/// A word token with its span in note coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordToken {
    pub text: String,
    pub span: Span,
}

/// Splits `text` into maximal alphanumeric runs and single punctuation
/// characters. Spans are char offsets shifted by `offset`.
pub fn tokenize_str(text: &str, offset: usize) -> Vec<WordToken> {
    let mut out = Vec::new();
    let mut run: Option<(usize, String)> = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            run.get_or_insert_with(|| (i, String::new())).1.push(c);
            continue;
        }
        if let Some((s, t)) = run.take() {
            let len = t.chars().count();
            out.push(WordToken {
                text: t,
                span: Span::new(offset + s, offset + s + len),
            });
        }
        if !c.is_whitespace() {
            out.push(WordToken {
                text: c.to_string(),
                span: Span::new(offset + i, offset + i + 1),
            });
        }
    }
    if let Some((s, t)) = run {
        let len = t.chars().count();
        out.push(WordToken {
            text: t,
            span: Span::new(offset + s, offset + s + len),
        });
    }
    out
}

/// Word tokens of one sentence of a note.
pub fn tokenize_words(note: &ClinicalNote, sentence: Span) -> crate::Result<Vec<WordToken>> {
    Ok(tokenize_str(note.slice(sentence)?, sentence.start))
}
