//! Subword tokenization: WordPiece (greedy longest-match-first) and
//! byte-level BPE (ordered merge table over a 256-symbol byte alphabet).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::words::WordToken;
use crate::corpus::Span;
use crate::error::{Error, Result};

const TEST_WORDPIECE: &str = include_str!("../../vocab/wordpiece-test.txt");
const TEST_BPE_VOCAB: &str = include_str!("../../vocab/bpe-test-vocab.txt");
const TEST_BPE_MERGES: &str = include_str!("../../vocab/bpe-test-merges.txt");

/// Words longer than this (in chars) become the unknown token under WordPiece.
pub const MAX_WORDPIECE_CHARS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    WordPiece,
    ByteBpe,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::WordPiece => "wordpiece",
            Scheme::ByteBpe => "bpe",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wordpiece" => Ok(Scheme::WordPiece),
            "bpe" | "bytebpe" => Ok(Scheme::ByteBpe),
            other => Err(Error::Usage(format!("unknown tokenizer scheme {other:?}"))),
        }
    }
}

/// A subword piece of one word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordToken {
    /// Scheme-specific surface (`##` continuation pieces, `Ġ`-prefixed BPE pieces).
    pub text: String,
    /// Index of the parent word within its sentence.
    pub word_index: usize,
    /// Covered characters. A byte-level piece that only continues a
    /// multi-byte character has an empty span at that character's end.
    pub span: Span,
}

#[derive(Debug, Clone)]
enum Model {
    WordPiece,
    ByteBpe {
        ranks: HashMap<(String, String), usize>,
    },
}

/// A loaded subword vocabulary. Read-only after construction.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    model: Model,
    pieces: HashMap<String, u32>,
    unk: String,
    continuation: String,
    lowercase: bool,
}

/// GPT-2 byte → printable char table.
fn byte_alphabet() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0u32..256 {
        let printable = (0x21..=0x7e).contains(&b) || (0xa1..=0xac).contains(&b) || (0xae..=0xff).contains(&b);
        table[b as usize] = if printable {
            char::from_u32(b).unwrap()
        } else {
            extra += 1;
            char::from_u32(255 + extra).unwrap()
        };
    }
    table
}

fn read_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l))
}

fn index_pieces<'a>(lines: impl Iterator<Item = &'a str>) -> HashMap<String, u32> {
    let mut pieces = HashMap::new();
    for (id, line) in lines.enumerate() {
        if !line.is_empty() {
            pieces.entry(line.to_string()).or_insert(id as u32);
        }
    }
    pieces
}

impl SubwordVocab {
    /// WordPiece vocabulary: one piece per line, line number = id.
    pub fn wordpiece_from_str(vocab: &str, lowercase: bool) -> Result<Self> {
        let pieces = index_pieces(read_lines(vocab));
        let v = SubwordVocab {
            model: Model::WordPiece,
            pieces,
            unk: "[UNK]".into(),
            continuation: "##".into(),
            lowercase,
        };
        v.check()?;
        Ok(v)
    }

    /// Byte-level BPE: vocabulary list (one token per line) and merges
    /// (one space-separated pair per line, optional `#version` header).
    pub fn bpe_from_str(vocab: &str, merges: &str, lowercase: bool) -> Result<Self> {
        let pieces = index_pieces(read_lines(vocab));
        let mut ranks = HashMap::new();
        for (n, line) in read_lines(merges).enumerate() {
            if line.is_empty() || line.starts_with("#version") {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Format(format!("merges line {}: expected one pair, got {line:?}", n + 1)));
            };
            let rank = ranks.len();
            ranks.entry((a.to_string(), b.to_string())).or_insert(rank);
        }
        let v = SubwordVocab {
            model: Model::ByteBpe { ranks },
            pieces,
            unk: "<unk>".into(),
            continuation: String::new(),
            lowercase,
        };
        v.check()?;
        Ok(v)
    }

    pub fn wordpiece_from_file(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::wordpiece_from_str(&text, lowercase).map_err(|e| e.in_file(path))
    }

    pub fn bpe_from_files(vocab: impl AsRef<Path>, merges: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let (vocab, merges) = (vocab.as_ref(), merges.as_ref());
        let v = fs::read_to_string(vocab).map_err(|e| Error::io(vocab, e))?;
        let m = fs::read_to_string(merges).map_err(|e| Error::io(merges, e))?;
        Self::bpe_from_str(&v, &m, lowercase).map_err(|e| e.in_file(vocab))
    }

    /// The small WordPiece vocabulary shipped for tests and demos.
    pub fn test_wordpiece(lowercase: bool) -> Self {
        Self::wordpiece_from_str(TEST_WORDPIECE, lowercase).expect("shipped vocabulary is valid")
    }

    /// The small byte-level BPE vocabulary shipped for tests and demos.
    pub fn test_bpe(lowercase: bool) -> Self {
        Self::bpe_from_str(TEST_BPE_VOCAB, TEST_BPE_MERGES, lowercase).expect("shipped vocabulary is valid")
    }

    fn check(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::Format("vocabulary is empty".into()));
        }
        if !self.pieces.contains_key(&self.unk) {
            return Err(Error::Format(format!("vocabulary lacks unknown token {}", self.unk)));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        match self.model {
            Model::WordPiece => Scheme::WordPiece,
            Model::ByteBpe { .. } => Scheme::ByteBpe,
        }
    }

    pub fn unk_token(&self) -> &str {
        &self.unk
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.pieces.contains_key(piece)
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.pieces.get(piece).copied()
    }

    /// Per-char lowercasing that keeps the char count unchanged.
    fn normalize(&self, word: &str) -> Vec<char> {
        word.chars()
            .map(|c| {
                if !self.lowercase {
                    return c;
                }
                let mut lower = c.to_lowercase();
                match (lower.next(), lower.next()) {
                    (Some(l), None) => l,
                    _ => c,
                }
            })
            .collect()
    }

    /// Splits one word into subword pieces.
    pub fn tokenize(&self, word: &WordToken, word_index: usize) -> Vec<SubwordToken> {
        match &self.model {
            Model::WordPiece => self.wordpiece(word, word_index),
            Model::ByteBpe { ranks } => self.byte_bpe(word, word_index, ranks),
        }
    }

    fn unknown(&self, word: &WordToken, word_index: usize) -> Vec<SubwordToken> {
        vec![SubwordToken {
            text: self.unk.clone(),
            word_index,
            span: word.span,
        }]
    }

    fn wordpiece(&self, word: &WordToken, word_index: usize) -> Vec<SubwordToken> {
        let chars = self.normalize(&word.text);
        if chars.is_empty() || chars.len() > MAX_WORDPIECE_CHARS {
            return self.unknown(word, word_index);
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut candidate: String = chars[start..end].iter().collect();
                if start > 0 {
                    candidate.insert_str(0, &self.continuation);
                }
                if self.pieces.contains_key(&candidate) {
                    found = Some(candidate);
                    break;
                }
                end -= 1;
            }
            let Some(text) = found else {
                return self.unknown(word, word_index);
            };
            out.push(SubwordToken {
                text,
                word_index,
                span: Span::new(word.span.start + start, word.span.start + end),
            });
            start = end;
        }
        out
    }

    fn byte_bpe(&self, word: &WordToken, word_index: usize, ranks: &HashMap<(String, String), usize>) -> Vec<SubwordToken> {
        let alphabet = byte_alphabet();
        let normalized: String = self.normalize(&word.text).into_iter().collect();
        // leading-space convention: every word is tokenized as " word"
        let mut bytes = vec![b' '];
        bytes.extend_from_slice(normalized.as_bytes());
        // char index (within the word) of each byte; the prefix space stands in
        // as the first byte of char 0 so the word-initial piece always covers it
        let mut owner = vec![0usize];
        let mut char_starts = vec![true];
        for (ci, c) in normalized.chars().enumerate() {
            for k in 0..c.len_utf8() {
                owner.push(ci);
                char_starts.push(k == 0 && ci > 0);
            }
        }

        // symbols as (text, byte range)
        let mut symbols: Vec<(String, usize, usize)> = bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| (alphabet[b as usize].to_string(), i, i + 1))
            .collect();
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| ranks.get(&(w[0].0.clone(), w[1].0.clone())).map(|&r| (r, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged: Vec<(String, usize, usize)> = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && ranks.get(&(symbols[i].0.clone(), symbols[i + 1].0.clone())) == Some(&rank) {
                    merged.push((format!("{}{}", symbols[i].0, symbols[i + 1].0), symbols[i].1, symbols[i + 1].2));
                    i += 2;
                } else {
                    merged.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = merged;
        }

        // out-of-vocabulary symbols fall back to their bytes, then to <unk>
        let mut pieces: Vec<(String, usize, usize)> = Vec::new();
        for (text, s, e) in symbols {
            if self.pieces.contains_key(&text) {
                pieces.push((text, s, e));
            } else {
                for b in s..e {
                    let t = alphabet[bytes[b] as usize].to_string();
                    let t = if self.pieces.contains_key(&t) { t } else { self.unk.clone() };
                    pieces.push((t, b, b + 1));
                }
            }
        }

        let n_chars = normalized.chars().count();
        let base = word.span.start;
        let mut out: Vec<SubwordToken> = Vec::with_capacity(pieces.len());
        let mut cursor = 0; // next unassigned char
        for (text, s, e) in pieces {
            // a piece owns every char whose first byte lies inside it
            let owned_end = (s..e)
                .filter(|&b| char_starts[b])
                .map(|b| owner[b] + 1)
                .max();
            let end = owned_end.unwrap_or(cursor).max(cursor).min(n_chars);
            out.push(SubwordToken {
                text,
                word_index,
                span: Span::new(base + cursor, base + end),
            });
            cursor = end;
        }
        out
    }

    /// Reassembles a word from its pieces; `None` if any piece is unknown.
    pub fn join(&self, pieces: &[SubwordToken]) -> Option<String> {
        if pieces.iter().any(|p| p.text == self.unk) {
            return None;
        }
        match self.model {
            Model::WordPiece => {
                let mut out = String::new();
                for (i, p) in pieces.iter().enumerate() {
                    let t = if i > 0 {
                        p.text.strip_prefix(self.continuation.as_str())?
                    } else {
                        p.text.as_str()
                    };
                    out.push_str(t);
                }
                Some(out)
            }
            Model::ByteBpe { .. } => {
                let alphabet = byte_alphabet();
                let reverse: HashMap<char, u8> = alphabet.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
                let bytes: Option<Vec<u8>> = pieces.iter().flat_map(|p| p.text.chars()).map(|c| reverse.get(&c).copied()).collect();
                let text = String::from_utf8(bytes?).ok()?;
                Some(text.strip_prefix(' ').unwrap_or(&text).to_string())
            }
        }
    }
}

/// Free-function form of [`SubwordVocab::tokenize`].
pub fn tokenize_subwords(word: &WordToken, word_index: usize, vocab: &SubwordVocab) -> Vec<SubwordToken> {
    vocab.tokenize(word, word_index)
}
