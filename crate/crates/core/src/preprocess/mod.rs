//! Note preprocessing: segmentation, word and subword tokenization, BIO
//! projection, chunking, and extraction of task-3 classification instances.

mod bio;
mod segment;
mod subword;
mod words;

pub use bio::{
    chunk, is_valid_bio, project_bio, read_jsonl, write_jsonl, BioSequence, EntityType, SequenceRecord, Tag, TaskMode,
    DEFAULT_MAX_SEQ_LEN, RESERVED_POSITIONS,
};
pub use segment::{segment_note, segment_sentences, Segment, MAX_HEADER_WORDS};
pub use subword::{tokenize_subwords, Scheme, SubwordToken, SubwordVocab, MAX_WORDPIECE_CHARS};
pub use words::{tokenize_str, tokenize_words, WordToken};

use crate::corpus::{ClinicalNote, ContextLabels, Corpus, MedicationMention, Span};
use crate::error::Result;

/// Tokenizes, tags and chunks every sentence of one note.
///
/// `mentions` must belong to `note`; mentions are attached to every sentence
/// they overlap.
pub fn preprocess_note(
    note: &ClinicalNote,
    mentions: &[&MedicationMention],
    vocab: &SubwordVocab,
    mode: TaskMode,
    max_seq_len: usize,
) -> Result<Vec<BioSequence>> {
    let mut out = Vec::new();
    for segment in segment_note(note) {
        let words = tokenize_words(note, segment.span)?;
        let subwords: Vec<SubwordToken> = words
            .iter()
            .enumerate()
            .flat_map(|(i, w)| vocab.tokenize(w, i))
            .collect();
        let local: Vec<&MedicationMention> = mentions
            .iter()
            .copied()
            .filter(|m| m.span.overlaps(&segment.span))
            .collect();
        let labels = project_bio(&subwords, &local, mode)?;
        let sequence = BioSequence {
            doc_id: note.doc_id().to_string(),
            sentence_index: segment.sentence_index,
            section_index: segment.section_index,
            chunk_index: 0,
            subwords,
            labels,
        };
        out.extend(chunk(&sequence, max_seq_len)?);
    }
    Ok(out)
}

/// One task-3 classification instance: a Disposition mention with its
/// surrounding context window.
#[derive(Debug, Clone, PartialEq)]
pub struct Task3Instance {
    /// Corpus-wide mention key (`doc_id:mention_id`).
    pub key: String,
    pub doc_id: String,
    pub mention_id: String,
    /// Window text: the mention's sentence plus one sentence on each side.
    pub window: String,
    /// Mention position within `window`, in chars.
    pub mention_span: Span,
    pub labels: Option<ContextLabels>,
}

/// Builds the context window of `mention` given the note's sentence spans.
pub fn task3_instance(note: &ClinicalNote, sentences: &[Span], mention: &MedicationMention) -> Result<Task3Instance> {
    let idx = sentences
        .iter()
        .position(|s| s.overlaps(&mention.span))
        .or_else(|| sentences.iter().position(|s| s.start >= mention.span.start));
    let (mut start, mut end) = (mention.span.start, mention.span.end);
    if let Some(i) = idx {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(sentences.len() - 1);
        start = start.min(sentences[lo].start);
        end = end.max(sentences[hi].end);
    }
    let window = note.slice(Span::new(start, end))?.to_string();
    Ok(Task3Instance {
        key: mention.key(),
        doc_id: mention.doc_id.clone(),
        mention_id: mention.mention_id.clone(),
        window,
        mention_span: Span::new(mention.span.start - start, mention.span.end - start),
        labels: mention.context,
    })
}

/// One instance per Disposition mention, in corpus mention order.
pub fn extract_task3_instances(corpus: &Corpus) -> Result<Vec<Task3Instance>> {
    let mut out = Vec::new();
    for note in &corpus.notes {
        let sentences = segment_sentences(note);
        let mut mentions: Vec<&MedicationMention> = corpus
            .mentions_for(note.doc_id())
            .filter(|m| m.is_disposition())
            .collect();
        mentions.sort_by_key(|m| m.span);
        for m in mentions {
            out.push(task3_instance(note, &sentences, m)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brat::parse_ann;
    use crate::corpus::Split;

    fn corpus(text: &str, ann: &str) -> Corpus {
        let note = ClinicalNote::new("d", text).unwrap();
        let mentions = parse_ann(ann, &note).unwrap();
        Corpus {
            notes: vec![note],
            mentions,
            split: Split::Train,
        }
    }

    #[test]
    fn instances_only_for_dispositions() {
        let text = "Start aspirin. Continue statin. Stop heparin. Take lasix. Hold coumadin. Keep insulin. Use ativan. Give zofran.";
        let mut ann = String::new();
        let names = ["aspirin", "statin", "heparin", "lasix", "coumadin", "insulin", "ativan", "zofran"];
        let labels = ["Disposition", "NoDisposition", "Disposition", "NoDisposition", "Disposition", "NoDisposition", "NoDisposition", "NoDisposition"];
        for (i, (n, l)) in names.iter().zip(labels).enumerate() {
            let s = text.find(n).unwrap();
            ann.push_str(&format!("T{}\t{l} {s} {}\t{n}\n", i + 1, s + n.len()));
        }
        let c = corpus(text, &ann);
        let inst = extract_task3_instances(&c).unwrap();
        assert_eq!(inst.len(), 3);
        assert_eq!(inst[0].window, "Start aspirin. Continue statin.");
        assert_eq!(inst[1].window, "Continue statin. Stop heparin. Take lasix.");
        let m = inst[1].mention_span;
        assert_eq!(&inst[1].window[m.start..m.end], "heparin");
    }

    #[test]
    fn one_sentence_document_window_is_that_sentence() {
        let c = corpus("Stop aspirin now.", "T1\tDisposition 5 12\taspirin\n");
        let inst = extract_task3_instances(&c).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].window, "Stop aspirin now.");
        assert_eq!(inst[0].key, "d:T1");
        assert!(inst[0].labels.is_some());
    }

    #[test]
    fn preprocess_note_tags_and_offsets() {
        let c = corpus("MEDS:\nStart lisinopril today.", "T1\tDisposition 12 22\tlisinopril\n");
        let vocab = SubwordVocab::test_wordpiece(true);
        let ms: Vec<&MedicationMention> = c.mentions.iter().collect();
        let seqs = preprocess_note(&c.notes[0], &ms, &vocab, TaskMode::Task2, 512).unwrap();
        assert_eq!(seqs.len(), 2);
        assert!(seqs[0].labels.iter().all(|t| *t == Tag::O));
        let tags: Vec<String> = seqs[1].labels.iter().map(|t| t.to_string()).collect();
        assert_eq!(tags[..4], ["O", "B-Disposition", "I-Disposition", "I-Disposition"]);
        assert!(tags[4..].iter().all(|t| t == "O"));
        for sw in &seqs[1].subwords {
            assert!(sw.span.end <= c.notes[0].char_len());
        }
    }
}
