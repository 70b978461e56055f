//! Contextualized medication event extraction toolkit.
//!
//! The pipeline runs in four stages over character-offset standoff data:
//!
//! * [`brat`] reads and writes paired `.txt` / `.ann` files,
//! * [`preprocess`] segments notes, tokenizes into words and subwords
//!   (WordPiece or byte-level BPE), projects BIO tags and chunks to the
//!   encoder's sequence limit,
//! * [`postprocess`] turns (predicted) subword tag sequences back into
//!   mentions and [`context`] assigns the five context dimensions with one
//!   linear SVM per dimension,
//! * [`eval`] scores predictions with strict and lenient span matching.
//!
//! [`synth`] produces seeded corpora with exact label histograms and
//! [`baseline`] provides a lexicon tagger so the whole chain runs without an
//! external neural model.

pub mod baseline;
pub mod brat;
pub mod context;
pub mod corpus;
mod error;
pub mod eval;
pub mod postprocess;
pub mod preprocess;
pub mod synth;

pub use corpus::{
    validate_corpus, Action, Actor, Certainty, ClinicalNote, ContextDimension, ContextLabels, Corpus,
    EventLabel, MedicationMention, Negation, Span, Split, Temporality,
};
pub use error::{Error, Result};
