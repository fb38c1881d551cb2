//! Canonical document/sentence records, JSONL I/O, balancing, splitting,
//! statistics and synthetic corpora.
//!
//! All character offsets are counted in Unicode scalar values, not bytes.

mod genre;
mod io;
mod sampling;
mod stats;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use genre::{GenreCatalog, GENRE_COUNT};
pub use io::{load_corpus, parse_corpus, save_corpus, to_jsonl, Schema};
pub use sampling::{balance_by_document, stratified_split, Split, SplitRatios};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{generate_synthetic_corpus, ContextEffect, GenreEffect, SyntheticSpec};

/// Half-open character range `[start, end)` inside a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpoilerSpan {
    pub start: usize,
    pub end: usize,
}

impl SpoilerSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    pub label: bool,
    pub spans: Vec<SpoilerSpan>,
}

impl SentenceRecord {
    pub fn new(text: impl Into<String>, spans: Vec<SpoilerSpan>) -> Self {
        let label = !spans.is_empty();
        Self {
            text: text.into(),
            label,
            spans,
        }
    }

    /// Sentence-level label without word-level annotation.
    pub fn labelled(text: impl Into<String>, label: bool) -> Self {
        Self {
            text: text.into(),
            label,
            spans: Vec::new(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn covered_chars(&self) -> usize {
        self.spans.iter().map(SpoilerSpan::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub url: Option<String>,
    pub trope: Option<String>,
    pub book_id: Option<String>,
    pub genre_votes: BTreeMap<String, i64>,
    pub sentences: Vec<SentenceRecord>,
    pub has_spoiler: bool,
}

impl DocumentRecord {
    /// Builds a record with `has_spoiler` derived from the sentence labels.
    pub fn new(id: impl Into<String>, sentences: Vec<SentenceRecord>) -> Self {
        let has_spoiler = sentences.iter().any(|s| s.label);
        Self {
            id: id.into(),
            url: None,
            trope: None,
            book_id: None,
            genre_votes: BTreeMap::new(),
            sentences,
            has_spoiler,
        }
    }

    pub fn spoiler_sentence_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.label).count()
    }
}

/// Whether spoiler sentences must carry word-level spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Annotation {
    /// Every spoiler sentence carries at least one span (TV Tropes).
    WordLevel,
    /// Labels only; spans may be empty on spoiler sentences (Goodreads).
    SentenceLevel,
}

/// Lists every invariant violation of a word-level annotated record.
pub fn validate_record(doc: &DocumentRecord) -> Vec<String> {
    validate_record_with(doc, Annotation::WordLevel)
}

pub fn validate_record_with(doc: &DocumentRecord, annotation: Annotation) -> Vec<String> {
    let mut out = Vec::new();
    if doc.sentences.is_empty() {
        out.push("sentences: empty".to_string());
    }
    let any = doc.sentences.iter().any(|s| s.label);
    if doc.has_spoiler != any {
        out.push(format!(
            "has_spoiler: is {} but sentence labels imply {}",
            doc.has_spoiler, any
        ));
    }
    let catalog = GenreCatalog::standard();
    for (name, votes) in &doc.genre_votes {
        if catalog.index_of(name).is_none() {
            out.push(format!("genre_votes: unknown genre group {name:?}"));
        }
        if *votes < 0 {
            out.push(format!("genre_votes: negative vote count for {name:?}"));
        }
    }
    for (i, sentence) in doc.sentences.iter().enumerate() {
        validate_sentence(i, sentence, annotation, &mut out);
    }
    out
}

fn validate_sentence(i: usize, s: &SentenceRecord, annotation: Annotation, out: &mut Vec<String>) {
    let mismatch = match annotation {
        Annotation::WordLevel => s.label == s.spans.is_empty(),
        Annotation::SentenceLevel => !s.label && !s.spans.is_empty(),
    };
    if mismatch {
        out.push(format!("sentences[{i}]: label/spans mismatch"));
    }
    let len = s.char_len();
    for (j, span) in s.spans.iter().enumerate() {
        if span.start >= span.end {
            out.push(format!(
                "sentences[{i}].spans[{j}]: start ≥ end ({}, {})",
                span.start, span.end
            ));
        } else if span.end > len {
            out.push(format!(
                "sentences[{i}].spans[{j}]: span ({}, {}) out of range for length {len}",
                span.start, span.end
            ));
        }
    }
    for (j, pair) in s.spans.windows(2).enumerate() {
        if pair[1].start < pair[0].start {
            out.push(format!("sentences[{i}].spans[{}]: spans not sorted by start", j + 1));
        } else if pair[1].start < pair[0].end {
            out.push(format!("sentences[{i}].spans[{}]: overlapping spans", j + 1));
        }
    }
}

/// True iff the spans cover less than 90% of the sentence characters.
pub fn is_partial_spoiler(sentence: &SentenceRecord) -> Result<bool> {
    if !sentence.label {
        return Err(Error::invalid("is_partial_spoiler called on a non-spoiler sentence"));
    }
    if sentence.spans.is_empty() {
        return Err(Error::invalid(
            "spoiler sentence has no word-level spans (sentence-level annotation only)",
        ));
    }
    let len = sentence.char_len();
    Ok(sentence.covered_chars() * 10 < len * 9)
}
