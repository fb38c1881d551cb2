//! Trope-page markup to span-annotated sentences: entry extraction, tag
//! stripping with spoiler spans, sentence segmentation and span alignment.

mod align;
mod dataset;
mod markup;
mod pages;
mod segment;

pub use align::align_spans_to_sentences;
pub use dataset::{build_dataset, BuildSummary};
pub use markup::{strip_markup_extract_spans, AnnotatedText};
pub use pages::{extract_entries, RawEntry};
pub use segment::split_sentences;

use crate::corpus::SentenceRecord;
use crate::error::Result;

/// Default class name (and tag name) of spoiler elements.
pub const DEFAULT_SPOILER_CLASS: &str = "spoiler";

/// Markup of one entry to labelled, span-annotated sentences.
pub fn annotate_entry(markup: &str, spoiler_class: &str) -> Result<Vec<SentenceRecord>> {
    let annotated = strip_markup_extract_spans(markup, spoiler_class)?;
    let boundaries = split_sentences(&annotated.text);
    align_spans_to_sentences(&annotated, &boundaries)
}
