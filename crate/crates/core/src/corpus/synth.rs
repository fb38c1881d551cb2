//! Planted-marker synthetic corpora for desk-scale experiments.
//!
//! Every spoiler sentence contains exactly one marker token whose character
//! range is the recorded span. Optional effects make labels depend on the
//! document genre or on neighbouring sentences.

use std::collections::BTreeMap;

use rand::Rng as _;

use super::{DocumentRecord, GenreCatalog, SentenceRecord, SpoilerSpan, GENRE_COUNT};
use crate::error::{Error, Result};
use crate::rng::{sub_rng, Rng};

/// Spoiler rate varies linearly over the canonical genre order:
/// `rate_i = spoiler_rate * (1 + spread * (2 i / 9 - 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenreEffect {
    pub spread: f64,
}

impl GenreEffect {
    /// Spread matching per-genre spoiler rates between 2.2% and 7.5%.
    pub fn goodreads_like() -> Self {
        Self {
            spread: (7.5 - 2.2) / (7.5 + 2.2),
        }
    }

    pub fn rate(&self, base: f64, genre: usize) -> f64 {
        let t = 2.0 * genre as f64 / (GENRE_COUNT - 1) as f64 - 1.0;
        (base * (1.0 + self.spread * t)).clamp(1e-6, 1.0 - 1e-6)
    }
}

/// Spoilers are planted as runs of `min_run..=max_run` consecutive sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextEffect {
    pub min_run: usize,
    pub max_run: usize,
}

impl Default for ContextEffect {
    fn default() -> Self {
        Self { min_run: 2, max_run: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub doc_count: usize,
    /// Inclusive range of sentences per document.
    pub sentences_per_doc: (usize, usize),
    /// Inclusive range of words per sentence (marker included).
    pub words_per_sentence: (usize, usize),
    pub spoiler_rate: f64,
    pub marker_tokens: Vec<String>,
    /// Probability that a non-spoiler sentence also contains an (unannotated)
    /// marker token, making the marker ambiguous evidence. Under a context
    /// effect only sentences with no marker-bearing neighbour are eligible.
    pub decoy_rate: f64,
    pub filler_vocab_size: usize,
    pub genre_effect: Option<GenreEffect>,
    pub context_effect: Option<ContextEffect>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            doc_count: 100,
            sentences_per_doc: (1, 5),
            words_per_sentence: (4, 12),
            spoiler_rate: 0.2,
            marker_tokens: ["dies", "betrays", "killer", "twist"].map(String::from).to_vec(),
            decoy_rate: 0.0,
            filler_vocab_size: 300,
            genre_effect: None,
            context_effect: None,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.marker_tokens.is_empty() {
            return Err(Error::invalid("marker token list is empty"));
        }
        if self.marker_tokens.iter().any(|m| m.is_empty() || m.chars().any(|c| !c.is_alphanumeric())) {
            return Err(Error::invalid("marker tokens must be non-empty alphanumeric words"));
        }
        if !(self.spoiler_rate > 0.0 && self.spoiler_rate < 1.0) {
            return Err(Error::invalid(format!(
                "spoiler_rate must lie in (0, 1), got {}",
                self.spoiler_rate
            )));
        }
        if !(0.0..1.0).contains(&self.decoy_rate) {
            return Err(Error::invalid("decoy_rate must lie in [0, 1)"));
        }
        let (s0, s1) = self.sentences_per_doc;
        let (w0, w1) = self.words_per_sentence;
        if s0 == 0 || s0 > s1 || w0 == 0 || w0 > w1 {
            return Err(Error::invalid("sentence/word ranges must be non-empty and start at 1"));
        }
        if self.filler_vocab_size == 0 {
            return Err(Error::invalid("filler vocabulary must be non-empty"));
        }
        if let Some(ctx) = self.context_effect {
            if ctx.min_run < 2 || ctx.min_run > ctx.max_run {
                return Err(Error::invalid("context runs need 2 <= min_run <= max_run"));
            }
        }
        Ok(())
    }
}

const ONSETS: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Pronounceable pseudo-words that collide with neither markers nor genre aliases.
fn filler_words(count: usize, markers: &[String]) -> Vec<String> {
    let catalog = GenreCatalog::standard();
    let syllables: Vec<String> = ONSETS
        .iter()
        .flat_map(|o| VOWELS.iter().map(move |v| format!("{o}{v}")))
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut i = 0usize;
    while out.len() < count {
        let n = syllables.len();
        let word = match i {
            _ if i < n * n => format!("{}{}", syllables[i / n], syllables[i % n]),
            _ => {
                let j = i - n * n;
                format!("{}{}{}", syllables[j / (n * n) % n], syllables[j / n % n], syllables[j % n])
            }
        };
        i += 1;
        if markers.iter().any(|m| *m == word) || catalog.aliases().any(|a| a == word) {
            continue;
        }
        out.push(word);
    }
    out
}

fn sentence_labels(spec: &SyntheticSpec, n: usize, rate: f64, rng: &mut Rng) -> Vec<bool> {
    match spec.context_effect {
        None => (0..n).map(|_| rng.random_bool(rate)).collect(),
        Some(ctx) => {
            // Start probability q chosen so that the stationary spoiler share
            // q*L/(1 - q + q*L) matches `rate` for mean run length L.
            let mean_run = (ctx.min_run + ctx.max_run) as f64 / 2.0;
            let start = (rate / (mean_run - rate * (mean_run - 1.0))).clamp(0.0, 1.0);
            let mut labels = vec![false; n];
            let mut i = 0;
            while i < n {
                if n - i >= ctx.min_run && rng.random_bool(start) {
                    let len = rng.random_range(ctx.min_run..=ctx.max_run).min(n - i);
                    labels[i..i + len].iter_mut().for_each(|l| *l = true);
                    // a run is always followed by at least one clean sentence
                    i += len + 1;
                } else {
                    i += 1;
                }
            }
            labels
        }
    }
}

fn make_sentence(
    spec: &SyntheticSpec,
    filler: &[String],
    marker: Option<(&str, bool)>,
    rng: &mut Rng,
) -> SentenceRecord {
    let (w0, w1) = spec.words_per_sentence;
    let word_count = rng.random_range(w0..=w1);
    let mut words: Vec<&str> = (0..word_count)
        .map(|_| filler[rng.random_range(0..filler.len())].as_str())
        .collect();
    let mut annotated = None;
    if let Some((token, is_spoiler)) = marker {
        let slot = rng.random_range(0..word_count);
        words[slot] = token;
        if is_spoiler {
            annotated = Some(slot);
        }
    }
    let mut text = String::new();
    let mut spans = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(w);
        if annotated == Some(i) {
            spans.push(SpoilerSpan::new(start, start + w.chars().count()));
        }
    }
    text.push('.');
    SentenceRecord::new(text, spans)
}

fn genre_votes(rng: &mut Rng) -> (usize, BTreeMap<String, i64>) {
    let catalog = GenreCatalog::standard();
    let dominant = rng.random_range(0..GENRE_COUNT);
    let mut votes = BTreeMap::new();
    votes.insert(catalog.name(dominant).to_string(), rng.random_range(200..1000));
    for _ in 0..rng.random_range(0..=2) {
        let other = rng.random_range(0..GENRE_COUNT);
        if other != dominant {
            votes.insert(catalog.name(other).to_string(), rng.random_range(1..150));
        }
    }
    (dominant, votes)
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Vec<DocumentRecord>> {
    spec.validate()?;
    let filler = filler_words(spec.filler_vocab_size, &spec.marker_tokens);
    let mut rng = sub_rng(seed, "synthetic");
    let mut corpus = Vec::with_capacity(spec.doc_count);
    for d in 0..spec.doc_count {
        let (genre, votes) = match spec.genre_effect {
            Some(_) => {
                let (g, v) = genre_votes(&mut rng);
                (Some(g), v)
            }
            None => (None, BTreeMap::new()),
        };
        let rate = match (spec.genre_effect, genre) {
            (Some(effect), Some(g)) => effect.rate(spec.spoiler_rate, g),
            _ => spec.spoiler_rate,
        };
        let (s0, s1) = spec.sentences_per_doc;
        let n = rng.random_range(s0..=s1);
        let labels = sentence_labels(spec, n, rate, &mut rng);
        let mut has_marker = labels.clone();
        let mut sentences = Vec::with_capacity(n);
        for i in 0..n {
            let marker_idx = rng.random_range(0..spec.marker_tokens.len());
            let marker = spec.marker_tokens[marker_idx].as_str();
            // with runs, decoys stay isolated so neighbouring markers mean a run
            let eligible = spec.context_effect.is_none()
                || ((i == 0 || !has_marker[i - 1]) && (i + 1 == n || !labels[i + 1]));
            let plant = if labels[i] {
                Some((marker, true))
            } else if spec.decoy_rate > 0.0 && eligible && rng.random_bool(spec.decoy_rate) {
                has_marker[i] = true;
                Some((marker, false))
            } else {
                None
            };
            sentences.push(make_sentence(spec, &filler, plant, &mut rng));
        }
        let mut doc = DocumentRecord::new(format!("synth-{d:06}"), sentences);
        doc.genre_votes = votes;
        corpus.push(doc);
    }
    Ok(corpus)
}
