//! Faithfulness of predictions to annotated spoiler spans, and the share of
//! classification attention spent on appended genre tokens.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::corpus::{is_partial_spoiler, DocumentRecord, SpoilerSpan};
use crate::encoding::{EncodedInput, CLS, PAD, SEP};
use crate::error::{Error, Result};
use crate::model::{attention_of_cls, ForwardOutput};
use crate::rng::sub_rng;

/// A sentence addressed by document id and index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub document_id: String,
    pub sentence_index: usize,
}

/// Partial spoiler sentences, optionally only those with exactly one span.
pub fn select_partial_single_span(corpus: &[DocumentRecord], single_span_only: bool) -> Vec<SentenceRef> {
    let mut out = Vec::new();
    for doc in corpus {
        for (i, s) in doc.sentences.iter().enumerate() {
            if !s.label || s.spans.is_empty() {
                continue;
            }
            if single_span_only && s.spans.len() != 1 {
                continue;
            }
            if let Ok(true) = is_partial_spoiler(s) {
                out.push(SentenceRef {
                    document_id: doc.id.clone(),
                    sentence_index: i,
                });
            }
        }
    }
    out
}

/// Uniform seeded sample of `fraction` of `items` (at least one when
/// `items` is non-empty), in original order.
pub fn sample_fraction<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("sample fraction {fraction} outside (0, 1]")));
    }
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let k = ((items.len() as f64 * fraction).round() as usize).clamp(1, items.len());
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut sub_rng(seed, "analyze/sample"));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| items[i].clone()).collect())
}

fn collapse_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Deletes the characters inside `spans`, then collapses whitespace runs and
/// trims. Without spans the text is returned unchanged.
pub fn mask_spoiler(text: &str, spans: &[SpoilerSpan]) -> String {
    if spans.is_empty() {
        return text.to_string();
    }
    let kept: String = text
        .chars()
        .enumerate()
        .filter(|(i, _)| !spans.iter().any(|s| s.start <= *i && *i < s.end))
        .map(|(_, c)| c)
        .collect();
    collapse_spaces(&kept)
}

/// The span substrings in order, joined by single spaces.
pub fn keep_only_spoiler(text: &str, spans: &[SpoilerSpan]) -> Result<String> {
    if spans.is_empty() {
        return Err(Error::invalid("keep_only_spoiler needs at least one span"));
    }
    let chars: Vec<char> = text.chars().collect();
    let parts: Vec<String> = spans
        .iter()
        .map(|s| chars[s.start.min(chars.len())..s.end.min(chars.len())].iter().collect())
        .collect();
    Ok(parts.join(" "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub document_id: String,
    pub sentence_index: usize,
    pub original: f64,
    pub perturbed: f64,
    /// `original − perturbed` for comprehensiveness, `perturbed − original`
    /// for sufficiency.
    pub delta: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    Comprehensiveness,
    Sufficiency,
}

pub const DELTA_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSummary {
    pub kind: Perturbation,
    pub samples: usize,
    /// Fraction of samples with `delta > 0`: the probability dropped
    /// (comprehensiveness) or rose (sufficiency).
    pub positive_delta_fraction: f64,
    /// Fraction with `perturbed / original ≥ 0.9`.
    pub ratio_at_least_0_9_fraction: f64,
    pub mean_delta: f64,
    /// Counts of `delta` over equal-width bins spanning `[-1, 1]`.
    pub delta_histogram: Vec<usize>,
}

fn summarize(kind: Perturbation, results: &[PerturbationResult]) -> PerturbationSummary {
    let n = results.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let mut hist = vec![0; DELTA_BINS];
    for r in results {
        let b = (((r.delta + 1.0) / 2.0 * DELTA_BINS as f64).floor() as isize).clamp(0, DELTA_BINS as isize - 1);
        hist[b as usize] += 1;
    }
    PerturbationSummary {
        kind,
        samples: n,
        positive_delta_fraction: frac(results.iter().filter(|r| r.delta > 0.0).count()),
        ratio_at_least_0_9_fraction: frac(results.iter().filter(|r| r.ratio >= 0.9).count()),
        mean_delta: if n == 0 { 0.0 } else { results.iter().map(|r| r.delta).sum::<f64>() / n as f64 },
        delta_histogram: hist,
    }
}

fn perturb(
    kind: Perturbation,
    classifier: &Classifier,
    corpus: &[DocumentRecord],
    selection: &[SentenceRef],
) -> Result<(Vec<PerturbationResult>, PerturbationSummary)> {
    if selection.is_empty() {
        return Err(Error::invalid("no sentences selected for analysis"));
    }
    let by_id: BTreeMap<&str, &DocumentRecord> = corpus.iter().map(|d| (d.id.as_str(), d)).collect();
    let results: Result<Vec<PerturbationResult>> = selection
        .par_iter()
        .map(|r| {
            let doc = by_id
                .get(r.document_id.as_str())
                .ok_or_else(|| Error::invalid(format!("unknown document {:?}", r.document_id)))?;
            let s = doc.sentences.get(r.sentence_index).ok_or_else(|| {
                Error::invalid(format!("document {:?} has no sentence {}", r.document_id, r.sentence_index))
            })?;
            let text = match kind {
                Perturbation::Comprehensiveness => mask_spoiler(&s.text, &s.spans),
                Perturbation::Sufficiency => keep_only_spoiler(&s.text, &s.spans)?,
            };
            let original = classifier.predict_sentence(&s.text, &doc.genre_votes)?;
            let perturbed = if text == s.text {
                original
            } else {
                classifier.predict_sentence(&text, &doc.genre_votes)?
            };
            let delta = match kind {
                Perturbation::Comprehensiveness => original - perturbed,
                Perturbation::Sufficiency => perturbed - original,
            };
            Ok(PerturbationResult {
                document_id: r.document_id.clone(),
                sentence_index: r.sentence_index,
                original,
                perturbed,
                delta,
                ratio: perturbed / original,
            })
        })
        .collect();
    let results = results?;
    let summary = summarize(kind, &results);
    Ok((results, summary))
}

/// Probability change when the spoiler spans are removed.
pub fn comprehensiveness(
    classifier: &Classifier,
    corpus: &[DocumentRecord],
    selection: &[SentenceRef],
) -> Result<(Vec<PerturbationResult>, PerturbationSummary)> {
    perturb(Perturbation::Comprehensiveness, classifier, corpus, selection)
}

/// Probability change when only the spoiler spans are kept.
pub fn sufficiency(
    classifier: &Classifier,
    corpus: &[DocumentRecord],
    selection: &[SentenceRef],
) -> Result<(Vec<PerturbationResult>, PerturbationSummary)> {
    perturb(Perturbation::Sufficiency, classifier, corpus, selection)
}

/// Content positions: neither `[CLS]`, `[SEP]` nor padding.
fn is_content(id: u32) -> bool {
    id != CLS && id != SEP && id != PAD
}

/// Head-averaged classification attention row with the `[CLS]`, `[SEP]` and
/// padding columns zeroed, renormalized to sum to one.
pub fn renormalized_cls_row(rows: &[Vec<f64>], input: &EncodedInput) -> Vec<f64> {
    let t = input.len();
    let mut avg = vec![0.0; t];
    for row in rows {
        for (a, v) in avg.iter_mut().zip(row) {
            *a += v / rows.len() as f64;
        }
    }
    for (a, &id) in avg.iter_mut().zip(&input.ids) {
        if !is_content(id) {
            *a = 0.0;
        }
    }
    let total: f64 = avg.iter().sum();
    if total > 0.0 {
        avg.iter_mut().for_each(|a| *a /= total);
    }
    avg
}

/// `(share, baseline)` for one input and per-head attention rows of the
/// classification query; `None` when the input has no genre tokens.
pub fn genre_share_of_rows(rows: &[Vec<f64>], input: &EncodedInput) -> Option<(f64, f64)> {
    let genre = (0..input.len()).filter(|&i| input.genre_token_mask[i] && is_content(input.ids[i])).count();
    if genre == 0 {
        return None;
    }
    let content = input.ids.iter().filter(|&&id| is_content(id)).count();
    let row = renormalized_cls_row(rows, input);
    let share = row
        .iter()
        .zip(&input.genre_token_mask)
        .filter(|(_, &g)| g)
        .map(|(a, _)| a)
        .sum();
    Some((share, genre as f64 / content as f64))
}

/// Share for `layer` (1-based) of a forward that retained attention.
pub fn genre_share(output: &ForwardOutput, input: &EncodedInput, layer: usize) -> Result<Option<(f64, f64)>> {
    let rows = attention_of_cls(output, layer)?;
    Ok(genre_share_of_rows(&rows, input))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareClass {
    Spoiler,
    NonSpoiler,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub layer: usize,
    pub class: ShareClass,
    pub baseline: f64,
    pub real: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionShareReport {
    pub rows: Vec<ShareRow>,
    /// Inputs without genre tokens.
    pub skipped: usize,
}

impl AttentionShareReport {
    pub fn get(&self, layer: usize, class: ShareClass) -> Option<&ShareRow> {
        self.rows.iter().find(|r| r.layer == layer && r.class == class)
    }
}

/// One analysed input: its label and the per-layer `(share, baseline)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareObservation {
    pub label: bool,
    pub per_layer: Vec<(usize, f64, f64)>,
}

/// Mean share and mean per-sample baseline per layer and class.
pub fn aggregate_shares(observations: &[ShareObservation], layers: &[usize], skipped: usize) -> AttentionShareReport {
    let mut rows = Vec::new();
    for &layer in layers {
        for class in [ShareClass::Spoiler, ShareClass::NonSpoiler, ShareClass::Both] {
            let mut n = 0;
            let (mut real, mut base) = (0.0, 0.0);
            for o in observations {
                let keep = match class {
                    ShareClass::Spoiler => o.label,
                    ShareClass::NonSpoiler => !o.label,
                    ShareClass::Both => true,
                };
                if let (true, Some(&(_, s, b))) = (keep, o.per_layer.iter().find(|(l, _, _)| *l == layer)) {
                    n += 1;
                    real += s;
                    base += b;
                }
            }
            let (real, baseline) = if n == 0 { (0.0, 0.0) } else { (real / n as f64, base / n as f64) };
            rows.push(ShareRow {
                layer,
                class,
                baseline,
                real,
                samples: n,
            });
        }
    }
    AttentionShareReport { rows, skipped }
}

/// Genre attention share of single-sentence inputs in the given layers
/// (1-based), by class.
pub fn genre_attention_share(
    classifier: &Classifier,
    items: &[(&str, &BTreeMap<String, i64>, bool)],
    layers: &[usize],
) -> Result<AttentionShareReport> {
    let depth = classifier.params.config.layers;
    if let Some(&bad) = layers.iter().find(|&&l| l == 0 || l > depth) {
        return Err(Error::invalid(format!("layer {bad} outside 1..={depth}")));
    }
    let observed: Result<Vec<Option<ShareObservation>>> = items
        .par_iter()
        .map(|&(text, votes, label)| {
            let (input, out) = classifier.attend_sentence(text, votes)?;
            let mut per_layer = Vec::with_capacity(layers.len());
            for &l in layers {
                match genre_share(&out, &input, l)? {
                    Some((s, b)) => per_layer.push((l, s, b)),
                    None => return Ok(None),
                }
            }
            Ok(Some(ShareObservation { label, per_layer }))
        })
        .collect();
    let observed = observed?;
    let skipped = observed.iter().filter(|o| o.is_none()).count();
    let observations: Vec<ShareObservation> = observed.into_iter().flatten().collect();
    Ok(aggregate_shares(&observations, layers, skipped))
}

/// The last two layers, or just the last one for single-layer models.
pub fn last_two_layers(depth: usize) -> Vec<usize> {
    if depth >= 2 {
        vec![depth - 1, depth]
    } else {
        vec![depth]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceRecord;
    use crate::encoding::Readout;

    #[test]
    fn mask_examples() {
        let sp = [SpoilerSpan::new(3, 7)];
        assert_eq!(mask_spoiler("He dies at dawn.", &sp), "He at dawn.");
        assert_eq!(mask_spoiler("He  dies", &[]), "He  dies");
        assert_eq!(mask_spoiler("abc", &[SpoilerSpan::new(0, 3)]), "");
    }

    #[test]
    fn keep_examples() {
        assert_eq!(keep_only_spoiler("He dies at dawn.", &[SpoilerSpan::new(3, 7)]).unwrap(), "dies");
        let sp = [SpoilerSpan::new(0, 2), SpoilerSpan::new(8, 10)];
        assert_eq!(keep_only_spoiler("ab cdef gh", &sp).unwrap(), "ab gh");
        assert_eq!(keep_only_spoiler("abc", &[SpoilerSpan::new(0, 3)]).unwrap(), "abc");
        assert!(keep_only_spoiler("abc", &[]).is_err());
    }

    #[test]
    fn selection_filters() {
        let full = SentenceRecord::new("abcdefghij", vec![SpoilerSpan::new(0, 10)]);
        let partial = SentenceRecord::new("abcdefghij", vec![SpoilerSpan::new(0, 4)]);
        let two = SentenceRecord::new("abcdefghij", vec![SpoilerSpan::new(0, 2), SpoilerSpan::new(5, 6)]);
        let doc = DocumentRecord::new("d", vec![full, partial, two]);
        let all = select_partial_single_span(std::slice::from_ref(&doc), false);
        assert_eq!(all.iter().map(|r| r.sentence_index).collect::<Vec<_>>(), vec![1, 2]);
        let single = select_partial_single_span(&[doc], true);
        assert_eq!(single.iter().map(|r| r.sentence_index).collect::<Vec<_>>(), vec![1]);
    }

    fn genre_input(content: usize, genre: usize) -> EncodedInput {
        let mut ids = vec![CLS];
        let mut mask = vec![false];
        for i in 0..content {
            ids.push(10 + i as u32);
            mask.push(i >= content - genre);
        }
        ids.push(SEP);
        mask.push(false);
        EncodedInput {
            cls_position: 0,
            sep_positions: vec![ids.len() - 1],
            genre_token_mask: mask,
            char_alignment: Vec::new(),
            readout: Readout::Cls,
            ids,
        }
    }

    #[test]
    fn uniform_attention_matches_baseline() {
        let input = genre_input(8, 2);
        let rows = vec![vec![0.1; 10], vec![0.1; 10]];
        let (share, base) = genre_share_of_rows(&rows, &input).unwrap();
        assert!((share - 0.25).abs() < 1e-12);
        assert_eq!(base, 0.25);
    }

    #[test]
    fn concentrated_attention() {
        let input = genre_input(8, 2);
        let mut row = vec![0.0; 10];
        row[8] = 1.0;
        assert_eq!(genre_share_of_rows(&[row], &input).unwrap().0, 1.0);
        assert!(genre_share_of_rows(&[vec![0.1; 10]], &genre_input(8, 0)).is_none());
    }

    #[test]
    fn sampling_is_seeded_and_ordered() {
        let items: Vec<usize> = (0..100).collect();
        let a = sample_fraction(&items, 0.1, 3).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, sample_fraction(&items, 0.1, 3).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_fraction(&items, 0.0, 3).is_err());
    }
}
