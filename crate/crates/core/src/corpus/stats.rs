use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DocumentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub spoiler_doc_count: usize,
    pub sentence_count: usize,
    pub spoiler_sentence_count: usize,
    pub spoiler_fraction: f64,
    pub sentences_per_doc_mean: f64,
    pub partial_spoiler_count: usize,
    pub bins: usize,
    /// Relative position `i/(n-1)` of spoiler sentences, `bins` equal bins over [0, 1].
    pub position_histogram: Vec<usize>,
    /// Maximal run length of consecutive spoiler sentences -> number of runs.
    pub run_length_histogram: BTreeMap<usize, usize>,
    /// Span coverage of span-annotated spoiler sentences, `bins` equal bins over [0, 1].
    pub coverage_histogram: Vec<usize>,
}

fn bin_of(value: f64, bins: usize) -> usize {
    ((value * bins as f64).floor() as usize).min(bins - 1)
}

pub fn corpus_stats(corpus: &[DocumentRecord], bins: usize) -> Result<CorpusStats> {
    if bins < 1 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("corpus_stats needs a non-empty corpus"));
    }
    let mut stats = CorpusStats {
        doc_count: corpus.len(),
        spoiler_doc_count: 0,
        sentence_count: 0,
        spoiler_sentence_count: 0,
        spoiler_fraction: 0.0,
        sentences_per_doc_mean: 0.0,
        partial_spoiler_count: 0,
        bins,
        position_histogram: vec![0; bins],
        run_length_histogram: BTreeMap::new(),
        coverage_histogram: vec![0; bins],
    };
    for doc in corpus {
        let n = doc.sentences.len();
        stats.sentence_count += n;
        stats.spoiler_doc_count += usize::from(doc.has_spoiler);
        let mut run = 0usize;
        for (i, s) in doc.sentences.iter().enumerate() {
            if !s.label {
                if run > 0 {
                    *stats.run_length_histogram.entry(run).or_default() += 1;
                }
                run = 0;
                continue;
            }
            run += 1;
            stats.spoiler_sentence_count += 1;
            let position = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            stats.position_histogram[bin_of(position, bins)] += 1;
            let len = s.char_len();
            if !s.spans.is_empty() && len > 0 {
                let covered = s.covered_chars();
                stats.coverage_histogram[bin_of(covered as f64 / len as f64, bins)] += 1;
                if covered * 10 < len * 9 {
                    stats.partial_spoiler_count += 1;
                }
            }
        }
        if run > 0 {
            *stats.run_length_histogram.entry(run).or_default() += 1;
        }
    }
    stats.spoiler_fraction = if stats.sentence_count == 0 {
        0.0
    } else {
        stats.spoiler_sentence_count as f64 / stats.sentence_count as f64
    };
    stats.sentences_per_doc_mean = stats.sentence_count as f64 / stats.doc_count as f64;
    Ok(stats)
}

impl CorpusStats {
    /// Aligned-column plain text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let rows: [(&str, String); 8] = [
            ("documents", self.doc_count.to_string()),
            ("spoiler documents", self.spoiler_doc_count.to_string()),
            ("sentences", self.sentence_count.to_string()),
            ("spoiler sentences", self.spoiler_sentence_count.to_string()),
            ("spoiler fraction", format!("{:.4}", self.spoiler_fraction)),
            ("sentences per document", format!("{:.4}", self.sentences_per_doc_mean)),
            ("partial spoilers", self.partial_spoiler_count.to_string()),
            ("bins", self.bins.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<24}{v:>12}");
        }
        let width = 1.0 / self.bins as f64;
        let _ = writeln!(out, "\n{:<24}{:>12}{:>12}", "bin", "position", "coverage");
        for b in 0..self.bins {
            let label = format!("[{:.3}, {:.3}{}", b as f64 * width, (b + 1) as f64 * width, if b + 1 == self.bins { "]" } else { ")" });
            let _ = writeln!(
                out,
                "{label:<24}{:>12}{:>12}",
                self.position_histogram[b], self.coverage_histogram[b]
            );
        }
        let _ = writeln!(out, "\n{:<24}{:>12}", "spoiler run length", "runs");
        for (len, count) in &self.run_length_histogram {
            let _ = writeln!(out, "{len:<24}{count:>12}");
        }
        out
    }
}
