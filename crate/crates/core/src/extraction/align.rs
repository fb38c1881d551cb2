use super::AnnotatedText;
use crate::corpus::{SentenceRecord, SpoilerSpan};
use crate::error::{Error, Result};

/// Clips every global span to the sentences it intersects and re-bases it to
/// sentence-local offsets.
pub fn align_spans_to_sentences(
    annotated: &AnnotatedText,
    boundaries: &[(usize, usize)],
) -> Result<Vec<SentenceRecord>> {
    let chars: Vec<char> = annotated.text.chars().collect();
    for w in boundaries.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Alignment(format!(
                "sentence boundaries {:?} and {:?} overlap",
                w[0], w[1]
            )));
        }
    }
    if let Some(&(s, e)) = boundaries.iter().find(|(s, e)| s > e || *e > chars.len()) {
        return Err(Error::Alignment(format!(
            "sentence ({s}, {e}) is outside the text of length {}",
            chars.len()
        )));
    }
    for span in &annotated.spans {
        let uncovered = (span.start..span.end.min(chars.len())).find(|&c| {
            !chars[c].is_whitespace() && !boundaries.iter().any(|&(s, e)| s <= c && c < e)
        });
        if let Some(c) = uncovered {
            return Err(Error::Alignment(format!(
                "character {c} of span ({}, {}) lies outside every sentence",
                span.start, span.end
            )));
        }
    }
    let records = boundaries
        .iter()
        .map(|&(s, e)| {
            let text: String = chars[s..e].iter().collect();
            let spans: Vec<SpoilerSpan> = annotated
                .spans
                .iter()
                .filter_map(|sp| {
                    let lo = sp.start.max(s);
                    let hi = sp.end.min(e);
                    (lo < hi).then(|| SpoilerSpan::new(lo - s, hi - s))
                })
                .collect();
            SentenceRecord::new(text, spans)
        })
        .collect();
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(text: &str, spans: &[(usize, usize)]) -> AnnotatedText {
        AnnotatedText {
            text: text.into(),
            spans: spans.iter().map(|&(s, e)| SpoilerSpan::new(s, e)).collect(),
        }
    }

    #[test]
    fn rebases_to_second_sentence() {
        let out = align_spans_to_sentences(&at("Abc. Def.", &[(5, 8)]), &[(0, 4), (5, 9)]).unwrap();
        assert!(!out[0].label);
        assert_eq!(out[1].spans, vec![SpoilerSpan::new(0, 3)]);
        assert!(out[1].label);
    }

    #[test]
    fn clips_span_crossing_sentences() {
        let out = align_spans_to_sentences(&at("Abc. Def.", &[(2, 8)]), &[(0, 4), (5, 9)]).unwrap();
        assert_eq!(out[0].spans, vec![SpoilerSpan::new(2, 4)]);
        assert_eq!(out[1].spans, vec![SpoilerSpan::new(0, 3)]);
    }

    #[test]
    fn no_spans_no_labels() {
        let out = align_spans_to_sentences(&at("Abc. Def.", &[]), &[(0, 4), (5, 9)]).unwrap();
        assert!(out.iter().all(|s| !s.label));
    }

    #[test]
    fn uncovered_span_is_an_error() {
        let err = align_spans_to_sentences(&at("Abc. Def.", &[(5, 8)]), &[(0, 4)]);
        assert!(matches!(err, Err(Error::Alignment(_))));
    }
}
