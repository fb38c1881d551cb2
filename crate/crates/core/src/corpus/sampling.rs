use rand::seq::SliceRandom;

use super::DocumentRecord;
use crate::error::{Error, Result};
use crate::rng::sub_rng;

/// Keeps every document with a spoiler plus an equal-size seeded sample of
/// spoiler-free documents, then shuffles the union.
///
/// Balance is at document level only; sentence-level labels stay imbalanced.
pub fn balance_by_document(corpus: &[DocumentRecord], seed: u64) -> Result<Vec<DocumentRecord>> {
    let (spoiler, clean): (Vec<usize>, Vec<usize>) =
        (0..corpus.len()).partition(|&i| corpus[i].has_spoiler);
    if clean.len() < spoiler.len() {
        return Err(Error::InsufficientNegatives {
            spoiler: spoiler.len(),
            clean: clean.len(),
        });
    }
    let mut sampled = clean;
    sampled.shuffle(&mut sub_rng(seed, "balance/sample"));
    sampled.truncate(spoiler.len());

    let mut chosen: Vec<usize> = spoiler.into_iter().chain(sampled).collect();
    chosen.sort_unstable();
    chosen.shuffle(&mut sub_rng(seed, "balance/order"));
    Ok(chosen.into_iter().map(|i| corpus[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid(format!("split ratios must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<DocumentRecord>,
    pub validation: Vec<DocumentRecord>,
    pub test: Vec<DocumentRecord>,
}

/// Largest-remainder apportionment of `n` items over `ratios`; ties on the
/// fractional part go to the earlier bucket.
pub(crate) fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Document-level stratified split on `has_spoiler`. Each split keeps the
/// input order of its documents.
pub fn stratified_split(corpus: &[DocumentRecord], ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let weights = [ratios.train, ratios.validation, ratios.test];
    let mut membership = vec![0u8; corpus.len()];
    for (stratum, purpose) in [(true, "split/spoiler"), (false, "split/clean")] {
        let mut idx: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus[i].has_spoiler == stratum)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 3 {
            return Err(Error::invalid(format!(
                "stratum has_spoiler={stratum} has {} documents; at least 3 are needed to populate all splits",
                idx.len()
            )));
        }
        idx.shuffle(&mut sub_rng(seed, purpose));
        let counts = apportion(idx.len(), &weights);
        let mut cursor = 0;
        for (part, count) in counts.into_iter().enumerate() {
            for &i in &idx[cursor..cursor + count] {
                membership[i] = part as u8;
            }
            cursor += count;
        }
    }
    let mut split = Split::default();
    for (doc, part) in corpus.iter().zip(membership) {
        match part {
            0 => split.train.push(doc.clone()),
            1 => split.validation.push(doc.clone()),
            _ => split.test.push(doc.clone()),
        }
    }
    debug_assert_eq!(
        split.train.len() + split.validation.len() + split.test.len(),
        corpus.len()
    );
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SentenceRecord, SpoilerSpan};

    pub(crate) fn corpus(spoiler: usize, clean: usize) -> Vec<DocumentRecord> {
        let mut out = Vec::new();
        for i in 0..spoiler {
            out.push(DocumentRecord::new(
                format!("s{i}"),
                vec![SentenceRecord::new("He dies.", vec![SpoilerSpan::new(3, 7)])],
            ));
        }
        for i in 0..clean {
            out.push(DocumentRecord::new(
                format!("c{i}"),
                vec![SentenceRecord::new("Nice.", vec![])],
            ));
        }
        out
    }

    #[test]
    fn balance_counts() {
        let c = corpus(10, 90);
        let b = balance_by_document(&c, 1).unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(b.iter().filter(|d| d.has_spoiler).count(), 10);
        assert_eq!(b, balance_by_document(&c, 1).unwrap());
        assert_ne!(b, balance_by_document(&c, 2).unwrap());
    }

    #[test]
    fn balance_without_spoilers_is_empty() {
        assert!(balance_by_document(&corpus(0, 5), 3).unwrap().is_empty());
    }

    #[test]
    fn balance_insufficient_clean_documents() {
        let err = balance_by_document(&corpus(5, 2), 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('5') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn split_exact_divisibility() {
        let s = stratified_split(&corpus(100, 100), SplitRatios::default(), 4).unwrap();
        let pos = |d: &[DocumentRecord]| d.iter().filter(|x| x.has_spoiler).count();
        assert_eq!((s.train.len(), pos(&s.train)), (160, 80));
        assert_eq!((s.validation.len(), pos(&s.validation)), (20, 10));
        assert_eq!((s.test.len(), pos(&s.test)), (20, 10));
    }

    #[test]
    fn split_small_strata() {
        let s = stratified_split(&corpus(10, 10), SplitRatios::default(), 4).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (16, 2, 2));
        assert_eq!(s, stratified_split(&corpus(10, 10), SplitRatios::default(), 4).unwrap());
        assert!(stratified_split(&corpus(2, 10), SplitRatios::default(), 4).is_err());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let bad = SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.2,
        };
        assert!(stratified_split(&corpus(10, 10), bad, 0).is_err());
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(10, &[0.8, 0.1, 0.1]), vec![8, 1, 1]);
        assert_eq!(apportion(7, &[0.8, 0.1, 0.1]), vec![5, 1, 1]);
        assert_eq!(apportion(3, &[0.8, 0.1, 0.1]), vec![3, 0, 0]);
    }
}
