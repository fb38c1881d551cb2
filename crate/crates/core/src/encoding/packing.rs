//! Grouping a document's sentences into packed sequences.

use std::ops::Range;

/// `⌈n/threshold⌉` groups whose sizes differ by at most one; the first
/// `n mod k` groups take the larger size.
pub fn even_split(n_sentences: usize, threshold: usize) -> Vec<usize> {
    assert!(n_sentences >= 1 && threshold >= 1, "even_split needs n >= 1 and threshold >= 1");
    let k = n_sentences.div_ceil(threshold);
    let base = n_sentences / k;
    let extra = n_sentences % k;
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

/// Halves the sentence list recursively (floor half first) until every part
/// fits the threshold.
pub fn recursive_split(n_sentences: usize, threshold: usize) -> Vec<usize> {
    assert!(n_sentences >= 1 && threshold >= 1, "recursive_split needs n >= 1 and threshold >= 1");
    fn go(n: usize, t: usize, out: &mut Vec<usize>) {
        if n <= t {
            out.push(n);
        } else {
            go(n / 2, t, out);
            go(n - n / 2, t, out);
        }
    }
    let mut out = Vec::new();
    go(n_sentences, threshold, &mut out);
    out
}

/// Consecutive index ranges for group sizes.
pub fn group_ranges(sizes: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_examples() {
        assert_eq!(even_split(9, 4), vec![3, 3, 3]);
        assert_eq!(even_split(10, 4), vec![4, 3, 3]);
        assert_eq!(even_split(3, 5), vec![3]);
    }

    #[test]
    fn recursive_examples() {
        assert_eq!(recursive_split(9, 4), vec![4, 2, 3]);
        assert_eq!(recursive_split(4, 4), vec![4]);
        assert_eq!(recursive_split(16, 4), vec![4, 4, 4, 4]);
    }

    #[test]
    fn ranges_are_consecutive() {
        assert_eq!(group_ranges(&[2, 1, 3]), vec![0..2, 2..3, 3..6]);
    }
}
