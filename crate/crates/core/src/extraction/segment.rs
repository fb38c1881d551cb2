//! Rule-based sentence segmentation over character offsets.

const TERMINATORS: [char; 4] = ['.', '!', '?', '…'];
const CLOSERS: [char; 9] = ['"', '\'', '”', '’', '»', ')', ']', '}', '›'];
const OPENERS: [char; 8] = ['"', '\'', '“', '‘', '«', '(', '[', '{'];

/// Lowercased words (without the final period) that never end a sentence.
const ABBREVIATIONS: [&str; 12] = [
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "prof", "vs", "e.g", "i.e", "etc",
];

fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = chars[start..dot]
        .iter()
        .skip_while(|c| OPENERS.contains(c))
        .flat_map(|c| c.to_lowercase())
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits `text` into `[start, end)` character ranges.
///
/// A sentence ends after a run of terminators (`. ! ? …`) plus any closing
/// quotes or brackets, when followed by whitespace or the end of the text.
/// A single period after a known abbreviation does not end a sentence, and
/// periods inside tokens such as `3.14` never do. Sentences never start or
/// end with whitespace; trailing text without a terminator is a sentence.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let skip_ws = |mut i: usize| {
        while i < n && chars[i].is_whitespace() {
            i += 1;
        }
        i
    };
    let mut out = Vec::new();
    let mut start = skip_ws(0);
    let mut j = start;
    while j < n {
        if !TERMINATORS.contains(&chars[j]) {
            j += 1;
            continue;
        }
        let mut k = j + 1;
        while k < n && TERMINATORS.contains(&chars[k]) {
            k += 1;
        }
        let single_period = chars[j] == '.' && k == j + 1;
        while k < n && CLOSERS.contains(&chars[k]) {
            k += 1;
        }
        let boundary = k == n || chars[k].is_whitespace();
        if boundary && !(single_period && is_abbreviation(&chars, j)) {
            out.push((start, k));
            start = skip_ws(k);
            j = start;
        } else {
            j = k;
        }
    }
    if start < n {
        let mut end = n;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        out.push((start, end));
    }
    out
}
