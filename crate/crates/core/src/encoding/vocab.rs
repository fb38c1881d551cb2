use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{DocumentRecord, GenreCatalog};
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const CLS: TokenId = 2;
pub const SEP: TokenId = 3;

pub const RESERVED: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// A word piece of the input with its character range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Whitespace-separated words with every punctuation or symbol character
/// detached as its own piece.
pub fn word_pieces(text: &str, lowercase: bool) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    let push_word = |out: &mut Vec<Piece>, word: &mut String, start: usize, end: usize| {
        if !word.is_empty() {
            let text = if lowercase { word.to_lowercase() } else { word.clone() };
            out.push(Piece { text, start, end });
            word.clear();
        }
    };
    let mut idx = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if word.is_empty() {
                word_start = idx;
            }
            word.push(c);
        } else {
            push_word(&mut out, &mut word, word_start, idx);
            if !c.is_whitespace() {
                let text = if lowercase { c.to_lowercase().collect() } else { c.to_string() };
                out.push(Piece {
                    text,
                    start: idx,
                    end: idx + 1,
                });
            }
        }
        idx += 1;
    }
    push_word(&mut out, &mut word, word_start, idx);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    lowercase: bool,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, lowercase: bool) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self {
            tokens,
            index,
            lowercase,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn pieces(&self, text: &str) -> Vec<Piece> {
        word_pieces(text, self.lowercase)
    }

    /// Token-per-line file whose first four lines are the reserved tokens.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, lowercase)
    }

    pub fn parse(content: &str, lowercase: bool) -> Result<Self> {
        let tokens: Vec<String> = content.lines().map(str::to_string).collect();
        if tokens.len() < RESERVED.len() || tokens[..4] != RESERVED {
            return Err(Error::invalid(format!(
                "vocabulary must start with the reserved tokens {RESERVED:?}"
            )));
        }
        let vocab = Self::from_tokens(tokens, lowercase);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::invalid("vocabulary contains duplicate tokens"));
        }
        Ok(vocab)
    }
}

/// Word-level vocabulary over all sentences of `corpus`.
///
/// Ids after the reserved block are ordered by descending frequency, then
/// lexicographically. Genre aliases and the comma separating them are
/// always present.
pub fn build_vocab(corpus: &[DocumentRecord], min_frequency: usize, lowercase: bool) -> Result<Vocabulary> {
    if min_frequency < 1 {
        return Err(Error::invalid("min_frequency must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for s in &doc.sentences {
            for p in word_pieces(&s.text, lowercase) {
                *counts.entry(p.text).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_frequency)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    let catalog = GenreCatalog::standard();
    let forced = catalog
        .aliases()
        .map(str::to_string)
        .chain([",".to_string()]);
    for t in forced {
        if !kept.iter().any(|(k, _)| *k == t) {
            let c = counts.get(&t).copied().unwrap_or(0);
            kept.push((t, c));
        }
    }
    kept.retain(|(t, _)| !RESERVED.contains(&t.as_str()));
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Ok(Vocabulary::from_tokens(tokens, lowercase))
}
