use serde::{Deserialize, Serialize};

use super::vocab::{Piece, TokenId, Vocabulary, CLS, PAD, SEP};
use crate::error::{Error, Result};

/// Upper bound on packed input length.
pub const MAX_SEQUENCE: usize = 512;

/// Where the classifier reads its targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    /// One target at the `[CLS]` position.
    Cls,
    /// One target per sentence-terminating `[SEP]`.
    Separators,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Sentence(usize),
    Genre,
}

/// Source characters of a non-special token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAlignment {
    pub position: usize,
    pub segment: Segment,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<TokenId>,
    pub cls_position: usize,
    /// Separator terminating each packed sentence.
    pub sep_positions: Vec<usize>,
    pub genre_token_mask: Vec<bool>,
    pub char_alignment: Vec<TokenAlignment>,
    pub readout: Readout,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn target_count(&self) -> usize {
        self.sep_positions.len()
    }

    /// Positions the classifier reads, one per target.
    pub fn target_positions(&self) -> Vec<usize> {
        match self.readout {
            Readout::Cls => vec![self.cls_position],
            Readout::Separators => self.sep_positions.clone(),
        }
    }

    /// Length without trailing padding.
    pub fn true_len(&self) -> usize {
        self.ids.iter().rposition(|&id| id != PAD).map_or(0, |p| p + 1)
    }

    pub fn key_mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&id| id != PAD).collect()
    }

    /// Right-pads with `[PAD]` up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        if len > out.ids.len() {
            out.ids.resize(len, PAD);
            out.genre_token_mask.resize(len, false);
        }
        out
    }
}

struct Builder {
    ids: Vec<TokenId>,
    sep_positions: Vec<usize>,
    genre_token_mask: Vec<bool>,
    char_alignment: Vec<TokenAlignment>,
}

impl Builder {
    fn new() -> Self {
        Self {
            ids: vec![CLS],
            sep_positions: Vec::new(),
            genre_token_mask: vec![false],
            char_alignment: Vec::new(),
        }
    }

    fn push_pieces(&mut self, vocab: &Vocabulary, pieces: &[Piece], segment: Segment, genre_aliases: bool) {
        for p in pieces {
            let position = self.ids.len();
            self.ids.push(vocab.id(&p.text));
            let is_alias = genre_aliases && p.text.chars().all(char::is_alphanumeric);
            self.genre_token_mask.push(is_alias);
            self.char_alignment.push(TokenAlignment {
                position,
                segment,
                start: p.start,
                end: p.end,
            });
        }
    }

    fn push_sep(&mut self) {
        self.sep_positions.push(self.ids.len());
        self.ids.push(SEP);
        self.genre_token_mask.push(false);
    }

    fn finish(self, readout: Readout) -> EncodedInput {
        EncodedInput {
            ids: self.ids,
            cls_position: 0,
            sep_positions: self.sep_positions,
            genre_token_mask: self.genre_token_mask,
            char_alignment: self.char_alignment,
            readout,
        }
    }
}

/// `[CLS] tokens… [SEP]`, dropping tokens from the tail beyond `max_pieces`.
pub fn encode_sentence(text: &str, vocab: &Vocabulary, max_pieces: usize) -> Result<EncodedInput> {
    encode_sentence_with_genres(text, None, vocab, max_pieces)
}

/// Single-sentence input with the genre listing appended before `[SEP]`.
/// The sentence is truncated first so the genre tokens survive.
pub fn encode_sentence_with_genres(
    text: &str,
    genre_suffix: Option<&str>,
    vocab: &Vocabulary,
    max_pieces: usize,
) -> Result<EncodedInput> {
    if max_pieces < 3 {
        return Err(Error::invalid(format!("max_pieces must be at least 3, got {max_pieces}")));
    }
    let budget = max_pieces - 2;
    let mut genre = genre_suffix.map(|g| vocab.pieces(g)).unwrap_or_default();
    genre.truncate(budget);
    let mut pieces = vocab.pieces(text);
    pieces.truncate(budget - genre.len());
    let mut b = Builder::new();
    b.push_pieces(vocab, &pieces, Segment::Sentence(0), false);
    b.push_pieces(vocab, &genre, Segment::Genre, true);
    b.push_sep();
    Ok(b.finish(Readout::Cls))
}

/// Shrinks per-sentence token counts until they fit `budget`, always taking
/// from the currently longest sentence (the later one on ties) and never below 1.
fn fit_budget(lengths: &mut [usize], budget: usize) {
    let mut total: usize = lengths.iter().sum();
    while total > budget {
        let (idx, &longest) = lengths
            .iter()
            .enumerate()
            .max_by_key(|(_, &l)| l)
            .expect("non-empty");
        if longest <= 1 {
            break;
        }
        lengths[idx] -= 1;
        total -= 1;
    }
}

/// `[CLS] s1 [SEP] s2 [SEP] … sk [genre…] [SEP]` with one target per
/// separator. Over-long inputs are shortened longest-sentence-first so that
/// every sentence keeps at least one token and all separators survive.
pub fn encode_sequence(
    sentences: &[&str],
    vocab: &Vocabulary,
    max_pieces: usize,
    genre_suffix: Option<&str>,
    context_size: usize,
) -> Result<EncodedInput> {
    let k = sentences.len();
    if k == 0 {
        return Err(Error::invalid("encode_sequence needs at least one sentence"));
    }
    if k > context_size {
        return Err(Error::invalid(format!(
            "{k} sentences exceed the context size {context_size}"
        )));
    }
    if max_pieces > MAX_SEQUENCE {
        return Err(Error::invalid(format!(
            "max_pieces {max_pieces} exceeds the sequence limit {MAX_SEQUENCE}"
        )));
    }
    if max_pieces < 1 + 2 * k {
        return Err(Error::invalid(format!(
            "max_pieces {max_pieces} cannot hold {k} sentences with separators"
        )));
    }
    let budget = max_pieces - 1 - k;
    let mut pieces: Vec<Vec<Piece>> = sentences.iter().map(|s| vocab.pieces(s)).collect();
    let non_empty = pieces.iter().filter(|p| !p.is_empty()).count();
    let mut genre = genre_suffix.map(|g| vocab.pieces(g)).unwrap_or_default();
    genre.truncate(budget.saturating_sub(non_empty));
    let mut lengths: Vec<usize> = pieces.iter().map(Vec::len).collect();
    fit_budget(&mut lengths, budget - genre.len());
    let mut b = Builder::new();
    for (i, (p, &len)) in pieces.iter_mut().zip(&lengths).enumerate() {
        p.truncate(len);
        b.push_pieces(vocab, p, Segment::Sentence(i), false);
        if i + 1 < k {
            b.push_sep();
        }
    }
    b.push_pieces(vocab, &genre, Segment::Genre, true);
    b.push_sep();
    Ok(b.finish(Readout::Separators))
}
