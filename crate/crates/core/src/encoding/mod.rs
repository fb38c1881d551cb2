//! Vocabulary, special-token encoding, genre encodings and sentence packing.

mod encode;
mod genre;
mod packing;
mod vocab;

pub use encode::{
    encode_sentence, encode_sentence_with_genres, encode_sequence, EncodedInput, Readout, Segment,
    TokenAlignment, MAX_SEQUENCE,
};
pub use genre::{append_genres_text, genre_suffix, genre_vote_vector, GenreVector};
pub use packing::{even_split, group_ranges, recursive_split};
pub use vocab::{build_vocab, word_pieces, Piece, TokenId, Vocabulary, CLS, PAD, RESERVED, SEP, UNK};
