use std::collections::BTreeMap;

use crate::corpus::{GenreCatalog, GENRE_COUNT};
use crate::error::{Error, Result};

pub type GenreVector = [f64; GENRE_COUNT];

fn check_votes(votes: &BTreeMap<String, i64>, catalog: &GenreCatalog) -> Result<()> {
    for (name, &v) in votes {
        if catalog.index_of(name).is_none() {
            return Err(Error::invalid(format!("unknown genre group {name:?}")));
        }
        if v < 0 {
            return Err(Error::invalid(format!("negative vote count {v} for {name:?}")));
        }
    }
    Ok(())
}

/// Share of votes per genre group in canonical order; all zeros when no
/// votes were cast.
pub fn genre_vote_vector(votes: &BTreeMap<String, i64>, catalog: &GenreCatalog) -> Result<GenreVector> {
    check_votes(votes, catalog)?;
    let mut out = [0.0; GENRE_COUNT];
    let total: i64 = votes.values().sum();
    if total == 0 {
        return Ok(out);
    }
    for (name, &v) in votes {
        out[catalog.index_of(name).expect("checked")] = v as f64 / total as f64;
    }
    Ok(out)
}

/// Aliases of genres with at least one vote, most-voted first (ties in
/// canonical order), joined by ", ". `None` when nothing was voted.
pub fn genre_suffix(votes: &BTreeMap<String, i64>, catalog: &GenreCatalog) -> Option<String> {
    let mut voted: Vec<(usize, i64)> = votes
        .iter()
        .filter_map(|(name, &v)| catalog.index_of(name).filter(|_| v > 0).map(|i| (i, v)))
        .collect();
    if voted.is_empty() {
        return None;
    }
    voted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Some(
        voted
            .iter()
            .map(|(i, _)| catalog.alias(*i))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

/// `text` followed by the genre alias listing.
pub fn append_genres_text(text: &str, votes: &BTreeMap<String, i64>, catalog: &GenreCatalog) -> String {
    match genre_suffix(votes, catalog) {
        Some(suffix) => format!("{text} {suffix}"),
        None => text.to_string(),
    }
}
