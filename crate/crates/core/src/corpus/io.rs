use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{validate_record_with, Annotation, DocumentRecord, SentenceRecord, SpoilerSpan};
use crate::error::{Error, Result};

/// On-disk JSONL record layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    /// `{"id","url","trope","has_spoiler","sentences":[["text",bool,[[start,end],...]],...]}`
    TvtropesBooks,
    /// `{"id","book_id","genres":{name:votes},"sentences":[["text",bool],...]}`
    Goodreads,
}

impl Schema {
    fn annotation(self) -> Annotation {
        match self {
            Schema::TvtropesBooks => Annotation::WordLevel,
            Schema::Goodreads => Annotation::SentenceLevel,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::TvtropesBooks => "tvtropes-books",
            Schema::Goodreads => "goodreads",
        })
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tvtropes-books" | "tvtropes" => Ok(Schema::TvtropesBooks),
            "goodreads" => Ok(Schema::Goodreads),
            other => Err(Error::invalid(format!(
                "unknown schema {other:?} (expected tvtropes-books or goodreads)"
            ))),
        }
    }
}

// Genre votes are not part of the published TV Tropes layout; they are only
// written when present so synthetic corpora can carry both spans and genres.
#[derive(Serialize, Deserialize)]
struct TvtropesLine {
    id: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    trope: Option<String>,
    has_spoiler: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    genres: BTreeMap<String, i64>,
    sentences: Vec<(String, bool, Vec<(usize, usize)>)>,
}

#[derive(Serialize, Deserialize)]
struct GoodreadsLine {
    id: String,
    #[serde(default)]
    book_id: Option<String>,
    #[serde(default)]
    genres: BTreeMap<String, i64>,
    sentences: Vec<(String, bool)>,
}

fn spans_from(raw: Vec<(usize, usize)>) -> Vec<SpoilerSpan> {
    raw.into_iter().map(|(s, e)| SpoilerSpan::new(s, e)).collect()
}

fn decode_line(line: &str, schema: Schema) -> serde_json::Result<DocumentRecord> {
    Ok(match schema {
        Schema::TvtropesBooks => {
            let raw: TvtropesLine = serde_json::from_str(line)?;
            DocumentRecord {
                id: raw.id,
                url: raw.url,
                trope: raw.trope,
                book_id: None,
                genre_votes: raw.genres,
                sentences: raw
                    .sentences
                    .into_iter()
                    .map(|(text, label, spans)| SentenceRecord {
                        text,
                        label,
                        spans: spans_from(spans),
                    })
                    .collect(),
                has_spoiler: raw.has_spoiler,
            }
        }
        Schema::Goodreads => {
            let raw: GoodreadsLine = serde_json::from_str(line)?;
            let sentences: Vec<_> = raw
                .sentences
                .into_iter()
                .map(|(text, label)| SentenceRecord::labelled(text, label))
                .collect();
            let has_spoiler = sentences.iter().any(|s| s.label);
            DocumentRecord {
                id: raw.id,
                url: None,
                trope: None,
                book_id: raw.book_id,
                genre_votes: raw.genres,
                sentences,
                has_spoiler,
            }
        }
    })
}

fn encode_record(doc: &DocumentRecord, schema: Schema) -> String {
    let out = match schema {
        Schema::TvtropesBooks => serde_json::to_string(&TvtropesLine {
            id: doc.id.clone(),
            url: doc.url.clone(),
            trope: doc.trope.clone(),
            has_spoiler: doc.has_spoiler,
            genres: doc.genre_votes.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| {
                    let spans = s.spans.iter().map(|sp| (sp.start, sp.end)).collect();
                    (s.text.clone(), s.label, spans)
                })
                .collect(),
        }),
        Schema::Goodreads => serde_json::to_string(&GoodreadsLine {
            id: doc.id.clone(),
            book_id: doc.book_id.clone(),
            genres: doc.genre_votes.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| (s.text.clone(), s.label))
                .collect(),
        }),
    };
    out.expect("records always serialize")
}

/// Parses JSONL content; `origin` is only used in error messages.
pub fn parse_corpus(content: &str, schema: Schema, origin: &Path) -> Result<Vec<DocumentRecord>> {
    let mut docs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc = decode_line(line, schema).map_err(|e| Error::Json {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let violations = validate_record_with(&doc, schema.annotation());
        if !violations.is_empty() {
            return Err(Error::Validation {
                id: doc.id,
                violations,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>, schema: Schema) -> Result<Vec<DocumentRecord>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content, schema, path)
}

pub fn to_jsonl(corpus: &[DocumentRecord], schema: Schema) -> String {
    let mut out = String::new();
    for doc in corpus {
        out.push_str(&encode_record(doc, schema));
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[DocumentRecord], schema: Schema) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(corpus, schema)).map_err(|e| Error::io(path, e))
}
