use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{annotate_entry, extract_entries, pages::canonical_url};
use crate::corpus::{is_partial_spoiler, save_corpus, DocumentRecord, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub pages: usize,
    pub skipped_pages: usize,
    pub entries: usize,
    pub documents: usize,
    pub sentences: usize,
    pub spoiler_sentences: usize,
    pub partial_spoilers: usize,
}

/// Returns the number of entries found and the non-empty documents built from them.
fn page_documents(path: &Path, spoiler_class: &str) -> Result<(usize, Vec<DocumentRecord>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let page = String::from_utf8(bytes)
        .map_err(|e| Error::invalid(format!("{} is not UTF-8: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let url = canonical_url(&page).unwrap_or_else(|| path.display().to_string());
    let entries = extract_entries(&page, &url);
    let count = entries.len();
    let mut docs = Vec::new();
    for (idx, entry) in entries.into_iter().enumerate() {
        let sentences = annotate_entry(&entry.markup, spoiler_class)?;
        if sentences.is_empty() {
            continue;
        }
        let mut doc = DocumentRecord::new(format!("{stem}#{idx}"), sentences);
        doc.url = Some(entry.url);
        doc.trope = Some(entry.trope);
        docs.push(doc);
    }
    Ok((count, docs))
}

fn html_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|x| x.eq_ignore_ascii_case("html") || x.eq_ignore_ascii_case("htm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Builds the span-annotated dataset from a directory of stored pages.
///
/// Pages that fail to read or parse are logged and skipped as a whole.
/// Documents are ordered by (file name, entry index).
pub fn build_dataset(
    snapshot_dir: impl AsRef<Path>,
    output_path: impl AsRef<Path>,
    spoiler_class: &str,
) -> Result<BuildSummary> {
    let files = html_files(snapshot_dir.as_ref())?;
    let per_page: Vec<(PathBuf, Result<(usize, Vec<DocumentRecord>)>)> = files
        .into_par_iter()
        .map(|p| {
            let docs = page_documents(&p, spoiler_class);
            (p, docs)
        })
        .collect();

    let mut summary = BuildSummary::default();
    let mut corpus = Vec::new();
    for (path, result) in per_page {
        summary.pages += 1;
        match result {
            Ok((entries, docs)) => {
                summary.entries += entries;
                corpus.extend(docs);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                summary.skipped_pages += 1;
            }
        }
    }
    summary.documents = corpus.len();
    for doc in &corpus {
        summary.sentences += doc.sentences.len();
        for s in doc.sentences.iter().filter(|s| s.label) {
            summary.spoiler_sentences += 1;
            if is_partial_spoiler(s)? {
                summary.partial_spoilers += 1;
            }
        }
    }
    save_corpus(output_path, &corpus, Schema::TvtropesBooks)?;
    Ok(summary)
}
