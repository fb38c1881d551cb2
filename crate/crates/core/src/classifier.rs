//! A trained model bundled with its vocabulary and input settings, and the
//! conversion of documents into model inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentRecord, GenreCatalog};
use crate::encoding::{
    build_vocab, encode_sentence_with_genres, encode_sequence, even_split, genre_suffix, genre_vote_vector, group_ranges,
    recursive_split, EncodedInput, GenreVector, Vocabulary,
};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{
    forward, forward_with_attention, init_model, load_checkpoint, save_checkpoint, ForwardOutput, GenreMode, Mode,
    ModelConfig, Parameters,
};
use crate::training::{init_output_bias, pos_weight_from_counts, predict, train_with_observer, EpochSummary, TrainConfig, TrainHistory, TrainSample};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Packing {
    Even,
    Recursive,
}

impl fmt::Display for Packing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Packing::Even => "even",
            Packing::Recursive => "recursive",
        })
    }
}

impl FromStr for Packing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Packing::Even),
            "recursive" => Ok(Packing::Recursive),
            other => Err(Error::invalid(format!("unknown packing {other:?}"))),
        }
    }
}

/// How documents become model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSettings {
    pub lowercase: bool,
    pub max_pieces: usize,
    /// Sentences per input; 1 reads a single target at `[CLS]`.
    pub context_size: usize,
    pub packing: Packing,
    pub genre_mode: GenreMode,
}

impl Default for EncodingSettings {
    fn default() -> Self {
        Self {
            lowercase: true,
            max_pieces: 96,
            context_size: 1,
            packing: Packing::Even,
            genre_mode: GenreMode::None,
        }
    }
}

impl EncodingSettings {
    pub fn validate(&self) -> Result<()> {
        if self.context_size == 0 {
            return Err(Error::Config("context size must be at least 1".into()));
        }
        if self.max_pieces < 1 + 2 * self.context_size {
            return Err(Error::Config(format!(
                "max_pieces {} cannot hold {} sentences",
                self.max_pieces, self.context_size
            )));
        }
        Ok(())
    }

    fn group_sizes(&self, n: usize) -> Vec<usize> {
        match self.packing {
            Packing::Even => even_split(n, self.context_size),
            Packing::Recursive => recursive_split(n, self.context_size),
        }
    }

    /// Input for a run of consecutive sentences of one document.
    pub fn encode(
        &self,
        sentences: &[&str],
        votes: &BTreeMap<String, i64>,
        vocab: &Vocabulary,
    ) -> Result<(EncodedInput, Option<GenreVector>)> {
        let catalog = GenreCatalog::standard();
        let suffix = match self.genre_mode {
            GenreMode::TextAppend => genre_suffix(votes, &catalog),
            _ => None,
        };
        let genre = match self.genre_mode {
            GenreMode::Vector => Some(genre_vote_vector(votes, &catalog)?),
            _ => None,
        };
        let input = if self.context_size == 1 {
            let [text] = sentences else {
                return Err(Error::invalid(format!(
                    "single-sentence encoding got {} sentences",
                    sentences.len()
                )));
            };
            encode_sentence_with_genres(text, suffix.as_deref(), vocab, self.max_pieces)?
        } else {
            encode_sequence(sentences, vocab, self.max_pieces, suffix.as_deref(), self.context_size)?
        };
        Ok((input, genre))
    }

    /// One sample per sentence group of `doc`, labels in sentence order.
    pub fn document_samples(&self, doc: &DocumentRecord, vocab: &Vocabulary) -> Result<Vec<TrainSample>> {
        if doc.sentences.is_empty() {
            return Ok(Vec::new());
        }
        let ranges = group_ranges(&self.group_sizes(doc.sentences.len()));
        ranges
            .into_iter()
            .map(|r| {
                let group = &doc.sentences[r];
                let texts: Vec<&str> = group.iter().map(|s| s.text.as_str()).collect();
                let (input, genre) = self.encode(&texts, &doc.genre_votes, vocab)?;
                Ok(TrainSample {
                    input,
                    genre,
                    labels: group.iter().map(|s| f64::from(u8::from(s.label))).collect(),
                })
            })
            .collect()
    }

    /// Samples for all documents, in corpus order.
    pub fn corpus_samples(&self, corpus: &[DocumentRecord], vocab: &Vocabulary) -> Result<Vec<TrainSample>> {
        self.validate()?;
        let per_doc: Result<Vec<Vec<TrainSample>>> =
            corpus.par_iter().map(|d| self.document_samples(d, vocab)).collect();
        Ok(per_doc?.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub params: Parameters,
    pub vocab: Vocabulary,
    pub settings: EncodingSettings,
}

impl Classifier {
    pub fn new(params: Parameters, vocab: Vocabulary, settings: EncodingSettings) -> Result<Self> {
        settings.validate()?;
        if vocab.len() != params.config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} tokens but the model expects {}",
                vocab.len(),
                params.config.vocab_size
            )));
        }
        if vocab.lowercase() != settings.lowercase {
            return Err(Error::Config("vocabulary casing differs from the encoding settings".into()));
        }
        if settings.genre_mode != params.config.genre_mode {
            return Err(Error::Config(format!(
                "encoding genre mode {} differs from the model's {}",
                settings.genre_mode, params.config.genre_mode
            )));
        }
        if settings.max_pieces > params.config.max_positions {
            return Err(Error::Config(format!(
                "max_pieces {} exceeds the model's {} positions",
                settings.max_pieces, params.config.max_positions
            )));
        }
        Ok(Self {
            params,
            vocab,
            settings,
        })
    }

    /// Input for one sentence taken out of its document context.
    pub fn encode_single(&self, text: &str, votes: &BTreeMap<String, i64>) -> Result<(EncodedInput, Option<GenreVector>)> {
        self.settings.encode(&[text], votes, &self.vocab)
    }

    /// Eval-mode spoiler probability of a single sentence.
    pub fn predict_sentence(&self, text: &str, votes: &BTreeMap<String, i64>) -> Result<f64> {
        let (input, genre) = self.encode_single(text, votes)?;
        let out = forward(&self.params, &input, genre.as_ref(), Mode::Eval)?;
        Ok(out.probabilities[0])
    }

    /// Eval-mode forward of a single sentence with attention retained.
    pub fn attend_sentence(&self, text: &str, votes: &BTreeMap<String, i64>) -> Result<(EncodedInput, ForwardOutput)> {
        let (input, genre) = self.encode_single(text, votes)?;
        let out = forward_with_attention(&self.params, &input, genre.as_ref(), Mode::Eval)?;
        Ok((input, out))
    }

    /// Writes `model.ckpt` and `vocab.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = serde_json::to_value(&self.settings).expect("settings serialize");
        save_checkpoint(dir.join(CHECKPOINT_FILE), &self.params, &meta)?;
        self.vocab.save(dir.join(VOCAB_FILE))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let (params, meta) = load_checkpoint(dir.join(CHECKPOINT_FILE))?;
        let settings: EncodingSettings = serde_json::from_value(meta)
            .map_err(|e| Error::Checkpoint(format!("missing or malformed encoding settings: {e}")))?;
        let vocab = Vocabulary::load(dir.join(VOCAB_FILE), settings.lowercase)?;
        Self::new(params, vocab, settings)
    }
}

/// Corpus-dependent choices made before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_frequency: usize,
    /// Replace `pos_weight` by negatives/positives of the training targets.
    pub auto_pos_weight: bool,
    /// Start the classifier bias at the training log-odds.
    pub init_output_bias: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_frequency: 1,
            auto_pos_weight: true,
            init_output_bias: true,
        }
    }
}

/// Everything a training run produced besides the model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub history: TrainHistory,
    /// The training configuration actually used (after `auto_pos_weight`).
    pub train_config: TrainConfig,
    pub train_samples: usize,
    pub positives: usize,
    pub negatives: usize,
}

fn label_counts(samples: &[TrainSample]) -> (usize, usize) {
    let total: usize = samples.iter().map(|s| s.labels.len()).sum();
    let pos = samples.iter().flat_map(|s| &s.labels).filter(|&&y| y > 0.5).count();
    (pos, total - pos)
}

/// Builds the vocabulary from `train_docs`, initializes a model from
/// `model` (vocabulary size, positions and genre mode are filled in) and
/// trains it.
pub fn fit(
    train_docs: &[DocumentRecord],
    val_docs: &[DocumentRecord],
    model: &ModelConfig,
    settings: &EncodingSettings,
    train_config: &TrainConfig,
    options: &FitOptions,
    observer: &mut dyn FnMut(&EpochSummary),
) -> Result<(Classifier, FitReport)> {
    settings.validate()?;
    let vocab = build_vocab(train_docs, options.min_frequency, settings.lowercase)?;
    let train_samples = settings.corpus_samples(train_docs, &vocab)?;
    let val_samples = settings.corpus_samples(val_docs, &vocab)?;
    let config = ModelConfig {
        vocab_size: vocab.len(),
        max_positions: settings.max_pieces,
        genre_mode: settings.genre_mode,
        ..model.clone()
    };
    let mut params = init_model(&config, train_config.seed)?;
    let (positives, negatives) = label_counts(&train_samples);
    let mut tc = train_config.clone();
    if options.auto_pos_weight {
        tc.pos_weight = pos_weight_from_counts(positives, negatives)?;
    }
    if options.init_output_bias {
        params.classifier_b = init_output_bias(positives, negatives)?;
    }
    let (best, history) = train_with_observer(&params, &tc, &train_samples, &val_samples, observer)?;
    let classifier = Classifier::new(best, vocab, settings.clone())?;
    Ok((
        classifier,
        FitReport {
            history,
            train_config: tc,
            train_samples: train_samples.len(),
            positives,
            negatives,
        },
    ))
}

impl Classifier {
    /// Per-target probabilities and labels for every sentence of `corpus`,
    /// in corpus order.
    pub fn score_corpus(&self, corpus: &[DocumentRecord]) -> Result<(Vec<f64>, Vec<bool>)> {
        let samples = self.settings.corpus_samples(corpus, &self.vocab)?;
        let scores = predict(&self.params, &samples)?.into_iter().flatten().collect();
        let labels = samples.iter().flat_map(|s| s.labels.iter().map(|&y| y > 0.5)).collect();
        Ok((scores, labels))
    }

    /// Sentence-level metrics over all targets of `corpus`.
    pub fn evaluate_corpus(&self, corpus: &[DocumentRecord]) -> Result<EvalReport> {
        let (scores, labels) = self.score_corpus(corpus)?;
        EvalReport::compute(&scores, &labels)
    }
}
