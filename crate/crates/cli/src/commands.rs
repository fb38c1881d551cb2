use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use spoilershed::classifier::{fit, Classifier, EncodingSettings, FitOptions, Packing};
use spoilershed::corpus::{
    balance_by_document, corpus_stats, generate_synthetic_corpus, load_corpus, save_corpus, stratified_split,
    ContextEffect, DocumentRecord, GenreEffect, Schema, SplitRatios, SyntheticSpec,
};
use spoilershed::extraction::build_dataset;
use spoilershed::interpret::{
    comprehensiveness, genre_attention_share, last_two_layers, sample_fraction, select_partial_single_span,
    sufficiency, SentenceRef,
};
use spoilershed::metrics::EvalReport;
use spoilershed::model::{GenreMode, HeadVariant, ModelConfig};
use spoilershed::training::{LossKind, StopMetric, TrainConfig};

use crate::config::RunConfig;
use crate::{AnalyzeAction, AnalyzeArgs, Cli, Command, DatasetAction, InputArgs, SynthArgs, TrainArgs, THREADS_ENV};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VAL_FILE: &str = "val.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const HISTORY_FILE: &str = "history.jsonl";

/// Invalid flag combinations; reported like argument errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn configure_threads(flag: Option<usize>) -> Result<Option<usize>> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a count"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(threads)
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = configure_threads(cli.threads)?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cfg.pick("seed", cli.seed, 0u64)?;
    if let Some(n) = threads {
        cfg.note("threads", n);
    }
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Extract(a) => {
            cfg.note("command", "extract");
            cfg.note("snapshot-dir", a.snapshot_dir.display());
            let class = cfg.pick("spoiler-class", a.spoiler_class, "spoiler".to_string())?;
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let summary = build_dataset(&a.snapshot_dir, out.join("dataset.jsonl"), &class)?;
            write_json(&out.join("extract_summary.json"), &summary)?;
            info!(
                "{} documents from {} pages ({} skipped)",
                summary.documents, summary.pages, summary.skipped_pages
            );
        }
        Command::Dataset { action } => dataset(action, seed, cfg, out)?,
        Command::Train(a) => train(a, seed, cfg, out)?,
        Command::Eval(a) => {
            cfg.note("command", "eval");
            cfg.note("model", a.model.display());
            let (corpus, _) = load_input(&a.input, &mut cfg)?;
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let classifier = load_model(&a.model)?;
            let report = classifier
                .evaluate_corpus(&corpus)
                .with_context(|| format!("evaluating on {}", a.input.input.display()))?;
            write_json(&out.join("eval.json"), &report)?;
            fs::write(
                out.join("eval.csv"),
                format!("{}\n{}\n", EvalReport::CSV_HEADER, report.to_csv_row()),
            )?;
            info!("roc_auc {:.4} pr_auc {:.4} accuracy {:.4}", report.roc_auc, report.pr_auc, report.accuracy);
        }
        Command::Analyze { action } => analyze(action, seed, cfg, out)?,
    }
    Ok(())
}

fn load_input(args: &InputArgs, cfg: &mut RunConfig) -> Result<(Vec<DocumentRecord>, Schema)> {
    cfg.note("input", args.input.display());
    let schema = cfg.pick("schema", args.schema, Schema::TvtropesBooks)?;
    let corpus = load_corpus(&args.input, schema)?;
    Ok((corpus, schema))
}

fn load_model(dir: &Path) -> Result<Classifier> {
    Classifier::load(dir).with_context(|| format!("loading model from {}", dir.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    ratios: [f64; 3],
    train: Vec<&'a str>,
    val: Vec<&'a str>,
    test: Vec<&'a str>,
}

fn ids(docs: &[DocumentRecord]) -> Vec<&str> {
    docs.iter().map(|d| d.id.as_str()).collect()
}

fn dataset(action: DatasetAction, seed: u64, mut cfg: RunConfig, out: &Path) -> Result<()> {
    match action {
        DatasetAction::Balance(a) => {
            cfg.note("command", "dataset balance");
            let (corpus, schema) = load_input(&a, &mut cfg)?;
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let balanced = balance_by_document(&corpus, seed)?;
            save_corpus(out.join("balanced.jsonl"), &balanced, schema)?;
            info!("kept {} of {} documents", balanced.len(), corpus.len());
        }
        DatasetAction::Split(a) => {
            cfg.note("command", "dataset split");
            let (corpus, schema) = load_input(&a.input, &mut cfg)?;
            let defaults = SplitRatios::default();
            let ratios = SplitRatios {
                train: cfg.pick("train-ratio", a.train_ratio, defaults.train)?,
                validation: cfg.pick("val-ratio", a.val_ratio, defaults.validation)?,
                test: cfg.pick("test-ratio", a.test_ratio, defaults.test)?,
            };
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let split = stratified_split(&corpus, ratios, seed)?;
            save_corpus(out.join(TRAIN_FILE), &split.train, schema)?;
            save_corpus(out.join(VAL_FILE), &split.validation, schema)?;
            save_corpus(out.join(TEST_FILE), &split.test, schema)?;
            let manifest = Manifest {
                seed,
                ratios: [ratios.train, ratios.validation, ratios.test],
                train: ids(&split.train),
                val: ids(&split.validation),
                test: ids(&split.test),
            };
            write_json(&out.join("manifest.json"), &manifest)?;
            info!(
                "split {} documents into {}/{}/{}",
                corpus.len(),
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
        DatasetAction::Stats(a) => {
            cfg.note("command", "dataset stats");
            let (corpus, _) = load_input(&a.input, &mut cfg)?;
            let bins = cfg.pick("bins", a.bins, 10usize)?;
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let stats = corpus_stats(&corpus, bins)?;
            write_json(&out.join("stats.json"), &stats)?;
            fs::write(out.join("stats.txt"), stats.to_text())?;
        }
        DatasetAction::Synth(a) => {
            cfg.note("command", "dataset synth");
            let spec = synth_spec(&a, &mut cfg)?;
            cfg.finish()?;
            cfg.write_snapshot(out)?;
            let corpus = generate_synthetic_corpus(&spec, seed)?;
            save_corpus(out.join("synthetic.jsonl"), &corpus, Schema::TvtropesBooks)?;
            info!("generated {} documents", corpus.len());
        }
    }
    Ok(())
}

fn synth_spec(a: &SynthArgs, cfg: &mut RunConfig) -> Result<SyntheticSpec> {
    let d = SyntheticSpec::default();
    let spread = cfg.pick("genre-spread", a.genre_spread, 0.0)?;
    let runs = cfg.pick("context-runs", a.context_runs, false)?;
    Ok(SyntheticSpec {
        doc_count: cfg.pick("docs", a.docs, 1000)?,
        spoiler_rate: cfg.pick("spoiler-rate", a.spoiler_rate, d.spoiler_rate)?,
        decoy_rate: cfg.pick("decoy-rate", a.decoy_rate, d.decoy_rate)?,
        sentences_per_doc: (
            cfg.pick("min-sentences", a.min_sentences, d.sentences_per_doc.0)?,
            cfg.pick("max-sentences", a.max_sentences, d.sentences_per_doc.1)?,
        ),
        words_per_sentence: (
            cfg.pick("min-words", a.min_words, d.words_per_sentence.0)?,
            cfg.pick("max-words", a.max_words, d.words_per_sentence.1)?,
        ),
        genre_effect: (spread != 0.0).then_some(GenreEffect { spread }),
        context_effect: runs.then(ContextEffect::default),
        ..d
    })
}

fn train(a: TrainArgs, seed: u64, mut cfg: RunConfig, out: &Path) -> Result<()> {
    cfg.note("command", "train");
    cfg.note("data", a.data.display());
    let schema = cfg.pick("schema", a.schema, Schema::TvtropesBooks)?;
    let md = ModelConfig::default();
    let head = cfg.pick("head", a.head, md.head)?;
    let genre = cfg.pick("genre", a.genre, GenreMode::None)?;
    if (head == HeadVariant::GenreConcat) != (genre == GenreMode::Vector) {
        return Err(usage(format!(
            "--head {head} cannot be combined with --genre {genre}: the genre vector is read only by --head genre-concat"
        )));
    }
    let ed = EncodingSettings::default();
    let settings = EncodingSettings {
        lowercase: cfg.pick("lowercase", a.lowercase, ed.lowercase)?,
        max_pieces: cfg.pick("max-pieces", a.max_pieces, ed.max_pieces)?,
        context_size: cfg.pick("context", a.context, ed.context_size)?,
        packing: cfg.pick("packing", a.packing, Packing::Even)?,
        genre_mode: genre,
    };
    if settings.context_size == 0 {
        return Err(usage("--context must be at least 1"));
    }
    let model = ModelConfig {
        layers: cfg.pick("layers", a.layers, md.layers)?,
        heads: cfg.pick("heads", a.heads, md.heads)?,
        width: cfg.pick("width", a.width, md.width)?,
        ff_width: cfg.pick("ff-width", a.ff_width, md.ff_width)?,
        dropout: cfg.pick("dropout", a.dropout, md.dropout)?,
        head,
        ..md
    };
    let td = TrainConfig::default();
    let pos_weight = cfg.pick("pos-weight", a.pos_weight.clone(), "auto".to_string())?;
    let (auto_pos_weight, fixed_weight) = match pos_weight.as_str() {
        "auto" => (true, td.pos_weight),
        w => (
            false,
            w.parse::<f64>()
                .map_err(|_| usage(format!("--pos-weight expects a number or auto, got {w:?}")))?,
        ),
    };
    let tc = TrainConfig {
        epochs: cfg.pick("epochs", a.epochs, td.epochs)?,
        batch_size: cfg.pick("batch", a.batch, td.batch_size)?,
        learning_rate: cfg.pick("lr", a.lr, td.learning_rate)?,
        warmup_fraction: cfg.pick("warmup", a.warmup, td.warmup_fraction)?,
        weight_decay: cfg.pick("weight-decay", a.weight_decay, td.weight_decay)?,
        loss: cfg.pick("loss", a.loss, LossKind::WeightedBce)?,
        focal_gamma: cfg.pick("focal-gamma", a.focal_gamma, td.focal_gamma)?,
        pos_weight: fixed_weight,
        patience: cfg.pick("patience", a.patience, td.patience)?,
        stop_metric: cfg.pick("stop-metric", a.stop_metric, StopMetric::ValLoss)?,
        seed,
        ..td
    };
    let options = FitOptions {
        min_frequency: cfg.pick("min-frequency", a.min_frequency, 1)?,
        auto_pos_weight,
        init_output_bias: cfg.pick("init-bias", a.init_bias, true)?,
    };
    cfg.finish()?;

    let train_path = a.data.join(TRAIN_FILE);
    let val_path = a.data.join(VAL_FILE);
    for p in [&train_path, &val_path] {
        if !p.is_file() {
            bail!("{} not found; `dataset split` writes {TRAIN_FILE} and {VAL_FILE}", p.display());
        }
    }
    let train_docs = load_corpus(&train_path, schema)?;
    let val_docs = load_corpus(&val_path, schema)?;
    cfg.write_snapshot(out)?;

    let (classifier, report) = fit(&train_docs, &val_docs, &model, &settings, &tc, &options, &mut |_| {})?;
    classifier.save(out)?;
    fs::write(out.join(HISTORY_FILE), report.history.to_jsonl())?;
    let summary = serde_json::json!({
        "train_samples": report.train_samples,
        "positives": report.positives,
        "negatives": report.negatives,
        "pos_weight": report.train_config.pos_weight,
        "best_epoch": report.history.best_epoch,
        "stopped_epoch": report.history.stopped_epoch,
        "early_stopped": report.history.early_stopped,
        "parameters": classifier.params.parameter_count(),
    });
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(())
}

fn has_spans(corpus: &[DocumentRecord]) -> bool {
    corpus.iter().flat_map(|d| &d.sentences).any(|s| !s.spans.is_empty())
}

fn analyze(action: AnalyzeAction, seed: u64, mut cfg: RunConfig, out: &Path) -> Result<()> {
    let (name, a): (&str, AnalyzeArgs) = match action {
        AnalyzeAction::Comprehensiveness(a) => ("comprehensiveness", a),
        AnalyzeAction::Sufficiency(a) => ("sufficiency", a),
        AnalyzeAction::Attention(a) => ("attention", a),
    };
    cfg.note("command", format!("analyze {name}"));
    cfg.note("model", a.model.display());
    let (corpus, schema) = load_input(&a.input, &mut cfg)?;
    let fraction = cfg.pick("sample", a.sample, 0.1)?;
    let single_span = if name == "attention" {
        false
    } else {
        cfg.pick("single-span", a.single_span, false)?
    };
    cfg.finish()?;
    cfg.write_snapshot(out)?;
    let classifier = load_model(&a.model)?;

    if name == "attention" {
        if classifier.settings.genre_mode != GenreMode::TextAppend {
            bail!(
                "attention share needs a model trained with --genre append (this one uses --genre {})",
                classifier.settings.genre_mode
            );
        }
        let refs: Vec<SentenceRef> = corpus
            .iter()
            .flat_map(|d| {
                (0..d.sentences.len()).map(|i| SentenceRef {
                    document_id: d.id.clone(),
                    sentence_index: i,
                })
            })
            .collect();
        let sample = sample_fraction(&refs, fraction, seed)?;
        let by_id: std::collections::HashMap<&str, &DocumentRecord> =
            corpus.iter().map(|d| (d.id.as_str(), d)).collect();
        let items: Vec<(&str, &std::collections::BTreeMap<String, i64>, bool)> = sample
            .iter()
            .map(|r| {
                let d = by_id[r.document_id.as_str()];
                let s = &d.sentences[r.sentence_index];
                (s.text.as_str(), &d.genre_votes, s.label)
            })
            .collect();
        let layers = last_two_layers(classifier.params.config.layers);
        let report = genre_attention_share(&classifier, &items, &layers)?;
        write_jsonl(&out.join("attention.jsonl"), &report.rows)?;
        write_json(&out.join("attention_summary.json"), &report)?;
        info!("{} sentences analysed, {} without genre tokens", items.len(), report.skipped);
        return Ok(());
    }

    if !has_spans(&corpus) {
        bail!(
            "{} has no word-level spoiler spans (schema {schema}); {name} needs span annotations as in the tvtropes-books schema",
            a.input.input.display()
        );
    }
    let selection = select_partial_single_span(&corpus, single_span);
    if selection.is_empty() {
        bail!("{} has no partial spoiler sentences to analyse", a.input.input.display());
    }
    let sample = sample_fraction(&selection, fraction, seed)?;
    let (results, summary) = if name == "comprehensiveness" {
        comprehensiveness(&classifier, &corpus, &sample)?
    } else {
        sufficiency(&classifier, &corpus, &sample)?
    };
    write_jsonl(&out.join(format!("{name}.jsonl")), &results)?;
    write_json(&out.join(format!("{name}_summary.json")), &summary)?;
    info!(
        "{name}: {} sentences, positive delta fraction {:.3}",
        summary.samples, summary.positive_delta_fraction
    );
    Ok(())
}
