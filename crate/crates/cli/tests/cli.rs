use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spoilershed::corpus::{load_corpus, save_corpus, DocumentRecord, Schema, SentenceRecord, SpoilerSpan};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spoilershed"));
    c.env_remove("SPOILERSHED_THREADS").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

/// Synthetic corpus split into `dir/split`.
fn synthetic_split(dir: &Path, docs: usize) -> PathBuf {
    let syn = dir.join("syn");
    let split = dir.join("split");
    ok(&["--seed", "5", "--out", p(&syn), "dataset", "synth", "--docs", &docs.to_string()]);
    ok(&["--seed", "5", "--out", p(&split), "dataset", "split", p(&syn.join("synthetic.jsonl"))]);
    split
}

const SMALL_MODEL: [&str; 8] = ["--width", "16", "--heads", "2", "--ff-width", "32", "--max-pieces", "24"];

fn train(split: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--seed", "9", "--out", p(out), "train", p(split)];
    args.extend(SMALL_MODEL);
    if !extra.contains(&"--epochs") {
        args.extend(["--epochs", "2"]);
    }
    args.extend(extra);
    ok(&args)
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic_split(dir.path(), 300);
    let model = dir.path().join("model");
    train(&split, &model, &[]);
    for f in ["model.ckpt", "vocab.txt", "history.jsonl", "run_config.txt", "train_summary.json"] {
        assert!(model.join(f).is_file(), "missing {f}");
    }
    let history = fs::read_to_string(model.join("history.jsonl")).unwrap();
    assert!((1..=2).contains(&history.lines().count()));

    let eval = dir.path().join("eval");
    ok(&["--out", p(&eval), "eval", "--model", p(&model), p(&split.join("test.jsonl"))]);
    let report = read_json(eval.join("eval.json"));
    for key in ["accuracy", "roc_auc", "pr_auc"] {
        let v = report[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    assert!(report["confusion"]["true_positive"].is_u64());
    let csv = fs::read_to_string(eval.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let comp = dir.path().join("comp");
    ok(&[
        "--out",
        p(&comp),
        "analyze",
        "comprehensiveness",
        "--model",
        p(&model),
        p(&split.join("test.jsonl")),
        "--sample",
        "0.5",
    ]);
    let summary = read_json(comp.join("comprehensiveness_summary.json"));
    let rows = fs::read_to_string(comp.join("comprehensiveness.jsonl")).unwrap();
    assert_eq!(summary["samples"].as_u64().unwrap() as usize, rows.lines().count());
    assert!(rows.lines().count() > 0);
}

#[test]
fn train_rerun_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic_split(dir.path(), 200);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train(&split, &a, &["--threads", "1"]);
    train(&split, &b, &["--threads", "3"]);
    for f in ["history.jsonl", "model.ckpt", "vocab.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn genre_vector_with_sequence_head_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", p(dir.path()), "train", p(dir.path()), "--genre", "vector"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("genre-concat"));

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "head=genre-concat\n").unwrap();
    let out = run(&["--config", p(&cfg), "--out", p(dir.path()), "train", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file_and_snapshot_records_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "docs=20\nspoiler_rate=0.3\nseed=4\n").unwrap();
    let out = dir.path().join("out");
    ok(&["--config", p(&cfg), "--out", p(&out), "dataset", "synth", "--docs", "30"]);
    let corpus = load_corpus(out.join("synthetic.jsonl"), Schema::TvtropesBooks).unwrap();
    assert_eq!(corpus.len(), 30);
    let snap = fs::read_to_string(out.join("run_config.txt")).unwrap();
    assert!(snap.contains("docs=30\n"));
    assert!(snap.contains("spoiler-rate=0.3\n"));
    assert!(snap.contains("seed=4\n"));

    // the snapshot is itself a valid config and reproduces the output
    let again = dir.path().join("again");
    let snap_cfg = dir.path().join("snap.cfg");
    let reusable: String = snap.lines().filter(|l| !l.starts_with("command=")).map(|l| format!("{l}\n")).collect();
    fs::write(&snap_cfg, reusable).unwrap();
    ok(&["--config", p(&snap_cfg), "--out", p(&again), "dataset", "synth"]);
    assert_eq!(
        fs::read(out.join("synthetic.jsonl")).unwrap(),
        fs::read(again.join("synthetic.jsonl")).unwrap()
    );
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "doc=20\n").unwrap();
    let out = run(&["--config", p(&cfg), "--out", p(dir.path()), "dataset", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"doc\""));
}

fn fixture(spoiler: usize, clean: usize) -> Vec<DocumentRecord> {
    let mut docs = Vec::new();
    for i in 0..spoiler {
        docs.push(DocumentRecord::new(
            format!("s{i}"),
            vec![
                SentenceRecord::new("Opening line.", vec![]),
                SentenceRecord::new("Then the hero dies.", vec![SpoilerSpan::new(9, 18)]),
            ],
        ));
    }
    for i in 0..clean {
        docs.push(DocumentRecord::new(format!("c{i}"), vec![SentenceRecord::new("Nothing happens.", vec![])]));
    }
    docs
}

#[test]
fn balance_keeps_all_spoilers_and_as_many_clean() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    save_corpus(&input, &fixture(10, 90), Schema::TvtropesBooks).unwrap();
    ok(&["--out", p(dir.path()), "dataset", "balance", p(&input)]);
    let out = load_corpus(dir.path().join("balanced.jsonl"), Schema::TvtropesBooks).unwrap();
    assert_eq!(out.len(), 20);
    assert_eq!(out.iter().filter(|d| d.has_spoiler).count(), 10);

    save_corpus(&input, &fixture(10, 5), Schema::TvtropesBooks).unwrap();
    let out = run(&["--out", p(dir.path()), "dataset", "balance", p(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("10") && err.contains('5'), "{err}");
}

#[test]
fn split_manifest_ids_are_disjoint_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    save_corpus(&input, &fixture(20, 30), Schema::TvtropesBooks).unwrap();
    ok(&["--seed", "2", "--out", p(dir.path()), "dataset", "split", p(&input)]);
    let m = read_json(dir.path().join("manifest.json"));
    let mut all: Vec<String> = Vec::new();
    for part in ["train", "val", "test"] {
        let ids: Vec<String> = m[part].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
        let file = load_corpus(dir.path().join(format!("{part}.jsonl")), Schema::TvtropesBooks).unwrap();
        assert_eq!(ids, file.iter().map(|d| d.id.clone()).collect::<Vec<_>>());
        all.extend(ids);
    }
    let n = all.len();
    all.sort();
    all.dedup();
    assert_eq!((n, all.len()), (50, 50));
    assert_eq!(m["train"].as_array().unwrap().len(), 40);
}

#[test]
fn stats_writes_json_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    save_corpus(&input, &fixture(2, 2), Schema::TvtropesBooks).unwrap();
    ok(&["--out", p(dir.path()), "dataset", "stats", p(&input), "--bins", "4"]);
    let s = read_json(dir.path().join("stats.json"));
    assert_eq!(s["doc_count"], 4);
    assert_eq!(s["sentence_count"], 6);
    assert_eq!(s["spoiler_sentence_count"], 2);
    assert_eq!(s["position_histogram"], serde_json::json!([0, 0, 0, 2]));
    assert!(dir.path().join("stats.txt").is_file());
}

#[test]
fn eval_on_single_class_data_reports_undefined_metric() {
    let dir = tempfile::tempdir().unwrap();
    let split = synthetic_split(dir.path(), 120);
    let model = dir.path().join("model");
    train(&split, &model, &["--epochs", "1"]);
    let input = dir.path().join("clean.jsonl");
    save_corpus(&input, &fixture(0, 5), Schema::TvtropesBooks).unwrap();
    let out = run(&["--out", p(&dir.path().join("e")), "eval", "--model", p(&model), p(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metric undefined"));

    // faithfulness needs spans; attention needs a genre-append model
    let gr = dir.path().join("gr.jsonl");
    fs::write(&gr, "{\"id\":\"g1\",\"book_id\":\"b\",\"genres\":{},\"sentences\":[[\"It ends well.\",true]]}\n").unwrap();
    let out = run(&[
        "--out",
        p(&dir.path().join("a")),
        "analyze",
        "sufficiency",
        "--model",
        p(&model),
        p(&gr),
        "--schema",
        "goodreads",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema goodreads"));
    let out = run(&[
        "--out",
        p(&dir.path().join("b")),
        "analyze",
        "attention",
        "--model",
        p(&model),
        p(&split.join("test.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--genre append"));
}

#[test]
fn attention_share_on_genre_append_model() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    let split = dir.path().join("split");
    ok(&["--out", p(&syn), "dataset", "synth", "--docs", "150", "--genre-spread", "0.5"]);
    ok(&["--out", p(&split), "dataset", "split", p(&syn.join("synthetic.jsonl"))]);
    let model = dir.path().join("model");
    train(&split, &model, &["--genre", "append", "--epochs", "1", "--layers", "3"]);
    let out = dir.path().join("att");
    ok(&["--out", p(&out), "analyze", "attention", "--model", p(&model), p(&split.join("test.jsonl")), "--sample", "1"]);
    let report = read_json(out.join("attention_summary.json"));
    let rows = report["rows"].as_array().unwrap();
    // last two of three layers, three classes each
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["layer"], 2);
    for r in rows {
        let real = r["real"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&real));
    }
}

const PAGE: &str = r#"<html><head><link rel="canonical" href="https://example.org/pmwiki/pmwiki.php/Literature/Sample"></head>
<body><div id="main-article"><ul>
<li><a href="/t/One">Twist Ending</a>: The story turns. <span class="spoiler">The narrator was dead all along.</span></li>
<li><a href="/t/Two">Red Herring</a>: Nobody suspects the gardener.</li>
</ul></div></body></html>"#;

#[test]
fn extract_builds_dataset_and_counts_skipped_pages() {
    let dir = tempfile::tempdir().unwrap();
    let pages = dir.path().join("pages");
    fs::create_dir(&pages).unwrap();
    fs::write(pages.join("a.html"), PAGE).unwrap();
    fs::write(pages.join("b.html"), [0xff, 0xfe, 0x00]).unwrap();
    let out = dir.path().join("out");
    ok(&["--out", p(&out), "extract", p(&pages)]);
    let summary = read_json(out.join("extract_summary.json"));
    assert_eq!(summary["pages"], 2);
    assert_eq!(summary["skipped_pages"], 1);
    assert_eq!(summary["documents"], 2);
    let docs = load_corpus(out.join("dataset.jsonl"), Schema::TvtropesBooks).unwrap();
    assert!(docs[0].has_spoiler);
    assert!(!docs[1].has_spoiler);
    let s = docs[0].sentences.iter().find(|s| s.label).unwrap();
    let span = &s.spans[0];
    let text: String = s.text.chars().skip(span.start).take(span.end - span.start).collect();
    assert_eq!(text, "The narrator was dead all along.");

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    ok(&["--out", p(&dir.path().join("o2")), "extract", p(&empty)]);
    assert_eq!(fs::read_to_string(dir.path().join("o2/dataset.jsonl")).unwrap(), "");
}

#[test]
fn invalid_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("SPOILERSHED_THREADS", "many")
        .args(["--out", p(dir.path()), "dataset", "synth", "--docs", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SPOILERSHED_THREADS"));
    let out = bin()
        .env("SPOILERSHED_THREADS", "2")
        .args(["--out", p(dir.path()), "dataset", "synth", "--docs", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(fs::read_to_string(dir.path().join("run_config.txt")).unwrap().contains("threads=2\n"));
}
