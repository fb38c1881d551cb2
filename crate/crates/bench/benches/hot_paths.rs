use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use spoilershed::classifier::EncodingSettings;
use spoilershed::corpus::{generate_synthetic_corpus, SyntheticSpec};
use spoilershed::encoding::build_vocab;
use spoilershed::extraction::{annotate_entry, strip_markup_extract_spans};
use spoilershed::metrics::roc_auc;
use spoilershed::model::{backward, forward, forward_train, init_model, Mode, ModelConfig};
use spoilershed::rng::rng;

fn bench_forward(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(
        &SyntheticSpec {
            doc_count: 50,
            ..SyntheticSpec::default()
        },
        1,
    )
    .unwrap();
    let vocab = build_vocab(&corpus, 1, true).unwrap();
    let settings = EncodingSettings::default();
    let sample = settings.document_samples(&corpus[0], &vocab).unwrap().remove(0);
    let input = sample.input.padded(settings.max_pieces);

    let mut group = c.benchmark_group("model");
    for width in [32, 64] {
        let config = ModelConfig {
            width,
            ff_width: 2 * width,
            max_positions: settings.max_pieces,
            vocab_size: vocab.len(),
            ..ModelConfig::default()
        };
        let params = init_model(&config, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("forward_96", width), &params, |b, params| {
            b.iter(|| forward(params, black_box(&input), None, Mode::Eval).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("forward_backward_96", width), &params, |b, params| {
            let mut grads = params.zeros_like();
            b.iter(|| {
                let (out, cache) = forward_train(params, black_box(&input), None, Mode::Train { seed: 3 }).unwrap();
                let d: Vec<f64> = out.probabilities.iter().map(|p| p - 1.0).collect();
                backward(params, &cache, &d, &mut grads);
            })
        });
    }
    group.finish();
}

fn bench_roc_auc(c: &mut Criterion) {
    let mut r = rng(7);
    let mut group = c.benchmark_group("metrics");
    for n in [1_000usize, 100_000] {
        let scores: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.2)).collect();
        group.bench_with_input(BenchmarkId::new("roc_auc", n), &n, |b, _| {
            b.iter(|| roc_auc(black_box(&scores), black_box(&labels)).unwrap())
        });
    }
    group.finish();
}

fn bench_extraction(c: &mut Criterion) {
    let item = "<a href=\"/t/Twist\">Twist Ending</a>: The story turns in chapter three. \
                <span class=\"spoiler\">The narrator was dead all along, and Dr. Gray knew it.</span> \
                Readers noticed <em>early</em> hints. ";
    let markup = item.repeat(40);
    let mut group = c.benchmark_group("extraction");
    group.bench_function("strip_markup", |b| {
        b.iter(|| strip_markup_extract_spans(black_box(&markup), "spoiler").unwrap())
    });
    group.bench_function("annotate_entry", |b| {
        b.iter(|| annotate_entry(black_box(&markup), "spoiler").unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_forward, bench_roc_auc, bench_extraction);
criterion_main!(benches);
