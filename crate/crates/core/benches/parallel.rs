//! Sequential against rayon execution for the two hot loops: tree growth
//! (per-feature split search) and fold-wise training.

use abuse_core::corpus::{compose_model_text, synthesize_corpus, SynthConfig};
use abuse_core::features::{assemble_features, fit_tfidf, metadata_matrix, MetadataTransform};
use abuse_core::gbdt::fit_gbdt;
use abuse_core::pipeline::{make_folds, train_oof};
use abuse_core::{Execution, FeatureMatrix, GbdtParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn corpus_features(n: usize) -> (FeatureMatrix, Vec<f64>, abuse_core::Corpus) {
    let synth = synthesize_corpus(&SynthConfig {
        n,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let texts: Vec<String> = synth
        .corpus
        .records()
        .iter()
        .map(|r| compose_model_text(r, 150).unwrap())
        .collect();
    let tfidf = fit_tfidf(&texts, 200)
        .unwrap()
        .transform(&texts, Execution::Sequential);
    let x = assemble_features(&[
        tfidf,
        metadata_matrix(&synth.corpus, MetadataTransform::Log1p),
    ])
    .unwrap();
    let y = synth
        .corpus
        .labels()
        .unwrap()
        .iter()
        .map(|&b| b as u8 as f64)
        .collect();
    (x, y, synth.corpus)
}

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn gbdt_fit(c: &mut Criterion) {
    let (x, y, _) = corpus_features(1500);
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(10);
    for (name, execution) in modes() {
        let params = GbdtParams {
            num_trees: 30,
            execution,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, p| {
            b.iter(|| fit_gbdt(&x, &y, p).unwrap())
        });
    }
    group.finish();
}

fn fold_training(c: &mut Criterion) {
    let (x, y, corpus) = corpus_features(1500);
    let folds = make_folds(&corpus, 5, 0).unwrap();
    let mut group = c.benchmark_group("train_oof");
    group.sample_size(10);
    for (name, execution) in modes() {
        let params = GbdtParams {
            num_trees: 20,
            execution,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, p| {
            b.iter(|| train_oof(&x, &y, &folds, p, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gbdt_fit, fold_training);
criterion_main!(benches);
