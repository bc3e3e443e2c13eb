use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use roomforge::backend::{GenerationRequest, Generator, MockBackend};
use roomforge::constraints::validate;
use roomforge::dataset::{Dataset, Provenance};
use roomforge::metrics::novelty;
use roomforge::prompting::build_prompt;
use roomforge::synth;

fn handmade(n: usize) -> Dataset {
    let mut d = Dataset::default();
    for g in synth::two_pattern_rooms(n, 1) {
        d.add_if_new(g, Provenance::Handmade, 0).unwrap();
    }
    d
}

fn bench_validate(c: &mut Criterion) {
    let rooms = synth::two_pattern_rooms(32, 2);
    c.bench_function("validate 32 rooms", |b| {
        b.iter(|| rooms.iter().filter(|g| validate(black_box(g)).passed()).count())
    });
}

fn bench_augment(c: &mut Criterion) {
    let base = handmade(120);
    c.bench_function("augment 120 rooms", |b| {
        b.iter_batched(|| base.clone(), |mut d| d.augment_all(0), BatchSize::LargeInput)
    });
}

fn bench_novelty(c: &mut Criterion) {
    let mut d = handmade(120);
    d.augment_all(0);
    let candidate = synth::two_pattern_rooms(121, 1).pop().unwrap();
    c.bench_function("novelty against 840 rooms", |b| {
        b.iter(|| novelty(black_box(&candidate), d.levels(), 0.1).is_novel)
    });
}

fn bench_mock_generation(c: &mut Criterion) {
    let d = handmade(60);
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("finetune.jsonl");
    std::fs::write(&records, d.finetune_jsonl()).unwrap();
    let backend = MockBackend::new();
    let model = backend.fine_tune(None, &records, 5).unwrap();
    let spec = &d.entries()[0].spec;
    let mut request = GenerationRequest::new(model, build_prompt(spec), spec.width, spec.height);
    request.n = 100;
    c.bench_function("mock generate 100 rooms", |b| b.iter(|| backend.generate(&request).unwrap()));
    c.bench_function("mock fine-tune 60 records", |b| b.iter(|| MockBackend::new().fine_tune(None, &records, 5).unwrap()));
}

criterion_group!(benches, bench_validate, bench_augment, bench_novelty, bench_mock_generation);
criterion_main!(benches);
