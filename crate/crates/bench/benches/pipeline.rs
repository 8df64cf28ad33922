use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use urbanvqa_core::metrics::weighted_f1;
use urbanvqa_core::qa::generate::write_corpus;
use urbanvqa_core::qa::{CompositeCatalog, GenerationConfig, Subtype};
use urbanvqa_core::{generate_for_record, parse, synth, AnswerKind, AnswerValue, EvalRecord, ParseConfig};

fn generation(c: &mut Criterion) {
    let records = synth::scenes(1, 1000);
    let config = GenerationConfig::default();
    let catalog = CompositeCatalog::default();
    let mut group = c.benchmark_group("generate");
    group.throughput(Throughput::Elements(records.len() as u64));
    group.bench_function("per_record_1000", |b| {
        b.iter(|| {
            records
                .iter()
                .map(|m| generate_for_record(m, &config, &catalog, 7).len())
                .sum::<usize>()
        })
    });
    group.bench_function("stream_1000", |b| {
        b.iter(|| write_corpus(&records, &config, &catalog, 7, std::io::sink(), |_, _| {}).unwrap())
    });
    group.finish();
}

fn parsing(c: &mut Criterion) {
    let cfg = ParseConfig::default();
    let cases = [
        ("binary", "The image shows several trees along the street. answer: no", AnswerKind::Binary),
        ("binary_repeated", "Yes Yes Yes Yes Yes Yes Yes Yes", AnswerKind::Binary),
        ("scalar", "Roughly 35% of the view is greenery. Answer: 0.35", AnswerKind::Scalar),
        ("count", "I can see three cars parked on the left.", AnswerKind::Count),
        ("label", "Looking at the scene, the bicycle is closest to the camera.", AnswerKind::Label),
    ];
    let mut group = c.benchmark_group("parse");
    for (name, raw, kind) in cases {
        group.bench_function(name, |b| b.iter(|| parse(black_box(raw), kind, &cfg)));
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let cfg = ParseConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let labels = ["person", "car", "bus", "vehicle", "building", "tree"];
    let records: Vec<EvalRecord> = (0..10_000)
        .map(|_| {
            let gold = labels[rng.random_range(0..labels.len())];
            let pred = labels[rng.random_range(0..labels.len())];
            EvalRecord {
                qa_id: String::new(),
                subtype: Subtype::DepthClosestObject,
                gold: AnswerValue::label(gold),
                prediction: parse(pred, AnswerKind::Label, &cfg),
            }
        })
        .collect();
    let mut group = c.benchmark_group("metrics");
    group.throughput(Throughput::Elements(records.len() as u64));
    group.bench_function("weighted_f1_10000", |b| {
        b.iter(|| weighted_f1(black_box(&records)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, generation, parsing, metrics);
criterion_main!(benches);
