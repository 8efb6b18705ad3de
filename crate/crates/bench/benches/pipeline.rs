use std::hint::black_box;

use chrono::{TimeZone, Utc};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use image::{Rgba, RgbaImage};
use inspect_bench::survey_workload;
use inspect_core::analytics::all_stats;
use inspect_core::bridge::git::{publish_image, MemoryStore, Signature, DEFAULT_IMAGE_REF};
use inspect_core::bridge::render_pin;
use inspect_core::classifier::{examples, train};
use inspect_core::corpus::{export_csv_string, import_csv};

fn corpus_benches(c: &mut Criterion) {
    let (corpus, _) = survey_workload();
    c.bench_function("stats/survey", |b| b.iter(|| all_stats(black_box(&corpus))));
    c.bench_function("csv/export", |b| b.iter(|| export_csv_string(black_box(&corpus))));
    let text = export_csv_string(&corpus);
    c.bench_function("csv/import", |b| {
        b.iter(|| import_csv(black_box(text.as_bytes())).unwrap())
    });
}

fn classifier_benches(c: &mut Criterion) {
    let (_, set) = survey_workload();
    let ex = examples(&set);
    c.bench_function("classifier/train", |b| b.iter(|| train(black_box(&ex), "bench").unwrap()));
    let model = train(&ex, "bench").unwrap();
    c.bench_function("classifier/predict", |b| {
        b.iter(|| model.predict(black_box("Typo in the heading; explain the reason.")).unwrap())
    });
}

fn bridge_benches(c: &mut Criterion) {
    let frame = RgbaImage::from_pixel(320, 240, Rgba([240, 240, 240, 255]));
    c.bench_function("pin/render_png", |b| {
        b.iter(|| render_pin(black_box(&frame), 100.5, 80.0, 12).to_png())
    });
    let sig = Signature {
        name: "bench".into(),
        email: "bench@example.invalid".into(),
        when: Utc.timestamp_opt(1_700_000_000, 0).unwrap(),
    };
    let png = render_pin(&frame, 10.0, 10.0, 1).to_png();
    c.bench_function("git/publish_50", |b| {
        b.iter_batched(
            MemoryStore::new,
            |store| {
                for i in 0..50 {
                    let path = format!("images/pr1/c{i}.png");
                    publish_image(&store, DEFAULT_IMAGE_REF, &path, &png, "add", &sig).unwrap();
                }
                store
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, corpus_benches, classifier_benches, bridge_benches);
criterion_main!(benches);
