use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use progslu::autodiff::Tape;
use progslu::eval::span_f1;
use progslu::model::DeltaSource;
use progslu::training::{joint_loss, LossNorm};
use progslu::Gazetteer;
use progslu_bench::model_fixture;

fn forward_backward(c: &mut Criterion) {
    let (_, model, examples) = model_fixture(20, 1);
    let ex = &examples[0];
    c.bench_function("forward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            black_box(
                model
                    .forward(&mut tape, &ex.tokens, DeltaSource::Table(&ex.gold_table))
                    .unwrap(),
            );
        })
    });
    c.bench_function("forward_backward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let loss = joint_loss(&model, &mut tape, ex, LossNorm::PerToken).unwrap();
            black_box(tape.backward(loss).unwrap());
        })
    });
    c.bench_function("predict_with_predicted_delta", |b| {
        let (ctx, model, examples) = model_fixture(20, 2);
        b.iter(|| black_box(ctx.predict(&model, &examples[0]).unwrap()))
    });
}

fn scoring(c: &mut Criterion) {
    let labels = ["O", "B-a", "I-a", "B-b", "I-b"];
    let pred: Vec<&str> = (0..40).map(|i| labels[(i * 7) % 5]).collect();
    let gold: Vec<&str> = (0..40).map(|i| labels[(i * 3) % 5]).collect();
    c.bench_function("span_f1_40_tokens", |b| {
        b.iter(|| black_box(span_f1(&pred, &gold).unwrap()))
    });
}

fn gazetteer(c: &mut Criterion) {
    let gaz = Gazetteer::bundled();
    c.bench_function("nearby_cities", |b| {
        b.iter(|| black_box(gaz.nearby_cities("Boston,MA", 50.0).unwrap()))
    });
}

criterion_group!(benches, forward_backward, scoring, gazetteer);
criterion_main!(benches);
