//! Span F1 and accuracy metrics, corpus evaluation, and the learning-curve
//! and training-time experiments.

mod experiment;
mod metrics;
mod svg;

pub use experiment::{
    epochs_to_target, run_learning_curve, run_training_time, Aggregate, CurvePoint, CurveReport,
    CurveRow, EpochCurve, ExperimentSpec, TimingReport, Variant,
};
pub use metrics::{accuracy, info_tag_accuracy, intent_accuracy, span_counts, span_f1, SpanCounts};
pub use svg::{line_chart_svg, Series};

use rayon::prelude::*;

use crate::autodiff::{argmax, Tape};
use crate::error::Result;
use crate::model::{Prediction, ProgModel};
use crate::training::{Context, Example};

/// Corpus-level scores. Slot F1 is micro-averaged over spans.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// Absent for baselines, which have no info tagger.
    pub info_acc: Option<f64>,
    pub slot_f1: f64,
    pub slot_precision: f64,
    pub slot_recall: f64,
    pub slot_token_acc: f64,
    pub intent_acc: f64,
    pub spans: SpanCounts,
    pub count: usize,
}

/// Predictions for every example, computed in parallel.
pub fn predict_all(
    model: &ProgModel,
    ctx: &Context,
    examples: &[Example],
) -> Result<Vec<Prediction>> {
    examples
        .par_iter()
        .map(|ex| ctx.predict(model, ex))
        .collect()
}

pub fn evaluate(model: &ProgModel, ctx: &Context, examples: &[Example]) -> Result<Metrics> {
    let preds = predict_all(model, ctx, examples)?;
    let mut spans = SpanCounts::default();
    let (mut info_hits, mut slot_hits, mut tokens, mut intent_hits) = (0, 0, 0, 0);
    for (p, ex) in preds.iter().zip(examples) {
        let u = &ex.utterance;
        let pred_slots = ctx.slot_labels(&p.slots);
        spans.add(span_counts(&pred_slots, &u.slot_tags)?);
        slot_hits += pred_slots
            .iter()
            .zip(&u.slot_tags)
            .filter(|(a, b)| a == b)
            .count();
        info_hits += p.info.iter().zip(&ex.info).filter(|(a, b)| a == b).count();
        tokens += u.len();
        intent_hits += usize::from(ctx.intent_label(p.intent) == u.intent);
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(Metrics {
        info_acc: (!model.config().baseline.is_baseline()).then(|| frac(info_hits, tokens)),
        slot_f1: spans.f1(),
        slot_precision: spans.precision(),
        slot_recall: spans.recall(),
        slot_token_acc: frac(slot_hits, tokens),
        intent_acc: frac(intent_hits, examples.len()),
        spans,
        count: examples.len(),
    })
}

/// Token-level info-tag accuracy of the tagging stage alone.
pub fn info_accuracy(model: &ProgModel, examples: &[Example]) -> Result<f64> {
    let preds: Vec<Vec<usize>> = examples
        .par_iter()
        .map(|ex| {
            let mut tape = Tape::new();
            let (_, out) = model.forward_tagging(&mut tape, &ex.tokens)?;
            Ok(out
                .info_probs
                .iter()
                .map(|&p| argmax(tape.value(p).data()))
                .collect())
        })
        .collect::<Result<_>>()?;
    let golds: Vec<Vec<usize>> = examples.iter().map(|e| e.info.clone()).collect();
    info_tag_accuracy(&preds, &golds)
}
