//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the model-quality trend check only warns.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::process::Command;
use std::time::Instant;

use progslu::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use progslu::corpus::{generate_split, generate_synthetic_corpus, Utterance};
use progslu::distill::{distance_features, merge_spans};
use progslu::eval::{
    evaluate, info_accuracy, run_learning_curve, span_counts, ExperimentSpec, Variant,
};
use progslu::gazetteer::{resolve_time, synthesize_user_info, City};
use progslu::iob;
use progslu::model::{
    read_checkpoint, write_checkpoint, Baseline, Checkpoint, DecoderVariant, DeltaSource,
    IntentSource, ModelConfig, ParamGroup,
};
use progslu::training::{Example, TrainConfig};
use progslu::{Context, Gazetteer, ProgModel, RunConfig, Trainer, UserInfoDictionary};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Writes straight to the stderr handle so the report shows without
/// `--nocapture`.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus(n: usize, seed: u64, gaz: &Gazetteer) -> Vec<Utterance> {
    synthesize_user_info(&generate_synthetic_corpus(n, seed, gaz), gaz, seed)
}

fn fingerprint(store: &ParamStore, ids: &[ParamId]) -> Vec<u64> {
    ids.iter()
        .flat_map(|&id| store.value(id).data().iter().map(|x| x.to_bits()))
        .collect()
}

fn new_model(ctx: &Context, seed: u64) -> ProgModel {
    let mut run = RunConfig::default();
    run.model.seed = seed;
    ProgModel::new(run.model_config(ctx)).unwrap()
}

fn train_cfg(p1: usize, p2: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        phase1_epochs: p1,
        phase2_epochs: p2,
        seed,
        ..TrainConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_progslu"))
        .arg("gradcheck")
        .output()
        .expect("run progslu gradcheck");
    let secs = start.elapsed().as_secs_f64();
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<(&str, f64)> = text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut f = l.split('\t');
            Some((f.next()?, f.next()?.parse().ok()?))
        })
        .collect();
    let ops: Vec<f64> = rows
        .iter()
        .filter(|(n, _)| n.starts_with("op:"))
        .map(|r| r.1)
        .collect();
    let groups: Vec<f64> = rows
        .iter()
        .filter(|(n, _)| n.starts_with("group:"))
        .map(|r| r.1)
        .collect();
    let worst_op = ops.iter().copied().fold(0.0, f64::max);
    let worst_group = groups.iter().copied().fold(0.0, f64::max);
    let pass = out.status.success()
        && ops.len() >= 17
        && groups.len() == 5
        && worst_op < 1e-6
        && worst_group < 1e-4
        && secs < 60.0;
    outcome(
        pass,
        format!(
            "{} ops max {worst_op:.2e} (< 1e-6), {} groups max {worst_group:.2e} (< 1e-4), {secs:.1}s",
            ops.len(),
            groups.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let gaz = Gazetteer::bundled();
    let dict = UserInfoDictionary::bundled();
    let data = corpus(60, 21, &gaz);
    let ctx = Context::from_training_data(&data, dict, gaz);
    let examples = ctx.examples(&data).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut vectors = 0usize;
    let mut models = Vec::new();
    for seed in 0..20u64 {
        let mut c = ModelConfig::new(
            ctx.vocab.tokens.len(),
            ctx.dictionary.len(),
            ctx.vocab.slots.len(),
            ctx.vocab.intents.len(),
        );
        c.embed_dim = 4 + (seed as usize % 3);
        c.hidden_dim = 3 + (seed as usize % 4);
        c.attention_dim = 5;
        c.seed = seed;
        c.decoder_variant = if seed % 4 == 1 {
            DecoderVariant::Lstm
        } else {
            DecoderVariant::FeedForward
        };
        c.intent_source = if seed % 2 == 0 {
            IntentSource::EncoderFinal
        } else {
            IntentSource::SlotStatesMean
        };
        c.baseline = match seed % 4 {
            2 => Baseline::AttBiRnn,
            3 => Baseline::AttBiRnnConcatInfo,
            _ => Baseline::None,
        };
        models.push(ProgModel::new(c).unwrap());
    }
    for pass in 0..1000 {
        let model = &models[pass % models.len()];
        let ex = &examples[rng.random_range(0..examples.len())];
        // Random token ids exercise words outside the corpus too.
        let tokens: Vec<usize> = if pass % 3 == 0 {
            (0..ex.tokens.len())
                .map(|_| rng.random_range(0..ctx.vocab.tokens.len()))
                .collect()
        } else {
            ex.tokens.clone()
        };
        let mut tape = Tape::new();
        let out = model
            .forward(&mut tape, &tokens, DeltaSource::Table(&ex.gold_table))
            .unwrap();
        for &v in out
            .info_probs
            .iter()
            .chain(&out.slot_probs)
            .chain(&out.attention)
            .chain(out.intent_probs.iter())
        {
            let s: f64 = tape.value(v).data().iter().sum();
            worst = worst.max((s - 1.0).abs());
            vectors += 1;
        }
    }
    let mut uniform_err = 0.0f64;
    for (k, model) in models.iter().enumerate() {
        let h2 = 2 * model.config().hidden_dim;
        let mut tape = Tape::new();
        let h: Vec<f64> = (0..h2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = 2 + k % 6;
        let states: Vec<Var> = (0..n)
            .map(|_| tape.constant(Tensor::vector(h.clone())))
            .collect();
        let enc = model
            .encoder_states(&mut tape, states.clone(), states[0])
            .unwrap();
        let q = if model.config().decoder_variant == DecoderVariant::Lstm {
            h2
        } else {
            2 * h2
        };
        let s = tape.constant(Tensor::vector(
            (0..q).map(|_| rng.random_range(-2.0..2.0)).collect(),
        ));
        let (_, alpha) = model.attention_context(&mut tape, &enc, s).unwrap();
        for &a in tape.value(alpha).data() {
            uniform_err = uniform_err.max((a - 1.0 / n as f64).abs());
        }
    }
    outcome(
        worst < 1e-9 && uniform_err < 1e-9,
        format!("1000 passes, {vectors} distributions, max |sum - 1| = {worst:.1e}; identical-state attention max dev {uniform_err:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let gaz = Gazetteer::bundled();
    let data = corpus(80, 31, &gaz);
    let ctx = Context::from_training_data(&data, UserInfoDictionary::bundled(), gaz);
    let ex = ctx.examples(&data).unwrap();
    let model = new_model(&ctx, 3);
    let fp = |m: &ProgModel, g: ParamGroup| fingerprint(m.store(), &m.group(g));
    let frozen = [
        ParamGroup::SlotFiller,
        ParamGroup::Intent,
        ParamGroup::DistanceScale,
    ];
    let before: Vec<Vec<u64>> = frozen.iter().map(|&g| fp(&model, g)).collect();
    let mut tr = Trainer::new(model, &ctx, train_cfg(3, 1, 3)).unwrap();
    tr.train_phase1(&ex, None).unwrap();
    let unchanged = frozen
        .iter()
        .zip(&before)
        .all(|(&g, b)| &fp(tr.model(), g) == b);
    let after1: Vec<Vec<u64>> = ParamGroup::ALL.iter().map(|&g| fp(tr.model(), g)).collect();
    tr.train_phase2(&ex, None, 1).unwrap();
    let moved: Vec<&str> = ParamGroup::ALL
        .iter()
        .zip(&after1)
        .filter(|(&g, b)| &fp(tr.model(), g) != *b)
        .map(|(g, _)| g.as_str())
        .collect();
    outcome(
        unchanged && moved.len() == 5,
        format!(
            "frozen groups bitwise unchanged after phase 1: {unchanged}; changed in phase 2: {}",
            moved.join(",")
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let gaz = Gazetteer::bundled();
    let data = corpus(50, 41, &gaz);
    let ctx = Context::from_training_data(&data, UserInfoDictionary::bundled(), gaz);
    let ex = ctx.examples(&data).unwrap();
    let mut cfg = train_cfg(3, 300, 41);
    cfg.eval_each_epoch = false;
    let mut tr = Trainer::new(new_model(&ctx, 41), &ctx, cfg).unwrap();
    tr.train_phase1(&ex, None).unwrap();
    let mut reached = None;
    let (mut tok, mut intent) = (0.0, 0.0);
    for epoch in 1..=300 {
        tr.train_phase2(&ex, None, 1).unwrap();
        let m = evaluate(tr.model(), &ctx, &ex).unwrap();
        (tok, intent) = (m.slot_token_acc, m.intent_acc);
        if tok >= 0.99 && intent == 1.0 {
            reached = Some(epoch);
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        reached.is_some() && secs < 300.0,
        format!(
            "slot token acc {tok:.4}, intent acc {intent:.4} at phase-2 epoch {}, {secs:.1}s",
            reached.map_or("none (300 run)".to_string(), |e| e.to_string())
        ),
    )
}

fn criterion_5() -> Outcome {
    let gaz = Gazetteer::bundled();
    let split = generate_split(500, 200, 51, &gaz);
    let train = synthesize_user_info(&split.train, &gaz, 51);
    let test = synthesize_user_info(&split.test, &gaz, 52);
    let ctx = Context::from_training_data(&train, UserInfoDictionary::bundled(), gaz);
    let (tr_ex, te_ex) = (ctx.examples(&train).unwrap(), ctx.examples(&test).unwrap());
    let mut tr = Trainer::new(new_model(&ctx, 51), &ctx, train_cfg(10, 0, 51)).unwrap();
    let mut accs = Vec::new();
    for _ in 0..10 {
        tr.phase1_epoch(&tr_ex, None).unwrap();
        let acc = info_accuracy(tr.model(), &te_ex).unwrap();
        accs.push(acc);
        if acc >= 0.92 {
            break;
        }
    }
    let last = *accs.last().unwrap();
    outcome(
        last >= 0.92,
        format!(
            "held-out info-tag accuracy {last:.4} after {} phase-1 epoch(s)",
            accs.len()
        ),
    )
}

fn haversine_atan2(a: &City, b: &City) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Every maximal run, with stray `I-X` treated as opening a span.
fn oracle_spans(tags: &[String]) -> BTreeSet<(String, usize, usize)> {
    let label = |t: &str| t.split_once('-').map(|(_, l)| l.to_string());
    let n = tags.len();
    let mut out = BTreeSet::new();
    for s in 0..n {
        for e in s + 1..=n {
            let Some(x) = label(&tags[s]) else { continue };
            let opens =
                tags[s].starts_with("B-") || s == 0 || label(&tags[s - 1]).as_deref() != Some(&x);
            let body = (s + 1..e).all(|t| tags[t] == format!("I-{x}"));
            let closed = e == n || tags[e] != format!("I-{x}");
            if opens && body && closed {
                out.insert((x, s, e));
            }
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
    let pool = ["O", "B-a", "I-a", "B-b", "I-b"];
    let mut span_ok = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..15);
        let draw = |rng: &mut Xoshiro256PlusPlus| -> Vec<String> {
            (0..n)
                .map(|_| pool[rng.random_range(0..5)].to_string())
                .collect()
        };
        let (pred, gold) = (draw(&mut rng), draw(&mut rng));
        let (p, g) = (oracle_spans(&pred), oracle_spans(&gold));
        let correct = p.intersection(&g).count();
        let c = span_counts(&pred, &gold).unwrap();
        if (c.correct, c.predicted, c.gold) == (correct, p.len(), g.len()) {
            span_ok += 1;
        }
    }

    let gaz = Gazetteer::bundled();
    let mut nearby_ok = 0;
    let mut skipped = 0;
    for c in gaz.cities() {
        let expect: BTreeSet<&str> = gaz
            .cities()
            .iter()
            .filter(|o| o.name != c.name && haversine_atan2(c, o) <= 50.0)
            .map(|o| o.name.as_str())
            .collect();
        let got: BTreeSet<&str> = gaz
            .nearby_cities(&c.name, 50.0)
            .unwrap()
            .iter()
            .map(|o| o.name.as_str())
            .collect();
        let borderline = gaz
            .cities()
            .iter()
            .any(|o| (haversine_atan2(c, o) - 50.0).abs() < 1e-9);
        if borderline {
            skipped += 1;
        } else if got == expect {
            nearby_ok += 1;
        }
    }

    let dict = UserInfoDictionary::bundled();
    let data = corpus(300, 61, &gaz);
    let ctx = Context::from_training_data(&data, dict.clone(), gaz.clone());
    let middle = |p: &str| match p {
        "night" => 180.0,
        "morning" => 540.0,
        "afternoon" => 900.0,
        "evening" => 1260.0,
        _ => f64::NAN,
    };
    let mut worst = 0.0f64;
    let mut measured = 0;
    for u in &data {
        let table = ctx.distiller().gold_table(u).unwrap();
        let tags = u.info_tags_or_derive(&dict);
        let mut expect = vec![vec![-1.0; dict.len()]; u.len()];
        for span in iob::spans(&tags).unwrap() {
            let j = dict.index_of(&span.label).unwrap();
            let words = &u.tokens[span.start..span.end];
            let mut best: Option<f64> = None;
            for e in u.user_info.iter().filter(|e| e.info_type == span.label) {
                let d = if span.label == "loc" {
                    match (gaz.lookup(&words.join(" ")), gaz.lookup(&e.content)) {
                        (Some(a), Some(b)) => Some(haversine_atan2(a, b) / 100.0),
                        _ => None,
                    }
                } else {
                    resolve_time(words).map(|m| {
                        let diff = (m as f64 - middle(&e.content)).abs();
                        diff.min(1440.0 - diff) / 360.0
                    })
                };
                if let Some(d) = d {
                    best = Some(best.map_or(d, |b: f64| b.min(d)));
                }
            }
            if let Some(d) = best {
                measured += 1;
                for row in &mut expect[span.start..span.end] {
                    row[j] = d;
                }
            }
        }
        for (t, row) in expect.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                worst = worst.max((table.delta(t, j) - d).abs());
            }
        }
    }
    let checked = gaz.len() - skipped;
    outcome(
        span_ok == 200 && nearby_ok == checked && worst < 1e-9 && measured > 0,
        format!(
            "span oracle {span_ok}/200; nearby oracle {nearby_ok}/{checked} cities; delta max err {worst:.1e} over {measured} measured spans"
        ),
    )
}

fn criterion_7() -> Outcome {
    let gaz = Gazetteer::bundled();
    let dict = UserInfoDictionary::bundled();
    let data = corpus(100, 71, &gaz);
    let ctx = Context::from_training_data(&data, dict.clone(), gaz);
    let mut store = ParamStore::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let beta_vals: Vec<f64> = (0..dict.len() * 2 * dict.len())
        .map(|_| rng.random_range(-3.0..3.0))
        .collect();
    let beta = store.add(
        "beta",
        Tensor::matrix(dict.len(), 2 * dict.len(), beta_vals).unwrap(),
    );
    let (mut multi, mut bad, mut round_trips) = (0, 0, 0);
    for u in &data {
        let tags = u.info_tags_or_derive(&dict);
        let spans = merge_spans(&tags).unwrap();
        if iob::expand(&spans, tags.len()) == tags {
            round_trips += 1;
        }
        let table = ctx.distiller().gold_table(u).unwrap();
        let mut tape = Tape::new();
        let b = tape.param(&store, beta);
        let feats: Vec<Vec<Vec<u64>>> = (0..u.len())
            .map(|t| {
                distance_features(&mut tape, b, &table, t)
                    .unwrap()
                    .iter()
                    .map(|&v| tape.value(v).data().iter().map(|x| x.to_bits()).collect())
                    .collect()
            })
            .collect();
        for s in spans.iter().filter(|s| s.len() > 1) {
            multi += 1;
            let same = (s.start + 1..s.end).all(|t| {
                table
                    .row(t)
                    .iter()
                    .map(|x| x.to_bits())
                    .eq(table.row(s.start).iter().map(|x| x.to_bits()))
                    && feats[t] == feats[s.start]
            });
            if !same {
                bad += 1;
            }
        }
    }
    outcome(
        multi > 0 && bad == 0 && round_trips == data.len(),
        format!("{multi} multi-token spans, {bad} with differing delta or d vectors; merge/expand round trips {round_trips}/{}", data.len()),
    )
}

fn criterion_8() -> Outcome {
    let gaz = Gazetteer::bundled();
    let dict = UserInfoDictionary::bundled();
    let spec = ExperimentSpec {
        variants: vec![
            Variant::Prog,
            Variant::AttBiRnn,
            Variant::AttBiRnnConcatInfo,
        ],
        sizes: vec![100, 200, 400],
        resamples: 5,
        seed: 80,
        synthetic_train: 1000,
        synthetic_test: 300,
        corpus_seed: 81,
        ..ExperimentSpec::default()
    };
    let run = RunConfig::default();
    let (pool, test) = spec.load_corpora(&dict, &gaz).unwrap();
    let curve = run_learning_curve(&spec, &run, &pool, &test, &dict, &gaz).unwrap();
    let f1 = |v: Variant, r: usize| {
        curve
            .rows
            .iter()
            .find(|x| x.variant == v && x.size == 100 && x.resample == r)
            .map_or(f64::NAN, |x| x.slot_f1)
    };
    let wins = (0..5)
        .filter(|&r| f1(Variant::Prog, r) >= f1(Variant::AttBiRnn, r))
        .count();
    for a in &curve.aggregates {
        report(&format!(
            "    {}\tsize {}\tslot F1 {:.4} +- {:.4}\tintent {:.4}",
            a.variant, a.size, a.slot_f1_mean, a.slot_f1_std, a.intent_acc_mean
        ));
    }
    let failed = curve.rows.iter().filter(|r| r.error.is_some()).count();
    outcome(
        wins >= 4 && curve.aggregates.len() == 9 && failed == 0,
        format!("Prog >= Att-BiRNN at size 100 in {wins}/5 resamples; {} aggregate rows, {failed} failed cells", curve.aggregates.len()),
    )
}

fn run_logged(ctx: &Context, ex: &[Example]) -> (Vec<progslu::training::EpochLog>, ProgModel) {
    let mut tr = Trainer::new(new_model(ctx, 9), ctx, train_cfg(1, 2, 9)).unwrap();
    let r = tr.run(ex, Some(ex)).unwrap();
    (r.logs, tr.into_model())
}

fn criterion_9() -> Outcome {
    let gaz = Gazetteer::bundled();
    let data = corpus(40, 91, &gaz);
    let ctx = Context::from_training_data(&data, UserInfoDictionary::bundled(), gaz);
    let ex = ctx.examples(&data).unwrap();
    let (a, model) = run_logged(&ctx, &ex);
    let (b, _) = run_logged(&ctx, &ex);
    let logs_equal = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.same_results(y));

    let ckpt = Checkpoint {
        model: model.clone(),
        vocab: Some(ctx.vocab.clone()),
        dictionary: Some(ctx.dictionary.clone()),
    };
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &ckpt).unwrap();
    let back = read_checkpoint(&mut bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&mut again, &back).unwrap();
    let ids = model.param_ids();
    let params_equal = fingerprint(model.store(), &ids)
        == fingerprint(back.model.store(), &back.model.param_ids());
    let probs = |m: &ProgModel| -> Vec<u64> {
        ex.iter()
            .take(10)
            .flat_map(|e| {
                let mut tape = Tape::new();
                let out = m
                    .forward(&mut tape, &e.tokens, DeltaSource::Table(&e.gold_table))
                    .unwrap();
                out.info_probs
                    .iter()
                    .chain(&out.slot_probs)
                    .chain(out.intent_probs.iter())
                    .flat_map(|&v| {
                        tape.value(v)
                            .data()
                            .iter()
                            .map(|x| x.to_bits())
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let outputs_equal = probs(&model) == probs(&back.model);
    outcome(
        logs_equal && bytes == again && params_equal && outputs_equal,
        format!(
            "epoch logs identical: {logs_equal}; checkpoint bytes stable: {}; parameters bitwise equal: {params_equal}; forward outputs bitwise equal: {outputs_equal}",
            bytes == again
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(u8, &str, fn() -> Outcome, bool); 9] = [
        (1, "gradient fidelity", criterion_1, true),
        (2, "normalization invariants", criterion_2, true),
        (3, "progressive contract", criterion_3, true),
        (4, "overfit capability", criterion_4, true),
        (5, "coarse-task speed", criterion_5, true),
        (6, "oracle equivalences", criterion_6, true),
        (7, "IOB distillation", criterion_7, true),
        (8, "learning-curve trend", criterion_8, false),
        (9, "determinism and persistence", criterion_9, true),
    ];
    let mut hard_failures = Vec::new();
    for (n, name, check, hard) in criteria {
        let start = Instant::now();
        let o = check();
        let status = match (o.pass, hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        report(&format!(
            "criterion {n} [{status}] {name}: {} ({:.1}s)",
            o.detail,
            start.elapsed().as_secs_f64()
        ));
        if !o.pass && hard {
            hard_failures.push(n);
        }
    }
    assert!(
        hard_failures.is_empty(),
        "failed criteria: {hard_failures:?}"
    );
}
