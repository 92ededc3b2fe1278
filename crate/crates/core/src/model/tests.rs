use super::*;
use crate::autodiff::{grad_check, Tape, Var};
use crate::corpus::{gradcheck_utterance, UserInfoDictionary, Vocab};
use crate::distill::{Distiller, PriorDistanceTable};
use crate::gazetteer::Gazetteer;
use proptest::prelude::*;

struct Fixture {
    tokens: Vec<usize>,
    slots: Vec<usize>,
    info: Vec<usize>,
    intent: usize,
    table: PriorDistanceTable,
    vocab: Vocab,
}

fn fixture() -> Fixture {
    let (d, g) = (UserInfoDictionary::bundled(), Gazetteer::bundled());
    let u = gradcheck_utterance();
    let vocab = Vocab::build(&[u.clone()], &d);
    let e = vocab.encode(&u, &d);
    let table = Distiller::new(&d, &g).gold_table(&u).unwrap();
    Fixture {
        tokens: e.tokens,
        slots: e.slots.unwrap(),
        info: e.info,
        intent: e.intent.unwrap(),
        table,
        vocab,
    }
}

fn small_config(f: &Fixture) -> ModelConfig {
    let mut c = ModelConfig::new(f.vocab.tokens.len(), 3, f.vocab.slots.len(), 3);
    c.embed_dim = 3;
    c.hidden_dim = 2;
    c.attention_dim = 3;
    c.dim_d = 2;
    c.seed = 5;
    c
}

fn total_loss(model: &ProgModel, tape: &mut Tape, f: &Fixture) -> crate::Result<Var> {
    let out = model.forward(tape, &f.tokens, DeltaSource::Table(&f.table))?;
    let mut terms = Vec::new();
    for (t, &p) in out.info_probs.iter().enumerate() {
        terms.push(tape.cross_entropy_index(p, f.info[t])?);
    }
    for (t, &p) in out.slot_probs.iter().enumerate() {
        terms.push(tape.cross_entropy_index(p, f.slots[t])?);
    }
    terms.push(tape.cross_entropy_index(out.intent_probs.unwrap(), f.intent)?);
    let mut total = terms[0];
    for &x in &terms[1..] {
        total = tape.add(total, x)?;
    }
    Ok(total)
}

fn check_gradients(config: ModelConfig) {
    let f = fixture();
    let mut model = ProgModel::new(config).unwrap();
    let ids = model.param_ids();
    let snapshot = model.clone();
    let report = grad_check(model.store_mut(), &ids, 1e-5, |tape, store| {
        let mut m = snapshot.clone();
        *m.store_mut() = store.clone();
        total_loss(&m, tape, &f)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
}

#[test]
fn gradients_prog_feedforward() {
    check_gradients(small_config(&fixture()));
}

#[test]
fn gradients_prog_lstm_and_mean_intent() {
    let mut c = small_config(&fixture());
    c.decoder_variant = DecoderVariant::Lstm;
    c.intent_source = IntentSource::SlotStatesMean;
    check_gradients(c);
}

#[test]
fn gradients_baselines() {
    for b in [Baseline::AttBiRnn, Baseline::AttBiRnnConcatInfo] {
        let mut c = small_config(&fixture());
        c.baseline = b;
        c.intent_source = IntentSource::SlotStatesMean;
        check_gradients(c);
    }
}

#[test]
fn zero_weights_give_uniform_heads() {
    let f = fixture();
    let mut model = ProgModel::new(small_config(&f)).unwrap();
    for id in model.param_ids() {
        model.store_mut().value_mut(id).data_mut().fill(0.0);
    }
    let mut tape = Tape::new();
    let enc = model.encode(&mut tape, &f.tokens).unwrap();
    assert!(enc
        .states
        .iter()
        .all(|&h| tape.value(h).data().iter().all(|&x| x == 0.0)));
    let out = model
        .forward(&mut tape, &f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    let uniform = |v: Var, n: usize| {
        tape.value(v)
            .data()
            .iter()
            .all(|&p| (p - 1.0 / n as f64).abs() < 1e-12)
    };
    let c = model.config();
    assert!(out
        .info_probs
        .iter()
        .all(|&p| uniform(p, c.num_info_tags())));
    assert!(out.slot_probs.iter().all(|&p| uniform(p, c.num_slot_tags)));
    assert!(uniform(out.intent_probs.unwrap(), c.num_intents));
}

#[test]
fn shapes_and_normalization() {
    let f = fixture();
    for variant in [DecoderVariant::FeedForward, DecoderVariant::Lstm] {
        let mut c = small_config(&f);
        c.decoder_variant = variant;
        let model = ProgModel::new(c.clone()).unwrap();
        let mut tape = Tape::new();
        let out = model
            .forward(&mut tape, &f.tokens, DeltaSource::Table(&f.table))
            .unwrap();
        assert_eq!(out.info_probs.len(), f.tokens.len());
        assert_eq!(out.slot_probs.len(), f.tokens.len());
        for &p in out
            .info_probs
            .iter()
            .chain(&out.slot_probs)
            .chain(&out.attention)
        {
            let v = tape.value(p).data();
            assert!(v.iter().all(|&x| x > 0.0));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(tape.value(out.phi[0]).len(), c.phi_dim());
        assert_eq!(tape.value(out.info_probs[0]).len(), c.num_info_tags());
    }
}

#[test]
fn forward_is_deterministic_and_predicted_path_runs() {
    let f = fixture();
    let model = ProgModel::new(small_config(&f)).unwrap();
    let a = model
        .predict(&f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    let b = model
        .predict(&f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    assert_eq!(a, b);
    let (d, g) = (UserInfoDictionary::bundled(), Gazetteer::bundled());
    let u = gradcheck_utterance();
    let dist = Distiller::new(&d, &g);
    let from_pred = |ids: &[usize]| predicted_table(&dist, &u, &f.vocab.info, ids);
    let p = model
        .predict(&f.tokens, DeltaSource::Predicted(&from_pred))
        .unwrap();
    assert_eq!(p.slots.len(), 4);
    assert_eq!(p.info, a.info);
}

#[test]
fn single_token_attention_is_identity() {
    let f = fixture();
    let model = ProgModel::new(small_config(&f)).unwrap();
    let mut tape = Tape::new();
    let enc = model.encode(&mut tape, &f.tokens[..1]).unwrap();
    assert_eq!(tape.value(enc.states[0]).len(), 4);
    let s = tape.constant(Tensor::vector(vec![
        0.3, -0.2, 0.9, 0.1, 0.0, 0.5, -1.0, 2.0,
    ]));
    let (c, alpha) = model.attention_context(&mut tape, &enc, s).unwrap();
    assert_eq!(tape.value(alpha).data(), &[1.0]);
    assert_eq!(tape.value(c).data(), tape.value(enc.states[0]).data());
}

#[test]
fn identical_states_give_uniform_attention() {
    let f = fixture();
    let model = ProgModel::new(small_config(&f)).unwrap();
    let mut tape = Tape::new();
    let h = vec![0.4, -0.7, 0.2, 0.9];
    let states: Vec<Var> = (0..5)
        .map(|_| tape.constant(Tensor::vector(h.clone())))
        .collect();
    let enc = model
        .encoder_states(&mut tape, states.clone(), states[0])
        .unwrap();
    let s = tape.constant(Tensor::vector(
        (0..8).map(|i| i as f64 * 0.37 - 1.0).collect(),
    ));
    let (c, alpha) = model.attention_context(&mut tape, &enc, s).unwrap();
    assert!(tape
        .value(alpha)
        .data()
        .iter()
        .all(|&a| (a - 0.2).abs() < 1e-12));
    for (x, y) in tape.value(c).data().iter().zip(&h) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn mirrored_encoder_on_reversed_input() {
    let f = fixture();
    let a = ProgModel::new(small_config(&f)).unwrap();
    let mut b = a.clone();
    let (fw, bw) = (a.ids.enc_fwd, a.ids.enc_bwd);
    for (x, y) in [(fw.weight, bw.weight), (fw.bias, bw.bias)] {
        let (vx, vy) = (a.store().value(x).clone(), a.store().value(y).clone());
        *b.store_mut().value_mut(x) = vy;
        *b.store_mut().value_mut(y) = vx;
    }
    let reversed: Vec<usize> = f.tokens.iter().rev().copied().collect();
    let (mut ta, mut tb) = (Tape::new(), Tape::new());
    let ea = a.encode(&mut ta, &f.tokens).unwrap();
    let eb = b.encode(&mut tb, &reversed).unwrap();
    let n = f.tokens.len();
    let h = a.config().hidden_dim;
    for t in 0..n {
        let ha = ta.value(ea.states[t]).data();
        let hb = tb.value(eb.states[n - 1 - t]).data();
        assert_eq!(&ha[..h], &hb[h..]);
        assert_eq!(&ha[h..], &hb[..h]);
    }
}

#[test]
fn phi_limits() {
    let f = fixture();
    let model = ProgModel::new(small_config(&f)).unwrap();
    let c = model.config().clone();
    let mut tape = Tape::new();
    let d: Vec<Var> = (0..c.num_info_types)
        .map(|j| tape.constant(Tensor::vector(vec![0.1 * (j + 1) as f64; c.dim_d])))
        .collect();
    let ctx = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]));
    let mut on = |k: usize| {
        let mut p = vec![0.0; c.num_info_tags()];
        p[k] = 1.0;
        let p = tape.constant(Tensor::vector(p));
        let phi = model.compute_phi(&mut tape, p, &d, ctx).unwrap();
        tape.value(phi).data().to_vec()
    };
    let o = on(0);
    let blocks = 2 * c.num_info_types * c.dim_d;
    assert!(o[..blocks].iter().all(|&x| x == 0.0));
    assert_eq!(&o[blocks..], &[1.0, 2.0, 3.0, 4.0]);
    // I-depart_period is tag 4, base type 1
    let v = on(4);
    for (i, &x) in v.iter().enumerate() {
        let want = if (3 * c.dim_d..4 * c.dim_d).contains(&i) {
            0.2
        } else {
            0.0
        };
        assert_eq!(x, want, "position {i}");
    }
}

#[test]
fn groups_partition_parameters() {
    let f = fixture();
    for baseline in [Baseline::None, Baseline::AttBiRnn] {
        let mut c = small_config(&f);
        c.baseline = baseline;
        let model = ProgModel::new(c).unwrap();
        let mut seen: Vec<ParamId> = ParamGroup::ALL
            .iter()
            .flat_map(|&g| model.group(g))
            .collect();
        seen.sort();
        assert_eq!(seen, model.param_ids());
        let expected = if baseline.is_baseline() { 3 } else { 5 };
        assert_eq!(model.active_groups().len(), expected);
    }
    let model = ProgModel::new(small_config(&f)).unwrap();
    let beta = model.group(ParamGroup::DistanceScale);
    assert_eq!(beta.len(), 1);
    assert!(model
        .store()
        .value(beta[0])
        .data()
        .iter()
        .all(|&x| x == BETA_INIT));
}

#[test]
fn config_validation_and_text() {
    let f = fixture();
    let mut c = small_config(&f);
    c.decoder_variant = DecoderVariant::Lstm;
    c.intent_source = IntentSource::SlotStatesMean;
    assert_eq!(ModelConfig::from_text(&c.to_text()).unwrap(), c);
    c.baseline = Baseline::AttBiRnn;
    assert!(matches!(ProgModel::new(c.clone()), Err(Error::Config(_))));
    c.baseline = Baseline::None;
    c.hidden_dim = 0;
    assert!(ProgModel::new(c).is_err());
    assert!(ModelConfig::from_text("vocab_size=3\n").is_err());
    let plain = ProgModel::new(small_config(&f)).unwrap();
    let mut tape = Tape::new();
    assert!(matches!(
        plain.baseline_forward(&mut tape, &f.tokens, None),
        Err(Error::Config(_))
    ));
}

#[test]
fn concat_baseline_block_width() {
    let f = fixture();
    let mut c = small_config(&f);
    c.baseline = Baseline::AttBiRnnConcatInfo;
    let model = ProgModel::new(c.clone()).unwrap();
    let w = model.store().value(model.ids.slot_out.weight);
    assert_eq!(w.shape()[1], 4 * c.hidden_dim + c.num_info_types);
    let mut tape = Tape::new();
    assert!(model.baseline_forward(&mut tape, &f.tokens, None).is_err());
    let out = model
        .forward(&mut tape, &f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    assert!(out.info_probs.is_empty());
    assert_eq!(out.slot_probs.len(), 4);
}

#[test]
fn checkpoint_round_trip() {
    let f = fixture();
    let model = ProgModel::new(small_config(&f)).unwrap();
    let ckpt = Checkpoint {
        model: model.clone(),
        vocab: Some(f.vocab.clone()),
        dictionary: Some(UserInfoDictionary::bundled()),
    };
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &ckpt).unwrap();
    let back = read_checkpoint(&mut bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&mut again, &back).unwrap();
    assert_eq!(bytes, again);
    for id in model.param_ids() {
        let (x, y) = (
            model.store().value(id).data(),
            back.model.store().value(id).data(),
        );
        assert!(x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(back.vocab.as_ref(), Some(&f.vocab));
    let p1 = model
        .predict(&f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    let p2 = back
        .model
        .predict(&f.tokens, DeltaSource::Table(&f.table))
        .unwrap();
    assert_eq!(p1, p2);

    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(matches!(
        read_checkpoint(&mut bad.as_slice()),
        Err(Error::Format(_))
    ));
    assert!(read_checkpoint(&mut &bytes[..bytes.len() - 3]).is_err());
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(read_checkpoint(&mut wrong_version.as_slice()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_inputs_give_distributions(seed in 0u64..1000, len in 1usize..7) {
        let f = fixture();
        let mut c = small_config(&f);
        c.seed = seed;
        let model = ProgModel::new(c).unwrap();
        let tokens: Vec<usize> = (0..len).map(|i| (seed as usize + 3 * i) % f.vocab.tokens.len()).collect();
        let table = PriorDistanceTable::mismatched(len, 3);
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &tokens, DeltaSource::Table(&table)).unwrap();
        for &p in out.info_probs.iter().chain(&out.slot_probs).chain(&out.attention).chain(out.intent_probs.iter()) {
            let s: f64 = tape.value(p).data().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
