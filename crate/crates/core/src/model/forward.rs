use super::{Baseline, Cell, DecoderVariant, IntentSource, ProgModel};
use crate::autodiff::{argmax, lstm_step, LstmVars, Tape, Tensor, Var};
use crate::corpus::{LabelSet, Utterance};
use crate::distill::{distance_features, merge_spans, Distiller, PriorDistanceTable};
use crate::error::{Error, Result};
use crate::iob;

/// Where the slot stage gets its prior distances from.
#[derive(Clone, Copy)]
pub enum DeltaSource<'a> {
    /// A precomputed table, normally from gold info tags.
    Table(&'a PriorDistanceTable),
    /// Built from the tagging stage's argmax info-tag ids.
    Predicted(&'a dyn Fn(&[usize]) -> Result<PriorDistanceTable>),
}

/// Encoder outputs recorded on a tape.
#[derive(Clone, Debug)]
pub struct EncoderStates {
    /// `h_t = fh_t ⊕ bh_t` per token.
    pub states: Vec<Var>,
    /// The states stacked as a `[T, 2H]` matrix.
    pub matrix: Var,
    /// Attention key projections plus bias, `[T, A]`.
    pub keys: Var,
    /// `fh_T ⊕ bh_1`.
    pub final_state: Var,
}

/// Handles for everything a forward pass produced.
#[derive(Clone, Debug, Default)]
pub struct ForwardOutput {
    /// Empty for baselines.
    pub info_probs: Vec<Var>,
    /// Empty after a tagging-only pass.
    pub slot_probs: Vec<Var>,
    pub intent_probs: Option<Var>,
    pub attention: Vec<Var>,
    pub contexts: Vec<Var>,
    pub phi: Vec<Var>,
    /// Distance table used by the slot stage, when one was used.
    pub table: Option<PriorDistanceTable>,
}

/// Argmax decisions; ties go to the lowest id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub info: Vec<usize>,
    pub slots: Vec<usize>,
    pub intent: usize,
}

impl ForwardOutput {
    pub fn prediction(&self, tape: &Tape) -> Prediction {
        let ids = |vs: &[Var]| vs.iter().map(|&v| argmax(tape.value(v).data())).collect();
        Prediction {
            info: ids(&self.info_probs),
            slots: ids(&self.slot_probs),
            intent: self
                .intent_probs
                .map(|v| argmax(tape.value(v).data()))
                .unwrap_or(0),
        }
    }
}

/// Distances for predicted info-tag ids: ids become labels, stray `I-` tags
/// are repaired to `B-`, then spans are merged and measured.
pub fn predicted_table(
    distiller: &Distiller<'_>,
    u: &Utterance,
    info_labels: &LabelSet,
    ids: &[usize],
) -> Result<PriorDistanceTable> {
    let labels: Vec<&str> = ids.iter().map(|&i| info_labels.label(i)).collect();
    let (tags, _) = iob::repair(&labels);
    Ok(distiller.compute_delta(u, &merge_spans(&tags)?))
}

struct Attention {
    query: Var,
    v: Var,
}

fn cell_vars(tape: &mut Tape, model: &ProgModel, cell: Cell) -> LstmVars {
    LstmVars {
        weight: tape.param(&model.store, cell.weight),
        bias: tape.param(&model.store, cell.bias),
    }
}

fn zeros(tape: &mut Tape, n: usize) -> Var {
    tape.constant(Tensor::zeros(vec![n]))
}

fn affine_softmax(tape: &mut Tape, w: Var, b: Var, x: Var) -> Result<Var> {
    let z = tape.matvec(w, x)?;
    let z = tape.add(z, b)?;
    tape.softmax(z)
}

fn mean(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
    let mut acc = xs[0];
    for &x in &xs[1..] {
        acc = tape.add(acc, x)?;
    }
    Ok(tape.scalar_mul(acc, 1.0 / xs.len() as f64))
}

impl ProgModel {
    pub fn encode(&self, tape: &mut Tape, tokens: &[usize]) -> Result<EncoderStates> {
        if tokens.is_empty() {
            return Err(Error::dim("encode", "empty utterance"));
        }
        let h = self.config.hidden_dim;
        let xs = tokens
            .iter()
            .map(|&id| tape.param_row(&self.store, self.ids.embedding, id))
            .collect::<Result<Vec<_>>>()?;
        let fwd = cell_vars(tape, self, self.ids.enc_fwd);
        let bwd = cell_vars(tape, self, self.ids.enc_bwd);
        let run = |tape: &mut Tape, cell: &LstmVars, order: &mut dyn Iterator<Item = usize>| {
            let mut out = vec![None; xs.len()];
            let (mut hs, mut cs) = (zeros(tape, h), zeros(tape, h));
            for t in order {
                (hs, cs) = lstm_step(tape, xs[t], hs, cs, cell)?;
                out[t] = Some(hs);
            }
            Ok::<_, Error>(
                out.into_iter()
                    .map(|v| v.expect("visited"))
                    .collect::<Vec<_>>(),
            )
        };
        let fh = run(tape, &fwd, &mut (0..xs.len()))?;
        let bh = run(tape, &bwd, &mut (0..xs.len()).rev())?;
        let states = fh
            .iter()
            .zip(&bh)
            .map(|(&f, &b)| tape.concat(&[f, b], 0))
            .collect::<Result<Vec<_>>>()?;
        let final_state = tape.concat(&[fh[xs.len() - 1], bh[0]], 0)?;
        self.encoder_states(tape, states, final_state)
    }

    /// Wraps given `2H`-wide states, precomputing their attention keys.
    pub fn encoder_states(
        &self,
        tape: &mut Tape,
        states: Vec<Var>,
        final_state: Var,
    ) -> Result<EncoderStates> {
        let matrix = tape.stack(&states)?;
        let key_w = tape.param(&self.store, self.ids.att_key);
        let key_b = tape.param(&self.store, self.ids.att_bias);
        let keys = tape.matmul(matrix, key_w)?;
        let keys = tape.add_row(keys, key_b)?;
        Ok(EncoderStates {
            states,
            matrix,
            keys,
            final_state,
        })
    }

    fn attention_vars(&self, tape: &mut Tape) -> Attention {
        Attention {
            query: tape.param(&self.store, self.ids.att_query),
            v: tape.param(&self.store, self.ids.att_v),
        }
    }

    /// `α_t = softmax(e_t)` with `e_{t,k} = v · tanh(W_q s_prev + W_k h_k + b)`,
    /// and the context `c_t = Σ_k α_{t,k} h_k`. Returns `(c_t, α_t)`.
    fn attend(
        &self,
        tape: &mut Tape,
        att: &Attention,
        enc: &EncoderStates,
        s_prev: Var,
    ) -> Result<(Var, Var)> {
        let q = tape.matvec(att.query, s_prev)?;
        let hidden = tape.add_row(enc.keys, q)?;
        let hidden = tape.tanh(hidden);
        let scores = tape.matvec(hidden, att.v)?;
        let alpha = tape.softmax(scores)?;
        let context = tape.vecmat(alpha, enc.matrix)?;
        Ok((context, alpha))
    }

    /// Attention context and weights for an arbitrary previous state.
    pub fn attention_context(
        &self,
        tape: &mut Tape,
        enc: &EncoderStates,
        s_prev: Var,
    ) -> Result<(Var, Var)> {
        let att = self.attention_vars(tape);
        self.attend(tape, &att, enc, s_prev)
    }

    /// Encoder plus info-tagging head.
    pub fn forward_tagging(
        &self,
        tape: &mut Tape,
        tokens: &[usize],
    ) -> Result<(EncoderStates, ForwardOutput)> {
        if self.config.baseline.is_baseline() {
            return Err(Error::Config("baselines have no info-tagging head".into()));
        }
        let enc = self.encode(tape, tokens)?;
        let att = self.attention_vars(tape);
        let out_cell = self.ids.tag_out.expect("prog model has a tagger");
        let w = tape.param(&self.store, out_cell.weight);
        let b = tape.param(&self.store, out_cell.bias);
        let h2 = 2 * self.config.hidden_dim;
        let mut out = ForwardOutput::default();

        match self.config.decoder_variant {
            DecoderVariant::FeedForward => {
                let mut s_prev = zeros(tape, 2 * h2);
                for &h_t in &enc.states {
                    let (c, alpha) = self.attend(tape, &att, &enc, s_prev)?;
                    let s = tape.concat(&[h_t, c], 0)?;
                    out.info_probs.push(affine_softmax(tape, w, b, s)?);
                    out.attention.push(alpha);
                    out.contexts.push(c);
                    s_prev = s;
                }
            }
            DecoderVariant::Lstm => {
                let cell = cell_vars(tape, self, self.ids.tag_lstm.expect("lstm tagger"));
                let (mut hs, mut cs) = (enc.final_state, zeros(tape, h2));
                let mut input = zeros(tape, 2 * h2);
                for &h_t in &enc.states {
                    let (c, alpha) = self.attend(tape, &att, &enc, hs)?;
                    (hs, cs) = lstm_step(tape, input, hs, cs, &cell)?;
                    out.info_probs.push(affine_softmax(tape, w, b, hs)?);
                    out.attention.push(alpha);
                    out.contexts.push(c);
                    input = tape.concat(&[h_t, c], 0)?;
                }
            }
        }
        Ok((enc, out))
    }

    /// `Φ_t`: each info tag's distance vector scaled by its probability, then
    /// the context scaled by the probability of `O`.
    pub fn compute_phi(
        &self,
        tape: &mut Tape,
        info_probs: Var,
        d: &[Var],
        context: Var,
    ) -> Result<Var> {
        let tags = self.config.num_info_tags();
        if tape.value(info_probs).len() != tags || d.len() != self.config.num_info_types {
            return Err(Error::dim(
                "compute_phi",
                format!(
                    "{} tag probabilities and {} distance vectors",
                    tape.value(info_probs).len(),
                    d.len()
                ),
            ));
        }
        let mut blocks = Vec::with_capacity(tags);
        for k in 1..tags {
            blocks.push(tape.scale_by(d[(k - 1) / 2], info_probs, k)?);
        }
        blocks.push(tape.scale_by(context, info_probs, 0)?);
        let phi = tape.concat(&blocks, 0)?;
        if tape.value(phi).len() != self.config.phi_dim() {
            return Err(Error::dim(
                "compute_phi",
                "width disagrees with the model config",
            ));
        }
        Ok(phi)
    }

    /// Full pass: tagging stage, distances, slot stage and intent head.
    pub fn forward(
        &self,
        tape: &mut Tape,
        tokens: &[usize],
        delta: DeltaSource<'_>,
    ) -> Result<ForwardOutput> {
        if self.config.baseline.is_baseline() {
            return self.baseline_forward(tape, tokens, Some(delta));
        }
        let (enc, mut out) = self.forward_tagging(tape, tokens)?;
        let table = match delta {
            DeltaSource::Table(t) => t.clone(),
            DeltaSource::Predicted(f) => {
                let ids: Vec<usize> = out
                    .info_probs
                    .iter()
                    .map(|&p| argmax(tape.value(p).data()))
                    .collect();
                f(&ids)?
            }
        };
        self.check_table(&table, tokens.len())?;
        let beta = tape.param(&self.store, self.ids.beta.expect("prog model has beta"));
        for t in 0..tokens.len() {
            let d = distance_features(tape, beta, &table, t)?;
            let phi = self.compute_phi(tape, out.info_probs[t], &d, out.contexts[t])?;
            out.phi.push(phi);
        }

        let w = tape.param(&self.store, self.ids.slot_out.weight);
        let b = tape.param(&self.store, self.ids.slot_out.bias);
        let mut slot_states = Vec::with_capacity(tokens.len());
        match self.config.decoder_variant {
            DecoderVariant::FeedForward => {
                for (&h_t, &phi) in enc.states.iter().zip(&out.phi) {
                    slot_states.push(tape.concat(&[h_t, phi], 0)?);
                }
            }
            DecoderVariant::Lstm => {
                let h2 = 2 * self.config.hidden_dim;
                let cell = cell_vars(tape, self, self.ids.slot_lstm.expect("lstm slot filler"));
                let (mut hs, mut cs) = (enc.final_state, zeros(tape, h2));
                let mut input = zeros(tape, h2 + self.config.phi_dim());
                for (&h_t, &phi) in enc.states.iter().zip(&out.phi) {
                    (hs, cs) = lstm_step(tape, input, hs, cs, &cell)?;
                    slot_states.push(hs);
                    input = tape.concat(&[h_t, phi], 0)?;
                }
            }
        }
        for &s in &slot_states {
            out.slot_probs.push(affine_softmax(tape, w, b, s)?);
        }
        out.intent_probs = Some(self.intent_head(tape, &enc, &slot_states)?);
        out.table = Some(table);
        Ok(out)
    }

    fn check_table(&self, table: &PriorDistanceTable, len: usize) -> Result<()> {
        if table.len() != len || table.num_types() != self.config.num_info_types {
            return Err(Error::dim(
                "forward",
                format!(
                    "distance table is {}x{}, expected {}x{}",
                    table.len(),
                    table.num_types(),
                    len,
                    self.config.num_info_types
                ),
            ));
        }
        Ok(())
    }

    fn intent_head(
        &self,
        tape: &mut Tape,
        enc: &EncoderStates,
        slot_states: &[Var],
    ) -> Result<Var> {
        let w = tape.param(&self.store, self.ids.intent_out.weight);
        let b = tape.param(&self.store, self.ids.intent_out.bias);
        let s = match self.config.intent_source {
            IntentSource::EncoderFinal => enc.final_state,
            IntentSource::SlotStatesMean => mean(tape, slot_states)?,
        };
        affine_softmax(tape, w, b, s)
    }

    /// Attention BiRNN baseline: slot head over `h_t ⊕ c_t`, plus the
    /// normalized distances of every info type for the concat variant.
    pub fn baseline_forward(
        &self,
        tape: &mut Tape,
        tokens: &[usize],
        delta: Option<DeltaSource<'_>>,
    ) -> Result<ForwardOutput> {
        let concat_info = match self.config.baseline {
            Baseline::None => {
                return Err(Error::Config(
                    "baseline_forward on a non-baseline model".into(),
                ))
            }
            Baseline::AttBiRnn => false,
            Baseline::AttBiRnnConcatInfo => true,
        };
        let table = match (concat_info, delta) {
            (false, _) => None,
            (true, Some(DeltaSource::Table(t))) => {
                self.check_table(t, tokens.len())?;
                Some(t.clone())
            }
            (true, _) => {
                return Err(Error::Config(
                    "the concat-info baseline needs a precomputed distance table".into(),
                ))
            }
        };
        let enc = self.encode(tape, tokens)?;
        let att = self.attention_vars(tape);
        let w = tape.param(&self.store, self.ids.slot_out.weight);
        let b = tape.param(&self.store, self.ids.slot_out.bias);
        let mut out = ForwardOutput::default();
        let mut slot_states = Vec::with_capacity(tokens.len());
        let mut s_prev = zeros(tape, 4 * self.config.hidden_dim);
        for (t, &h_t) in enc.states.iter().enumerate() {
            let (c, alpha) = self.attend(tape, &att, &enc, s_prev)?;
            s_prev = tape.concat(&[h_t, c], 0)?;
            let s = match &table {
                Some(table) => {
                    let info = tape.constant(Tensor::vector(table.row(t).to_vec()));
                    tape.concat(&[s_prev, info], 0)?
                }
                None => s_prev,
            };
            out.slot_probs.push(affine_softmax(tape, w, b, s)?);
            out.attention.push(alpha);
            out.contexts.push(c);
            slot_states.push(s);
        }
        out.intent_probs = Some(self.intent_head(tape, &enc, &slot_states)?);
        out.table = table;
        Ok(out)
    }

    /// Inference on a private tape.
    pub fn predict(&self, tokens: &[usize], delta: DeltaSource<'_>) -> Result<Prediction> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, tokens, delta)?;
        Ok(out.prediction(&tape))
    }
}
