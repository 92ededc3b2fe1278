//! The coarse-to-fine tagging network, its LSTM-decoder variant and the two
//! attention BiRNN baselines.

mod checkpoint;
mod config;
mod forward;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, MAGIC, VERSION,
};
pub use config::{Baseline, DecoderVariant, IntentSource, ModelConfig};
pub use forward::{predicted_table, DeltaSource, EncoderStates, ForwardOutput, Prediction};

use std::fmt;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::autodiff::{glorot_uniform, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Initial value of every distance scale component.
pub const BETA_INIT: f64 = 2.0;

/// Trainable parameter groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    /// Embeddings, both encoder LSTMs and the attention scorer.
    Encoder,
    InfoTagger,
    SlotFiller,
    Intent,
    DistanceScale,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Encoder,
        ParamGroup::InfoTagger,
        ParamGroup::SlotFiller,
        ParamGroup::Intent,
        ParamGroup::DistanceScale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamGroup::Encoder => "theta_r",
            ParamGroup::InfoTagger => "theta_u",
            ParamGroup::SlotFiller => "theta_s",
            ParamGroup::Intent => "theta_I",
            ParamGroup::DistanceScale => "beta",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Cell {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct Ids {
    pub embedding: ParamId,
    pub enc_fwd: Cell,
    pub enc_bwd: Cell,
    pub att_query: ParamId,
    pub att_key: ParamId,
    pub att_bias: ParamId,
    pub att_v: ParamId,
    /// Absent in baselines.
    pub tag_out: Option<Cell>,
    pub tag_lstm: Option<Cell>,
    pub slot_out: Cell,
    pub slot_lstm: Option<Cell>,
    pub intent_out: Cell,
    pub beta: Option<ParamId>,
}

/// Parameters plus the architecture that uses them.
#[derive(Clone, Debug)]
pub struct ProgModel {
    config: ModelConfig,
    store: ParamStore,
    groups: Vec<ParamGroup>,
    pub(crate) ids: Ids,
}

struct Builder {
    store: ParamStore,
    groups: Vec<ParamGroup>,
    rng: Xoshiro256PlusPlus,
}

impl Builder {
    fn add(&mut self, name: &str, group: ParamGroup, value: Tensor) -> ParamId {
        self.groups.push(group);
        self.store.add(name, value)
    }

    fn matrix(&mut self, name: &str, group: ParamGroup, rows: usize, cols: usize) -> ParamId {
        let w = glorot_uniform(rows, cols, &mut self.rng);
        self.add(name, group, w)
    }

    fn vector(&mut self, name: &str, group: ParamGroup, len: usize) -> ParamId {
        self.add(name, group, Tensor::zeros(vec![len]))
    }

    fn linear(&mut self, name: &str, group: ParamGroup, out: usize, inp: usize) -> Cell {
        Cell {
            weight: self.matrix(&format!("{name}.weight"), group, out, inp),
            bias: self.vector(&format!("{name}.bias"), group, out),
        }
    }

    /// LSTM cell with the forget-gate bias set to one.
    fn lstm(&mut self, name: &str, group: ParamGroup, input: usize, hidden: usize) -> Cell {
        let weight = self.matrix(&format!("{name}.weight"), group, 4 * hidden, input + hidden);
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(1.0);
        let bias = self.add(&format!("{name}.bias"), group, Tensor::vector(bias));
        Cell { weight, bias }
    }
}

impl ProgModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        use ParamGroup::*;
        let c = &config;
        let h2 = 2 * c.hidden_dim;
        let mut b = Builder {
            store: ParamStore::new(),
            groups: Vec::new(),
            rng: Xoshiro256PlusPlus::seed_from_u64(c.seed),
        };
        let lstm_decoder = c.decoder_variant == DecoderVariant::Lstm;
        // Width of the previous tagging state that queries the attention.
        let query_dim = if lstm_decoder { h2 } else { 2 * h2 };

        let embedding = b.matrix("embedding", Encoder, c.vocab_size, c.embed_dim);
        let enc_fwd = b.lstm("encoder.fwd", Encoder, c.embed_dim, c.hidden_dim);
        let enc_bwd = b.lstm("encoder.bwd", Encoder, c.embed_dim, c.hidden_dim);
        let att_query = b.matrix("attention.query", Encoder, c.attention_dim, query_dim);
        let att_key = b.matrix("attention.key", Encoder, h2, c.attention_dim);
        let att_bias = b.vector("attention.bias", Encoder, c.attention_dim);
        let v = glorot_uniform(1, c.attention_dim, &mut b.rng).into_data();
        let att_v = b.add("attention.v", Encoder, Tensor::vector(v));

        let (tag_out, tag_lstm, beta) = if c.baseline.is_baseline() {
            (None, None, None)
        } else {
            let tag_lstm = lstm_decoder.then(|| b.lstm("tagger.lstm", InfoTagger, 2 * h2, h2));
            let tag_in = if lstm_decoder { h2 } else { 2 * h2 };
            let tag_out = b.linear("tagger.out", InfoTagger, c.num_info_tags(), tag_in);
            let beta = b.add(
                "beta",
                DistanceScale,
                Tensor::filled(vec![c.num_info_types, c.dim_d], BETA_INIT),
            );
            (Some(tag_out), tag_lstm, Some(beta))
        };

        let slot_lstm = lstm_decoder.then(|| b.lstm("slot.lstm", SlotFiller, h2 + c.phi_dim(), h2));
        let slot_in = Self::slot_state_dim(c);
        let slot_out = b.linear("slot.out", SlotFiller, c.num_slot_tags, slot_in);
        let intent_in = match c.intent_source {
            IntentSource::EncoderFinal => h2,
            IntentSource::SlotStatesMean => slot_in,
        };
        let intent_out = b.linear("intent.out", Intent, c.num_intents, intent_in);

        Ok(ProgModel {
            ids: Ids {
                embedding,
                enc_fwd,
                enc_bwd,
                att_query,
                att_key,
                att_bias,
                att_v,
                tag_out,
                tag_lstm,
                slot_out,
                slot_lstm,
                intent_out,
                beta,
            },
            config,
            store: b.store,
            groups: b.groups,
        })
    }

    /// Width of the slot-head state `s^s_t`.
    fn slot_state_dim(c: &ModelConfig) -> usize {
        let h2 = 2 * c.hidden_dim;
        match (c.baseline, c.decoder_variant) {
            (Baseline::AttBiRnn, _) => 2 * h2,
            (Baseline::AttBiRnnConcatInfo, _) => 2 * h2 + c.num_info_types,
            (Baseline::None, DecoderVariant::FeedForward) => h2 + c.phi_dim(),
            (Baseline::None, DecoderVariant::Lstm) => h2,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn group_of(&self, id: ParamId) -> ParamGroup {
        self.groups[id.index()]
    }

    /// Parameters of one group, in creation order.
    pub fn group(&self, group: ParamGroup) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&id| self.group_of(id) == group)
            .collect()
    }

    /// Groups that own at least one parameter in this architecture.
    pub fn active_groups(&self) -> Vec<ParamGroup> {
        ParamGroup::ALL
            .into_iter()
            .filter(|g| self.groups.contains(g))
            .collect()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.store.ids().collect()
    }

    /// Replaces every parameter value, checking names and shapes.
    pub fn load_values(&mut self, values: Vec<(String, Tensor)>) -> Result<()> {
        if values.len() != self.store.len() {
            return Err(Error::Format(format!(
                "expected {} parameters, found {}",
                self.store.len(),
                values.len()
            )));
        }
        let ids: Vec<ParamId> = self.store.ids().collect();
        for (id, (name, value)) in ids.into_iter().zip(values) {
            let current = self.store.get(id);
            if current.name != name || current.value.shape() != value.shape() {
                return Err(Error::Format(format!(
                    "parameter {name} {:?} does not match {} {:?}",
                    value.shape(),
                    current.name,
                    current.value.shape()
                )));
            }
            *self.store.value_mut(id) = value;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
