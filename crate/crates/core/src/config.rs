//! Run configuration: `key = value` lines, `#` starts a comment. Every key
//! is optional and unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::corpus::UserInfoDictionary;
use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::model::{Baseline, DecoderVariant, IntentSource, ModelConfig};
use crate::training::{Context, TrainConfig};

/// Model hyperparameters that do not depend on the data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSettings {
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// `None` means the info-tag count without `O`.
    pub dim_d: Option<usize>,
    pub decoder_variant: DecoderVariant,
    pub intent_source: IntentSource,
    pub baseline: Baseline,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            seed: 0,
            embed_dim: 16,
            hidden_dim: 16,
            attention_dim: 16,
            dim_d: None,
            decoder_variant: DecoderVariant::FeedForward,
            intent_source: IntentSource::EncoderFinal,
            baseline: Baseline::None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub checkpoint: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    /// Bundled dictionary when absent.
    pub dictionary: Option<PathBuf>,
    /// Bundled gazetteer when absent.
    pub gazetteer: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "seed",
    "embed_dim",
    "hidden_dim",
    "attention_dim",
    "dim_d",
    "decoder_variant",
    "intent_source",
    "baseline",
    "phase1_epochs",
    "phase2_epochs",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "clip_norm",
    "delta_source",
    "shuffle",
    "eval_each_epoch",
    "loss_norm",
    "checkpoint",
    "eval_data",
    "dictionary",
    "gazetteer",
];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

fn path_or_none(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("key {k} given twice")));
            }
            c.set(k, v)?;
        }
        c.train.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "seed" => {
                m.seed = parse_value(key, v)?;
                t.seed = m.seed;
            }
            "embed_dim" => m.embed_dim = parse_value(key, v)?,
            "hidden_dim" => m.hidden_dim = parse_value(key, v)?,
            "attention_dim" => m.attention_dim = parse_value(key, v)?,
            "dim_d" => {
                m.dim_d = if v == "auto" {
                    None
                } else {
                    Some(parse_value(key, v)?)
                }
            }
            "decoder_variant" => m.decoder_variant = v.parse()?,
            "intent_source" => m.intent_source = v.parse()?,
            "baseline" => m.baseline = v.parse()?,
            "phase1_epochs" => t.phase1_epochs = parse_value(key, v)?,
            "phase2_epochs" => t.phase2_epochs = parse_value(key, v)?,
            "learning_rate" => t.adam.learning_rate = parse_value(key, v)?,
            "adam_beta1" => t.adam.beta1 = parse_value(key, v)?,
            "adam_beta2" => t.adam.beta2 = parse_value(key, v)?,
            "adam_epsilon" => t.adam.epsilon = parse_value(key, v)?,
            "clip_norm" => t.adam.clip_norm = parse_value(key, v)?,
            "delta_source" => t.delta_source = v.parse()?,
            "shuffle" => t.shuffle = parse_bool(key, v)?,
            "eval_each_epoch" => t.eval_each_epoch = parse_bool(key, v)?,
            "loss_norm" => t.loss_norm = v.parse()?,
            "checkpoint" => self.checkpoint = path_or_none(v),
            "eval_data" => self.eval_data = path_or_none(v),
            "dictionary" => self.dictionary = path_or_none(v),
            "gazetteer" => self.gazetteer = path_or_none(v),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// The effective configuration, one line per key, parseable by
    /// [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let (m, t) = (&self.model, &self.train);
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        };
        let values = [
            m.seed.to_string(),
            m.embed_dim.to_string(),
            m.hidden_dim.to_string(),
            m.attention_dim.to_string(),
            m.dim_d.map_or("auto".to_string(), |d| d.to_string()),
            m.decoder_variant.to_string(),
            m.intent_source.to_string(),
            m.baseline.to_string(),
            t.phase1_epochs.to_string(),
            t.phase2_epochs.to_string(),
            t.adam.learning_rate.to_string(),
            t.adam.beta1.to_string(),
            t.adam.beta2.to_string(),
            t.adam.epsilon.to_string(),
            t.adam.clip_norm.to_string(),
            t.delta_source.to_string(),
            t.shuffle.to_string(),
            t.eval_each_epoch.to_string(),
            t.loss_norm.to_string(),
            path(&self.checkpoint),
            path(&self.eval_data),
            path(&self.dictionary),
            path(&self.gazetteer),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn load_dictionary(&self) -> Result<UserInfoDictionary> {
        match &self.dictionary {
            Some(p) => UserInfoDictionary::load(p),
            None => Ok(UserInfoDictionary::bundled()),
        }
    }

    pub fn load_gazetteer(&self) -> Result<Gazetteer> {
        match &self.gazetteer {
            Some(p) => Gazetteer::load(p),
            None => Ok(Gazetteer::bundled()),
        }
    }

    /// Model shapes for the vocabularies in `ctx`.
    pub fn model_config(&self, ctx: &Context) -> ModelConfig {
        let m = &self.model;
        let mut c = ModelConfig::new(
            ctx.vocab.tokens.len(),
            ctx.dictionary.len(),
            ctx.vocab.slots.len(),
            ctx.vocab.intents.len().max(1),
        );
        c.embed_dim = m.embed_dim;
        c.hidden_dim = m.hidden_dim;
        c.attention_dim = m.attention_dim;
        c.dim_d = m.dim_d.unwrap_or(2 * ctx.dictionary.len());
        c.decoder_variant = m.decoder_variant;
        c.intent_source = m.intent_source;
        c.baseline = m.baseline;
        c.seed = m.seed;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_and_reparse() {
        let c = RunConfig::default();
        assert_eq!(c.train.phase1_epochs, 3);
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn parses_values_and_comments() {
        let c = RunConfig::parse(
            "# run\nseed = 9\nhidden_dim=8 # small\ndim_d = 3\ndecoder_variant = lstm\nshuffle = false\n\
             delta_source = predicted\nloss_norm = draft\ngazetteer = g.tsv\n",
        )
        .unwrap();
        assert_eq!(c.model.seed, 9);
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.model.hidden_dim, 8);
        assert_eq!(c.model.dim_d, Some(3));
        assert_eq!(c.model.decoder_variant, DecoderVariant::Lstm);
        assert!(!c.train.shuffle);
        assert_eq!(c.gazetteer, Some(PathBuf::from("g.tsv")));
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RunConfig::parse("colour = red\n"),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::parse("seed = 1\nseed = 2\n").is_err());
        assert!(RunConfig::parse("learning_rate = 0\n").is_err());
        assert!(RunConfig::parse("seed\n").is_err());
        assert!(RunConfig::parse("baseline = crf\n").is_err());
    }
}
