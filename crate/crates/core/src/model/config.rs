use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
        pub enum $name {
            #[default]
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(DecoderVariant { FeedForward => "feedforward", Lstm => "lstm" });
keyword_enum!(IntentSource { EncoderFinal => "encoder_final", SlotStatesMean => "slot_states_mean" });
keyword_enum!(Baseline { None => "none", AttBiRnn => "att_birnn", AttBiRnnConcatInfo => "att_birnn_concat_info" });

impl Baseline {
    pub fn is_baseline(self) -> bool {
        self != Baseline::None
    }
}

/// Shapes and architecture switches. Every weight shape follows from these.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Per direction; encoder states are twice this wide.
    pub hidden_dim: usize,
    /// Hidden width of the attention scorer.
    pub attention_dim: usize,
    /// Base user-info types; the info-tag inventory has `2 * n + 1` entries.
    pub num_info_types: usize,
    /// Slot tags including `O`.
    pub num_slot_tags: usize,
    pub num_intents: usize,
    /// Width of each distance feature vector.
    pub dim_d: usize,
    pub decoder_variant: DecoderVariant,
    pub intent_source: IntentSource,
    pub baseline: Baseline,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for everything but the vocabulary-derived sizes.
    pub fn new(
        vocab_size: usize,
        num_info_types: usize,
        num_slot_tags: usize,
        num_intents: usize,
    ) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 16,
            hidden_dim: 16,
            attention_dim: 16,
            num_info_types,
            num_slot_tags,
            num_intents,
            dim_d: 2 * num_info_types,
            decoder_variant: DecoderVariant::FeedForward,
            intent_source: IntentSource::EncoderFinal,
            baseline: Baseline::None,
            seed: 0,
        }
    }

    /// Info tags including `O`.
    pub fn num_info_tags(&self) -> usize {
        2 * self.num_info_types + 1
    }

    /// Width of the distilled slot input `Φ_t`.
    pub fn phi_dim(&self) -> usize {
        2 * self.num_info_types * self.dim_d + 2 * self.hidden_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("attention_dim", self.attention_dim),
            ("num_info_types", self.num_info_types),
            ("num_slot_tags", self.num_slot_tags),
            ("num_intents", self.num_intents),
            ("dim_d", self.dim_d),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.baseline.is_baseline() && self.decoder_variant == DecoderVariant::Lstm {
            return Err(Error::Config(
                "baselines use the feedforward decoder only".into(),
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "vocab_size={}\nembed_dim={}\nhidden_dim={}\nattention_dim={}\nnum_info_types={}\n\
             num_slot_tags={}\nnum_intents={}\ndim_d={}\ndecoder_variant={}\nintent_source={}\n\
             baseline={}\nseed={}\n",
            self.vocab_size,
            self.embed_dim,
            self.hidden_dim,
            self.attention_dim,
            self.num_info_types,
            self.num_slot_tags,
            self.num_intents,
            self.dim_d,
            self.decoder_variant,
            self.intent_source,
            self.baseline,
            self.seed,
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ModelConfig::new(1, 1, 1, 1);
        let mut seen = std::collections::HashSet::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad model config line {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || {
                v.parse::<usize>()
                    .map_err(|e| Error::Format(format!("{k}: {e}")))
            };
            match k {
                "vocab_size" => c.vocab_size = num()?,
                "embed_dim" => c.embed_dim = num()?,
                "hidden_dim" => c.hidden_dim = num()?,
                "attention_dim" => c.attention_dim = num()?,
                "num_info_types" => c.num_info_types = num()?,
                "num_slot_tags" => c.num_slot_tags = num()?,
                "num_intents" => c.num_intents = num()?,
                "dim_d" => c.dim_d = num()?,
                "decoder_variant" => c.decoder_variant = v.parse()?,
                "intent_source" => c.intent_source = v.parse()?,
                "baseline" => c.baseline = v.parse()?,
                "seed" => c.seed = v.parse().map_err(|e| Error::Format(format!("seed: {e}")))?,
                other => return Err(Error::Format(format!("unknown model config key {other:?}"))),
            }
            seen.insert(k.to_string());
        }
        if seen.len() != 12 {
            return Err(Error::Format("model config is missing keys".into()));
        }
        c.validate()?;
        Ok(c)
    }
}
