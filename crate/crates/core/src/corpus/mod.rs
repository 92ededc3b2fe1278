//! Utterances, user info, the user-info dictionary, vocabularies, dataset
//! files and the synthetic flight-domain corpus.

mod dictionary;
mod io;
mod sample;
mod synth;
mod vocab;

pub use dictionary::{derive_info_sequence, DistanceKind, InfoType, UserInfoDictionary};
pub use io::{format_dataset, load_dataset, parse_dataset, save_dataset};
pub use sample::sample_subset;
pub use synth::{generate_split, generate_synthetic_corpus, SyntheticSplit};
pub use vocab::{Encoded, LabelSet, Vocab, PAD, UNK};

use crate::error::{Error, Result};
use crate::iob;

/// One `⟨info type, content⟩` pair attached to an utterance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserInfoEntry {
    pub info_type: String,
    pub content: String,
}

impl UserInfoEntry {
    pub fn new(info_type: impl Into<String>, content: impl Into<String>) -> Self {
        UserInfoEntry {
            info_type: info_type.into(),
            content: content.into(),
        }
    }
}

/// A tokenized utterance with gold slot tags, intent and user info.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub slot_tags: Vec<String>,
    pub intent: String,
    pub user_info: Vec<UserInfoEntry>,
    /// User-info tag sequence, derived from `slot_tags` when absent.
    pub info_tags: Option<Vec<String>>,
}

impl Utterance {
    pub fn new<S: Into<String>>(
        tokens: impl IntoIterator<Item = S>,
        slot_tags: impl IntoIterator<Item = S>,
        intent: impl Into<String>,
    ) -> Self {
        Utterance {
            tokens: tokens.into_iter().map(Into::into).collect(),
            slot_tags: slot_tags.into_iter().map(Into::into).collect(),
            intent: intent.into(),
            user_info: Vec::new(),
            info_tags: None,
        }
    }

    pub fn with_user_info(mut self, entries: impl IntoIterator<Item = UserInfoEntry>) -> Self {
        self.user_info.extend(entries);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Checks length agreement and IOB validity; `index` is used in errors.
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |position: usize, message: String| Error::InvalidIob {
            utterance: index,
            position,
            message,
        };
        if self.tokens.is_empty() {
            return Err(bad(0, "utterance has no tokens".into()));
        }
        if self.tokens.len() != self.slot_tags.len() {
            return Err(bad(
                self.tokens.len().min(self.slot_tags.len()),
                format!(
                    "{} tokens but {} slot tags",
                    self.tokens.len(),
                    self.slot_tags.len()
                ),
            ));
        }
        iob::validate(&self.slot_tags).map_err(|v| bad(v.position, v.message))?;
        if let Some(info) = &self.info_tags {
            if info.len() != self.tokens.len() {
                return Err(bad(
                    info.len().min(self.tokens.len()),
                    format!("{} tokens but {} info tags", self.tokens.len(), info.len()),
                ));
            }
            iob::validate(info)
                .map_err(|v| bad(v.position, format!("info tags: {}", v.message)))?;
        }
        Ok(())
    }

    /// Gold slot spans.
    pub fn slot_spans(&self) -> Vec<iob::Span> {
        iob::spans(&self.slot_tags).unwrap_or_default()
    }

    /// Text of tokens `start..end`, joined by single spaces.
    pub fn span_text(&self, start: usize, end: usize) -> String {
        self.tokens[start..end].join(" ")
    }

    /// Info tags, deriving them from the dictionary when not present.
    pub fn info_tags_or_derive(&self, dictionary: &UserInfoDictionary) -> Vec<String> {
        match &self.info_tags {
            Some(tags) => tags.clone(),
            None => derive_info_sequence(self, dictionary),
        }
    }
}

/// The record shown as the running example: a round trip between ny and
/// miami for a user located in Brooklyn.
pub fn running_example_utterance() -> Utterance {
    Utterance::new(
        ["round", "trip", "flights", "between", "ny", "and", "miami"],
        [
            "B-round_trip",
            "I-round_trip",
            "O",
            "O",
            "B-fromloc",
            "O",
            "B-toloc",
        ],
        "atis_flight",
    )
    .with_user_info([UserInfoEntry::new("loc", "Brooklyn, NY")])
}

/// Four tokens with one location span and one time span, and user info for
/// both; small enough for exhaustive finite differences.
pub fn gradcheck_utterance() -> Utterance {
    Utterance::new(
        ["fly", "boston", "8", "pm"],
        [
            "O",
            "B-fromloc.city_name",
            "B-depart_time.time",
            "I-depart_time.time",
        ],
        "atis_flight",
    )
    .with_user_info([
        UserInfoEntry::new("loc", "Cambridge,MA"),
        UserInfoEntry::new("depart_period", "evening"),
    ])
}
