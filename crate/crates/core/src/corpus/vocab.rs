use std::collections::{BTreeSet, HashMap};

use super::{UserInfoDictionary, Utterance};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 1;

/// Bijection between label strings and dense ids.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn from_labels(labels: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut set = LabelSet::default();
        for l in labels {
            if set.index.insert(l.clone(), set.labels.len()).is_some() {
                return Err(Error::Config(format!("duplicate label {l:?}")));
            }
            set.labels.push(l);
        }
        Ok(set)
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Token, slot-tag, info-tag and intent vocabularies.
///
/// Token id 0 is padding and 1 is the unknown token. Slot and info tags put
/// `O` at id 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    pub tokens: LabelSet,
    pub slots: LabelSet,
    pub info: LabelSet,
    pub intents: LabelSet,
}

/// An utterance mapped to ids. Labels absent from the vocabulary make the
/// corresponding gold field `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub tokens: Vec<usize>,
    pub slots: Option<Vec<usize>>,
    pub info: Vec<usize>,
    pub intent: Option<usize>,
}

impl Vocab {
    pub fn build(data: &[Utterance], dictionary: &UserInfoDictionary) -> Self {
        let tokens: BTreeSet<&str> = data
            .iter()
            .flat_map(|u| u.tokens.iter().map(String::as_str))
            .collect();
        let slots: BTreeSet<&str> = data
            .iter()
            .flat_map(|u| u.slot_tags.iter().map(String::as_str))
            .filter(|t| *t != "O")
            .collect();
        let intents: BTreeSet<&str> = data.iter().map(|u| u.intent.as_str()).collect();

        let token_labels = [PAD, UNK]
            .into_iter()
            .chain(tokens.into_iter().filter(|t| *t != PAD && *t != UNK))
            .map(String::from);
        Vocab {
            tokens: LabelSet::from_labels(token_labels).expect("unique"),
            slots: LabelSet::from_labels(std::iter::once("O").chain(slots).map(String::from))
                .expect("unique"),
            info: LabelSet::from_labels(dictionary.info_tag_labels()).expect("unique"),
            intents: LabelSet::from_labels(intents.into_iter().map(String::from)).expect("unique"),
        }
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.tokens.id(token).unwrap_or(UNK_ID)
    }

    pub fn encode(&self, u: &Utterance, dictionary: &UserInfoDictionary) -> Encoded {
        let info_tags = u.info_tags_or_derive(dictionary);
        Encoded {
            tokens: u.tokens.iter().map(|t| self.token_id(t)).collect(),
            slots: u.slot_tags.iter().map(|t| self.slots.id(t)).collect(),
            info: info_tags
                .iter()
                .map(|t| self.info.id(t).unwrap_or(0))
                .collect(),
            intent: self.intents.id(&u.intent),
        }
    }

    /// Line-oriented serialization: a section header per vocabulary followed
    /// by one label per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, set) in self.sections() {
            s.push_str(&format!("[{name}] {}\n", set.len()));
            for l in set.labels() {
                s.push_str(l);
                s.push('\n');
            }
        }
        s
    }

    fn sections(&self) -> [(&'static str, &LabelSet); 4] {
        [
            ("tokens", &self.tokens),
            ("slots", &self.slots),
            ("info", &self.info),
            ("intents", &self.intents),
        ]
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut read = |name: &str| -> Result<LabelSet> {
            let header = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing vocabulary section {name}")))?;
            let count = header
                .strip_prefix(&format!("[{name}] "))
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| Error::Format(format!("bad vocabulary header {header:?}")))?;
            let labels: Vec<String> = (&mut lines).take(count).map(String::from).collect();
            if labels.len() != count {
                return Err(Error::Format(format!(
                    "truncated vocabulary section {name}"
                )));
            }
            LabelSet::from_labels(labels)
        };
        Ok(Vocab {
            tokens: read("tokens")?,
            slots: read("slots")?,
            info: read("info")?,
            intents: read("intents")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::running_example_utterance;

    #[test]
    fn reserved_ids_and_iob_sizes() {
        let d = UserInfoDictionary::bundled();
        let v = Vocab::build(&[running_example_utterance()], &d);
        assert_eq!(v.tokens.label(0), PAD);
        assert_eq!(v.tokens.label(1), UNK);
        assert_eq!(v.token_id("never-seen"), UNK_ID);
        assert_eq!(v.slots.label(0), "O");
        // O + B/I for each of the three bundled info types
        assert_eq!(v.info.len(), 7);
        assert_eq!(v.slots.len(), 5);
        let e = v.encode(&running_example_utterance(), &d);
        assert_eq!(e.info, vec![0, 0, 0, 0, 1, 0, 1]);
        assert!(e.slots.is_some() && e.intent.is_some());
    }

    #[test]
    fn text_round_trip() {
        let d = UserInfoDictionary::bundled();
        let v = Vocab::build(&[running_example_utterance()], &d);
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocab::from_text("[tokens] 3\n<pad>\n").is_err());
    }
}
