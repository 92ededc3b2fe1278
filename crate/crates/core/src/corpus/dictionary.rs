use std::path::Path;

use super::Utterance;
use crate::error::{Error, Result};
use crate::iob::Tag;

const BUNDLED: &str = include_str!("../../data/dictionary.tsv");

/// Which prior distance applies to an info type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Geo,
    Time,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Geo => "geo",
            DistanceKind::Time => "time",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "geo" => Some(DistanceKind::Geo),
            "time" => Some(DistanceKind::Time),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfoType {
    pub name: String,
    pub kind: DistanceKind,
    /// Slot label stems belonging to this type, matched as prefixes.
    pub slot_names: Vec<String>,
}

/// Maps each user-info type to its distance kind and member slots.
///
/// Type order is significant: it fixes the info-tag vocabulary and the
/// column order of distance tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserInfoDictionary {
    types: Vec<InfoType>,
}

impl UserInfoDictionary {
    pub fn new(types: Vec<InfoType>) -> Result<Self> {
        for (i, a) in types.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "invalid info type name {:?}",
                    a.name
                )));
            }
            if a.slot_names.is_empty() {
                return Err(Error::Config(format!("info type {} has no slots", a.name)));
            }
            for b in &types[i + 1..] {
                if a.name == b.name {
                    return Err(Error::Config(format!("duplicate info type {}", a.name)));
                }
                for x in &a.slot_names {
                    for y in &b.slot_names {
                        if x.starts_with(y.as_str()) || y.starts_with(x.as_str()) {
                            return Err(Error::Config(format!(
                                "slot names {x} ({}) and {y} ({}) overlap",
                                a.name, b.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(UserInfoDictionary { types })
    }

    /// The default dictionary: `loc` (geo), `depart_period` and
    /// `arrive_period` (time).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled dictionary is valid")
    }

    /// Parses `info_type<TAB>geo|time<TAB>stem,stem,...` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut types = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let kind = DistanceKind::parse(fields[1])
                .ok_or_else(|| parse_err(format!("unknown distance kind {:?}", fields[1])))?;
            let slot_names: Vec<String> = fields[2]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            types.push(InfoType {
                name: fields[0].to_string(),
                kind,
                slot_names,
            });
        }
        Self::new(types)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.types
            .iter()
            .map(|t| {
                format!(
                    "{}\t{}\t{}\n",
                    t.name,
                    t.kind.as_str(),
                    t.slot_names.join(",")
                )
            })
            .collect()
    }

    pub fn types(&self) -> &[InfoType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn index_of(&self, info_type: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == info_type)
    }

    /// Info type owning a slot label stem (e.g. `fromloc.city_name`).
    pub fn type_of_slot(&self, stem: &str) -> Option<usize> {
        self.types
            .iter()
            .position(|t| t.slot_names.iter().any(|s| stem.starts_with(s.as_str())))
    }

    /// Info tag inventory: `O`, then `B-t`, `I-t` for each type in order.
    pub fn info_tag_labels(&self) -> Vec<String> {
        let mut labels = vec!["O".to_string()];
        for t in &self.types {
            labels.push(format!("B-{}", t.name));
            labels.push(format!("I-{}", t.name));
        }
        labels
    }

    /// Maps slot tags to info tags, keeping the B/I prefix.
    pub fn map_slot_tags<S: AsRef<str>>(&self, slot_tags: &[S]) -> Vec<String> {
        slot_tags
            .iter()
            .map(|tag| {
                let parsed = Tag::parse(tag.as_ref());
                let (prefix, stem) = match parsed {
                    Some(Tag::Begin(l)) => ("B", l),
                    Some(Tag::Inside(l)) => ("I", l),
                    _ => return "O".to_string(),
                };
                match self.type_of_slot(stem) {
                    Some(j) => format!("{prefix}-{}", self.types[j].name),
                    None => "O".to_string(),
                }
            })
            .collect()
    }
}

/// Derives the user-info tag sequence of an utterance from its slot tags.
pub fn derive_info_sequence(u: &Utterance, dictionary: &UserInfoDictionary) -> Vec<String> {
    dictionary.map_slot_tags(&u.slot_tags)
}
