//! Prior distances between tagged spans and user info, and the sigmoid
//! distance features fed to the slot head.

use std::fmt::Write as _;

use crate::autodiff::{Tape, Var};
use crate::corpus::{DistanceKind, UserInfoDictionary, Utterance};
use crate::error::{Error, Result};
use crate::gazetteer::{geo_distance, period_middle, resolve_time, Gazetteer, TimePeriod};
use crate::iob::{self, Span};

/// Distance recorded where a token carries no span of the type, or where the
/// distance cannot be computed.
pub const MISMATCH: f64 = -1.0;
/// Kilometres per unit of normalized geographic distance.
pub const GEO_SCALE_KM: f64 = 100.0;
/// Minutes per unit of normalized time distance.
pub const TIME_SCALE_MIN: f64 = 360.0;

/// Maximal `B-X I-X*` runs of an info-tag sequence.
pub fn merge_spans<S: AsRef<str>>(info_tags: &[S]) -> Result<Vec<Span>> {
    iob::spans(info_tags).map_err(|v| Error::InvalidIob {
        utterance: 0,
        position: v.position,
        message: v.message,
    })
}

/// Minutes between two clock times going the short way round the day.
pub fn circular_minutes(a: u32, b: u32) -> u32 {
    let d = a.abs_diff(b) % 1440;
    d.min(1440 - d)
}

/// Per-token, per-info-type distances. Rows are tokens, columns follow the
/// dictionary's type order.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorDistanceTable {
    num_types: usize,
    raw: Vec<f64>,
    delta: Vec<f64>,
}

impl PriorDistanceTable {
    /// A table of `len` tokens with every entry set to the mismatch sentinel.
    pub fn mismatched(len: usize, num_types: usize) -> Self {
        PriorDistanceTable {
            num_types,
            raw: vec![MISMATCH; len * num_types],
            delta: vec![MISMATCH; len * num_types],
        }
    }

    pub fn len(&self) -> usize {
        if self.num_types == 0 {
            0
        } else {
            self.delta.len() / self.num_types
        }
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn delta(&self, t: usize, j: usize) -> f64 {
        self.delta[t * self.num_types + j]
    }

    pub fn raw(&self, t: usize, j: usize) -> f64 {
        self.raw[t * self.num_types + j]
    }

    /// Normalized distances of token `t` for every type.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.delta[t * self.num_types..(t + 1) * self.num_types]
    }

    fn set(&mut self, t: usize, j: usize, raw: f64, delta: f64) {
        self.raw[t * self.num_types + j] = raw;
        self.delta[t * self.num_types + j] = delta;
    }

    /// `token, type, raw, normalized` rows for every token and type.
    pub fn to_tsv(&self, tokens: &[String], dictionary: &UserInfoDictionary) -> String {
        let mut s = String::from("token\ttype\traw\tnormalized\n");
        for (t, token) in tokens.iter().enumerate().take(self.len()) {
            for (j, ty) in dictionary.types().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{token}\t{}\t{}\t{}",
                    ty.name,
                    self.raw(t, j),
                    self.delta(t, j)
                );
            }
        }
        s
    }
}

/// Computes prior distance tables from a dictionary and gazetteer.
#[derive(Clone, Copy, Debug)]
pub struct Distiller<'a> {
    pub dictionary: &'a UserInfoDictionary,
    pub gazetteer: &'a Gazetteer,
}

impl<'a> Distiller<'a> {
    pub fn new(dictionary: &'a UserInfoDictionary, gazetteer: &'a Gazetteer) -> Self {
        Distiller {
            dictionary,
            gazetteer,
        }
    }

    /// Distances for the given info spans of `u`. Each span takes the
    /// smallest distance over the user's entries of its type.
    pub fn compute_delta(&self, u: &Utterance, spans: &[Span]) -> PriorDistanceTable {
        let mut table = PriorDistanceTable::mismatched(u.len(), self.dictionary.len());
        for span in spans {
            let Some(j) = self.dictionary.index_of(&span.label) else {
                continue;
            };
            let ty = &self.dictionary.types()[j];
            let words = &u.tokens[span.start..span.end.min(u.len())];
            let best = u
                .user_info
                .iter()
                .filter(|e| e.info_type == ty.name)
                .filter_map(|e| self.raw_distance(ty.kind, words, &e.content))
                .min_by(f64::total_cmp);
            let Some(raw) = best else {
                log::trace!("no distance for {} span {:?}", ty.name, words.join(" "));
                continue;
            };
            let scale = match ty.kind {
                DistanceKind::Geo => GEO_SCALE_KM,
                DistanceKind::Time => TIME_SCALE_MIN,
            };
            for t in span.start..span.end.min(u.len()) {
                table.set(t, j, raw, raw / scale);
            }
        }
        table
    }

    fn raw_distance(&self, kind: DistanceKind, words: &[String], content: &str) -> Option<f64> {
        match kind {
            DistanceKind::Geo => {
                let a = self.gazetteer.lookup(&words.join(" "))?;
                let b = self.gazetteer.lookup(content)?;
                Some(geo_distance(a, b))
            }
            DistanceKind::Time => {
                let at = resolve_time(words)?;
                let period: TimePeriod = content.parse().ok()?;
                Some(circular_minutes(at, period_middle(period)) as f64)
            }
        }
    }

    /// Table for an info-tag sequence, gold or predicted.
    pub fn table_from_tags<S: AsRef<str>>(
        &self,
        u: &Utterance,
        info_tags: &[S],
    ) -> Result<PriorDistanceTable> {
        Ok(self.compute_delta(u, &merge_spans(info_tags)?))
    }

    /// Table from the utterance's gold info tags.
    pub fn gold_table(&self, u: &Utterance) -> Result<PriorDistanceTable> {
        self.table_from_tags(u, &u.info_tags_or_derive(self.dictionary))
    }
}

/// `d_t(j) = sigmoid(beta[j] * delta_t(j))` for every base type `j`.
pub fn distance_features(
    tape: &mut Tape,
    beta: Var,
    table: &PriorDistanceTable,
    t: usize,
) -> Result<Vec<Var>> {
    let rows = tape.value(beta).shape().first().copied().unwrap_or(0);
    if rows != table.num_types() {
        return Err(Error::dim(
            "distance_features",
            format!(
                "beta has {rows} rows but the table has {} types",
                table.num_types()
            ),
        ));
    }
    (0..rows)
        .map(|j| {
            let b = tape.row(beta, j)?;
            let scaled = tape.scalar_mul(b, table.delta(t, j));
            Ok(tape.sigmoid(scaled))
        })
        .collect()
}
