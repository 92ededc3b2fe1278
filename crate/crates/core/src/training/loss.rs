use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Divisor of the token-level losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossNorm {
    /// `1/n` for an utterance of `n` tokens.
    #[default]
    PerToken,
    /// `1/K` for a head with `K` tags (`2·types + 1`).
    Draft,
}

impl LossNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            LossNorm::PerToken => "per_token",
            LossNorm::Draft => "draft",
        }
    }
}

impl fmt::Display for LossNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_token" => Ok(LossNorm::PerToken),
            "draft" => Ok(LossNorm::Draft),
            other => Err(Error::Config(format!("unknown loss_norm {other:?}"))),
        }
    }
}

/// Sum of scalar vars.
pub fn add_all(tape: &mut Tape, terms: &[Var]) -> Result<Var> {
    let (&first, rest) = terms
        .split_first()
        .ok_or_else(|| Error::Argument("nothing to add".into()))?;
    rest.iter().try_fold(first, |acc, &x| tape.add(acc, x))
}

/// Normalized token-level cross entropy of a tag sequence.
pub fn sequence_loss(
    tape: &mut Tape,
    probs: &[Var],
    gold: &[usize],
    norm: LossNorm,
) -> Result<Var> {
    if probs.len() != gold.len() || probs.is_empty() {
        return Err(Error::Argument(format!(
            "{} predictions for {} gold tags",
            probs.len(),
            gold.len()
        )));
    }
    let terms = probs
        .iter()
        .zip(gold)
        .map(|(&p, &g)| tape.cross_entropy_index(p, g))
        .collect::<Result<Vec<_>>>()?;
    let total = add_all(tape, &terms)?;
    let divisor = match norm {
        LossNorm::PerToken => probs.len(),
        LossNorm::Draft => tape.value(probs[0]).len(),
    };
    Ok(tape.scalar_mul(total, 1.0 / divisor as f64))
}

/// `L_u`: info-tag cross entropy.
pub fn loss_userinfo(tape: &mut Tape, probs: &[Var], z: &[usize], norm: LossNorm) -> Result<Var> {
    sequence_loss(tape, probs, z, norm)
}

/// `L_s`: slot-tag cross entropy.
pub fn loss_slot(tape: &mut Tape, probs: &[Var], y: &[usize], norm: LossNorm) -> Result<Var> {
    sequence_loss(tape, probs, y, norm)
}

/// `L_I`: unnormalized intent cross entropy.
pub fn loss_intent(tape: &mut Tape, probs: Var, intent: usize) -> Result<Var> {
    tape.cross_entropy_index(probs, intent)
}
