//! Losses, the optimizer and the two-phase schedule: phase 1 fits the
//! encoder and info tagger on `L_u`, phase 2 fits everything on `L_s + L_I`.

mod adam;
mod data;
mod loss;

pub use adam::{Adam, AdamConfig};
pub use data::{Context, Example};
pub use loss::{add_all, loss_intent, loss_slot, loss_userinfo, sequence_loss, LossNorm};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::autodiff::{grad_check, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::eval::{evaluate, info_accuracy};
use crate::model::{predicted_table, DeltaSource, ParamGroup, ProgModel};

/// Which info tags feed the distance table during phase 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DeltaMode {
    #[default]
    Gold,
    Predicted,
}

impl DeltaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DeltaMode::Gold => "gold",
            DeltaMode::Predicted => "predicted",
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(DeltaMode::Gold),
            "predicted" => Ok(DeltaMode::Predicted),
            other => Err(Error::Config(format!("unknown delta_source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub delta_source: DeltaMode,
    pub shuffle: bool,
    /// Compute metrics after every epoch.
    pub eval_each_epoch: bool,
    pub loss_norm: LossNorm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phase1_epochs: 3,
            phase2_epochs: 30,
            adam: AdamConfig::default(),
            seed: 0,
            delta_source: DeltaMode::Gold,
            shuffle: true,
            eval_each_epoch: true,
            loss_norm: LossNorm::PerToken,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// One epoch's averages and metrics. Phase-1 rows have no slot or intent
/// figures; metrics are absent when per-epoch evaluation is off.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub phase: u8,
    /// Counts across both phases, starting at 1.
    pub epoch: usize,
    pub loss_u: Option<f64>,
    pub loss_s: Option<f64>,
    pub loss_i: Option<f64>,
    pub info_acc: Option<f64>,
    pub slot_f1: Option<f64>,
    pub intent_acc: Option<f64>,
    pub seconds: f64,
}

pub const EPOCH_LOG_HEADER: &str =
    "phase\tepoch\tloss_u\tloss_s\tloss_i\tinfo_acc\tslot_f1\tintent_acc\tseconds";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EpochLog {
    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
            self.phase,
            self.epoch,
            cell(self.loss_u),
            cell(self.loss_s),
            cell(self.loss_i),
            cell(self.info_acc),
            cell(self.slot_f1),
            cell(self.intent_acc),
            self.seconds
        )
    }

    /// Equality of everything except wall-clock time, bit for bit.
    pub fn same_results(&self, other: &EpochLog) -> bool {
        let bits = |v: Option<f64>| v.map(f64::to_bits);
        self.phase == other.phase
            && self.epoch == other.epoch
            && [
                (self.loss_u, other.loss_u),
                (self.loss_s, other.loss_s),
                (self.loss_i, other.loss_i),
                (self.info_acc, other.info_acc),
                (self.slot_f1, other.slot_f1),
                (self.intent_acc, other.intent_acc),
            ]
            .iter()
            .all(|&(a, b)| bits(a) == bits(b))
    }
}

pub fn epoch_logs_tsv(logs: &[EpochLog]) -> String {
    let mut s = String::from(EPOCH_LOG_HEADER);
    s.push('\n');
    for l in logs {
        s.push_str(&l.to_tsv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub logs: Vec<EpochLog>,
    /// Epoch whose parameters were kept, when metrics were available.
    pub best_epoch: Option<usize>,
    pub best_slot_f1: Option<f64>,
}

/// Runs the schedule on one model.
pub struct Trainer<'a> {
    model: ProgModel,
    ctx: &'a Context,
    cfg: TrainConfig,
    adam: Adam,
    rng: Xoshiro256PlusPlus,
    epoch: usize,
    best: Option<(f64, usize, ParamStore)>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: ProgModel, ctx: &'a Context, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            model,
            ctx,
            adam: Adam::new(cfg.adam),
            rng: Xoshiro256PlusPlus::seed_from_u64(cfg.seed),
            cfg,
            epoch: 0,
            best: None,
        })
    }

    pub fn model(&self) -> &ProgModel {
        &self.model
    }

    pub fn into_model(self) -> ProgModel {
        self.model
    }

    fn order(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        if self.cfg.shuffle {
            idx.shuffle(&mut self.rng);
        }
        idx
    }

    fn ids(&self, groups: &[ParamGroup]) -> Vec<ParamId> {
        self.model
            .param_ids()
            .into_iter()
            .filter(|&id| groups.contains(&self.model.group_of(id)))
            .collect()
    }

    /// One pass of `L_u` updates over the encoder and info tagger.
    pub fn phase1_epoch(
        &mut self,
        train: &[Example],
        eval: Option<&[Example]>,
    ) -> Result<EpochLog> {
        if self.model.config().baseline.is_baseline() {
            return Err(Error::Config("baselines have no phase 1".into()));
        }
        let start = Instant::now();
        let params = self.ids(&[ParamGroup::Encoder, ParamGroup::InfoTagger]);
        let mut total = 0.0;
        for i in self.order(train.len()) {
            let ex = &train[i];
            let mut tape = Tape::new();
            let (_, out) = self.model.forward_tagging(&mut tape, &ex.tokens)?;
            let loss = loss_userinfo(&mut tape, &out.info_probs, &ex.info, self.cfg.loss_norm)?;
            total += finite(tape.value(loss).item())?;
            let grads = tape.backward(loss)?;
            self.adam.step(self.model.store_mut(), &grads, &params);
        }
        self.epoch += 1;
        let info_acc = match (self.cfg.eval_each_epoch, eval) {
            (false, _) => None,
            (true, Some(e)) => Some(info_accuracy(&self.model, e)?),
            (true, None) => Some(info_accuracy(&self.model, train)?),
        };
        Ok(EpochLog {
            phase: 1,
            epoch: self.epoch,
            loss_u: Some(total / train.len().max(1) as f64),
            loss_s: None,
            loss_i: None,
            info_acc,
            slot_f1: None,
            intent_acc: None,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn phase2_loss(&self, tape: &mut Tape, ex: &Example) -> Result<(Var, Option<f64>, f64, f64)> {
        let (slots, intent) = ex.targets()?;
        let out = match self.cfg.delta_source {
            DeltaMode::Gold => {
                self.model
                    .forward(tape, &ex.tokens, DeltaSource::Table(&ex.gold_table))?
            }
            DeltaMode::Predicted if self.model.config().baseline.is_baseline() => self
                .model
                .forward(tape, &ex.tokens, DeltaSource::Table(&ex.gold_table))?,
            DeltaMode::Predicted => {
                let distiller = self.ctx.distiller();
                let from_pred = |ids: &[usize]| {
                    predicted_table(&distiller, &ex.utterance, &self.ctx.vocab.info, ids)
                };
                self.model
                    .forward(tape, &ex.tokens, DeltaSource::Predicted(&from_pred))?
            }
        };
        let ls = loss_slot(tape, &out.slot_probs, slots, self.cfg.loss_norm)?;
        let li = loss_intent(tape, out.intent_probs.expect("full forward"), intent)?;
        let lu = if out.info_probs.is_empty() {
            None
        } else {
            let v = loss_userinfo(tape, &out.info_probs, &ex.info, self.cfg.loss_norm)?;
            Some(tape.value(v).item())
        };
        let (vs, vi) = (tape.value(ls).item(), tape.value(li).item());
        Ok((tape.add(ls, li)?, lu, vs, vi))
    }

    /// One pass of `L_s + L_I` updates over every parameter.
    pub fn phase2_epoch(
        &mut self,
        train: &[Example],
        eval: Option<&[Example]>,
    ) -> Result<EpochLog> {
        let start = Instant::now();
        let params = self.model.param_ids();
        let (mut tu, mut ts, mut ti) = (0.0, 0.0, 0.0);
        let mut has_u = false;
        for i in self.order(train.len()) {
            let mut tape = Tape::new();
            let (loss, lu, ls, li) = self.phase2_loss(&mut tape, &train[i])?;
            finite(tape.value(loss).item())?;
            if let Some(lu) = lu {
                tu += lu;
                has_u = true;
            }
            ts += ls;
            ti += li;
            let grads = tape.backward(loss)?;
            self.adam.step(self.model.store_mut(), &grads, &params);
        }
        self.epoch += 1;
        let n = train.len().max(1) as f64;
        let mut log = EpochLog {
            phase: 2,
            epoch: self.epoch,
            loss_u: has_u.then_some(tu / n),
            loss_s: Some(ts / n),
            loss_i: Some(ti / n),
            info_acc: None,
            slot_f1: None,
            intent_acc: None,
            seconds: 0.0,
        };
        if self.cfg.eval_each_epoch {
            let m = evaluate(&self.model, self.ctx, eval.unwrap_or(train))?;
            log.info_acc = m.info_acc;
            log.slot_f1 = Some(m.slot_f1);
            log.intent_acc = Some(m.intent_acc);
            if self.best.as_ref().is_none_or(|(f, _, _)| m.slot_f1 > *f) {
                self.best = Some((m.slot_f1, self.epoch, self.model.store().clone()));
            }
        }
        log.seconds = start.elapsed().as_secs_f64();
        Ok(log)
    }

    pub fn train_phase1(
        &mut self,
        train: &[Example],
        eval: Option<&[Example]>,
    ) -> Result<Vec<EpochLog>> {
        (0..self.cfg.phase1_epochs)
            .map(|_| {
                let log = self.phase1_epoch(train, eval)?;
                log::info!("{}", log.to_tsv_row());
                Ok(log)
            })
            .collect()
    }

    pub fn train_phase2(
        &mut self,
        train: &[Example],
        eval: Option<&[Example]>,
        epochs: usize,
    ) -> Result<Vec<EpochLog>> {
        (0..epochs)
            .map(|_| {
                let log = self.phase2_epoch(train, eval)?;
                log::info!("{}", log.to_tsv_row());
                Ok(log)
            })
            .collect()
    }

    /// Both phases, then the best-F1 parameters are restored. Baselines
    /// skip phase 1 and spend its epochs in phase 2 instead.
    pub fn run(&mut self, train: &[Example], eval: Option<&[Example]>) -> Result<TrainReport> {
        let mut logs = Vec::new();
        let phase2 = if self.model.config().baseline.is_baseline() {
            self.cfg.phase1_epochs + self.cfg.phase2_epochs
        } else {
            logs.extend(self.train_phase1(train, eval)?);
            self.cfg.phase2_epochs
        };
        logs.extend(self.train_phase2(train, eval, phase2)?);
        let (best_slot_f1, best_epoch) = match self.best.take() {
            Some((f1, epoch, store)) => {
                *self.model.store_mut() = store;
                (Some(f1), Some(epoch))
            }
            None => (None, None),
        };
        Ok(TrainReport {
            logs,
            best_epoch,
            best_slot_f1,
        })
    }
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Argument(format!("training loss became {x}")))
    }
}

/// Total loss `L_u + L_s + L_I` on gold distances, the function checked by
/// finite differences.
pub fn joint_loss(model: &ProgModel, tape: &mut Tape, ex: &Example, norm: LossNorm) -> Result<Var> {
    let (slots, intent) = ex.targets()?;
    let out = model.forward(tape, &ex.tokens, DeltaSource::Table(&ex.gold_table))?;
    let mut terms = vec![
        loss_slot(tape, &out.slot_probs, slots, norm)?,
        loss_intent(tape, out.intent_probs.expect("full forward"), intent)?,
    ];
    if !out.info_probs.is_empty() {
        terms.push(loss_userinfo(tape, &out.info_probs, &ex.info, norm)?);
    }
    add_all(tape, &terms)
}

/// Worst finite-difference relative error per parameter group.
pub fn check_model_gradients(
    model: &ProgModel,
    ex: &Example,
    epsilon: f64,
) -> Result<Vec<(ParamGroup, f64)>> {
    let mut work = model.clone();
    let ids = work.param_ids();
    let report = grad_check(work.store_mut(), &ids, epsilon, |tape, store| {
        let mut m = model.clone();
        *m.store_mut() = store.clone();
        joint_loss(&m, tape, ex, LossNorm::PerToken)
    })?;
    let mut out: Vec<(ParamGroup, f64)> = model
        .active_groups()
        .into_iter()
        .map(|g| (g, 0.0))
        .collect();
    for (id, err) in report.per_param {
        let g = model.group_of(id);
        if let Some(slot) = out.iter_mut().find(|(x, _)| *x == g) {
            slot.1 = slot.1.max(err);
        }
    }
    Ok(out)
}
