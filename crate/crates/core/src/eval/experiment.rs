use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::evaluate;
use super::svg::{line_chart_svg, Series};
use crate::config::RunConfig;
use crate::corpus::{generate_split, load_dataset, sample_subset, UserInfoDictionary, Utterance};
use crate::error::{Error, Result};
use crate::gazetteer::{synthesize_user_info, Gazetteer};
use crate::model::{Baseline, ProgModel};
use crate::training::{Context, Trainer};

/// A model family compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Prog,
    AttBiRnn,
    AttBiRnnConcatInfo,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Prog => "prog",
            Variant::AttBiRnn => "att_birnn",
            Variant::AttBiRnnConcatInfo => "att_birnn_concat_info",
        }
    }

    pub fn baseline(self) -> Baseline {
        match self {
            Variant::Prog => Baseline::None,
            Variant::AttBiRnn => Baseline::AttBiRnn,
            Variant::AttBiRnnConcatInfo => Baseline::AttBiRnnConcatInfo,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prog" => Ok(Variant::Prog),
            "att_birnn" => Ok(Variant::AttBiRnn),
            "att_birnn_concat_info" => Ok(Variant::AttBiRnnConcatInfo),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// What to run. Parsed from `key = value` lines like the run config.
///
/// Without `train_data` a synthetic corpus of `synthetic_train` utterances
/// plus a disjoint `synthetic_test` split is generated and given user info.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub variants: Vec<Variant>,
    pub sizes: Vec<usize>,
    /// Resamples per size; resample `r` uses seed `seed + r` for both the
    /// subset and the model.
    pub resamples: usize,
    pub seed: u64,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub corpus_seed: u64,
    /// Run configuration for model and training settings.
    pub config: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Which experiments to run.
    pub learning_curve: bool,
    pub training_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            variants: vec![
                Variant::Prog,
                Variant::AttBiRnn,
                Variant::AttBiRnnConcatInfo,
            ],
            sizes: vec![100, 200, 400],
            resamples: 5,
            seed: 0,
            train_data: None,
            test_data: None,
            synthetic_train: 1000,
            synthetic_test: 300,
            corpus_seed: 7,
            config: None,
            output_dir: PathBuf::from("experiment_out"),
            learning_curve: true,
            training_time: true,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Config(format!("{key}: {e}")))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = ExperimentSpec::default();
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
            match k {
                "variants" => s.variants = list(k, v)?,
                "sizes" => s.sizes = list(k, v)?,
                "resamples" => s.resamples = num(k, v)?,
                "seed" => s.seed = num(k, v)?,
                "train_data" => s.train_data = Some(PathBuf::from(v)),
                "test_data" => s.test_data = Some(PathBuf::from(v)),
                "synthetic_train" => s.synthetic_train = num(k, v)?,
                "synthetic_test" => s.synthetic_test = num(k, v)?,
                "corpus_seed" => s.corpus_seed = num(k, v)?,
                "config" => s.config = Some(PathBuf::from(v)),
                "output_dir" => s.output_dir = PathBuf::from(v),
                "learning_curve" => s.learning_curve = num(k, v)?,
                "training_time" => s.training_time = num(k, v)?,
                other => return Err(Error::Config(format!("unknown experiment key {other:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::parse(&text)?;
        // Relative paths in a spec are relative to the spec file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.train_data, &mut spec.test_data, &mut spec.config]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config(
                "an experiment needs at least one variant and one size".into(),
            ));
        }
        if self.resamples == 0 {
            return Err(Error::Config("resamples must be at least 1".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::Config("training sizes must be positive".into()));
        }
        if self.train_data.is_none() && self.sizes.iter().any(|&s| s > self.synthetic_train) {
            return Err(Error::Config(
                "a training size exceeds synthetic_train".into(),
            ));
        }
        Ok(())
    }

    /// Training pool and test set, with user info attached to generated data.
    pub fn load_corpora(
        &self,
        dictionary: &UserInfoDictionary,
        gazetteer: &Gazetteer,
    ) -> Result<(Vec<Utterance>, Vec<Utterance>)> {
        match (&self.train_data, &self.test_data) {
            (Some(tr), Some(te)) => {
                Ok((load_dataset(tr, dictionary)?, load_dataset(te, dictionary)?))
            }
            (None, None) => {
                let split = generate_split(
                    self.synthetic_train,
                    self.synthetic_test,
                    self.corpus_seed,
                    gazetteer,
                );
                let train = synthesize_user_info(&split.train, gazetteer, self.corpus_seed);
                let test =
                    synthesize_user_info(&split.test, gazetteer, self.corpus_seed.wrapping_add(1));
                Ok((train, test))
            }
            _ => Err(Error::Config(
                "give both train_data and test_data, or neither".into(),
            )),
        }
    }
}

/// One trained-and-evaluated cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub variant: Variant,
    pub size: usize,
    pub resample: usize,
    pub slot_f1: f64,
    pub intent_acc: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub variant: Variant,
    pub size: usize,
    pub runs: usize,
    pub slot_f1_mean: f64,
    pub slot_f1_std: f64,
    pub intent_acc_mean: f64,
    pub intent_acc_std: f64,
}

#[derive(Clone, Debug)]
pub struct CurveReport {
    pub rows: Vec<CurveRow>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn train_cell(
    run: &RunConfig,
    variant: Variant,
    subset: &[Utterance],
    test: &[Utterance],
    dictionary: &UserInfoDictionary,
    gazetteer: &Gazetteer,
    seed: u64,
    per_epoch_eval: bool,
) -> Result<(ProgModel, Context, crate::training::TrainReport)> {
    let ctx = Context::from_training_data(subset, dictionary.clone(), gazetteer.clone());
    let mut run = run.clone();
    run.model.seed = seed;
    run.model.baseline = variant.baseline();
    if variant != Variant::Prog {
        run.model.decoder_variant = crate::model::DecoderVariant::FeedForward;
    }
    run.train.seed = seed;
    run.train.eval_each_epoch = per_epoch_eval;
    let model = ProgModel::new(run.model_config(&ctx))?;
    let train_ex = ctx.examples(subset)?;
    let test_ex = ctx.examples(test)?;
    let mut trainer = Trainer::new(model, &ctx, run.train.clone())?;
    let report = trainer.run(&train_ex, Some(&test_ex))?;
    let model = trainer.into_model();
    Ok((model, ctx, report))
}

impl CurveReport {
    pub fn rows_tsv(&self) -> String {
        let mut s = String::from("variant\tsize\tresample\tslot_f1\tintent_acc\terror\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                r.variant,
                r.size,
                r.resample,
                r.slot_f1,
                r.intent_acc,
                r.error.as_deref().unwrap_or("-")
            );
        }
        s
    }

    pub fn aggregates_tsv(&self) -> String {
        let mut s = String::from(
            "variant\tsize\truns\tslot_f1_mean\tslot_f1_std\tintent_acc_mean\tintent_acc_std\n",
        );
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                a.variant,
                a.size,
                a.runs,
                a.slot_f1_mean,
                a.slot_f1_std,
                a.intent_acc_mean,
                a.intent_acc_std
            );
        }
        s
    }

    pub fn chart(&self, metric: &str) -> String {
        let mut by_variant: BTreeMap<Variant, Vec<(f64, f64)>> = BTreeMap::new();
        for a in &self.aggregates {
            let y = if metric == "intent_acc" {
                a.intent_acc_mean
            } else {
                a.slot_f1_mean
            };
            by_variant
                .entry(a.variant)
                .or_default()
                .push((a.size as f64, y));
        }
        let series: Vec<Series> = by_variant
            .into_iter()
            .map(|(v, points)| Series {
                name: v.to_string(),
                points,
            })
            .collect();
        line_chart_svg(
            &format!("{metric} by training size"),
            "training utterances",
            metric,
            &series,
        )
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("learning_curve_rows.tsv", self.rows_tsv()),
            ("learning_curve.tsv", self.aggregates_tsv()),
            ("learning_curve_slot_f1.svg", self.chart("slot_f1")),
            ("learning_curve_intent_acc.svg", self.chart("intent_acc")),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Trains every (variant, size, resample) cell in parallel and scores it on
/// `test` with the final parameters. A failing cell is recorded in its row.
pub fn run_learning_curve(
    spec: &ExperimentSpec,
    run: &RunConfig,
    pool: &[Utterance],
    test: &[Utterance],
    dictionary: &UserInfoDictionary,
    gazetteer: &Gazetteer,
) -> Result<CurveReport> {
    if let Some(&s) = spec.sizes.iter().find(|&&s| s > pool.len()) {
        return Err(Error::Config(format!(
            "size {s} exceeds the {}-utterance pool",
            pool.len()
        )));
    }
    let cells: Vec<(Variant, usize, usize)> = spec
        .variants
        .iter()
        .flat_map(|&v| {
            spec.sizes
                .iter()
                .flat_map(move |&s| (0..spec.resamples).map(move |r| (v, s, r)))
        })
        .collect();
    let rows: Vec<CurveRow> = cells
        .par_iter()
        .map(|&(variant, size, resample)| {
            let seed = spec.seed + resample as u64;
            let result = sample_subset(pool, size, seed).and_then(|subset| {
                let (model, ctx, _) = train_cell(
                    run, variant, &subset, test, dictionary, gazetteer, seed, false,
                )?;
                evaluate(&model, &ctx, &ctx.examples(test)?)
            });
            match result {
                Ok(m) => CurveRow {
                    variant,
                    size,
                    resample,
                    slot_f1: m.slot_f1,
                    intent_acc: m.intent_acc,
                    error: None,
                },
                Err(e) => {
                    log::warn!("cell {variant}/{size}/{resample} failed: {e}");
                    CurveRow {
                        variant,
                        size,
                        resample,
                        slot_f1: f64::NAN,
                        intent_acc: f64::NAN,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let mut aggregates = Vec::new();
    for &variant in &spec.variants {
        for &size in &spec.sizes {
            let ok: Vec<&CurveRow> = rows
                .iter()
                .filter(|r| r.variant == variant && r.size == size && r.error.is_none())
                .collect();
            let (f, fs) = mean_std(&ok.iter().map(|r| r.slot_f1).collect::<Vec<_>>());
            let (i, is) = mean_std(&ok.iter().map(|r| r.intent_acc).collect::<Vec<_>>());
            aggregates.push(Aggregate {
                variant,
                size,
                runs: ok.len(),
                slot_f1_mean: f,
                slot_f1_std: fs,
                intent_acc_mean: i,
                intent_acc_std: is,
            });
        }
    }
    Ok(CurveReport { rows, aggregates })
}

/// `(epoch, phase, slot F1)`.
pub type CurvePoint = (usize, u8, Option<f64>);

/// Per-epoch slot F1 of one variant, averaged over resamples. Phase-1
/// epochs appear with no F1.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochCurve {
    pub variant: Variant,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug)]
pub struct TimingReport {
    pub curves: Vec<EpochCurve>,
    pub target_f1: f64,
    /// `(variant, best F1, epochs to reach the target, total epochs)`.
    pub summary: Vec<(Variant, f64, Option<usize>, usize)>,
}

/// First epoch (counting phase-1 epochs) whose F1 reaches `target`.
pub fn epochs_to_target(points: &[CurvePoint], target: f64) -> Option<usize> {
    points
        .iter()
        .find(|(_, _, f)| f.is_some_and(|f| f >= target))
        .map(|(e, _, _)| *e)
}

impl TimingReport {
    pub fn curves_tsv(&self) -> String {
        let mut s = String::from("variant\tepoch\tphase\tslot_f1\n");
        for c in &self.curves {
            for (e, p, f) in &c.points {
                let f = f.map_or("NA".to_string(), |f| format!("{f:.6}"));
                let _ = writeln!(s, "{}\t{e}\t{p}\t{f}", c.variant);
            }
        }
        s
    }

    pub fn summary_tsv(&self) -> String {
        let mut s = format!(
            "# target_f1 = {:.6}\nvariant\tbest_f1\tepochs_to_target\ttotal_epochs\n",
            self.target_f1
        );
        for (v, best, to, total) in &self.summary {
            let to = to.map_or("NA".to_string(), |e| e.to_string());
            let _ = writeln!(s, "{v}\t{best:.6}\t{to}\t{total}");
        }
        s
    }

    pub fn chart(&self) -> String {
        let series: Vec<Series> = self
            .curves
            .iter()
            .map(|c| Series {
                name: c.variant.to_string(),
                points: c
                    .points
                    .iter()
                    .filter_map(|(e, _, f)| f.map(|f| (*e as f64, f)))
                    .collect(),
            })
            .collect();
        line_chart_svg("slot F1 per epoch", "epoch", "slot_f1", &series)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("training_time_curves.tsv", self.curves_tsv()),
            ("training_time.tsv", self.summary_tsv()),
            ("training_time.svg", self.chart()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Per-epoch F1 curves at the largest training size, evaluated on `test`
/// after every epoch.
pub fn run_training_time(
    spec: &ExperimentSpec,
    run: &RunConfig,
    pool: &[Utterance],
    test: &[Utterance],
    dictionary: &UserInfoDictionary,
    gazetteer: &Gazetteer,
) -> Result<TimingReport> {
    let size = *spec.sizes.iter().max().expect("validated");
    let size = size.min(pool.len());
    let cells: Vec<(Variant, usize)> = spec
        .variants
        .iter()
        .flat_map(|&v| (0..spec.resamples).map(move |r| (v, r)))
        .collect();
    let logs: Vec<(Variant, Vec<CurvePoint>)> = cells
        .par_iter()
        .map(|&(variant, r)| {
            let seed = spec.seed + r as u64;
            let subset = sample_subset(pool, size, seed)?;
            let (_, _, report) = train_cell(
                run, variant, &subset, test, dictionary, gazetteer, seed, true,
            )?;
            let points = report
                .logs
                .iter()
                .map(|l| (l.epoch, l.phase, l.slot_f1))
                .collect();
            Ok((variant, points))
        })
        .collect::<Result<_>>()?;
    let mut curves = Vec::new();
    for &variant in &spec.variants {
        let runs: Vec<&Vec<CurvePoint>> = logs
            .iter()
            .filter(|(v, _)| *v == variant)
            .map(|(_, p)| p)
            .collect();
        let points = runs[0]
            .iter()
            .enumerate()
            .map(|(i, &(e, p, _))| {
                let fs: Vec<f64> = runs.iter().filter_map(|r| r[i].2).collect();
                let f = (!fs.is_empty()).then(|| fs.iter().sum::<f64>() / fs.len() as f64);
                (e, p, f)
            })
            .collect();
        curves.push(EpochCurve { variant, points });
    }
    let best = |c: &EpochCurve| c.points.iter().filter_map(|p| p.2).fold(0.0, f64::max);
    let target_f1 = curves.iter().map(best).fold(f64::INFINITY, f64::min) * 0.98;
    let summary = curves
        .iter()
        .map(|c| {
            (
                c.variant,
                best(c),
                epochs_to_target(&c.points, target_f1),
                c.points.len(),
            )
        })
        .collect();
    Ok(TimingReport {
        curves,
        target_f1,
        summary,
    })
}
