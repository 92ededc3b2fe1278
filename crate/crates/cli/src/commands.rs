use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use progslu::autodiff::check_all_primitives;
use progslu::corpus::{
    generate_split, generate_synthetic_corpus, gradcheck_utterance, load_dataset, save_dataset,
    UserInfoEntry,
};
use progslu::eval::{evaluate, run_learning_curve, run_training_time, ExperimentSpec, Metrics};
use progslu::gazetteer::synthesize_user_info;
use progslu::model::{load_checkpoint, save_checkpoint, Checkpoint};
use progslu::training::{check_model_gradients, epoch_logs_tsv};
use progslu::{
    Context, Error, Gazetteer, ProgModel, Result, RunConfig, Trainer, UserInfoDictionary, Utterance,
};

/// Joint intent detection and slot filling with user-info distillation.
#[derive(Debug, Parser)]
#[command(name = "progslu", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic flight-domain corpus without user info.
    Generate {
        /// Number of utterances.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write a held-out split of this many utterances.
        #[arg(long, requires = "test_out")]
        test_n: Option<usize>,
        #[arg(long)]
        test_out: Option<PathBuf>,
        /// Gazetteer TSV; the bundled one when omitted.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Attach synthesized user info (location, time periods) to a dataset.
    Synth {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        dictionary: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes the checkpoint, epoch log and effective config.
    Train {
        /// Run configuration (`key = value` lines); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a labelled dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Tag one utterance and print its info tags, slot tags and intent.
    Tag {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Whitespace-tokenized text.
        #[arg(long)]
        utterance: String,
        /// `type=content`, e.g. `loc=Brooklyn,NY`; may be repeated.
        #[arg(long)]
        userinfo: Vec<String>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
    },
    /// Run the learning-curve and training-time experiments.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides `output_dir` from the spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub const MODEL_TOLERANCE: f64 = 1e-4;
pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            n,
            seed,
            out,
            test_n,
            test_out,
            gazetteer,
        } => {
            let gaz = load_gazetteer(gazetteer.as_deref())?;
            match (test_n, test_out) {
                (Some(t), Some(path)) => {
                    let split = generate_split(n, t, seed, &gaz);
                    save_dataset(&out, &split.train)?;
                    save_dataset(&path, &split.test)?;
                }
                _ => save_dataset(&out, &generate_synthetic_corpus(n, seed, &gaz))?,
            }
            Ok(())
        }
        Command::Synth {
            data,
            gazetteer,
            dictionary,
            seed,
            out,
        } => {
            let dict = load_dictionary(dictionary.as_deref())?;
            let gaz = load_gazetteer(gazetteer.as_deref())?;
            let corpus = load_dataset(&data, &dict)?;
            save_dataset(&out, &synthesize_user_info(&corpus, &gaz, seed))
        }
        Command::Train { config, data, out } => train(config.as_deref(), &data, &out),
        Command::Eval {
            checkpoint,
            data,
            gazetteer,
        } => {
            let ctx_ckpt = open_checkpoint(&checkpoint, gazetteer.as_deref())?;
            let (ckpt, ctx) = ctx_ckpt;
            let corpus = load_dataset(&data, &ctx.dictionary)?;
            let m = evaluate(&ckpt.model, &ctx, &ctx.examples(&corpus)?)?;
            print!("{}", metrics_report(&m));
            Ok(())
        }
        Command::Tag {
            checkpoint,
            utterance,
            userinfo,
            gazetteer,
        } => {
            let (ckpt, ctx) = open_checkpoint(&checkpoint, gazetteer.as_deref())?;
            print!("{}", tag(&ckpt.model, &ctx, &utterance, &userinfo)?);
            Ok(())
        }
        Command::Gradcheck { config, epsilon } => {
            let cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let (report, ok) = gradcheck(&cfg, epsilon)?;
            print!("{report}");
            if ok {
                Ok(())
            } else {
                Err(Error::Argument("gradient check failed".into()))
            }
        }
        Command::Experiment { spec, out } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(out) = out {
                spec.output_dir = out;
            }
            experiment(&spec)
        }
    }
}

fn load_gazetteer(path: Option<&Path>) -> Result<Gazetteer> {
    path.map_or_else(|| Ok(Gazetteer::bundled()), Gazetteer::load)
}

fn load_dictionary(path: Option<&Path>) -> Result<UserInfoDictionary> {
    path.map_or_else(
        || Ok(UserInfoDictionary::bundled()),
        UserInfoDictionary::load,
    )
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Paths in a config file are taken relative to the file.
fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let mut cfg = RunConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut cfg.checkpoint,
        &mut cfg.eval_data,
        &mut cfg.dictionary,
        &mut cfg.gazetteer,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn train(config: Option<&Path>, data: &Path, out: &Path) -> Result<()> {
    let cfg = load_run_config(config)?;
    let dictionary = cfg.load_dictionary()?;
    let gazetteer = cfg.load_gazetteer()?;
    let corpus = load_dataset(data, &dictionary)?;
    let eval_corpus = cfg
        .eval_data
        .as_ref()
        .map(|p| load_dataset(p, &dictionary))
        .transpose()?;
    let ctx = Context::from_training_data(&corpus, dictionary, gazetteer);
    let model = ProgModel::new(cfg.model_config(&ctx))?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let effective = cfg.to_text();
    write(&out.join("config.txt"), &effective)?;
    eprint!("{effective}");

    let train_ex = ctx.examples(&corpus)?;
    let eval_ex = eval_corpus
        .as_deref()
        .map(|c| ctx.examples(c))
        .transpose()?;
    let mut trainer = Trainer::new(model, &ctx, cfg.train.clone())?;
    let report = trainer.run(&train_ex, eval_ex.as_deref())?;
    write(&out.join("epochs.tsv"), &epoch_logs_tsv(&report.logs))?;
    if let (Some(e), Some(f)) = (report.best_epoch, report.best_slot_f1) {
        eprintln!("kept epoch {e} (slot F1 {f:.4})");
    }
    let ckpt = Checkpoint {
        model: trainer.into_model(),
        vocab: Some(ctx.vocab.clone()),
        dictionary: Some(ctx.dictionary.clone()),
    };
    let path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| out.join("model.ckpt"));
    save_checkpoint(&path, &ckpt)
}

fn open_checkpoint(path: &Path, gazetteer: Option<&Path>) -> Result<(Checkpoint, Context)> {
    let ckpt = load_checkpoint(path)?;
    let vocab = ckpt
        .vocab
        .clone()
        .ok_or_else(|| Error::Format("checkpoint has no vocabulary".into()))?;
    let dictionary = ckpt
        .dictionary
        .clone()
        .unwrap_or_else(UserInfoDictionary::bundled);
    let ctx = Context::new(vocab, dictionary, load_gazetteer(gazetteer)?);
    Ok((ckpt, ctx))
}

pub fn metrics_report(m: &Metrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "utterances\t{}", m.count);
    let _ = writeln!(s, "slot_f1\t{:.6}", m.slot_f1);
    let _ = writeln!(s, "slot_precision\t{:.6}", m.slot_precision);
    let _ = writeln!(s, "slot_recall\t{:.6}", m.slot_recall);
    let _ = writeln!(s, "slot_token_acc\t{:.6}", m.slot_token_acc);
    let _ = writeln!(s, "intent_acc\t{:.6}", m.intent_acc);
    let info = m.info_acc.map_or("NA".to_string(), |a| format!("{a:.6}"));
    let _ = writeln!(s, "info_acc\t{info}");
    let _ = writeln!(s, "iob_repairs\t{}", m.spans.repairs);
    s
}

pub fn parse_userinfo(spec: &str) -> Result<UserInfoEntry> {
    match spec.split_once('=') {
        Some((t, c)) if !t.trim().is_empty() && !c.trim().is_empty() => {
            Ok(UserInfoEntry::new(t.trim(), c.trim()))
        }
        _ => Err(Error::Argument(format!(
            "user info must be type=content, got {spec:?}"
        ))),
    }
}

/// Token table followed by the intent line.
pub fn tag(model: &ProgModel, ctx: &Context, text: &str, userinfo: &[String]) -> Result<String> {
    let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if tokens.is_empty() {
        return Err(Error::Argument("empty utterance".into()));
    }
    let mut u = Utterance::new(tokens.clone(), vec!["O".to_string(); tokens.len()], "");
    for spec in userinfo {
        let e = parse_userinfo(spec)?;
        if ctx.dictionary.index_of(&e.info_type).is_none() {
            return Err(Error::Argument(format!(
                "unknown user info type {:?}",
                e.info_type
            )));
        }
        u.user_info.push(e);
    }
    let ex = ctx.example(&u)?;
    let p = ctx.predict(model, &ex)?;
    let info = ctx.info_labels(&p.info);
    let slots = ctx.slot_labels(&p.slots);
    let width = tokens.iter().map(String::len).max().unwrap_or(0).max(5);
    let iw = info.iter().map(String::len).max().unwrap_or(0).max(8);
    let mut s = format!("{:width$}  {:iw$}  slot_tag\n", "token", "info_tag");
    for ((t, i), sl) in tokens.iter().zip(&info).zip(&slots) {
        let _ = writeln!(s, "{t:width$}  {i:iw$}  {sl}");
    }
    let _ = writeln!(s, "intent: {}", ctx.intent_label(p.intent));
    Ok(s)
}

/// Primitive ops on random shapes, then the full loss per parameter group
/// on the four-token check utterance.
pub fn gradcheck(cfg: &RunConfig, epsilon: f64) -> Result<(String, bool)> {
    let mut ok = true;
    let mut s = String::from("check\tmax_rel_error\tstatus\n");
    for (name, err) in check_all_primitives(cfg.model.seed)? {
        let pass = err < PRIMITIVE_TOLERANCE;
        ok &= pass;
        let _ = writeln!(
            s,
            "op:{name}\t{err:.3e}\t{}",
            if pass { "ok" } else { "FAIL" }
        );
    }
    let u = gradcheck_utterance();
    // A second intent label so the intent head has a non-trivial softmax.
    let mut other = u.clone();
    other.intent = "atis_airfare".into();
    let ctx = Context::from_training_data(
        &[u.clone(), other],
        cfg.load_dictionary()?,
        cfg.load_gazetteer()?,
    );
    let model = ProgModel::new(cfg.model_config(&ctx))?;
    let ex = ctx.example(&u)?;
    for (group, err) in check_model_gradients(&model, &ex, epsilon)? {
        let pass = err < MODEL_TOLERANCE;
        ok &= pass;
        let _ = writeln!(
            s,
            "group:{}\t{err:.3e}\t{}",
            group.as_str(),
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok((s, ok))
}

fn experiment(spec: &ExperimentSpec) -> Result<()> {
    let run = load_run_config(spec.config.as_deref())?;
    let dictionary = run.load_dictionary()?;
    let gazetteer = run.load_gazetteer()?;
    let (pool, test) = spec.load_corpora(&dictionary, &gazetteer)?;
    if spec.learning_curve {
        let r = run_learning_curve(spec, &run, &pool, &test, &dictionary, &gazetteer)?;
        r.write(&spec.output_dir)?;
        print!("{}", r.aggregates_tsv());
    }
    if spec.training_time {
        let r = run_training_time(spec, &run, &pool, &test, &dictionary, &gazetteer)?;
        r.write(&spec.output_dir)?;
        print!("{}", r.summary_tsv());
    }
    Ok(())
}
