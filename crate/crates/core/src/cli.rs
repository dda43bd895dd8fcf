//! Command-line front end: `prepare`, `pretrain`, `stream`, `evaluate`,
//! `classify`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset;
use crate::error::{Error, Result};
use crate::metrics::{write_curve, Evaluation};
use crate::net::{CnnModel, CnnParams};
use crate::optim::Optimizer;
use crate::preprocess::preprocess;
use crate::stream::{self, CrisisLabel, LabeledTweet, PretrainReport, StreamRun, Task};
use crate::vocab::{load_pretrained, EmbeddingTable, Vocabulary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "crisis-cnn",
    version,
    about = "Tweet classification for crisis response"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a dataset, build its vocabulary and print the label histogram.
    Prepare {
        #[arg(long)]
        data: PathBuf,
        /// Directory for tokens.tsv and vocab.tsv.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train on out-of-event data and save the initial model.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Use this vocabulary file instead of building one from `--data`.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run online training over an event stream and write the learning curve.
    Stream {
        #[arg(long)]
        data: PathBuf,
        /// Start from this checkpoint instead of a fresh model.
        #[arg(long)]
        theta0: Option<PathBuf>,
        #[arg(long)]
        curve: PathBuf,
        /// Where to save the final model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Save a checkpoint after every interval into this directory.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a checkpoint on a labeled dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Fail unless the checkpoint was trained for this task.
        #[arg(long)]
        task: Option<String>,
    },
    /// Print the predicted label and class probabilities for raw texts
    /// (one per argument, or one per stdin line).
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        texts: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    /// File first, then `--set`, then the dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        if let Some(task) = &self.task {
            config.set("task", task)?;
        }
        if let Some(seed) = self.seed {
            config.stream.train.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidCoverage(_) => EXIT_USAGE,
        Error::Io { .. } => EXIT_DATA,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Prepare {
            data,
            out_dir,
            config,
        } => {
            let config = config.resolve()?;
            let summary = prepare(&data, &out_dir, &config)?;
            for (label, n) in CrisisLabel::ALL.iter().zip(summary.histogram) {
                emit(out, format_args!("{label}\t{n}"))?;
            }
            emit(out, format_args!("total\t{}", summary.records))?;
            emit(out, format_args!("vocabulary\t{}", summary.vocab_size))
        }
        Command::Pretrain {
            data,
            checkpoint,
            vocab,
            config,
        } => {
            let config = config.resolve()?;
            let tweets = dataset::read_tweets(&data)?;
            let vocab = vocab.as_deref().map(dataset::read_vocab).transpose()?;
            let (ck, report) = pretrain(&tweets, &config, vocab)?;
            ck.save(&checkpoint)?;
            emit(
                out,
                format_args!(
                    "epochs\t{}\nbest_epoch\t{}",
                    report.epochs.epochs_run,
                    report
                        .epochs
                        .best_epoch
                        .map_or("-".into(), |e| e.to_string())
                ),
            )?;
            for (name, eval) in [("dev", &report.dev), ("test", &report.test)] {
                if let Some(e) = eval {
                    emit(out, format_args!("{name}_accuracy\t{:.4}", e.accuracy))?;
                    emit(out, format_args!("{name}_macro_f1\t{:.4}", e.macro_f1))?;
                }
            }
            Ok(())
        }
        Command::Stream {
            data,
            theta0,
            curve,
            checkpoint,
            checkpoint_dir,
            config,
        } => {
            let config = config.resolve()?;
            let tweets = dataset::read_tweets(&data)?;
            let theta0 = theta0.as_deref().map(Checkpoint::load).transpose()?;
            let (run, last) = stream(&tweets, &config, theta0, checkpoint_dir.as_deref())?;
            write_curve(&run.curve(), &curve)?;
            if let Some(path) = checkpoint {
                last.save(&path)?;
            }
            emit(
                out,
                format_args!("interval\tcum_train\tepochs\t{}", run.task.metric_name()),
            )?;
            for r in &run.records {
                emit(
                    out,
                    format_args!(
                        "{}\t{}\t{}\t{:.4}",
                        r.interval, r.cum_train, r.epochs.epochs_run, r.metric
                    ),
                )?;
            }
            Ok(())
        }
        Command::Evaluate {
            checkpoint,
            data,
            task,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let task = task.as_deref().map(str::parse::<Task>).transpose()?;
            let tweets = dataset::read_tweets(&data)?;
            let eval = evaluate(&ck, &tweets, task)?;
            emit(out, format_args!("records\t{}", eval.confusion.total()))?;
            emit(out, format_args!("accuracy\t{:.4}", eval.accuracy))?;
            emit(out, format_args!("macro_f1\t{:.4}", eval.macro_f1))?;
            if let Some(auc) = eval.auc {
                emit(out, format_args!("auc\t{auc:.4}"))?;
            }
            emit(out, format_args!("{}", eval.confusion))
        }
        Command::Classify { checkpoint, texts } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let texts = if texts.is_empty() {
                std::io::stdin()
                    .lock()
                    .lines()
                    .collect::<std::io::Result<Vec<_>>>()
                    .map_err(|e| Error::io("<stdin>", e))?
            } else {
                texts
            };
            for line in classify(&ck, &texts)? {
                emit(out, format_args!("{line}"))?;
            }
            Ok(())
        }
    }
}

fn emit(out: &mut dyn Write, args: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{args}").map_err(|e| Error::io("<stdout>", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareSummary {
    pub records: usize,
    /// Counts per label in canonical order.
    pub histogram: [u64; 6],
    pub vocab_size: usize,
}

/// Writes `tokens.tsv` and `vocab.tsv` into `out_dir`.
pub fn prepare(data: &Path, out_dir: &Path, config: &RunConfig) -> Result<PrepareSummary> {
    let tweets = dataset::read_tweets(data)?;
    let tokens = dataset::tokenize_all(&tweets);
    let vocab = Vocabulary::build(&tokens, config.vocab_percent)?;
    dataset::write_tokens(&out_dir.join("tokens.tsv"), &tweets, &tokens)?;
    dataset::write_vocab(&out_dir.join("vocab.tsv"), &vocab)?;
    Ok(PrepareSummary {
        records: tweets.len(),
        histogram: dataset::label_histogram(&tweets),
        vocab_size: vocab.len(),
    })
}

/// Fresh model for `vocab`. The embedding table and the layer weights come
/// from separate streams of the configured seed.
pub fn init_model(config: &RunConfig, vocab: &Vocabulary) -> Result<CnnModel<f32>> {
    config.cnn.validate()?;
    let seed = config.seed();
    let table = match &config.embeddings {
        Some(path) => load_pretrained(path, vocab, config.cnn.embed_dim, seed)?,
        None => EmbeddingTable::random(
            vocab.len(),
            config.cnn.embed_dim,
            &mut ChaCha8Rng::seed_from_u64(seed),
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let params = CnnParams::init(&config.cnn, table, &mut rng);
    CnnModel::new(config.cnn.clone(), params)
}

fn build_vocab(tweets: &[LabeledTweet], config: &RunConfig) -> Result<Vocabulary> {
    Vocabulary::build(&dataset::tokenize_all(tweets), config.vocab_percent)
}

pub fn pretrain(
    tweets: &[LabeledTweet],
    config: &RunConfig,
    vocab: Option<Vocabulary>,
) -> Result<(Checkpoint, PretrainReport)> {
    if tweets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = match vocab {
        Some(v) => v,
        None => build_vocab(tweets, config)?,
    };
    let mut model = init_model(config, &vocab)?;
    let examples = dataset::encode(tweets, &dataset::tokenize_all(tweets), &vocab, config.task);
    let report = stream::pretrain(
        &mut model,
        &config.optimizer,
        &examples,
        config.stream.fractions,
        &config.stream.train,
    )?;
    Ok((Checkpoint::new(config.task, vocab, model)?, report))
}

/// Online training over `tweets`. Without `theta0` the vocabulary is built
/// from the stream itself and the model is freshly initialized; with it, the
/// checkpoint's vocabulary and architecture are used. The optimizer state
/// always starts fresh.
pub fn stream(
    tweets: &[LabeledTweet],
    config: &RunConfig,
    theta0: Option<Checkpoint>,
    checkpoint_dir: Option<&Path>,
) -> Result<(StreamRun, Checkpoint)> {
    if tweets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (vocab, mut model) = match theta0 {
        Some(ck) => {
            if ck.task != config.task {
                return Err(Error::TaskMismatch(format!(
                    "checkpoint was trained for the {} task, configuration asks for {}",
                    ck.task, config.task
                )));
            }
            (ck.vocab, ck.model)
        }
        None => {
            let vocab = build_vocab(tweets, config)?;
            let model = init_model(config, &vocab)?;
            (vocab, model)
        }
    };
    let examples = dataset::encode(tweets, &dataset::tokenize_all(tweets), &vocab, config.task);
    let splits = stream::prepare_intervals(examples, &config.stream)?;
    let mut optimizer: Optimizer<f32> = config.optimizer.build(&model.params)?;
    let task = config.task;
    let run = stream::online_fit_with(
        &mut model,
        &mut optimizer,
        &splits,
        task,
        &config.stream.train,
        |t, m| match checkpoint_dir {
            Some(dir) => {
                let path = dir.join(format!("interval_{t:04}.ckpt"));
                Checkpoint::new(task, vocab.clone(), m.clone())?.save(&path)?;
                Ok(Some(path))
            }
            None => Ok(None),
        },
    )?;
    Ok((run, Checkpoint::new(task, vocab, model)?))
}

pub fn evaluate(
    ck: &Checkpoint,
    tweets: &[LabeledTweet],
    task: Option<Task>,
) -> Result<Evaluation> {
    if let Some(task) = task.filter(|&t| t != ck.task) {
        return Err(Error::TaskMismatch(format!(
            "checkpoint has {} classes ({}), labels are for the {task} task ({} classes)",
            ck.model.config.classes,
            ck.task,
            task.classes()
        )));
    }
    let examples = dataset::encode(tweets, &dataset::tokenize_all(tweets), &ck.vocab, ck.task);
    stream::evaluate(&ck.model, &examples)
}

/// One `label<TAB>p0,p1,...` line per text.
pub fn classify(ck: &Checkpoint, texts: &[String]) -> Result<Vec<String>> {
    texts
        .iter()
        .map(|text| {
            let tokens = ck.vocab.encode(&preprocess(text));
            let pred = ck.model.predict(&tokens)?;
            let probs: Vec<String> = pred.probs.iter().map(|p| format!("{p:.4}")).collect();
            Ok(format!(
                "{}\t{}",
                ck.task.class_name(pred.class),
                probs.join(",")
            ))
        })
        .collect()
}
