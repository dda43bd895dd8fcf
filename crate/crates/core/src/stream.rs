//! Online training over a time-ordered stream of labeled tweets.
//!
//! The stream is cut into intervals of `d` records; each interval is split
//! 70/10/20 and the model is trained for up to `max_epochs` epochs on the
//! interval's train subset only, with early stopping on its dev subset.
//! Parameters (and optimizer state) carry over from one interval to the next.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Evaluation, ScoredExample};
use crate::net::{CnnModel, Gradients, Head};
use crate::optim::Optimizer;
use crate::split::{self, IntervalSplit, SplitFractions};
use crate::tensor::Real;

/// The six annotation classes, in their canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrisisLabel {
    AffectedIndividuals,
    DonationsVolunteering,
    InfrastructureUtilities,
    SympathySupport,
    OtherUseful,
    NotRelated,
}

impl CrisisLabel {
    pub const ALL: [CrisisLabel; 6] = [
        CrisisLabel::AffectedIndividuals,
        CrisisLabel::DonationsVolunteering,
        CrisisLabel::InfrastructureUtilities,
        CrisisLabel::SympathySupport,
        CrisisLabel::OtherUseful,
        CrisisLabel::NotRelated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CrisisLabel::AffectedIndividuals => "affected_individuals",
            CrisisLabel::DonationsVolunteering => "donations_volunteering",
            CrisisLabel::InfrastructureUtilities => "infrastructure_utilities",
            CrisisLabel::SympathySupport => "sympathy_support",
            CrisisLabel::OtherUseful => "other_useful",
            CrisisLabel::NotRelated => "not_related",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn informative(self) -> bool {
        self != CrisisLabel::NotRelated
    }
}

impl fmt::Display for CrisisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrisisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CrisisLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

pub const NOT_INFORMATIVE: usize = 0;
pub const INFORMATIVE: usize = 1;

/// Collapses the five informative classes into one: `not_related` maps to
/// [`NOT_INFORMATIVE`], everything else to [`INFORMATIVE`].
pub fn merge_binary(label: &str) -> Result<usize> {
    let label: CrisisLabel = label.parse()?;
    Ok(if label.informative() {
        INFORMATIVE
    } else {
        NOT_INFORMATIVE
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Multiclass => CrisisLabel::ALL.len(),
        }
    }

    pub fn head(self) -> Head {
        match self {
            Task::Binary => Head::Bernoulli,
            Task::Multiclass => Head::Softmax,
        }
    }

    pub fn class_of(self, label: CrisisLabel) -> usize {
        match self {
            Task::Binary => {
                if label.informative() {
                    INFORMATIVE
                } else {
                    NOT_INFORMATIVE
                }
            }
            Task::Multiclass => label.index(),
        }
    }

    pub fn class_name(self, class: usize) -> &'static str {
        match self {
            Task::Binary => ["not_informative", "informative"][class],
            Task::Multiclass => CrisisLabel::ALL[class].as_str(),
        }
    }

    /// The curve metric: AUC for binary, accuracy for multi-class.
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Binary => "auc",
            Task::Multiclass => "accuracy",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTweet {
    pub id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub text: String,
    pub label: CrisisLabel,
}

/// An encoded training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub timestamp: i64,
    pub tokens: Vec<usize>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev-accuracy improvement before stopping.
    pub patience: usize,
    /// Reshuffle the train subset before every epoch.
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 25,
            patience: 3,
            shuffle: true,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub interval_size: usize,
    pub fractions: SplitFractions,
    pub train: TrainConfig,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            interval_size: 200,
            fractions: SplitFractions::default(),
            train: TrainConfig::default(),
        }
    }
}

/// What happened during the epochs over one train subset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were kept; `None` when no dev set was
    /// available (the last epoch is kept) or no epoch ran.
    pub best_epoch: Option<usize>,
    /// Dev accuracy after each epoch.
    pub dev_accuracy: Vec<f64>,
}

/// Per-interval learning-curve entry.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub interval: usize,
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    /// Train records seen so far, this interval included.
    pub cum_train: usize,
    pub epochs: EpochReport,
    pub test: Option<Evaluation>,
    /// AUC (binary) or accuracy (multi-class) on the interval's test subset;
    /// NaN when undefined.
    pub metric: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub task: Task,
    pub records: Vec<IntervalRecord>,
}

impl StreamRun {
    pub fn curve(&self) -> Vec<crate::metrics::CurvePoint> {
        self.records
            .iter()
            .map(|r| crate::metrics::CurvePoint {
                cum_train: r.cum_train,
                metric: r.metric,
            })
            .collect()
    }
}

/// Sorts by `(timestamp, id)` and cuts into intervals of `size` records.
pub fn slice_stream<T: Stamped>(data: Vec<T>, size: usize) -> Result<Vec<Vec<T>>> {
    split::slice_intervals(data, size, |r| (r.timestamp(), r.id().to_string()))
}

/// Records with the `(timestamp, id)` ordering key.
pub trait Stamped {
    fn timestamp(&self) -> i64;
    fn id(&self) -> &str;
}

impl Stamped for LabeledTweet {
    fn timestamp(&self) -> i64 {
        self.timestamp
    }

    fn id(&self) -> &str {
        &self.id
    }
}

impl Stamped for Example {
    fn timestamp(&self) -> i64 {
        self.timestamp
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Slices and splits a stream of examples. Interval `t` is split with seed
/// `seed + t`.
pub fn prepare_intervals(
    examples: Vec<Example>,
    config: &StreamConfig,
) -> Result<Vec<IntervalSplit<Example>>> {
    let intervals = slice_stream(examples, config.interval_size)?;
    intervals
        .iter()
        .enumerate()
        .map(|(t, interval)| {
            split::split_interval(
                t,
                interval,
                |e| e.class,
                config.fractions,
                config.train.seed.wrapping_add(t as u64),
            )
        })
        .collect()
}

/// Scores every example with inference-mode forward passes.
pub fn score<T: Real>(model: &CnnModel<T>, examples: &[Example]) -> Result<Vec<ScoredExample>> {
    examples
        .iter()
        .map(|e| {
            let pred = model.predict(&e.tokens)?;
            Ok(ScoredExample {
                gold: e.class,
                probs: pred.probs.iter().map(|p| p.as_f64()).collect(),
            })
        })
        .collect()
}

pub fn evaluate<T: Real>(model: &CnnModel<T>, examples: &[Example]) -> Result<Evaluation> {
    Evaluation::from_scored(model.config.classes, &score(model, examples)?)
}

fn task_metric(task: Task, eval: &Evaluation) -> f64 {
    match task {
        Task::Binary => eval.auc.unwrap_or(f64::NAN),
        Task::Multiclass => eval.accuracy,
    }
}

/// Mean gradient of the loss over `batch`.
pub fn minibatch_gradient<T: Real>(
    model: &CnnModel<T>,
    batch: &[&Example],
    rng: &mut ChaCha8Rng,
) -> Result<Gradients<T>> {
    let mut grads = Gradients::zeros_like(&model.params);
    for e in batch {
        let trace = model.forward(&e.tokens, Some(rng))?;
        model.backward_into(&trace, e.class, &mut grads);
    }
    grads.scale(T::one() / T::of_f64(batch.len() as f64));
    Ok(grads)
}

/// Trains for up to `max_epochs` epochs over `train`, keeping the
/// parameters (and optimizer state) of the epoch with the best dev
/// accuracy.
pub fn train_epochs<T: Real>(
    model: &mut CnnModel<T>,
    optimizer: &mut Optimizer<T>,
    train: &[Example],
    dev: &[Example],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpochReport> {
    config.validate()?;
    let mut report = EpochReport {
        epochs_run: 0,
        best_epoch: None,
        dev_accuracy: Vec::new(),
    };
    if train.is_empty() {
        return Ok(report);
    }
    let mut best: Option<(f64, CnnModel<T>, Optimizer<T>)> = None;
    let mut stale = 0;
    let mut order: Vec<&Example> = train.iter().collect();
    for epoch in 1..=config.max_epochs {
        if config.shuffle {
            order.shuffle(rng);
        }
        for batch in order.chunks(config.batch_size) {
            let grads = minibatch_gradient(model, batch, rng)?;
            optimizer.step(&mut model.params, &grads)?;
        }
        report.epochs_run = epoch;
        if dev.is_empty() {
            continue;
        }
        let acc = evaluate(model, dev)?.accuracy;
        report.dev_accuracy.push(acc);
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, model.clone(), optimizer.clone()));
            report.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if let Some((_, m, o)) = best {
        *model = m;
        *optimizer = o;
    }
    Ok(report)
}

/// Runs the online protocol over prepared interval splits.
///
/// `on_interval` is called after each interval with the trained model and
/// may persist it, returning where it was written.
pub fn online_fit_with<T: Real>(
    model: &mut CnnModel<T>,
    optimizer: &mut Optimizer<T>,
    splits: &[IntervalSplit<Example>],
    task: Task,
    config: &TrainConfig,
    mut on_interval: impl FnMut(usize, &CnnModel<T>) -> Result<Option<PathBuf>>,
) -> Result<StreamRun> {
    if splits.is_empty() {
        return Err(Error::NoIntervals);
    }
    if model.config.classes != task.classes() {
        return Err(Error::TaskMismatch(format!(
            "model has {} classes, {task} task needs {}",
            model.config.classes,
            task.classes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(splits.len());
    let mut cum_train = 0;
    for split in splits {
        let epochs = train_epochs(model, optimizer, &split.train, &split.dev, config, &mut rng)?;
        cum_train += split.train.len();
        let test = if split.test.is_empty() {
            None
        } else {
            Some(evaluate(model, &split.test)?)
        };
        let metric = test.as_ref().map_or(f64::NAN, |e| task_metric(task, e));
        let checkpoint = on_interval(split.index, model)?;
        records.push(IntervalRecord {
            interval: split.index,
            train_size: split.train.len(),
            dev_size: split.dev.len(),
            test_size: split.test.len(),
            cum_train,
            epochs,
            test,
            metric,
            checkpoint,
        });
    }
    Ok(StreamRun { task, records })
}

pub fn online_fit<T: Real>(
    model: &mut CnnModel<T>,
    optimizer: &mut Optimizer<T>,
    splits: &[IntervalSplit<Example>],
    task: Task,
    config: &TrainConfig,
) -> Result<StreamRun> {
    online_fit_with(model, optimizer, splits, task, config, |_, _| Ok(None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub epochs: EpochReport,
    pub dev: Option<Evaluation>,
    pub test: Option<Evaluation>,
}

/// Ordinary (non-streaming) training on out-of-event data with a single
/// stratified split, producing the initial model for [`online_fit`].
/// A fresh optimizer state is used and then discarded.
pub fn pretrain<T: Real>(
    model: &mut CnnModel<T>,
    optimizer: &crate::optim::OptimizerConfig,
    examples: &[Example],
    fractions: SplitFractions,
    config: &TrainConfig,
) -> Result<PretrainReport> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let split = split::split_interval(0, examples, |e| e.class, fractions, config.seed)?;
    let mut opt = optimizer.build(&model.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let epochs = train_epochs(model, &mut opt, &split.train, &split.dev, config, &mut rng)?;
    let eval = |set: &[Example]| -> Result<Option<Evaluation>> {
        if set.is_empty() {
            Ok(None)
        } else {
            evaluate(model, set).map(Some)
        }
    };
    Ok(PretrainReport {
        epochs,
        dev: eval(&split.dev)?,
        test: eval(&split.test)?,
    })
}
