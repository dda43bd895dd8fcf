//! Run configuration: flat `key = value` files with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::net::CnnConfig;
use crate::optim::{OptimizerConfig, DEFAULT_EPS, DEFAULT_RHO};
use crate::stream::{StreamConfig, Task};

pub const DEFAULT_SGD_RATE: f64 = 0.01;
pub const DEFAULT_VOCAB_PERCENT: f64 = 90.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub stream: StreamConfig,
    /// Architecture; `classes` and `head` follow `task`.
    pub cnn: CnnConfig,
    pub optimizer: OptimizerConfig,
    pub vocab_percent: f64,
    /// Pretrained vectors in word2vec text format.
    pub embeddings: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let task = Task::Binary;
        RunConfig {
            task,
            stream: StreamConfig::default(),
            cnn: CnnConfig {
                classes: task.classes(),
                head: task.head(),
                ..CnnConfig::default()
            },
            optimizer: OptimizerConfig::default(),
            vocab_percent: DEFAULT_VOCAB_PERCENT,
            embeddings: None,
        }
    }
}

/// Keys accepted in config files and `--set`.
pub const KEYS: &[&str] = &[
    "task",
    "interval_size",
    "train_fraction",
    "dev_fraction",
    "test_fraction",
    "embed_dim",
    "window",
    "filters",
    "pool",
    "hidden",
    "max_len",
    "dropout",
    "fine_tune",
    "optimizer",
    "rho",
    "eps",
    "learning_rate",
    "max_epochs",
    "patience",
    "batch_size",
    "shuffle",
    "vocab_percent",
    "seed",
    "embeddings",
];

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config
            .apply_text(&text)
            .map_err(|(line, message)| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            })?;
        Ok(config)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> std::result::Result<(), (usize, String)> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| (i + 1, format!("expected key = value, got `{line}`")))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| (i + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!(
                    "invalid boolean `{value}` for `{key}`"
                ))),
            }
        }
        match key {
            "task" => {
                self.task = value.parse()?;
                self.cnn.classes = self.task.classes();
                self.cnn.head = self.task.head();
            }
            "interval_size" => self.stream.interval_size = num(key, value)?,
            "train_fraction" => self.stream.fractions.train = num(key, value)?,
            "dev_fraction" => self.stream.fractions.dev = num(key, value)?,
            "test_fraction" => self.stream.fractions.test = num(key, value)?,
            "embed_dim" => self.cnn.embed_dim = num(key, value)?,
            "window" => self.cnn.window = num(key, value)?,
            "filters" => self.cnn.filters = num(key, value)?,
            "pool" => self.cnn.pool = num(key, value)?,
            "hidden" => self.cnn.hidden = num(key, value)?,
            "max_len" => self.cnn.max_len = num(key, value)?,
            "dropout" => self.cnn.dropout = num(key, value)?,
            "fine_tune" => self.cnn.fine_tune_embeddings = flag(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "adadelta" => OptimizerConfig::Adadelta {
                        rho: DEFAULT_RHO,
                        eps: DEFAULT_EPS,
                    },
                    "sgd" => OptimizerConfig::Sgd {
                        learning_rate: DEFAULT_SGD_RATE,
                    },
                    other => return Err(Error::Config(format!("unknown optimizer `{other}`"))),
                }
            }
            "rho" | "eps" => match &mut self.optimizer {
                OptimizerConfig::Adadelta { rho, eps } => {
                    let target = if key == "rho" { rho } else { eps };
                    *target = num(key, value)?;
                }
                OptimizerConfig::Sgd { .. } => {
                    return Err(Error::Config(format!("`{key}` needs optimizer = adadelta")))
                }
            },
            "learning_rate" => match &mut self.optimizer {
                OptimizerConfig::Sgd { learning_rate } => *learning_rate = num(key, value)?,
                OptimizerConfig::Adadelta { .. } => {
                    return Err(Error::Config(
                        "`learning_rate` needs optimizer = sgd".into(),
                    ))
                }
            },
            "max_epochs" => self.stream.train.max_epochs = num(key, value)?,
            "patience" => self.stream.train.patience = num(key, value)?,
            "batch_size" => self.stream.train.batch_size = num(key, value)?,
            "shuffle" => self.stream.train.shuffle = flag(key, value)?,
            "vocab_percent" => self.vocab_percent = num(key, value)?,
            "seed" => self.stream.train.seed = num(key, value)?,
            "embeddings" => {
                self.embeddings = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.fractions.validate()?;
        self.stream.train.validate()?;
        self.cnn.validate()?;
        self.optimizer.validate()?;
        if self.stream.interval_size == 0 {
            return Err(Error::Config("interval_size must be at least 1".into()));
        }
        if !(self.vocab_percent > 0.0 && self.vocab_percent <= 100.0) {
            return Err(Error::InvalidCoverage(self.vocab_percent));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.stream.train.seed
    }
}
