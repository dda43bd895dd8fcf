//! Convolutional tweet classification with online minibatch training.
//!
//! The pipeline: [`preprocess`] normalizes and tokenizes raw tweets,
//! [`vocab`] builds the vocabulary and embedding table, [`net`] is the
//! convolutional network with exact backpropagation, [`optim`] holds the
//! SGD and ADADELTA update rules, [`split`] and [`stream`] implement the
//! interval-by-interval training protocol, and [`metrics`] scores the
//! results. [`checkpoint`], [`config`] and [`dataset`] back the command-line
//! tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod preprocess;
pub mod split;
pub mod stream;
pub mod tensor;
pub mod vocab;

pub use error::{Error, Result};
