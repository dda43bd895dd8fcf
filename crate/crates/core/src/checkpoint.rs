//! Model checkpoints.
//!
//! Layout: an 8-byte little-endian length `n`, `n` bytes of JSON metadata
//! (format version, task, architecture, vocabulary, tensor manifest), then
//! every tensor in manifest order as little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::write_file;
use crate::error::{Error, Result};
use crate::net::{CnnConfig, CnnModel, CnnParams};
use crate::stream::Task;
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub vocab: Vocabulary,
    pub model: CnnModel<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    task: Task,
    config: CnnConfig,
    vocabulary: VocabMeta,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabMeta {
    coverage: f64,
    entries: Vec<(String, u64)>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

impl Checkpoint {
    pub fn new(task: Task, vocab: Vocabulary, model: CnnModel<f32>) -> Result<Self> {
        if model.config.classes != task.classes() {
            return Err(Error::TaskMismatch(format!(
                "model has {} classes, {task} task needs {}",
                model.config.classes,
                task.classes()
            )));
        }
        if model.params.embeddings.rows() != vocab.len() {
            return Err(Error::Shape {
                what: "embedding rows".into(),
                expected: vocab.len(),
                found: model.params.embeddings.rows(),
            });
        }
        Ok(Checkpoint { task, vocab, model })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            format_version: FORMAT_VERSION,
            task: self.task,
            config: self.model.config.clone(),
            vocabulary: VocabMeta {
                coverage: self.vocab.coverage(),
                entries: self
                    .vocab
                    .entries()
                    .map(|(t, c)| (t.to_string(), c))
                    .collect(),
            },
            tensors: manifest(&self.model.params),
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let floats: usize = self.model.params.tensors().iter().map(|t| t.len()).sum();
        let mut out = Vec::with_capacity(8 + json.len() + 4 * floats);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for tensor in self.model.params.tensors() {
            for x in tensor {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let len_bytes: [u8; 8] = bytes
            .get(..8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| bad("truncated header"))?;
        let meta_len = usize::try_from(u64::from_le_bytes(len_bytes))
            .map_err(|_| bad("metadata length overflows"))?;
        let meta_end = 8usize
            .checked_add(meta_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("truncated metadata"))?;
        let meta: Metadata = serde_json::from_slice(&bytes[8..meta_end])
            .map_err(|e| Error::Checkpoint(format!("invalid metadata: {e}")))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                meta.format_version
            )));
        }
        meta.config
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid architecture: {e}")))?;
        let vocab = Vocabulary::from_entries(meta.vocabulary.entries, meta.vocabulary.coverage)
            .map_err(|e| Error::Checkpoint(format!("invalid vocabulary: {e}")))?;

        // The manifest must describe exactly the tensors this architecture
        // and vocabulary imply before any array is read.
        let mut params = CnnParams::<f32>::zeros(&meta.config, vocab.len());
        let expected = manifest(&params);
        if meta.tensors != expected {
            return Err(Error::Checkpoint(format!(
                "tensor manifest {:?} does not match architecture {:?}",
                meta.tensors, expected
            )));
        }
        let blob = &bytes[meta_end..];
        let floats: usize = expected
            .iter()
            .map(|t| t.shape.iter().product::<usize>())
            .sum();
        if blob.len() != 4 * floats {
            return Err(Error::Checkpoint(format!(
                "tensor data has {} bytes, manifest needs {}",
                blob.len(),
                4 * floats
            )));
        }
        let mut chunks = blob.chunks_exact(4);
        for tensor in params.tensors_mut() {
            for x in tensor.iter_mut() {
                let c = chunks.next().expect("length checked");
                *x = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            }
        }
        let model = CnnModel::new(meta.config, params)?;
        Checkpoint::new(meta.task, vocab, model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn manifest(params: &CnnParams<f32>) -> Vec<TensorMeta> {
    params
        .shapes()
        .into_iter()
        .map(|(name, shape)| TensorMeta {
            name: name.to_string(),
            shape,
        })
        .collect()
}
