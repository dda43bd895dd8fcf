//! Convolutional tweet classifier.
//!
//! Tokens are looked up in the embedding table, padded (or truncated) to a
//! fixed length, passed through `N` wide convolutions with ReLU, max-pooled
//! with a stride-1 window that preserves the feature-map length, flattened
//! into `m`, optionally dropped out, fed through a ReLU dense layer and
//! finally a sigmoid (binary) or softmax (multi-class) output layer.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix, Real};
use crate::vocab::{EmbeddingTable, PAD};

/// Lower bound applied to probabilities inside the logarithm of the loss.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Single sigmoid unit giving `p(class 1)`. Requires two classes.
    Bernoulli,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub embed_dim: usize,
    /// Filter window length in words.
    pub window: usize,
    pub filters: usize,
    /// Max-pooling window length.
    pub pool: usize,
    pub hidden: usize,
    pub classes: usize,
    pub head: Head,
    /// Token sequences are right-padded or truncated to this length.
    pub max_len: usize,
    pub dropout: f64,
    pub fine_tune_embeddings: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embed_dim: 300,
            window: 3,
            filters: 150,
            pool: 2,
            hidden: 100,
            classes: 2,
            head: Head::Bernoulli,
            max_len: 40,
            dropout: 0.4,
            fine_tune_embeddings: true,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("window", self.window),
            ("filters", self.filters),
            ("pool", self.pool),
            ("hidden", self.hidden),
            ("max_len", self.max_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Config("classes must be at least 2".into()));
        }
        if self.head == Head::Bernoulli && self.classes != 2 {
            return Err(Error::Config(
                "bernoulli head needs exactly 2 classes".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Length of each feature map: `max_len + window - 1`.
    pub fn feature_len(&self) -> usize {
        self.max_len + self.window - 1
    }

    /// Length of the flattened pooled vector `m`.
    pub fn pooled_len(&self) -> usize {
        self.filters * self.feature_len()
    }

    pub fn output_units(&self) -> usize {
        match self.head {
            Head::Bernoulli => 1,
            Head::Softmax => self.classes,
        }
    }
}

pub const TENSOR_NAMES: [&str; 7] = [
    "embeddings",
    "filters",
    "filter_bias",
    "dense",
    "dense_bias",
    "output",
    "output_bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams<T> {
    pub embeddings: EmbeddingTable<T>,
    /// `filters x (window * embed_dim)`; column `k * embed_dim + d` weighs
    /// dimension `d` of the `k`-th word in the window.
    pub filters: Matrix<T>,
    pub filter_bias: Vec<T>,
    /// `hidden x pooled_len`.
    pub dense: Matrix<T>,
    pub dense_bias: Vec<T>,
    /// `output_units x hidden`.
    pub output: Matrix<T>,
    pub output_bias: Vec<T>,
}

impl<T: Real> CnnParams<T> {
    /// Glorot-uniform weights, zero biases, around the given embeddings.
    pub fn init(config: &CnnConfig, embeddings: EmbeddingTable<T>, rng: &mut impl Rng) -> Self {
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| T::of_f64(rng.gen_range(-limit..=limit)))
        };
        let conv_in = config.window * config.embed_dim;
        let filters = glorot(config.filters, conv_in, conv_in, config.filters);
        let dense = glorot(
            config.hidden,
            config.pooled_len(),
            config.pooled_len(),
            config.hidden,
        );
        let output = glorot(
            config.output_units(),
            config.hidden,
            config.hidden,
            config.output_units(),
        );
        CnnParams {
            embeddings,
            filters,
            filter_bias: vec![T::zero(); config.filters],
            dense,
            dense_bias: vec![T::zero(); config.hidden],
            output,
            output_bias: vec![T::zero(); config.output_units()],
        }
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(config: &CnnConfig, vocab_size: usize) -> Self {
        CnnParams {
            embeddings: EmbeddingTable::from_matrix(Matrix::zeros(vocab_size, config.embed_dim)),
            filters: Matrix::zeros(config.filters, config.window * config.embed_dim),
            filter_bias: vec![T::zero(); config.filters],
            dense: Matrix::zeros(config.hidden, config.pooled_len()),
            dense_bias: vec![T::zero(); config.hidden],
            output: Matrix::zeros(config.output_units(), config.hidden),
            output_bias: vec![T::zero(); config.output_units()],
        }
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[T]; 7] {
        [
            self.embeddings.matrix().as_slice(),
            self.filters.as_slice(),
            &self.filter_bias,
            self.dense.as_slice(),
            &self.dense_bias,
            self.output.as_slice(),
            &self.output_bias,
        ]
    }

    /// Mutable tensors in [`TENSOR_NAMES`] order. The PAD embedding row must
    /// stay zero.
    pub fn tensors_mut(&mut self) -> [&mut [T]; 7] {
        [
            self.embeddings.matrix_mut().as_mut_slice(),
            self.filters.as_mut_slice(),
            &mut self.filter_bias,
            self.dense.as_mut_slice(),
            &mut self.dense_bias,
            self.output.as_mut_slice(),
            &mut self.output_bias,
        ]
    }

    /// Named tensor shapes in [`TENSOR_NAMES`] order.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            (
                TENSOR_NAMES[0],
                vec![self.embeddings.rows(), self.embeddings.dim()],
            ),
            (
                TENSOR_NAMES[1],
                vec![self.filters.rows(), self.filters.cols()],
            ),
            (TENSOR_NAMES[2], vec![self.filter_bias.len()]),
            (TENSOR_NAMES[3], vec![self.dense.rows(), self.dense.cols()]),
            (TENSOR_NAMES[4], vec![self.dense_bias.len()]),
            (
                TENSOR_NAMES[5],
                vec![self.output.rows(), self.output.cols()],
            ),
            (TENSOR_NAMES[6], vec![self.output_bias.len()]),
        ]
    }

    pub fn cast<U: Real>(&self) -> CnnParams<U> {
        let v = |xs: &[T]| xs.iter().map(|&x| U::of_f64(x.as_f64())).collect();
        CnnParams {
            embeddings: self.embeddings.cast(),
            filters: self.filters.cast(),
            filter_bias: v(&self.filter_bias),
            dense: self.dense.cast(),
            dense_bias: v(&self.dense_bias),
            output: self.output.cast(),
            output_bias: v(&self.output_bias),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Gradients with the same shapes as [`CnnParams`]. Embedding gradients are
/// kept only for the rows an example touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub embeddings: BTreeMap<usize, Vec<T>>,
    pub filters: Matrix<T>,
    pub filter_bias: Vec<T>,
    pub dense: Matrix<T>,
    pub dense_bias: Vec<T>,
    pub output: Matrix<T>,
    pub output_bias: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &CnnParams<T>) -> Self {
        Gradients {
            embeddings: BTreeMap::new(),
            filters: Matrix::zeros(params.filters.rows(), params.filters.cols()),
            filter_bias: vec![T::zero(); params.filter_bias.len()],
            dense: Matrix::zeros(params.dense.rows(), params.dense.cols()),
            dense_bias: vec![T::zero(); params.dense_bias.len()],
            output: Matrix::zeros(params.output.rows(), params.output.cols()),
            output_bias: vec![T::zero(); params.output_bias.len()],
        }
    }

    /// Non-embedding tensors in [`TENSOR_NAMES`] order (skipping index 0).
    pub fn dense_tensors(&self) -> [&[T]; 6] {
        [
            self.filters.as_slice(),
            &self.filter_bias,
            self.dense.as_slice(),
            &self.dense_bias,
            self.output.as_slice(),
            &self.output_bias,
        ]
    }

    fn dense_tensors_mut(&mut self) -> [&mut [T]; 6] {
        [
            self.filters.as_mut_slice(),
            &mut self.filter_bias,
            self.dense.as_mut_slice(),
            &mut self.dense_bias,
            self.output.as_mut_slice(),
            &mut self.output_bias,
        ]
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: T) {
        for t in self.dense_tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
        for row in self.embeddings.values_mut() {
            row.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Embedding gradient as a dense matrix with `rows` rows.
    pub fn embedding_matrix(&self, rows: usize, dim: usize) -> Matrix<T> {
        let mut m = Matrix::zeros(rows, dim);
        for (&r, g) in &self.embeddings {
            m.row_mut(r).copy_from_slice(g);
        }
        m
    }
}

/// Activations recorded by [`CnnModel::forward`] for use by
/// [`CnnModel::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// Token indices actually used (after truncation).
    pub tokens: Vec<usize>,
    /// `max_len x embed_dim` inputs; positions past `tokens.len()` are zero.
    pub inputs: Matrix<T>,
    /// Convolution pre-activations, `filters x feature_len`.
    pub conv_pre: Matrix<T>,
    /// Feature maps `h_i` after ReLU.
    pub features: Matrix<T>,
    /// Pooled vector `m` before dropout, filter-major.
    pub pooled: Vec<T>,
    /// Position in the feature map that won each pooling window; `None` when
    /// the padding won.
    pub pool_source: Vec<Option<usize>>,
    /// Inverted-dropout multipliers applied to `m` (0 or `1 / (1 - rate)`).
    pub dropout_mask: Option<Vec<T>>,
    /// `m` after dropout: the dense layer input.
    pub dense_input: Vec<T>,
    pub hidden_pre: Vec<T>,
    /// Dense layer output `z`.
    pub hidden: Vec<T>,
    pub logits: Vec<T>,
    /// Class distribution; for the Bernoulli head `[1 - y, y]`.
    pub probs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub class: usize,
    pub probs: Vec<T>,
}

/// Architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T> {
    pub config: CnnConfig,
    pub params: CnnParams<T>,
}

impl<T: Real> CnnModel<T> {
    pub fn new(config: CnnConfig, params: CnnParams<T>) -> Result<Self> {
        config.validate()?;
        let model = CnnModel { config, params };
        model.check_shapes()?;
        Ok(model)
    }

    /// Randomly initialized model with embeddings drawn from `rng` too.
    pub fn random(config: CnnConfig, vocab_size: usize, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let table = EmbeddingTable::random(vocab_size, config.embed_dim, rng);
        let params = CnnParams::init(&config, table, rng);
        Self::new(config, params)
    }

    pub fn cast<U: Real>(&self) -> CnnModel<U> {
        CnnModel {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let p = &self.params;
        let expect = [
            ("embedding dim", c.embed_dim, p.embeddings.dim()),
            ("filter rows", c.filters, p.filters.rows()),
            ("filter width", c.window * c.embed_dim, p.filters.cols()),
            ("filter bias", c.filters, p.filter_bias.len()),
            ("dense rows", c.hidden, p.dense.rows()),
            ("dense width", c.pooled_len(), p.dense.cols()),
            ("dense bias", c.hidden, p.dense_bias.len()),
            ("output rows", c.output_units(), p.output.rows()),
            ("output width", c.hidden, p.output.cols()),
            ("output bias", c.output_units(), p.output_bias.len()),
        ];
        for (what, expected, found) in expect {
            if expected != found {
                return Err(Error::Shape {
                    what: what.to_string(),
                    expected,
                    found,
                });
            }
        }
        if p.embeddings.rows() < 2 {
            return Err(Error::Shape {
                what: "embedding rows".into(),
                expected: 2,
                found: p.embeddings.rows(),
            });
        }
        Ok(())
    }

    /// Runs the network on `tokens`. Dropout is applied only when `dropout_rng`
    /// is given and the configured rate is positive.
    pub fn forward(
        &self,
        tokens: &[usize],
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardTrace<T>> {
        let c = &self.config;
        let p = &self.params;
        let vocab = p.embeddings.rows();
        if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
            return Err(Error::InvalidIndex {
                index: bad,
                size: vocab,
            });
        }
        let tokens: Vec<usize> = tokens.iter().copied().take(c.max_len).collect();
        let dim = c.embed_dim;
        let mut inputs = Matrix::zeros(c.max_len, dim);
        for (pos, &tok) in tokens.iter().enumerate() {
            inputs.row_mut(pos).copy_from_slice(p.embeddings.row(tok));
        }

        let flen = c.feature_len();
        let mut conv_pre = Matrix::zeros(c.filters, flen);
        for f in 0..c.filters {
            let pre = conv_preactivation(
                &inputs.as_slice()[..tokens.len() * dim],
                dim,
                c.window,
                p.filters.row(f),
                p.filter_bias[f],
            );
            // Sequence positions past the real tokens are zero vectors, so
            // the padded tail is just the bias.
            let row = conv_pre.row_mut(f);
            row[..pre.len()].copy_from_slice(&pre);
            row[pre.len()..].fill(p.filter_bias[f]);
        }
        let features = Matrix::from_vec(
            c.filters,
            flen,
            conv_pre.as_slice().iter().map(|&x| relu(x)).collect(),
        );

        let mut pooled = Vec::with_capacity(c.pooled_len());
        let mut pool_source = Vec::with_capacity(c.pooled_len());
        for f in 0..c.filters {
            let (values, sources) = max_pool_with_source(features.row(f), c.pool);
            pooled.extend(values);
            pool_source.extend(sources);
        }

        let dropout_mask = match dropout_rng {
            Some(rng) if c.dropout > 0.0 => {
                let keep = 1.0 - c.dropout;
                let scale = T::of_f64(1.0 / keep);
                Some(
                    (0..pooled.len())
                        .map(|_| {
                            if rng.gen::<f64>() < keep {
                                scale
                            } else {
                                T::zero()
                            }
                        })
                        .collect::<Vec<T>>(),
                )
            }
            _ => None,
        };
        let dense_input: Vec<T> = match &dropout_mask {
            Some(mask) => pooled.iter().zip(mask).map(|(&m, &k)| m * k).collect(),
            None => pooled.clone(),
        };

        let active: Vec<usize> = (0..dense_input.len())
            .filter(|&j| dense_input[j] != T::zero())
            .collect();
        let hidden_pre: Vec<T> = (0..c.hidden)
            .map(|h| {
                let row = p.dense.row(h);
                active
                    .iter()
                    .fold(p.dense_bias[h], |acc, &j| acc + row[j] * dense_input[j])
            })
            .collect();
        let hidden: Vec<T> = hidden_pre.iter().map(|&x| relu(x)).collect();

        let logits: Vec<T> = (0..c.output_units())
            .map(|k| dot(p.output.row(k), &hidden) + p.output_bias[k])
            .collect();
        let probs = match c.head {
            Head::Bernoulli => vec![sigmoid(-logits[0]), sigmoid(logits[0])],
            Head::Softmax => softmax(&logits),
        };

        Ok(ForwardTrace {
            tokens,
            inputs,
            conv_pre,
            features,
            pooled,
            pool_source,
            dropout_mask,
            dense_input,
            hidden_pre,
            hidden,
            logits,
            probs,
        })
    }

    /// Cross-entropy of the gold class, with the probability clamped at
    /// [`LOG_EPS`].
    pub fn loss(&self, trace: &ForwardTrace<T>, gold: usize) -> T {
        let p = trace.probs[gold].max(T::of_f64(LOG_EPS));
        -p.ln()
    }

    /// Exact gradients of [`loss`](Self::loss) for one example.
    pub fn backward(&self, trace: &ForwardTrace<T>, gold: usize) -> Gradients<T> {
        let mut grads = Gradients::zeros_like(&self.params);
        self.backward_into(trace, gold, &mut grads);
        grads
    }

    /// Adds the gradients of one example into `grads`.
    pub fn backward_into(&self, trace: &ForwardTrace<T>, gold: usize, grads: &mut Gradients<T>) {
        let c = &self.config;
        let p = &self.params;

        // d loss / d logits
        let dlogits: Vec<T> = match c.head {
            Head::Bernoulli => {
                let y = if gold == 1 { T::one() } else { T::zero() };
                vec![trace.probs[1] - y]
            }
            Head::Softmax => trace
                .probs
                .iter()
                .enumerate()
                .map(|(k, &pk)| if k == gold { pk - T::one() } else { pk })
                .collect(),
        };

        let mut dhidden = vec![T::zero(); c.hidden];
        for (k, &dl) in dlogits.iter().enumerate() {
            grads.output_bias[k] += dl;
            let w = p.output.row(k);
            let gw = grads.output.row_mut(k);
            for h in 0..c.hidden {
                gw[h] += dl * trace.hidden[h];
                dhidden[h] += dl * w[h];
            }
        }

        let dhidden_pre: Vec<T> = dhidden
            .iter()
            .zip(&trace.hidden_pre)
            .map(|(&d, &pre)| if pre > T::zero() { d } else { T::zero() })
            .collect();

        let active: Vec<usize> = (0..trace.dense_input.len())
            .filter(|&j| trace.dense_input[j] != T::zero())
            .collect();
        let mut ddense_input = vec![T::zero(); trace.dense_input.len()];
        for (h, &d) in dhidden_pre.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            grads.dense_bias[h] += d;
            let gv = grads.dense.row_mut(h);
            for &j in &active {
                gv[j] += d * trace.dense_input[j];
            }
            let v = p.dense.row(h);
            for (dm, &w) in ddense_input.iter_mut().zip(v) {
                *dm += d * w;
            }
        }

        let dpooled: Vec<T> = match &trace.dropout_mask {
            Some(mask) => ddense_input
                .iter()
                .zip(mask)
                .map(|(&d, &k)| d * k)
                .collect(),
            None => ddense_input,
        };

        let flen = c.feature_len();
        let dim = c.embed_dim;
        let real = trace.tokens.len();
        let mut dinputs = vec![T::zero(); real * dim];
        for f in 0..c.filters {
            let mut dpre = vec![T::zero(); flen];
            for j in 0..flen {
                if let Some(src) = trace.pool_source[f * flen + j] {
                    dpre[src] += dpooled[f * flen + j];
                }
            }
            let pre = trace.conv_pre.row(f);
            for (d, &x) in dpre.iter_mut().zip(pre) {
                if x <= T::zero() {
                    *d = T::zero();
                }
            }
            grads.filter_bias[f] += dpre.iter().fold(T::zero(), |a, &b| a + b);
            let u = p.filters.row(f);
            let gu = grads.filters.row_mut(f);
            for (t, &d) in dpre.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for k in 0..c.window {
                    // window slot k at output t reads input position t + k - (window - 1)
                    let Some(pos) = (t + k).checked_sub(c.window - 1) else {
                        continue;
                    };
                    if pos >= real {
                        continue;
                    }
                    let x = trace.inputs.row(pos);
                    let slot = k * dim..(k + 1) * dim;
                    for (g, &xv) in gu[slot.clone()].iter_mut().zip(x) {
                        *g += d * xv;
                    }
                    let dx = &mut dinputs[pos * dim..(pos + 1) * dim];
                    for (dxv, &uv) in dx.iter_mut().zip(&u[slot]) {
                        *dxv += d * uv;
                    }
                }
            }
        }

        if c.fine_tune_embeddings {
            for (pos, &tok) in trace.tokens.iter().enumerate() {
                if tok == PAD {
                    continue;
                }
                let row = grads
                    .embeddings
                    .entry(tok)
                    .or_insert_with(|| vec![T::zero(); dim]);
                for (g, &d) in row.iter_mut().zip(&dinputs[pos * dim..(pos + 1) * dim]) {
                    *g += d;
                }
            }
        }
    }

    /// Inference-mode prediction: the arg-max class (lowest index on ties)
    /// and the class distribution.
    pub fn predict(&self, tokens: &[usize]) -> Result<Prediction<T>> {
        let trace = self.forward(tokens, None)?;
        let class = argmax(&trace.probs);
        Ok(Prediction {
            class,
            probs: trace.probs,
        })
    }
}

pub fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Softmax with the maximum subtracted before exponentiating.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn conv_preactivation<T: Real>(
    inputs: &[T],
    dim: usize,
    window: usize,
    filter: &[T],
    bias: T,
) -> Vec<T> {
    let len = inputs.len() / dim;
    (0..len + window - 1)
        .map(|t| {
            let mut acc = bias;
            for k in 0..window {
                if let Some(pos) = (t + k).checked_sub(window - 1) {
                    if pos < len {
                        acc += dot(
                            &filter[k * dim..(k + 1) * dim],
                            &inputs[pos * dim..(pos + 1) * dim],
                        );
                    }
                }
            }
            acc
        })
        .collect()
}

/// Wide convolution of one filter over `inputs` (`T` rows of `dim` values,
/// concatenated), with out-of-range positions treated as zero vectors and a
/// ReLU applied. Output length is `T + window - 1`.
pub fn wide_convolve<T: Real>(
    inputs: &[T],
    dim: usize,
    window: usize,
    filter: &[T],
    bias: T,
) -> Result<Vec<T>> {
    if window == 0 || dim == 0 {
        return Err(Error::Config("window and dim must be positive".into()));
    }
    if filter.len() != window * dim {
        return Err(Error::Shape {
            what: "filter".into(),
            expected: window * dim,
            found: filter.len(),
        });
    }
    if !inputs.len().is_multiple_of(dim) {
        return Err(Error::Shape {
            what: "inputs".into(),
            expected: (inputs.len() / dim + 1) * dim,
            found: inputs.len(),
        });
    }
    Ok(conv_preactivation(inputs, dim, window, filter, bias)
        .into_iter()
        .map(relu)
        .collect())
}

/// Stride-1 max-pooling with window `pool` and `pool - 1` zeros appended on
/// the right, so the output has the same length as the input.
pub fn max_pool<T: Real>(map: &[T], pool: usize) -> Vec<T> {
    max_pool_with_source(map, pool).0
}

fn max_pool_with_source<T: Real>(map: &[T], pool: usize) -> (Vec<T>, Vec<Option<usize>>) {
    let pool = pool.max(1);
    let mut values = Vec::with_capacity(map.len());
    let mut sources = Vec::with_capacity(map.len());
    for j in 0..map.len() {
        let end = (j + pool).min(map.len());
        let mut best = j;
        for i in j + 1..end {
            if map[i] > map[best] {
                best = i;
            }
        }
        if j + pool > map.len() && map[best] < T::zero() {
            values.push(T::zero());
            sources.push(None);
        } else {
            values.push(map[best]);
            sources.push(Some(best));
        }
    }
    (values, sources)
}
