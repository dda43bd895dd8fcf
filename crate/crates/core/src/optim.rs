//! Parameter update rules: plain SGD and ADADELTA.
//!
//! Both receive gradients already averaged over the minibatch. The PAD
//! embedding row is never updated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{CnnParams, Gradients};
use crate::tensor::Real;
use crate::vocab::PAD;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd { learning_rate: f64 },
    Adadelta { rho: f64, eps: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adadelta {
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OptimizerConfig::Sgd { learning_rate } => {
                if !(learning_rate.is_finite() && learning_rate > 0.0) {
                    return Err(Error::Config(format!(
                        "learning rate must be finite and positive, got {learning_rate}"
                    )));
                }
            }
            OptimizerConfig::Adadelta { rho, eps } => {
                if !(0.0..1.0).contains(&rho) || !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::Config(format!(
                        "adadelta needs 0 <= rho < 1 and eps > 0, got rho={rho} eps={eps}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fresh optimizer state for `params`.
    pub fn build<T: Real>(&self, params: &CnnParams<T>) -> Result<Optimizer<T>> {
        self.validate()?;
        Ok(match *self {
            OptimizerConfig::Sgd { learning_rate } => Optimizer::Sgd(SgdState {
                eta: T::of_f64(learning_rate),
            }),
            OptimizerConfig::Adadelta { rho, eps } => {
                Optimizer::Adadelta(AdadeltaState::new(params, rho, eps))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdState<T> {
    pub eta: T,
}

/// Running averages `E[g^2]` and `E[dx^2]` for every parameter entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState<T> {
    pub rho: T,
    pub eps: T,
    pub sq_grad: Vec<Vec<T>>,
    pub sq_update: Vec<Vec<T>>,
}

impl<T: Real> AdadeltaState<T> {
    pub fn new(params: &CnnParams<T>, rho: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<T>> = params
            .tensors()
            .iter()
            .map(|t| vec![T::zero(); t.len()])
            .collect();
        AdadeltaState {
            rho: T::of_f64(rho),
            eps: T::of_f64(eps),
            sq_grad: zeros.clone(),
            sq_update: zeros,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    Sgd(SgdState<T>),
    Adadelta(AdadeltaState<T>),
}

impl<T: Real> Optimizer<T> {
    /// Applies one update with minibatch-mean gradients.
    pub fn step(&mut self, params: &mut CnnParams<T>, grads: &Gradients<T>) -> Result<()> {
        match self {
            Optimizer::Sgd(state) => sgd_step(params, grads, state),
            Optimizer::Adadelta(state) => adadelta_step(params, grads, state),
        }
    }
}

fn check_shapes<T: Real>(params: &CnnParams<T>, grads: &Gradients<T>) -> Result<()> {
    let names = &crate::net::TENSOR_NAMES[1..];
    let ptensors = params.tensors();
    for ((name, p), g) in names.iter().zip(&ptensors[1..]).zip(grads.dense_tensors()) {
        if p.len() != g.len() {
            return Err(Error::Shape {
                what: format!("gradient {name}"),
                expected: p.len(),
                found: g.len(),
            });
        }
    }
    let rows = params.embeddings.rows();
    let dim = params.embeddings.dim();
    for (&row, g) in &grads.embeddings {
        if row >= rows || g.len() != dim {
            return Err(Error::Shape {
                what: format!("embedding gradient row {row}"),
                expected: dim,
                found: g.len(),
            });
        }
    }
    Ok(())
}

/// `theta <- theta - eta * g`.
pub fn sgd_step<T: Real>(
    params: &mut CnnParams<T>,
    grads: &Gradients<T>,
    state: &SgdState<T>,
) -> Result<()> {
    check_shapes(params, grads)?;
    let eta = state.eta;
    let dim = params.embeddings.dim();
    let [emb, rest @ ..] = params.tensors_mut();
    for (theta, g) in rest.into_iter().zip(grads.dense_tensors()) {
        for (t, &gv) in theta.iter_mut().zip(g) {
            *t -= eta * gv;
        }
    }
    for (&row, g) in &grads.embeddings {
        if row == PAD {
            continue;
        }
        for (t, &gv) in emb[row * dim..(row + 1) * dim].iter_mut().zip(g) {
            *t -= eta * gv;
        }
    }
    Ok(())
}

/// One ADADELTA update on a flat slice.
///
/// `E[g^2] <- rho E[g^2] + (1 - rho) g^2`,
/// `dx = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g`,
/// `E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2`, `theta <- theta + dx`.
pub fn adadelta_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    sq_grad: &mut [T],
    sq_update: &mut [T],
    rho: T,
    eps: T,
) {
    let one_minus = T::one() - rho;
    for i in 0..theta.len() {
        let g = grad[i];
        sq_grad[i] = rho * sq_grad[i] + one_minus * g * g;
        let dx = -((sq_update[i] + eps).sqrt() / (sq_grad[i] + eps).sqrt()) * g;
        sq_update[i] = rho * sq_update[i] + one_minus * dx * dx;
        theta[i] += dx;
    }
}

pub fn adadelta_step<T: Real>(
    params: &mut CnnParams<T>,
    grads: &Gradients<T>,
    state: &mut AdadeltaState<T>,
) -> Result<()> {
    check_shapes(params, grads)?;
    let (rho, eps) = (state.rho, state.eps);
    let dim = params.embeddings.dim();
    let [emb, rest @ ..] = params.tensors_mut();
    for (i, (theta, g)) in rest.into_iter().zip(grads.dense_tensors()).enumerate() {
        let (sg, su) = (&mut state.sq_grad[i + 1], &mut state.sq_update[i + 1]);
        adadelta_update(theta, g, sg, su, rho, eps);
    }

    // Embedding rows without a gradient only decay their accumulators.
    let (sg, su) = (&mut state.sq_grad[0], &mut state.sq_update[0]);
    let rows = emb.len() / dim.max(1);
    for row in 0..rows {
        if row == PAD {
            continue;
        }
        let span = row * dim..(row + 1) * dim;
        match grads.embeddings.get(&row) {
            Some(g) => adadelta_update(
                &mut emb[span.clone()],
                g,
                &mut sg[span.clone()],
                &mut su[span],
                rho,
                eps,
            ),
            None => {
                for x in &mut sg[span.clone()] {
                    *x *= rho;
                }
                for x in &mut su[span] {
                    *x *= rho;
                }
            }
        }
    }
    Ok(())
}
