//! Parameterized scalar-output models and the layer helpers they share.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Array, Graph, Tensor};

/// A model `f(x; φ)` mapping a batch `[B, D]` to one logit per sample.
///
/// Parameters are plain arrays; `logits` takes them as graph tensors so the
/// caller decides whether they are variables, constants or perturbed copies.
pub trait Critic {
    fn params(&self) -> &[Array];

    fn logits<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>>;

    /// Penultimate representation; defaults to the logits themselves.
    fn features<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>> {
        self.logits(params, x)
    }

    /// Parameters as differentiable leaves of `graph`.
    fn bind<'g>(&self, graph: &'g Graph) -> Vec<Tensor<'g>> {
        self.params().iter().map(|p| graph.variable(p.clone())).collect()
    }

    fn bind_constant<'g>(&self, graph: &'g Graph) -> Vec<Tensor<'g>> {
        self.params().iter().map(|p| graph.constant(p.clone())).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    #[default]
    Softplus,
    Tanh,
    /// Slope `alpha` below zero; not twice differentiable at the kink.
    LeakyRelu { alpha: f64 },
}

impl Activation {
    pub fn apply<'g>(&self, x: Tensor<'g>) -> Tensor<'g> {
        match *self {
            Activation::Softplus => x.softplus(),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu { alpha } => x.leaky_relu(alpha),
        }
    }
}

/// `x · W + b` for `x: [B, in]`, `W: [in, out]`, `b: [out]`.
pub fn dense<'g>(x: Tensor<'g>, weight: Tensor<'g>, bias: Tensor<'g>) -> Result<Tensor<'g>> {
    let rows = x.shape()[0];
    x.matmul(weight)?.add(bias.broadcast_rows(rows)?)
}

/// Gaussian weights with variance `1 / fan_in`, zero bias.
pub fn init_dense(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> (Array, Array) {
    let std = (1.0 / fan_in as f64).sqrt();
    let w = Array::from_fn(&[fan_in, fan_out], |_| std * rng.sample::<f64, _>(StandardNormal));
    (w, Array::zeros(&[fan_out]))
}

pub(crate) fn check_param_count(what: &str, params: &[Tensor<'_>], expected: usize) -> Result<()> {
    if params.len() != expected {
        return Err(Error::invalid(format!(
            "{what} expects {expected} parameter tensors, got {}",
            params.len()
        )));
    }
    Ok(())
}

/// `f(x) = x · w` with `w: [D, 1]`; its input gradient is `w` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCritic {
    params: Vec<Array>,
}

impl LinearCritic {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        LinearCritic {
            params: vec![Array::new(vec![n, 1], weights).expect("column vector")],
        }
    }
}

impl Critic for LinearCritic {
    fn params(&self) -> &[Array] {
        &self.params
    }

    fn logits<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>> {
        check_param_count("linear critic", params, 1)?;
        x.matmul(params[0])
    }
}
