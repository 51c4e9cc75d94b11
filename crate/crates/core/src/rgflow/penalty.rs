use serde::{Deserialize, Serialize};

use super::{chain_depth, embedded_side, gaussian_kernel, gaussian_sample_offset, reflect, RgFilter};
use crate::error::{Error, Result};
use crate::tensor::{Array, Tensor};

/// How the `max |Ψ|` denominator of the normalization is differentiated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerGrad {
    /// The maximum is a constant during differentiation. The penalty
    /// gradient then also shrinks `Ψ` as a whole, which lowers the penalty
    /// value seen by the optimizer without lowering the descriptor.
    Detached,
    /// Gradient flows through the maximum (to its first occurrence).
    #[default]
    Through,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub zeta: usize,
    pub filter: RgFilter,
    pub normalizer: NormalizerGrad,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            zeta: 2,
            filter: RgFilter::Kadanoff,
            normalizer: NormalizerGrad::default(),
        }
    }
}

/// `∇ₓ f(x)` for a batch `x` whose critic returns one logit per sample.
///
/// Samples are independent, so the gradient of the summed logits gives
/// every per-sample gradient at once.
pub fn input_gradient<'g, F>(x: Tensor<'g>, critic: F, create_graph: bool) -> Result<Tensor<'g>>
where
    F: FnOnce(Tensor<'g>) -> Result<Tensor<'g>>,
{
    let batch = *x
        .shape()
        .first()
        .ok_or_else(|| Error::shape("input_gradient", &[&x.shape()], "input needs a batch axis"))?;
    let logits = critic(x)?;
    let ls = logits.shape();
    if ls.iter().product::<usize>() != batch {
        return Err(Error::shape(
            "input_gradient",
            &[&x.shape(), &ls],
            "critic must return one scalar per sample",
        ));
    }
    let grads = x.graph().backward(logits.sum_reduce(), &[x], create_graph)?;
    Ok(grads.get(0))
}

/// Differentiable MS³D penalty, averaged over the batch.
pub fn ms3d_penalty<'g, F>(x: Tensor<'g>, critic: F, cfg: &PenaltyConfig) -> Result<Tensor<'g>>
where
    F: FnOnce(Tensor<'g>) -> Result<Tensor<'g>>,
{
    let psi = input_gradient(x, critic, true)?;
    field_penalty(psi, cfg)
}

/// Batch mean of the descriptor of each row of `psi` (shape `[B, ...]`),
/// built from graph ops so that it can be differentiated.
pub fn field_penalty<'g>(psi: Tensor<'g>, cfg: &PenaltyConfig) -> Result<Tensor<'g>> {
    let graph = psi.graph();
    let shape = psi.shape();
    let batch = shape[0];
    let dim: usize = shape[1..].iter().product();
    if batch == 0 || dim == 0 {
        return Err(Error::shape("ms3d_penalty", &[&shape], "empty batch or field"));
    }
    let side = embedded_side(dim, cfg.zeta);
    let depth = chain_depth(side, cfg.zeta);
    let rows = psi
        .reshape(&[batch, dim])?
        .pad_zero(&[(0, 0), (0, side * side - dim)])?;

    let mut total: Option<Tensor<'g>> = None;
    for b in 0..batch {
        let field = rows.slice(&[(b, b + 1), (0, side * side)])?.reshape(&[side, side])?;
        let magnitude = field.abs();
        let max = magnitude.value().data().iter().fold(0.0f64, |m, &v| m.max(v));
        if max == 0.0 {
            continue;
        }
        let denom = match cfg.normalizer {
            NormalizerGrad::Detached => graph.constant(Array::full(&[side, side], max)),
            NormalizerGrad::Through => magnitude.max_reduce()?.broadcast(&[side, side])?,
        };
        let normalized = magnitude.div(denom)?;
        let sd = chain_sd(normalized, side, depth, cfg)?;
        total = Some(match total {
            Some(acc) => acc.add(sd)?,
            None => sd,
        });
    }
    Ok(match total {
        Some(t) => t.scale(1.0 / batch as f64),
        None => graph.scalar(0.0),
    })
}

fn chain_sd<'g>(field: Tensor<'g>, side: usize, depth: usize, cfg: &PenaltyConfig) -> Result<Tensor<'g>> {
    let zeta = cfg.zeta;
    let mut coarse = field;
    let mut previous = field;
    let mut total: Option<Tensor<'g>> = None;
    for s in 0..depth {
        coarse = match cfg.filter {
            RgFilter::Kadanoff => coarse.avg_pool2d(zeta, zeta)?,
            RgFilter::Gaussian { sigma } => {
                let n_in = side / zeta.pow(s as u32);
                let op = field.graph().constant(gaussian_operator(n_in, zeta, sigma)?);
                op.matmul(coarse)?.matmul(op.transpose()?)?
            }
        };
        let full = coarse.upsample_nearest(zeta.pow(s as u32 + 1))?;
        let sd = full.mse(previous)?;
        total = Some(match total {
            Some(acc) => acc.add(sd)?,
            None => sd,
        });
        previous = full;
    }
    total.ok_or_else(|| Error::invalid(format!("side {side} admits no coarse-graining step")))
}

/// Row operator `A` with `A X Aᵀ` equal to 3x3 Gaussian blur (reflect
/// borders) followed by subsampling by `zeta`. The 2-D kernel is separable.
fn gaussian_operator(n_in: usize, zeta: usize, sigma: f64) -> Result<Array> {
    let k2 = gaussian_kernel(sigma)?;
    let centre_row_sum: f64 = k2[1].iter().sum();
    let taps: Vec<f64> = (0..3).map(|i| k2[1][i] / centre_row_sum).collect();
    let n_out = n_in / zeta;
    let off = gaussian_sample_offset(zeta);
    let mut a = Array::zeros(&[n_out, n_in]);
    for i in 0..n_out {
        let p = (i * zeta + off) as isize;
        for (d, &w) in taps.iter().enumerate() {
            let col = reflect(p + d as isize - 1, n_in);
            a.data_mut()[i * n_in + col] += w;
        }
    }
    Ok(a)
}
