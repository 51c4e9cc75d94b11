use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::ImageShape;
use crate::error::{Error, Result};
use crate::model::{check_param_count, dense, init_dense, Activation, Critic};
use crate::tensor::{Array, ConvParams, Graph, Tensor};

const CONV_KERNEL: usize = 3;
const CONV: ConvParams = ConvParams { stride: 2, padding: 1 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DiscriminatorArch {
    /// Dense layers of the given widths, then a linear logit.
    Dense { hidden: Vec<usize> },
    /// One 3x3 stride-2 convolution, one dense hidden layer, linear logit.
    /// Single-channel images only.
    Conv { channels: usize, hidden: usize },
}

/// Architecture of both networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub image: ImageShape,
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator: DiscriminatorArch,
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            image: ImageShape::gray(16, 16),
            latent_dim: 32,
            generator_hidden: vec![64],
            discriminator: DiscriminatorArch::Dense { hidden: vec![64, 32] },
            activation: Activation::Softplus,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image.is_empty() || self.latent_dim == 0 {
            return Err(Error::Config("image shape and latent_dim must be non-zero".into()));
        }
        if self.generator_hidden.contains(&0) {
            return Err(Error::Config("generator hidden widths must be non-zero".into()));
        }
        match &self.discriminator {
            DiscriminatorArch::Dense { hidden } if hidden.contains(&0) => {
                Err(Error::Config("discriminator hidden widths must be non-zero".into()))
            }
            DiscriminatorArch::Conv { channels, hidden } => {
                if self.image.channels != 1 {
                    return Err(Error::Config("conv discriminator needs single-channel images".into()));
                }
                if *channels == 0 || *hidden == 0 {
                    return Err(Error::Config("conv discriminator widths must be non-zero".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn conv_out(n: usize) -> usize {
    (n + 2 * CONV.padding - CONV_KERNEL) / CONV.stride + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    spec: ModelSpec,
    params: Vec<Array>,
}

impl Discriminator {
    pub fn init(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.image.len();
        let mut params = Vec::new();
        match &spec.discriminator {
            DiscriminatorArch::Dense { hidden } => {
                let mut fan_in = d;
                for &h in hidden.iter().chain(std::iter::once(&1)) {
                    let (w, b) = init_dense(rng, fan_in, h);
                    params.extend([w, b]);
                    fan_in = h;
                }
            }
            DiscriminatorArch::Conv { channels, hidden } => {
                let fan_in = CONV_KERNEL * CONV_KERNEL;
                let std = (1.0 / fan_in as f64).sqrt();
                params.push(Array::from_fn(&[*channels, 1, CONV_KERNEL, CONV_KERNEL], |_| {
                    std * rng.sample::<f64, _>(StandardNormal)
                }));
                params.push(Array::zeros(&[*channels]));
                let flat = channels * conv_out(spec.image.height) * conv_out(spec.image.width);
                let (w1, b1) = init_dense(rng, flat, *hidden);
                let (w2, b2) = init_dense(rng, *hidden, 1);
                params.extend([w1, b1, w2, b2]);
            }
        }
        Ok(Discriminator {
            spec: spec.clone(),
            params,
        })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<Array>) -> Result<Self> {
        let reference = Self::init(spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        check_shapes("discriminator", &reference.params, &params)?;
        Ok(Discriminator {
            spec: spec.clone(),
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params_mut(&mut self) -> &mut [Array] {
        &mut self.params
    }

    fn trunk<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<(Tensor<'g>, usize)> {
        let act = self.spec.activation;
        let batch = x.shape()[0];
        match &self.spec.discriminator {
            DiscriminatorArch::Dense { hidden } => {
                check_param_count("discriminator", params, 2 * hidden.len() + 2)?;
                let mut h = x;
                for layer in 0..hidden.len() {
                    h = act.apply(dense(h, params[2 * layer], params[2 * layer + 1])?);
                }
                Ok((h, 2 * hidden.len()))
            }
            DiscriminatorArch::Conv { channels, .. } => {
                check_param_count("discriminator", params, 6)?;
                let ImageShape { height, width, .. } = self.spec.image;
                let (oh, ow) = (conv_out(height), conv_out(width));
                let img = x.reshape(&[batch, 1, height, width])?;
                let conv = img.conv2d(params[0], CONV)?;
                // per-channel bias laid out as [B, C, OH, OW]
                let ones = x.graph().constant(Array::full(&[1, oh * ow], 1.0));
                let bias = params[1]
                    .reshape(&[*channels, 1])?
                    .matmul(ones)?
                    .reshape(&[channels * oh * ow])?
                    .broadcast_rows(batch)?
                    .reshape(&[batch, *channels, oh, ow])?;
                let h = act.apply(conv.add(bias)?).reshape(&[batch, channels * oh * ow])?;
                let h = act.apply(dense(h, params[2], params[3])?);
                Ok((h, 4))
            }
        }
    }
}

impl Critic for Discriminator {
    fn params(&self) -> &[Array] {
        &self.params
    }

    fn logits<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>> {
        let (h, next) = self.trunk(params, x)?;
        dense(h, params[next], params[next + 1])
    }

    fn features<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>> {
        Ok(self.trunk(params, x)?.0)
    }
}

fn check_shapes(what: &str, expected: &[Array], got: &[Array]) -> Result<()> {
    let ok = expected.len() == got.len() && expected.iter().zip(got).all(|(a, b)| a.shape() == b.shape());
    if !ok {
        let e: Vec<_> = expected.iter().map(|a| a.shape().to_vec()).collect();
        let g: Vec<_> = got.iter().map(|a| a.shape().to_vec()).collect();
        return Err(Error::invalid(format!("{what} parameter shapes {g:?} do not match architecture {e:?}")));
    }
    Ok(())
}

/// Dense generator from a standard-normal latent to a `tanh` image.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    spec: ModelSpec,
    params: Vec<Array>,
}

impl Generator {
    pub fn init(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::new();
        let mut fan_in = spec.latent_dim;
        for &h in spec.generator_hidden.iter().chain(std::iter::once(&spec.image.len())) {
            let (w, b) = init_dense(rng, fan_in, h);
            params.extend([w, b]);
            fan_in = h;
        }
        Ok(Generator {
            spec: spec.clone(),
            params,
        })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<Array>) -> Result<Self> {
        let reference = Self::init(spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        check_shapes("generator", &reference.params, &params)?;
        Ok(Generator {
            spec: spec.clone(),
            params,
        })
    }

    pub fn params(&self) -> &[Array] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array] {
        &mut self.params
    }

    pub fn forward<'g>(&self, params: &[Tensor<'g>], z: Tensor<'g>) -> Result<Tensor<'g>> {
        let layers = self.spec.generator_hidden.len() + 1;
        check_param_count("generator", params, 2 * layers)?;
        let mut h = z;
        for layer in 0..layers {
            h = dense(h, params[2 * layer], params[2 * layer + 1])?;
            h = if layer + 1 == layers {
                h.tanh()
            } else {
                self.spec.activation.apply(h)
            };
        }
        Ok(h)
    }

    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> Vec<Tensor<'g>> {
        self.params
            .iter()
            .map(|p| if trainable { graph.variable(p.clone()) } else { graph.constant(p.clone()) })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl GanModel {
    /// Generator weights are drawn first, then the discriminator's.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = Generator::init(spec, &mut rng)?;
        let discriminator = Discriminator::init(spec, &mut rng)?;
        Ok(GanModel {
            generator,
            discriminator,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.generator.spec
    }
}

pub fn latent_batch(rng: &mut impl Rng, n: usize, dim: usize) -> Array {
    Array::from_fn(&[n, dim], |_| rng.sample::<f64, _>(StandardNormal))
}

/// `n` generator outputs from latents drawn with `seed`, values in `[-1, 1]`.
pub fn sample(model: &GanModel, n: usize, seed: u64) -> Result<Array> {
    let spec = model.spec();
    if n == 0 {
        return Ok(Array::zeros(&[0, spec.image.len()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = latent_batch(&mut rng, n, spec.latent_dim);
    let g = Graph::new();
    let params = model.generator.bind(&g, false);
    let out = model.generator.forward(&params, g.constant(z))?;
    Ok((*out.value()).clone())
}
