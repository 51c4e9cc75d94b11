use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Non-saturating cross-entropy.
    #[default]
    Ns,
    Wasserstein,
    /// Least squares.
    Ls,
    Hinge,
    /// Relativistic average hinge.
    RaHinge,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Ns => "ns",
            LossKind::Wasserstein => "wasserstein",
            LossKind::Ls => "ls",
            LossKind::Hinge => "hinge",
            LossKind::RaHinge => "rahinge",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ns" => Ok(LossKind::Ns),
            "wasserstein" => Ok(LossKind::Wasserstein),
            "ls" => Ok(LossKind::Ls),
            "hinge" => Ok(LossKind::Hinge),
            "rahinge" => Ok(LossKind::RaHinge),
            _ => Err(Error::invalid(format!(
                "unknown loss kind {s:?} (expected ns, wasserstein, ls, hinge or rahinge)"
            ))),
        }
    }
}

/// Discriminator and generator objectives evaluated on the same logits.
#[derive(Clone, Copy, Debug)]
pub struct AdversarialLoss<'g> {
    pub discriminator: Tensor<'g>,
    pub generator: Tensor<'g>,
}

fn flat<'g>(t: Tensor<'g>, what: &str) -> Result<Tensor<'g>> {
    let v = t.value();
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} logits are empty")));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{what} logits")));
    }
    t.reshape(&[v.len()])
}

fn mean<'g>(t: Tensor<'g>) -> Tensor<'g> {
    let n = t.value().len();
    t.sum_reduce().scale(1.0 / n as f64)
}

/// Non-saturating loss with log-sigmoids written as softplus.
pub fn loss_ns<'g>(real: Tensor<'g>, fake: Tensor<'g>) -> Result<AdversarialLoss<'g>> {
    let (r, f) = (flat(real, "real")?, flat(fake, "fake")?);
    // -log σ(x) = softplus(-x),  -log(1 - σ(x)) = softplus(x)
    let d = mean(r.neg().softplus()).add(mean(f.softplus()))?;
    let g = mean(f.neg().softplus());
    Ok(AdversarialLoss {
        discriminator: d,
        generator: g,
    })
}

pub fn adversarial_loss<'g>(kind: LossKind, real: Tensor<'g>, fake: Tensor<'g>) -> Result<AdversarialLoss<'g>> {
    if kind == LossKind::Ns {
        return loss_ns(real, fake);
    }
    let (r, f) = (flat(real, "real")?, flat(fake, "fake")?);
    let (d, g) = match kind {
        LossKind::Ns => unreachable!(),
        LossKind::Wasserstein => (mean(f).sub(mean(r))?, mean(f).neg()),
        LossKind::Ls => (
            mean(r.add_scalar(-1.0).square()).add(mean(f.square()))?.scale(0.5),
            mean(f.add_scalar(-1.0).square()).scale(0.5),
        ),
        LossKind::Hinge => (
            mean(r.neg().add_scalar(1.0).relu()).add(mean(f.add_scalar(1.0).relu()))?,
            mean(f).neg(),
        ),
        LossKind::RaHinge => {
            let real_rel = r.sub(mean(f).broadcast(&r.shape())?)?;
            let fake_rel = f.sub(mean(r).broadcast(&f.shape())?)?;
            let d = mean(real_rel.neg().add_scalar(1.0).relu()).add(mean(fake_rel.add_scalar(1.0).relu()))?;
            let g = mean(real_rel.add_scalar(1.0).relu()).add(mean(fake_rel.neg().add_scalar(1.0).relu()))?;
            (d, g)
        }
    };
    Ok(AdversarialLoss {
        discriminator: d,
        generator: g,
    })
}
