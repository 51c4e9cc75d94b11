//! The regularizer on a small discriminator: its value, and how much of its
//! parameter gradient each normalizer mode produces.
//!
//! `cargo run --example penalty`

use ms3d::data::{make_synthetic, SyntheticFamily};
use ms3d::gan::{discriminator_loss, GanModel, ModelSpec, TrainConfig};
use ms3d::model::Critic;
use ms3d::rgflow::NormalizerGrad;
use ms3d::tensor::Graph;

fn main() -> ms3d::Result<()> {
    let data = make_synthetic(SyntheticFamily::GaussBlobs, 16, 16, 1)?;
    let model = GanModel::init(&ModelSpec::default(), 1)?;
    let real = data.batch(&data.train_indices()[..4])?;
    let fake = ms3d::gan::sample(&model, 4, 2)?;
    for normalizer in [NormalizerGrad::Through, NormalizerGrad::Detached] {
        for lambda in [0.0, 10.0] {
            let cfg = TrainConfig {
                lambda,
                normalizer,
                ..TrainConfig::default()
            };
            let g = Graph::new();
            let params = model.discriminator.bind(&g);
            let loss = discriminator_loss(&model.discriminator, &params, g.variable(real.clone()), g.variable(fake.clone()), &cfg)?;
            let grads = g.backward(loss.total, &params, false)?;
            let norm: f64 = grads.values().iter().map(|a| a.norm_sq()).sum::<f64>().sqrt();
            println!(
                "{normalizer:?} lambda {lambda:>4}: base {:.5} penalty {:.5} total {:.5} |grad| {norm:.5}",
                loss.base.item()?,
                loss.penalty.map_or(Ok(f64::NAN), |p| p.item())?,
                loss.total.item()?,
            );
        }
    }
    Ok(())
}
