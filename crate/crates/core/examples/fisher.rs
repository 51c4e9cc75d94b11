//! Fisher trace estimates: a linear critic, where the exact value is the
//! input dimension, and a freshly initialized discriminator.
//!
//! `cargo run --release --example fisher`

use ms3d::data::{make_synthetic, SyntheticFamily};
use ms3d::diagnostics::fisher_trace;
use ms3d::gan::{GanModel, ModelSpec};
use ms3d::model::LinearCritic;
use ms3d::tensor::Array;

fn main() -> ms3d::Result<()> {
    let dim = 32;
    let critic = LinearCritic::new((0..dim).map(|i| (i as f64 * 0.37).sin()).collect());
    let x = Array::zeros(&[2, dim]);
    for probes in [4, 16, 64, 256] {
        println!("linear, k = {probes:>3}: {:.3} (exact {dim})", fisher_trace(&x, &critic, probes, 0)?);
    }
    let data = make_synthetic(SyntheticFamily::GaussBlobs, 16, 16, 0)?;
    let model = GanModel::init(&ModelSpec::default(), 0)?;
    let real = data.batch(&data.train_indices()[..4])?;
    for probes in [8, 32] {
        println!("discriminator, k = {probes:>2}: {:.3}", fisher_trace(&real, &model.discriminator, probes, 0)?);
    }
    Ok(())
}
