//! Every adversarial loss on the same pair of logit batches.
//!
//! `cargo run --example loss_variants`

use ms3d::gan::{adversarial_loss, LossKind};
use ms3d::tensor::{Array, Graph};

fn main() -> ms3d::Result<()> {
    let real = Array::new(vec![4, 1], vec![1.2, 0.4, 2.0, -0.3])?;
    let fake = Array::new(vec![4, 1], vec![-0.8, 0.1, -1.5, 0.6])?;
    for kind in [LossKind::Ns, LossKind::Wasserstein, LossKind::Ls, LossKind::Hinge, LossKind::RaHinge] {
        let g = Graph::new();
        let l = adversarial_loss(kind, g.constant(real.clone()), g.constant(fake.clone()))?;
        println!("{:<12} D {:>9.5}  G {:>9.5}", kind.to_string(), l.discriminator.item()?, l.generator.item()?);
    }
    Ok(())
}
