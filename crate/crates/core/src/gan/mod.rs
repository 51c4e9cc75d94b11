//! Toy generator/discriminator pair, adversarial losses and the
//! penalized training loop.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{decode, encode, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use loss::{adversarial_loss, loss_ns, AdversarialLoss, LossKind};
pub use model::{latent_batch, sample, Discriminator, DiscriminatorArch, GanModel, Generator, ModelSpec};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{
    discriminator_loss, field_statistics, gradient_fields, train, ApplyTo, DiscriminatorLoss, MetricRecord, NullSink,
    TrainConfig, TrainOutcome, TrainSink, TrainStatus,
};
