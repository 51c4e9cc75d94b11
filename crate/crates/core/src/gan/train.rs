use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{adversarial_loss, LossKind};
use super::model::{latent_batch, sample, Discriminator, GanModel, ModelSpec};
use super::optim::{Optimizer, OptimizerConfig};
use crate::data::Dataset;
use crate::diagnostics::{
    field_aggregation, fisher_trace, mean_pairwise_cosine, Connectivity, DEFAULT_FISHER_PROBES, DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::model::Critic;
use crate::rgflow::{descriptor, input_gradient, ms3d_penalty};
use crate::rgflow::{NormalizerGrad, PenaltyConfig, RgFilter};
use crate::tensor::{Array, Graph, Tensor};

/// Which batches the penalty is evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplyTo {
    #[default]
    Real,
    Fake,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelSpec,
    /// Penalty weight.
    pub lambda: f64,
    pub zeta: usize,
    pub rg_filter: RgFilter,
    pub normalizer: NormalizerGrad,
    pub apply_to: ApplyTo,
    /// `false` removes the penalty from the graph entirely.
    pub penalty_enabled: bool,
    pub loss: LossKind,
    /// Use only the first `N` training images; all of them when absent.
    pub data_budget: Option<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub d_optimizer: OptimizerConfig,
    pub g_optimizer: OptimizerConfig,
    pub d_steps_per_g: usize,
    pub seed: u64,
    pub metric_every: usize,
    /// Images per split used for the metrics.
    pub metric_batch: usize,
    pub fisher_probes: usize,
    pub agg_tau: f64,
    pub agg_connectivity: Connectivity,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelSpec::default(),
            lambda: 10.0,
            zeta: 2,
            rg_filter: RgFilter::Kadanoff,
            normalizer: NormalizerGrad::default(),
            apply_to: ApplyTo::Real,
            penalty_enabled: true,
            loss: LossKind::Ns,
            data_budget: None,
            steps: 2000,
            batch_size: 16,
            d_optimizer: OptimizerConfig::default(),
            g_optimizer: OptimizerConfig::default(),
            d_steps_per_g: 1,
            seed: 0,
            metric_every: 50,
            metric_batch: 16,
            fisher_probes: DEFAULT_FISHER_PROBES,
            agg_tau: DEFAULT_TAU,
            agg_connectivity: Connectivity::Eight,
        }
    }
}

impl TrainConfig {
    pub fn penalty_config(&self) -> PenaltyConfig {
        PenaltyConfig {
            zeta: self.zeta,
            filter: self.rg_filter,
            normalizer: self.normalizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bad.push(format!("lambda = {} (must be finite and >= 0)", self.lambda));
        }
        if !(2..=4).contains(&self.zeta) {
            bad.push(format!("zeta = {} (must be 2, 3 or 4)", self.zeta));
        }
        if let RgFilter::Gaussian { sigma } = self.rg_filter {
            if !(sigma > 0.0 && sigma.is_finite()) {
                bad.push(format!("rg_filter.sigma = {sigma} (must be > 0)"));
            }
        }
        if self.batch_size == 0 {
            bad.push("batch_size = 0".into());
        }
        if let Some(n) = self.data_budget {
            if n < self.batch_size {
                bad.push(format!("data_budget = {n} (smaller than batch_size {})", self.batch_size));
            }
        }
        if self.d_steps_per_g == 0 {
            bad.push("d_steps_per_g = 0".into());
        }
        if self.metric_every == 0 {
            bad.push("metric_every = 0".into());
        }
        if self.metric_batch < 2 {
            bad.push(format!("metric_batch = {} (need at least 2)", self.metric_batch));
        }
        if self.fisher_probes == 0 {
            bad.push("fisher_probes = 0".into());
        }
        if !(self.agg_tau > 0.0 && self.agg_tau < 1.0) {
            bad.push(format!("agg_tau = {} (must lie in (0, 1))", self.agg_tau));
        }
        for (name, opt) in [("d_optimizer", &self.d_optimizer), ("g_optimizer", &self.g_optimizer)] {
            if opt.validate().is_err() {
                bad.push(format!("{name} = {opt:?}"));
            }
        }
        if let Err(e) = self.model.validate() {
            bad.push(format!("model: {e}"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Diagnostics at one step. Discriminator outputs are mean raw logits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: usize,
    pub d_train: f64,
    pub d_val: f64,
    pub d_fake: f64,
    pub r_agg: f64,
    pub ms3d: f64,
    pub fisher: f64,
    pub cosine: f64,
}

impl MetricRecord {
    fn missing(step: usize) -> Self {
        MetricRecord {
            step,
            d_train: f64::NAN,
            d_val: f64::NAN,
            d_fake: f64::NAN,
            r_agg: f64::NAN,
            ms3d: f64::NAN,
            fisher: f64::NAN,
            cosine: f64::NAN,
        }
    }
}

/// Parts of the discriminator objective.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorLoss<'g> {
    pub total: Tensor<'g>,
    pub base: Tensor<'g>,
    pub penalty: Option<Tensor<'g>>,
}

/// Base loss plus `λ` times the mean penalty over the configured pools.
///
/// `real` and `fake` must be graph variables when the penalty is enabled,
/// since it differentiates the critic with respect to them.
pub fn discriminator_loss<'g>(
    disc: &Discriminator,
    params: &[Tensor<'g>],
    real: Tensor<'g>,
    fake: Tensor<'g>,
    cfg: &TrainConfig,
) -> Result<DiscriminatorLoss<'g>> {
    let lr = disc.logits(params, real)?;
    let lf = disc.logits(params, fake)?;
    let base = adversarial_loss(cfg.loss, lr, lf)?.discriminator;
    if !cfg.penalty_enabled {
        return Ok(DiscriminatorLoss {
            total: base,
            base,
            penalty: None,
        });
    }
    let pcfg = cfg.penalty_config();
    let critic = |t| disc.logits(params, t);
    let penalty = match cfg.apply_to {
        ApplyTo::Real => ms3d_penalty(real, critic, &pcfg)?,
        ApplyTo::Fake => ms3d_penalty(fake, critic, &pcfg)?,
        ApplyTo::Both => ms3d_penalty(real, critic, &pcfg)?
            .add(ms3d_penalty(fake, critic, &pcfg)?)?
            .scale(0.5),
    };
    Ok(DiscriminatorLoss {
        total: base.add(penalty.scale(cfg.lambda))?,
        base,
        penalty: Some(penalty),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// A loss or parameter became non-finite at `step`.
    Diverged { step: usize, detail: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: GanModel,
    pub records: Vec<MetricRecord>,
    pub status: TrainStatus,
}

/// Receives progress from [`train`]. Both methods default to no-ops.
pub trait TrainSink {
    fn record(&mut self, _record: &MetricRecord) -> Result<()> {
        Ok(())
    }

    /// Called after every completed step (generator update included).
    fn after_step(&mut self, _step: usize, _model: &GanModel) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TrainSink for NullSink {}

impl<F: FnMut(&MetricRecord) -> Result<()>> TrainSink for F {
    fn record(&mut self, record: &MetricRecord) -> Result<()> {
        self(record)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn finite_params(params: &[Array]) -> bool {
    params.iter().all(Array::is_finite)
}

/// Alternating discriminator/generator optimization with periodic metrics.
///
/// Records are emitted when `step % metric_every == 0` and after the last
/// step; step numbers count completed generator updates. Model weights,
/// minibatches and metrics draw from separate seed-derived streams, so
/// the metric cadence never changes the trajectory.
pub fn train(config: &TrainConfig, dataset: &Dataset, sink: &mut dyn TrainSink) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.shape() != config.model.image {
        return Err(Error::Config(format!(
            "dataset images are {:?} but the model expects {:?}",
            dataset.shape(),
            config.model.image
        )));
    }
    let pool: Vec<usize> = match config.data_budget {
        Some(n) if n > dataset.train_indices().len() => {
            return Err(Error::Config(format!(
                "data_budget {n} exceeds the {} training images",
                dataset.train_indices().len()
            )))
        }
        Some(n) => dataset.train_indices()[..n].to_vec(),
        None => dataset.train_indices().to_vec(),
    };
    if pool.len() < config.batch_size {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training images",
            config.batch_size,
            pool.len()
        )));
    }

    let mut model = GanModel::init(&config.model, config.seed)?;
    let mut d_opt = Optimizer::new(config.d_optimizer, model.discriminator.params());
    let mut g_opt = Optimizer::new(config.g_optimizer, model.generator.params());
    let mut rng = stream(config.seed, 1);
    let metric_seed = stream(config.seed, 2).random::<u64>();
    let mut records = Vec::new();
    let mut order = pool.clone();
    let mut cursor = order.len();

    for step in 1..=config.steps {
        let diverged = |detail: String| TrainStatus::Diverged { step, detail };
        let mut real = Array::zeros(&[0]);
        for _ in 0..config.d_steps_per_g {
            if cursor + config.batch_size > order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            real = dataset.batch(&order[cursor..cursor + config.batch_size])?;
            cursor += config.batch_size;
            let z = latent_batch(&mut rng, config.batch_size, config.model.latent_dim);
            let fake = sample_with(&model, z)?;

            let g = Graph::new();
            let params = model.discriminator.bind(&g);
            let loss = discriminator_loss(&model.discriminator, &params, g.variable(real.clone()), g.variable(fake), config);
            let loss = match loss {
                Ok(l) => l,
                Err(Error::NonFinite(detail)) => {
                    emit(sink, &mut records, MetricRecord::missing(step))?;
                    return Ok(halt(model, records, diverged(detail)));
                }
                Err(e) => return Err(e),
            };
            let value = loss.total.item()?;
            if !value.is_finite() {
                emit(sink, &mut records, MetricRecord::missing(step))?;
                return Ok(halt(model, records, diverged(format!("discriminator loss {value}"))));
            }
            let grads = g.backward(loss.total, &params, false)?.values();
            d_opt.step(model.discriminator.params_mut(), &grads)?;
        }

        let z = latent_batch(&mut rng, config.batch_size, config.model.latent_dim);
        let g = Graph::new();
        let g_params = model.generator.bind(&g, true);
        let d_params = model.discriminator.bind_constant(&g);
        let fake = model.generator.forward(&g_params, g.constant(z))?;
        // only the relativistic loss reads these
        let real_logits = model.discriminator.logits(&d_params, g.constant(real))?;
        let fake_logits = model.discriminator.logits(&d_params, fake)?;
        let g_loss = match adversarial_loss(config.loss, real_logits, fake_logits) {
            Ok(l) => l.generator,
            Err(Error::NonFinite(detail)) => {
                emit(sink, &mut records, MetricRecord::missing(step))?;
                return Ok(halt(model, records, diverged(detail)));
            }
            Err(e) => return Err(e),
        };
        let value = g_loss.item()?;
        if !value.is_finite() {
            emit(sink, &mut records, MetricRecord::missing(step))?;
            return Ok(halt(model, records, diverged(format!("generator loss {value}"))));
        }
        let grads = g.backward(g_loss, &g_params, false)?.values();
        g_opt.step(model.generator.params_mut(), &grads)?;

        if !finite_params(model.discriminator.params()) || !finite_params(model.generator.params()) {
            emit(sink, &mut records, MetricRecord::missing(step))?;
            return Ok(halt(model, records, diverged("non-finite parameters".into())));
        }
        sink.after_step(step, &model)?;
        if step % config.metric_every == 0 || step == config.steps {
            let record = metrics(&model, dataset, &pool, config, step, metric_seed)?;
            emit(sink, &mut records, record)?;
        }
    }
    Ok(halt(model, records, TrainStatus::Completed))
}

fn emit(sink: &mut dyn TrainSink, records: &mut Vec<MetricRecord>, record: MetricRecord) -> Result<()> {
    sink.record(&record)?;
    records.push(record);
    Ok(())
}

fn halt(model: GanModel, records: Vec<MetricRecord>, status: TrainStatus) -> TrainOutcome {
    TrainOutcome { model, records, status }
}

fn sample_with(model: &GanModel, z: Array) -> Result<Array> {
    let g = Graph::new();
    let params = model.generator.bind(&g, false);
    let out = model.generator.forward(&params, g.constant(z))?;
    Ok((*out.value()).clone())
}

fn mean_logit(disc: &Discriminator, x: &Array) -> Result<f64> {
    let g = Graph::new();
    let params = disc.bind_constant(&g);
    let logits = disc.logits(&params, g.constant(x.clone()))?;
    let v = logits.value();
    Ok(v.sum() / v.len() as f64)
}

/// Per-sample input-gradient fields `∇ₓ f(x)` of the discriminator, as rows.
pub fn gradient_fields(disc: &Discriminator, x: &Array) -> Result<Array> {
    let g = Graph::new();
    let params = disc.bind_constant(&g);
    let xv = g.variable(x.clone());
    let psi = input_gradient(xv, |t| disc.logits(&params, t), false)?;
    Ok((*psi.value()).clone())
}

/// Mean descriptor and aggregation ratio over the rows of `fields`.
pub fn field_statistics(fields: &Array, config: &TrainConfig) -> Result<(f64, f64)> {
    let dims = config.model.image.dims();
    let rows = fields.shape()[0];
    let (mut sd, mut agg) = (0.0, 0.0);
    for i in 0..rows {
        let row = fields.row(i)?;
        sd += descriptor(row.data(), dims, config.zeta, config.rg_filter)?.total;
        agg += field_aggregation(row.data(), dims, config.agg_tau, config.agg_connectivity)?.r_agg;
    }
    Ok((sd / rows as f64, agg / rows as f64))
}

fn metrics(
    model: &GanModel,
    dataset: &Dataset,
    pool: &[usize],
    config: &TrainConfig,
    step: usize,
    metric_seed: u64,
) -> Result<MetricRecord> {
    let disc = &model.discriminator;
    let m = config.metric_batch;
    let train_idx = &pool[..m.min(pool.len())];
    let val = dataset.val_indices();
    let val_idx = &val[..m.min(val.len())];
    let real = dataset.batch(train_idx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(metric_seed ^ step as u64);
    let fake = sample(model, m, rng.random())?;

    let d_val = if val_idx.is_empty() {
        f64::NAN
    } else {
        mean_logit(disc, &dataset.batch(val_idx)?)?
    };
    let fields = gradient_fields(disc, &real)?;
    let (ms3d, r_agg) = field_statistics(&fields, config)?;
    let fisher = fisher_trace(&real, disc, config.fisher_probes, rng.random())?;
    let g = Graph::new();
    let params = disc.bind_constant(&g);
    let feats = disc.features(&params, g.constant(real.clone()))?;
    let cosine = mean_pairwise_cosine(&feats.value()).map_or(f64::NAN, |c| c.mean);
    Ok(MetricRecord {
        step,
        d_train: mean_logit(disc, &real)?,
        d_val,
        d_fake: mean_logit(disc, &fake)?,
        r_agg,
        ms3d,
        fisher,
        cosine,
    })
}
