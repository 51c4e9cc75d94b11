//! Command implementations behind the `ms3d` binary. Each command writes
//! its report to the given writer so that it can be driven from tests.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{
    load_image, make_synthetic, save_png, Dataset, ImageData, ImageFormat, ImageShape, SyntheticFamily,
};
use crate::diagnostics::{
    field_aggregation, filter_normalized_directions, fisher_trace, loss_slice, AggregationResult, Connectivity,
    LossGrid, DEFAULT_FISHER_PROBES, DEFAULT_GRID, DEFAULT_RADIUS, DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::gan::{
    discriminator_loss, gradient_fields, load_checkpoint, sample, save_checkpoint, train, GanModel, LossKind,
    MetricRecord, TrainConfig, TrainSink, TrainStatus,
};
use crate::model::Critic;
use crate::rgflow::{descriptor, embedded_side, RgFilter, SdProfile};
use crate::tensor::{Array, Graph};

pub const REPORT_SCHEMA: u32 = 1;
pub const METRICS_HEADER: [&str; 8] = ["step", "d_train", "d_val", "d_fake", "r_agg", "ms3d", "fisher", "cosine"];

#[derive(Debug, Parser)]
#[command(name = "ms3d", version, about = "Multi-scale self-dissimilarity of gradient fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptor of an image (PGM, PNG or CSV).
    Ms3d(Ms3dArgs),
    /// Train the toy GAN from a TOML config.
    Train(TrainArgs),
    /// Aggregation (and Fisher trace) of gradient fields.
    Analyze(AnalyzeArgs),
    /// Discriminator loss on a random 2-D slice of parameter space.
    Landscape(LandscapeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Ms3dArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub zeta: usize,
    /// kadanoff, gaussian or gaussian:<sigma>
    #[arg(long, default_value = "kadanoff")]
    pub filter: RgFilter,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// TOML run config; defaults are used when absent.
    pub config: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    pub show_config: bool,
    /// Override `train.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Override `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Synthetic data used by commands that need images.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[arg(long, default_value = "gauss-blobs")]
    pub family: SyntheticFamily,
    #[arg(long = "n-images", default_value_t = 56)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    #[arg(long = "data-seed", default_value_t = 0)]
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            family: SyntheticFamily::GaussBlobs,
            n: 56,
            size: 16,
            seed: 0,
        }
    }
}

impl DataConfig {
    pub fn build(&self) -> Result<Dataset> {
        make_synthetic(self.family, self.n, self.size, self.seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Gradient dump: `.csv` (one field, one row per line) or raw
    /// little-endian f64 after a one-line shape header.
    #[arg(long, conflicts_with = "checkpoint")]
    pub dump: Option<PathBuf>,
    /// Checkpoint whose discriminator gradients are analyzed on `--samples`
    /// training images.
    #[arg(long, required_unless_present = "dump")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataConfig,
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value = "8")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 2)]
    pub zeta: usize,
    #[arg(long, default_value = "kadanoff")]
    pub filter: RgFilter,
    #[arg(long, default_value_t = DEFAULT_FISHER_PROBES)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataConfig,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value = "ns")]
    pub loss: LossKind,
    /// Penalty weight inside the sliced loss; 0 slices the plain loss.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Checkpoint cadence in steps; 0 keeps only the final checkpoint.
    pub checkpoint_every: usize,
    /// Generator samples in the final grid image.
    pub samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("ms3d-run"),
            checkpoint_every: 0,
            samples: 16,
        }
    }
}

/// Everything `train` reads from its config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::read(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Err(e) = self.train.validate() {
            bad.push(e.to_string());
        }
        let image = ImageShape::gray(self.data.size, self.data.size);
        if self.train.model.image != image {
            bad.push(format!(
                "train.model.image {:?} does not match data.size {}",
                self.train.model.image, self.data.size
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn cmd_ms3d(args: &Ms3dArgs, out: &mut dyn Write) -> Result<SdProfile> {
    let format = ImageFormat::from_path(&args.input)?;
    let img = load_image(&args.input, format)?;
    let profile = descriptor(&img.values, img.shape.dims(), args.zeta, args.filter)?;
    let side = embedded_side(img.shape.len(), args.zeta);
    if args.json {
        let report = json!({
            "schema": REPORT_SCHEMA,
            "input": args.input.display().to_string(),
            "shape": img.shape.dims(),
            "side": side,
            "zeta": args.zeta,
            "filter": args.filter.to_string(),
            "per_scale": profile.per_scale,
            "total": profile.total,
        });
        writeln!(out, "{report}")?;
    } else {
        writeln!(out, "input: {}", args.input.display())?;
        writeln!(out, "side: {side}  zeta: {}  filter: {}", args.zeta, args.filter)?;
        for (s, sd) in profile.per_scale.iter().enumerate() {
            writeln!(out, "scale {}: {}", s + 1, fmt_f64(*sd))?;
        }
        writeln!(out, "total: {}", fmt_f64(profile.total))?;
    }
    Ok(profile)
}

/// Writes the metric CSV, checkpoints and sample grid of one run.
struct RunWriter {
    csv: csv::Writer<File>,
    dir: PathBuf,
    checkpoint_every: usize,
}

pub fn metric_row(r: &MetricRecord) -> [String; 8] {
    [
        r.step.to_string(),
        fmt_f64(r.d_train),
        fmt_f64(r.d_val),
        fmt_f64(r.d_fake),
        fmt_f64(r.r_agg),
        fmt_f64(r.ms3d),
        fmt_f64(r.fisher),
        fmt_f64(r.cosine),
    ]
}

impl TrainSink for RunWriter {
    fn record(&mut self, record: &MetricRecord) -> Result<()> {
        self.csv.write_record(metric_row(record)).map_err(csv_error)?;
        self.csv.flush()?;
        Ok(())
    }

    fn after_step(&mut self, step: usize, model: &GanModel) -> Result<()> {
        if self.checkpoint_every > 0 && step.is_multiple_of(self.checkpoint_every) {
            save_checkpoint(&self.dir.join(format!("step-{step:06}.ckpt")), model, step)?;
        }
        Ok(())
    }
}

/// Tiles generator samples into one `[0, 1]` grayscale image.
pub fn sample_grid(samples: &Array, shape: ImageShape) -> Result<ImageData> {
    let n = samples.shape()[0];
    if shape.channels != 1 || n == 0 {
        return Err(Error::invalid("sample grid needs at least one single-channel image"));
    }
    let cols = (1..).find(|c| c * c >= n).expect("finite");
    let rows = n.div_ceil(cols);
    let (th, tw) = (shape.height + 1, shape.width + 1);
    let (gh, gw) = (rows * th + 1, cols * tw + 1);
    let mut values = vec![0.0; gh * gw];
    for k in 0..n {
        let img = samples.row(k)?;
        let (r0, c0) = (1 + (k / cols) * th, 1 + (k % cols) * tw);
        for r in 0..shape.height {
            for c in 0..shape.width {
                values[(r0 + r) * gw + c0 + c] = (img.data()[r * shape.width + c] + 1.0) / 2.0;
            }
        }
    }
    Ok(ImageData {
        shape: ImageShape::gray(gh, gw),
        values,
    })
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<TrainStatus> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if args.show_config {
        write!(out, "{}", cfg.to_toml()?)?;
        return Ok(TrainStatus::Completed);
    }
    cfg.validate()?;
    let dataset = cfg.data.build()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let mut csv = csv::Writer::from_path(dir.join("metrics.csv")).map_err(csv_error)?;
    csv.write_record(METRICS_HEADER).map_err(csv_error)?;
    csv.flush()?;
    let mut writer = RunWriter {
        csv,
        dir: dir.clone(),
        checkpoint_every: cfg.output.checkpoint_every,
    };
    let outcome = train(&cfg.train, &dataset, &mut writer)?;
    let last_step = match &outcome.status {
        TrainStatus::Completed => cfg.train.steps,
        TrainStatus::Diverged { step, .. } => *step,
    };
    save_checkpoint(&dir.join("final.ckpt"), &outcome.model, last_step)?;
    if cfg.output.samples > 0 {
        let samples = sample(&outcome.model, cfg.output.samples, cfg.train.seed)?;
        save_png(&dir.join("samples.png"), &sample_grid(&samples, cfg.train.model.image)?)?;
    }
    match &outcome.status {
        TrainStatus::Completed => writeln!(
            out,
            "trained {} steps; {} metric rows written to {}",
            cfg.train.steps,
            outcome.records.len(),
            dir.display()
        )?,
        TrainStatus::Diverged { step, detail } => {
            return Err(Error::NonFinite(format!(
                "training diverged at step {step} ({detail}); partial logs in {}",
                dir.display()
            )))
        }
    }
    Ok(outcome.status)
}

/// Reads a gradient dump: CSV (one `h x w` field) or a raw file whose
/// first line lists the dimensions, followed by little-endian `f64`s.
///
/// Raw shapes are `h w`, `n h w` or `n h w c`. Returns `[n, h, w, c]`.
pub fn read_dump(path: &Path) -> Result<([usize; 4], Vec<f64>)> {
    if ImageFormat::from_path(path).ok() == Some(ImageFormat::Csv) {
        let img = load_image(path, ImageFormat::Csv)?;
        let [h, w, c] = img.shape.dims();
        return Ok(([1, h, w, c], img.values));
    }
    let err = |d: String| Error::Format {
        format: "gradient dump",
        path: path.to_path_buf(),
        detail: d,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::read(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| err("missing shape header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| err("shape header is not text".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let shape = match dims[..] {
        [h, w] => [1, h, w, 1],
        [n, h, w] => [n, h, w, 1],
        [n, h, w, c] => [n, h, w, c],
        _ => return Err(err(format!("expected 2 to 4 dimensions, got {header:?}"))),
    };
    let count: usize = shape.iter().product();
    let body = &bytes[nl + 1..];
    if count == 0 || body.len() != count * 8 {
        return Err(err(format!("shape {dims:?} needs {} bytes of data, found {}", count * 8, body.len())));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((shape, values))
}

/// Writes a raw dump readable by [`read_dump`].
pub fn write_dump(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    if dims.iter().product::<usize>() != values.len() {
        return Err(Error::shape("write_dump", &[dims, &[values.len()]], "shape does not match data"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = dims.iter().map(usize::to_string).collect();
    writeln!(w, "{}", header.join(" "))?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// One analyzed gradient field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeRow {
    pub sample: usize,
    pub aggregation: AggregationResult,
    pub ms3d: f64,
    /// Present when a model is available.
    pub fisher: Option<f64>,
}

pub const ANALYZE_HEADER: [&str; 5] = ["sample", "n_agg", "r_agg", "ms3d", "fisher"];

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<Vec<AnalyzeRow>> {
    let mut rows = Vec::new();
    let mut analyze_field = |sample: usize, values: &[f64], dims: [usize; 3], fisher: Option<f64>| -> Result<()> {
        rows.push(AnalyzeRow {
            sample,
            aggregation: field_aggregation(values, dims, args.tau, args.connectivity)?,
            ms3d: descriptor(values, dims, args.zeta, args.filter)?.total,
            fisher,
        });
        Ok(())
    };
    match (&args.dump, &args.checkpoint) {
        (Some(path), _) => {
            let ([n, h, w, c], values) = read_dump(path)?;
            for (i, field) in values.chunks(h * w * c).enumerate().take(n) {
                analyze_field(i, field, [h, w, c], None)?;
            }
        }
        (None, Some(ckpt)) => {
            let (model, _) = load_checkpoint(ckpt)?;
            let data = args.data.build()?;
            check_image(&model, &data)?;
            let take = args.samples.min(data.train_indices().len());
            let x = data.batch(&data.train_indices()[..take])?;
            let fields = gradient_fields(&model.discriminator, &x)?;
            let dims = data.shape().dims();
            for i in 0..take {
                let xi = x.row(i)?.reshaped(&[1, x.shape()[1]])?;
                let fisher = fisher_trace(&xi, &model.discriminator, args.probes, args.seed.wrapping_add(i as u64))?;
                analyze_field(i, fields.row(i)?.data(), dims, Some(fisher))?;
            }
        }
        (None, None) => return Err(Error::invalid("analyze needs --dump or --checkpoint")),
    }
    let table: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.sample.to_string(),
                r.aggregation.n_agg.to_string(),
                fmt_f64(r.aggregation.r_agg),
                fmt_f64(r.ms3d),
                r.fisher.map_or(String::new(), fmt_f64),
            ]
        })
        .collect();
    writeln!(out, "tau: {}  connectivity: {}", args.tau, args.connectivity)?;
    writeln!(out, "{}", ANALYZE_HEADER.join("\t"))?;
    for row in &table {
        writeln!(out, "{}", row.join("\t"))?;
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(ANALYZE_HEADER).map_err(csv_error)?;
        for row in &table {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(rows)
}

fn check_image(model: &GanModel, data: &Dataset) -> Result<()> {
    if model.spec().image != data.shape() {
        return Err(Error::Config(format!(
            "checkpoint expects {:?} images but the data has {:?}",
            model.spec().image,
            data.shape()
        )));
    }
    Ok(())
}

/// Real and generated batches the landscape loss is evaluated on.
pub fn landscape_batches(model: &GanModel, data: &Dataset, batch: usize, seed: u64) -> Result<(Array, Array)> {
    let take = batch.min(data.train_indices().len());
    if take == 0 {
        return Err(Error::invalid("landscape batch is empty"));
    }
    let real = data.batch(&data.train_indices()[..take])?;
    let fake = sample(model, take, seed)?;
    Ok((real, fake))
}

/// Discriminator loss at parameters `params` on fixed batches.
pub fn landscape_loss(
    model: &GanModel,
    params: &[Array],
    real: &Array,
    fake: &Array,
    loss: LossKind,
    lambda: f64,
) -> Result<f64> {
    let cfg = TrainConfig {
        model: model.spec().clone(),
        loss,
        lambda,
        penalty_enabled: lambda != 0.0,
        ..TrainConfig::default()
    };
    let g = Graph::new();
    let p: Vec<_> = params.iter().map(|a| g.constant(a.clone())).collect();
    let l = discriminator_loss(&model.discriminator, &p, g.variable(real.clone()), g.variable(fake.clone()), &cfg)?;
    l.total.item()
}

pub fn cmd_landscape(args: &LandscapeArgs, out: &mut dyn Write) -> Result<LossGrid> {
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let data = args.data.build()?;
    check_image(&model, &data)?;
    let (real, fake) = landscape_batches(&model, &data, args.batch, args.seed)?;
    let params = model.discriminator.params();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(args.seed);
    let d1 = filter_normalized_directions(params, &mut rng);
    let d2 = filter_normalized_directions(params, &mut rng);
    let grid = loss_slice(
        params,
        |p| landscape_loss(&model, p, &real, &fake, args.loss, args.lambda),
        &d1,
        &d2,
        args.grid,
        args.radius,
    )?;
    let mut w = csv::Writer::from_path(&args.out).map_err(csv_error)?;
    w.write_record(["i", "j", "a", "b", "loss"]).map_err(csv_error)?;
    for i in 0..grid.n {
        for j in 0..grid.n {
            w.write_record([
                i.to_string(),
                j.to_string(),
                fmt_f64(grid.coords[i]),
                fmt_f64(grid.coords[j]),
                grid.get(i, j).map_or(String::new(), fmt_f64),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    let missing = grid.values.iter().filter(|v| v.is_none()).count();
    writeln!(
        out,
        "{}x{} grid (radius {}) written to {}; {missing} missing",
        grid.n,
        grid.n,
        grid.radius,
        args.out.display()
    )?;
    Ok(grid)
}

/// Exit status for an error: 1 for configuration mistakes, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        _ => 2,
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ms3d(a) => cmd_ms3d(a, out).map(drop),
        Command::Train(a) => cmd_train(a, out).map(drop),
        Command::Analyze(a) => cmd_analyze(a, out).map(drop),
        Command::Landscape(a) => cmd_landscape(a, out).map(drop),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let err = RunConfig::from_toml("[train]\nlambda = 1.0\nlamda = 2.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("lamda")), "{err}");
        assert!(RunConfig::from_toml("[output]\ndirectory = \"x\"\n").is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        let partial = RunConfig::from_toml("[train]\nlambda = 0.0\nsteps = 5\n").unwrap();
        assert_eq!(partial.train.lambda, 0.0);
        assert_eq!(partial.train.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn config_reports_every_bad_value() {
        let err = RunConfig::from_toml("[train]\nlambda = -1.0\nzeta = 7\n[data]\nsize = 32\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda") && msg.contains("zeta") && msg.contains("data.size"), "{msg}");
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.f64");
        let vals: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        write_dump(&p, &[2, 4, 4], &vals).unwrap();
        let (shape, back) = read_dump(&p).unwrap();
        assert_eq!(shape, [2, 4, 4, 1]);
        assert_eq!(back, vals);
        fs::write(&p, b"4 4\n\x00\x01").unwrap();
        assert!(matches!(read_dump(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn grid_layout() {
        let s = Array::full(&[3, 4], 1.0);
        let g = sample_grid(&s, ImageShape::gray(2, 2)).unwrap();
        assert_eq!((g.shape.height, g.shape.width), (7, 7));
        assert_eq!(g.values.iter().filter(|&&v| v == 1.0).count(), 12);
    }
}
