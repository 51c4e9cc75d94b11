//! Renormalization-group coarse-graining of square fields and the
//! multi-scale self-dissimilarity descriptor built on it.
//!
//! A raw gradient field of shape `h x w x c` is flattened, zero-padded to
//! an `L x L` square whose side is a power of the coarse-graining factor
//! `zeta`, and normalized to `[0, 1]` by its largest magnitude. The RG
//! chain then repeatedly replaces `zeta x zeta` blocks (of the current
//! scale) by a summary value while keeping every field stored at `L x L`.
//! Self-dissimilarity (SD) of one step is the mean squared difference
//! between a field and its coarser version; the descriptor is the sum of
//! SDs along the chain.
//!
//! Everything in this module works on plain `f64` buffers. The
//! differentiable counterpart used as a training penalty lives in
//! [`penalty`] and is built from graph ops instead.

mod penalty;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use penalty::{field_penalty, input_gradient, ms3d_penalty, NormalizerGrad, PenaltyConfig};

/// Width of the ablation Gaussian kernel when none is given.
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 1.0;

/// Square field stored row-major at full resolution.
///
/// `scale` counts the coarse-graining steps already applied; a field at
/// scale `s` is constant on `zeta^s`-sized blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    size: usize,
    scale: usize,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::shape(
                "field2d",
                &[&[values.len()]],
                format!("expected {} values for side {size}", size * size),
            ));
        }
        Ok(Field2D {
            size,
            scale: 0,
            values,
        })
    }

    pub fn zeros(size: usize) -> Self {
        Field2D {
            size,
            scale: 0,
            values: vec![0.0; size * size],
        }
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                values.push(f(r, c));
            }
        }
        Field2D {
            size,
            scale: 0,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> Field2D {
        Field2D {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    fn with_values(&self, scale: usize, values: Vec<f64>) -> Field2D {
        Field2D {
            size: self.size,
            scale,
            values,
        }
    }
}

/// Coarse-graining rule for one RG step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum RgFilter {
    /// Block-spin averaging.
    #[default]
    Kadanoff,
    /// 3x3 Gaussian blur (reflect borders) followed by subsampling.
    Gaussian { sigma: f64 },
}

impl RgFilter {
    pub fn gaussian() -> Self {
        RgFilter::Gaussian {
            sigma: DEFAULT_GAUSSIAN_SIGMA,
        }
    }
}


impl fmt::Display for RgFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RgFilter::Kadanoff => write!(f, "kadanoff"),
            RgFilter::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

impl FromStr for RgFilter {
    type Err = Error;

    /// Accepts `kadanoff`, `gaussian` or `gaussian:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "kadanoff" => Ok(RgFilter::Kadanoff),
            None if s == "gaussian" => Ok(RgFilter::gaussian()),
            Some(("gaussian", sigma)) => {
                let sigma: f64 = sigma
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad gaussian sigma {sigma:?}")))?;
                Ok(RgFilter::Gaussian { sigma })
            }
            _ => Err(Error::invalid(format!(
                "unknown filter {s:?} (expected kadanoff, gaussian or gaussian:<sigma>)"
            ))),
        }
    }
}

/// The fields `Γ_0 .. Γ_t` of one RG flow, all at the original resolution.
#[derive(Clone, Debug)]
pub struct RgChain {
    fields: Vec<Field2D>,
    zeta: usize,
    filter: RgFilter,
}

impl RgChain {
    pub fn fields(&self) -> &[Field2D] {
        &self.fields
    }

    /// Number of coarse-graining steps `t`.
    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn zeta(&self) -> usize {
        self.zeta
    }

    pub fn filter(&self) -> RgFilter {
        self.filter
    }
}

/// Per-step self-dissimilarities and their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdProfile {
    pub per_scale: Vec<f64>,
    pub total: f64,
}

impl SdProfile {
    fn from_steps(per_scale: Vec<f64>) -> Self {
        let total = per_scale.iter().sum();
        SdProfile { per_scale, total }
    }
}

fn check_zeta(zeta: usize) -> Result<()> {
    if zeta < 2 {
        return Err(Error::invalid(format!("coarse-graining factor must be >= 2, got {zeta}")));
    }
    Ok(())
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Side of the square that `n` values are embedded into: `ceil(sqrt(n))`
/// rounded up to a power of `zeta` (at least `zeta`).
pub fn embedded_side(n: usize, zeta: usize) -> usize {
    let base = ceil_sqrt(n);
    let mut side = zeta;
    while side < base {
        side *= zeta;
    }
    side
}

/// Largest `t` with `zeta^t <= size`.
pub fn chain_depth(size: usize, zeta: usize) -> usize {
    let mut t = 0;
    let mut p = zeta;
    while p <= size {
        t += 1;
        p *= zeta;
    }
    t
}

/// Flattens an `h x w x c` field (row-major, channel fastest) into a square
/// zero-padded field.
pub fn embed_square(values: &[f64], dims: [usize; 3], zeta: usize) -> Result<Field2D> {
    check_zeta(zeta)?;
    let n: usize = dims.iter().product();
    if dims.contains(&0) {
        return Err(Error::invalid(format!("empty gradient field {dims:?}")));
    }
    if values.len() != n {
        return Err(Error::shape("embed_square", &[&dims, &[values.len()]], "value count differs"));
    }
    let side = embedded_side(n, zeta);
    let mut padded = values.to_vec();
    padded.resize(side * side, 0.0);
    Field2D::new(side, padded)
}

/// `|field / max|field||`; the all-zero field maps to itself.
pub fn normalize(field: &Field2D) -> Result<Field2D> {
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field to normalize".into()));
    }
    let max = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(field.with_values(field.scale, vec![0.0; field.values.len()]));
    }
    Ok(field.with_values(field.scale, field.values.iter().map(|v| (v / max).abs()).collect()))
}

fn next_block(field: &Field2D, zeta: usize) -> Result<usize> {
    check_zeta(zeta)?;
    let block = zeta.pow(field.scale as u32 + 1);
    if !field.size.is_multiple_of(block) {
        return Err(Error::invalid(format!(
            "side {} is not divisible by block {block} (zeta {zeta}, scale {})",
            field.size, field.scale
        )));
    }
    Ok(block)
}

/// One block-spin step: every `zeta^(s+1)` block of a scale-`s` field is
/// replaced by its mean.
pub fn kadanoff_step(field: &Field2D, zeta: usize) -> Result<Field2D> {
    let block = next_block(field, zeta)?;
    let size = field.size;
    let nb = size / block;
    let inv = 1.0 / (block * block) as f64;
    let mut means = vec![0.0; nb * nb];
    for (r, row) in field.values.chunks(size).enumerate() {
        for (bc, chunk) in row.chunks(block).enumerate() {
            means[(r / block) * nb + bc] += chunk.iter().sum::<f64>();
        }
    }
    for m in &mut means {
        *m *= inv;
    }
    let values = (0..size * size)
        .map(|i| means[(i / size / block) * nb + (i % size) / block])
        .collect();
    Ok(field.with_values(field.scale + 1, values))
}

/// Normalized 3x3 Gaussian weights, indexed `[dy + 1][dx + 1]`.
pub fn gaussian_kernel(sigma: f64) -> Result<[[f64; 3]; 3]> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let mut k = [[0.0; 3]; 3];
    let mut total = 0.0;
    for (dy, row) in k.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (y, x) = (dy as f64 - 1.0, dx as f64 - 1.0);
            *v = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    for v in k.iter_mut().flatten() {
        *v /= total;
    }
    Ok(k)
}

/// Mirror index without repeating the edge (`-1 -> 1`, `n -> n-2`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

fn blur_plane(values: &[f64], n: usize, kernel: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (dy, krow) in kernel.iter().enumerate() {
                let rr = reflect(r as isize + dy as isize - 1, n);
                for (dx, &k) in krow.iter().enumerate() {
                    let cc = reflect(c as isize + dx as isize - 1, n);
                    acc += k * values[rr * n + cc];
                }
            }
            out[r * n + c] = acc;
        }
    }
    out
}

/// 3x3 Gaussian blur of a field at its stored resolution, reflect borders.
pub fn gaussian_blur(field: &Field2D, sigma: f64) -> Result<Field2D> {
    let kernel = gaussian_kernel(sigma)?;
    if field.size < 2 {
        return Err(Error::invalid("reflect padding needs a side of at least 2"));
    }
    Ok(field.with_values(field.scale, blur_plane(&field.values, field.size, &kernel)))
}

/// Offset of the sample taken from each `zeta`-block after blurring.
pub fn gaussian_sample_offset(zeta: usize) -> usize {
    zeta / 2
}

/// One Gaussian RG step: the scale-`s` field is read at its native
/// resolution, blurred with a 3x3 Gaussian, subsampled by `zeta`, and
/// upsampled back to full size by replication.
pub fn gaussian_step(field: &Field2D, zeta: usize, sigma: f64) -> Result<Field2D> {
    let kernel = gaussian_kernel(sigma)?;
    let block = next_block(field, zeta)?;
    let size = field.size;
    let cell = block / zeta;
    let n_in = size / cell;
    let native: Vec<f64> = (0..n_in * n_in)
        .map(|i| field.values[(i / n_in) * cell * size + (i % n_in) * cell])
        .collect();
    let blurred = blur_plane(&native, n_in, &kernel);
    let n_out = n_in / zeta;
    let off = gaussian_sample_offset(zeta);
    let sampled: Vec<f64> = (0..n_out * n_out)
        .map(|i| blurred[((i / n_out) * zeta + off) * n_in + (i % n_out) * zeta + off])
        .collect();
    let values = (0..size * size)
        .map(|i| sampled[(i / size / block) * n_out + (i % size) / block])
        .collect();
    Ok(field.with_values(field.scale + 1, values))
}

fn apply_filter(field: &Field2D, zeta: usize, filter: RgFilter) -> Result<Field2D> {
    match filter {
        RgFilter::Kadanoff => kadanoff_step(field, zeta),
        RgFilter::Gaussian { sigma } => gaussian_step(field, zeta, sigma),
    }
}

/// Runs the RG flow until another step no longer fits (`zeta^(t+1) > L`).
pub fn build_chain(field: &Field2D, zeta: usize, filter: RgFilter) -> Result<RgChain> {
    check_zeta(zeta)?;
    if field.size < zeta {
        return Err(Error::invalid(format!(
            "side {} is smaller than zeta {zeta}; no coarse-graining step possible",
            field.size
        )));
    }
    if let RgFilter::Gaussian { sigma } = filter {
        gaussian_kernel(sigma)?;
    }
    let t = chain_depth(field.size, zeta);
    let mut fields = Vec::with_capacity(t + 1);
    fields.push(field.with_values(0, field.values.clone()));
    for _ in 0..t {
        let next = apply_filter(fields.last().expect("non-empty"), zeta, filter)?;
        fields.push(next);
    }
    Ok(RgChain { fields, zeta, filter })
}

fn check_same(op: &'static str, a: &Field2D, b: &Field2D) -> Result<()> {
    if a.size != b.size {
        return Err(Error::shape(op, &[&[a.size, a.size], &[b.size, b.size]], ""));
    }
    Ok(())
}

/// Self-dissimilarity of one step: mean of `(coarse - fine)^2`.
pub fn sd_step(fine: &Field2D, coarse: &Field2D) -> Result<f64> {
    check_same("sd_step", fine, coarse)?;
    let n = fine.values.len() as f64;
    Ok(fine
        .values
        .iter()
        .zip(&coarse.values)
        .map(|(f, c)| (c - f) * (c - f))
        .sum::<f64>()
        / n)
}

/// Overlap `<a|b>`, taken as the mean of the elementwise product so that it
/// shares the normalization of [`sd_step`].
pub fn inner_product(a: &Field2D, b: &Field2D) -> Result<f64> {
    check_same("inner_product", a, b)?;
    let n = a.values.len() as f64;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() / n)
}

/// SD profile of a (normalized) field along its RG chain.
pub fn ms3d(field: &Field2D, zeta: usize, filter: RgFilter) -> Result<SdProfile> {
    let chain = build_chain(field, zeta, filter)?;
    sd_profile(&chain)
}

pub fn sd_profile(chain: &RgChain) -> Result<SdProfile> {
    let per_scale = chain
        .fields
        .windows(2)
        .map(|w| sd_step(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SdProfile::from_steps(per_scale))
}

/// Embed, normalize and profile a raw `h x w x c` field in one call.
pub fn descriptor(raw: &[f64], dims: [usize; 3], zeta: usize, filter: RgFilter) -> Result<SdProfile> {
    let field = normalize(&embed_square(raw, dims, zeta)?)?;
    ms3d(&field, zeta, filter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(size: usize, seed: u64) -> Field2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field2D::from_fn(size, |_, _| rng.random::<f64>())
    }

    #[test]
    fn embed_square_already_square() {
        let raw: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let f = embed_square(&raw, [4, 4, 1], 2).unwrap();
        assert_eq!(f.size(), 4);
        assert_eq!(f.values(), raw.as_slice());
    }

    #[test]
    fn embed_square_pads_to_power_of_zeta() {
        let raw = vec![1.0; 18];
        let f = embed_square(&raw, [3, 3, 2], 2).unwrap();
        assert_eq!(f.size(), 8);
        // oracle: count of padding cells by direct enumeration
        let zeros = f.values().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 46);
        assert!(f.values()[..18].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn embed_square_rejects_empty_and_keeps_zeros() {
        assert!(embed_square(&[], [0, 4, 1], 2).is_err());
        let f = embed_square(&[0.0; 9], [3, 3, 1], 3).unwrap();
        assert_eq!(f.size(), 3);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_examples() {
        let f = Field2D::new(2, vec![2.0, -4.0, 0.0, 1.0]).unwrap();
        assert_eq!(normalize(&f).unwrap().values(), &[0.5, 1.0, 0.0, 0.25]);
        assert_eq!(normalize(&f.scaled(7.5)).unwrap(), normalize(&f).unwrap());
        let z = Field2D::zeros(4);
        assert_eq!(normalize(&z).unwrap(), z);
        let bad = Field2D::new(1, vec![f64::NAN]).unwrap();
        assert!(normalize(&bad).is_err());
    }

    #[test]
    fn kadanoff_single_block() {
        let f = Field2D::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let c = kadanoff_step(&f, 2).unwrap();
        assert_eq!(c.values(), &[0.25; 4]);
        assert_eq!(c.scale(), 1);
        assert!(kadanoff_step(&Field2D::zeros(3), 2).is_err());
    }

    #[test]
    fn kadanoff_constant_is_fixed_point_and_preserves_mean() {
        let f = Field2D::from_fn(8, |_, _| 0.3);
        assert_eq!(kadanoff_step(&f, 2).unwrap().values(), f.values());
        let r = random_field(8, 3);
        let c = kadanoff_step(&r, 2).unwrap();
        // oracle: block means summed directly
        let mut oracle = 0.0;
        for br in 0..4 {
            for bc in 0..4 {
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += r.get(2 * br + i, 2 * bc + j);
                    }
                }
                oracle += s / 4.0;
                assert_abs_diff_eq!(c.get(2 * br, 2 * bc), s / 4.0, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(c.mean(), oracle / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.mean(), r.mean(), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_constant_fixed_point_and_blur_mass() {
        let f = Field2D::from_fn(8, |_, _| 0.7);
        let g = gaussian_step(&f, 2, 1.0).unwrap();
        for v in g.values() {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-15);
        }
        let delta = Field2D::from_fn(8, |r, c| if r == 4 && c == 4 { 1.0 } else { 0.0 });
        let blurred = gaussian_blur(&delta, 1.0).unwrap();
        let mass: f64 = blurred.values().iter().sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        assert!(gaussian_step(&f, 2, 0.0).is_err());
        assert!(gaussian_step(&f, 2, -1.0).is_err());
    }

    #[test]
    fn gaussian_small_sigma_samples_block_centres() {
        // the kernel degenerates to the identity, so each block takes the
        // value at its sampling offset
        let f = Field2D::from_fn(4, |r, c| (r * 4 + c) as f64);
        let g = gaussian_step(&f, 2, 1e-3).unwrap();
        assert_abs_diff_eq!(g.get(0, 0), f.get(1, 1), epsilon = 1e-12);
        assert_abs_diff_eq!(g.get(3, 3), f.get(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn chain_lengths() {
        for (size, zeta, t) in [(4, 2, 2), (8, 2, 3), (9, 3, 2), (16, 4, 2)] {
            let chain = build_chain(&Field2D::zeros(size), zeta, RgFilter::Kadanoff).unwrap();
            assert_eq!(chain.steps(), t, "L={size} zeta={zeta}");
            assert_eq!(chain.fields().len(), t + 1);
            assert!(zeta.pow(t as u32 + 1) > size && size >= zeta.pow(t as u32));
        }
        assert!(build_chain(&Field2D::zeros(1), 2, RgFilter::Kadanoff).is_err());
    }

    #[test]
    fn sd_step_examples() {
        let fine = Field2D::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let coarse = Field2D::new(2, vec![0.25; 4]).unwrap();
        assert_eq!(sd_step(&fine, &coarse).unwrap(), (0.75f64.powi(2) + 3.0 * 0.25f64.powi(2)) / 4.0);
        assert_eq!(sd_step(&fine, &coarse).unwrap(), 0.1875);
        assert_eq!(sd_step(&fine, &fine).unwrap(), 0.0);
        assert!(sd_step(&fine, &Field2D::zeros(4)).is_err());
    }

    #[test]
    fn ms3d_single_active_cell() {
        let f = Field2D::from_fn(4, |r, c| if r == 0 && c == 0 { 1.0 } else { 0.0 });
        let p = ms3d(&f, 2, RgFilter::Kadanoff).unwrap();
        assert_eq!(p.per_scale, vec![0.046875, 0.01171875]);
        assert_eq!(p.total, 0.05859375);
    }

    #[test]
    fn inner_product_examples() {
        let x = Field2D::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(inner_product(&x, &x).unwrap(), 0.25);
        assert_eq!(inner_product(&x, &Field2D::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn filter_parsing() {
        assert_eq!("kadanoff".parse::<RgFilter>().unwrap(), RgFilter::Kadanoff);
        assert_eq!("gaussian".parse::<RgFilter>().unwrap(), RgFilter::gaussian());
        assert_eq!(
            "gaussian:0.5".parse::<RgFilter>().unwrap(),
            RgFilter::Gaussian { sigma: 0.5 }
        );
        assert!("box".parse::<RgFilter>().is_err());
        let f = RgFilter::Gaussian { sigma: 2.5 };
        assert_eq!(f.to_string().parse::<RgFilter>().unwrap(), f);
    }

    proptest! {
        #[test]
        fn kadanoff_projection_identity(seed in any::<u64>(), exp in 2u32..6) {
            let f = random_field(2usize.pow(exp), seed);
            let chain = build_chain(&f, 2, RgFilter::Kadanoff).unwrap();
            for w in chain.fields().windows(2) {
                let cross = inner_product(&w[0], &w[1]).unwrap();
                let fine = inner_product(&w[0], &w[0]).unwrap();
                let coarse = inner_product(&w[1], &w[1]).unwrap();
                prop_assert!((cross - coarse).abs() < 1e-12);
                prop_assert!(coarse <= fine + 1e-15);
                prop_assert!((sd_step(&w[0], &w[1]).unwrap() - (fine - coarse)).abs() < 1e-12);
                prop_assert!((w[0].mean() - w[1].mean()).abs() < 1e-12);
            }
        }

        #[test]
        fn descriptor_is_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3) {
            let f = random_field(16, seed);
            let a = ms3d(&normalize(&f).unwrap(), 2, RgFilter::Kadanoff).unwrap();
            let b = ms3d(&normalize(&f.scaled(c)).unwrap(), 2, RgFilter::Kadanoff).unwrap();
            prop_assert!((a.total - b.total).abs() < 1e-12);
        }

        #[test]
        fn profile_total_is_sum_and_non_negative(seed in any::<u64>()) {
            let f = random_field(8, seed);
            for filter in [RgFilter::Kadanoff, RgFilter::gaussian()] {
                let p = ms3d(&f, 2, filter).unwrap();
                prop_assert!(p.per_scale.iter().all(|&v| v >= 0.0));
                prop_assert_eq!(p.total, p.per_scale.iter().sum::<f64>());
            }
        }
    }
}
