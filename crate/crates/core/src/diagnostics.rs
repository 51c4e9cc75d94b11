//! Measurements taken on gradient fields and discriminators: gradient
//! aggregation, a diagonal Fisher trace estimate, embedding cosine
//! similarity and 2-D loss-landscape slices.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Critic;
use crate::rgflow::{input_gradient, Field2D};
use crate::tensor::{Array, Graph};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_FISHER_PROBES: usize = 8;
pub const DEFAULT_GRID: usize = 21;
pub const DEFAULT_RADIUS: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
        }
    }

    /// Every neighbour offset, not just the already-scanned half.
    pub fn neighbours(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Four => "4",
            Connectivity::Eight => "8",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            _ => Err(Error::invalid(format!("connectivity must be 4 or 8, got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub n_agg: usize,
    pub r_agg: f64,
    pub tau: f64,
    pub connectivity: Connectivity,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Two-pass union-find labeling of a row-major `height x width` mask.
///
/// Returns one label per cell (0 for background, components numbered
/// from 1 in scan order) and the component count.
pub fn label_components(mask: &[bool], height: usize, width: usize, conn: Connectivity) -> Result<(Vec<usize>, usize)> {
    if mask.len() != height * width {
        return Err(Error::shape("label_components", &[&[mask.len()], &[height, width]], "mask size"));
    }
    let mut labels = vec![0usize; mask.len()];
    let mut parent = vec![0usize];
    for r in 0..height {
        for c in 0..width {
            if !mask[r * width + c] {
                continue;
            }
            let mut current = 0;
            for &(dr, dc) in conn.offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nc >= width as isize {
                    continue;
                }
                let l = labels[nr as usize * width + nc as usize];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = l;
                } else {
                    let (a, b) = (find(&mut parent, current), find(&mut parent, l));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
            if current == 0 {
                current = parent.len();
                parent.push(current);
            }
            labels[r * width + c] = current;
        }
    }
    let mut remap = vec![0usize; parent.len()];
    let mut count = 0;
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *l);
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        *l = remap[root];
    }
    Ok((labels, count))
}

/// Aggregation of a `[0, 1]` grid: cells strictly above `tau` are active,
/// and the connected regions among them are counted.
pub fn aggregation_grid(values: &[f64], height: usize, width: usize, tau: f64, conn: Connectivity) -> Result<AggregationResult> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {tau}")));
    }
    if values.is_empty() {
        return Err(Error::invalid("aggregation of an empty field"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("aggregation field".into()));
    }
    let mask: Vec<bool> = values.iter().map(|&v| v > tau).collect();
    let (_, n_agg) = label_components(&mask, height, width, conn)?;
    Ok(AggregationResult {
        n_agg,
        r_agg: n_agg as f64 / (height * width) as f64,
        tau,
        connectivity: conn,
    })
}

pub fn aggregation_metric(field: &Field2D, tau: f64, conn: Connectivity) -> Result<AggregationResult> {
    aggregation_grid(field.values(), field.size(), field.size(), tau, conn)
}

/// Per-pixel magnitude of an `h x w x c` field (largest `|v|` over
/// channels), divided by the largest magnitude overall. All zeros stay zero.
pub fn magnitude_grid(values: &[f64], dims: [usize; 3]) -> Result<Vec<f64>> {
    let [h, w, c] = dims;
    if values.len() != h * w * c || values.is_empty() {
        return Err(Error::shape("magnitude_grid", &[&[values.len()], &dims], "field size"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient field".into()));
    }
    let mag: Vec<f64> = values.chunks(c).map(|px| px.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let max = mag.iter().fold(0.0f64, |m, &v| m.max(v));
    if max == 0.0 {
        return Ok(mag);
    }
    Ok(mag.into_iter().map(|v| v / max).collect())
}

/// Aggregation of a raw `h x w x c` gradient field after [`magnitude_grid`].
pub fn field_aggregation(values: &[f64], dims: [usize; 3], tau: f64, conn: Connectivity) -> Result<AggregationResult> {
    aggregation_grid(&magnitude_grid(values, dims)?, dims[0], dims[1], tau, conn)
}

/// Diagonal Fisher trace of the critic's input-gradient field `Ψ(x; φ)`,
/// treating the output as a unit-variance Gaussian centred at `Ψ`.
///
/// Estimates `tr G ≈ mean over samples and probes of ‖∂⟨Ψ(x; φ), ε⟩/∂φ‖²`
/// with `ε` standard normal. Probes are drawn from `seed`, sample by sample.
pub fn fisher_trace<C: Critic + ?Sized>(x: &Array, critic: &C, probes: usize, seed: u64) -> Result<f64> {
    if probes < 1 {
        return Err(Error::invalid("fisher trace needs at least one probe"));
    }
    let (batch, dim) = batch_dims(x, "fisher_trace")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<Array> = (0..batch * probes)
        .map(|_| Array::from_fn(&[1, dim], |_| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    fisher_trace_with_probes(x, critic, &eps)
}

/// [`fisher_trace`] with explicit probes, `probes.len() / batch` per sample
/// laid out sample-major, each shaped `[1, D]`.
pub fn fisher_trace_with_probes<C: Critic + ?Sized>(x: &Array, critic: &C, probes: &[Array]) -> Result<f64> {
    let (batch, dim) = batch_dims(x, "fisher_trace")?;
    if probes.is_empty() || !probes.len().is_multiple_of(batch) {
        return Err(Error::invalid(format!(
            "{} probes cannot be split evenly over {batch} samples",
            probes.len()
        )));
    }
    let per_sample = probes.len() / batch;
    let mut total = 0.0;
    for b in 0..batch {
        let g = Graph::new();
        let params = critic.bind(&g);
        let xb = g.variable(x.row(b)?.reshaped(&[1, dim])?);
        let psi = input_gradient(xb, |t| critic.logits(&params, t), true)?;
        for eps in &probes[b * per_sample..(b + 1) * per_sample] {
            if eps.shape() != [1, dim] {
                return Err(Error::shape("fisher_trace", &[eps.shape(), &[1, dim]], "probe shape"));
            }
            let inner = psi.mul(g.constant(eps.clone()))?.sum_reduce();
            let grads = g.backward(inner, &params, false)?;
            total += grads.values().iter().map(Array::norm_sq).sum::<f64>();
        }
    }
    let est = total / probes.len() as f64;
    if !est.is_finite() {
        return Err(Error::NonFinite("fisher trace estimate".into()));
    }
    Ok(est)
}

fn batch_dims(x: &Array, op: &'static str) -> Result<(usize, usize)> {
    match *x.shape() {
        [b, d] if b > 0 && d > 0 => Ok((b, d)),
        _ => Err(Error::shape(op, &[x.shape()], "expected a non-empty [batch, dim] array")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineResult {
    pub mean: f64,
    /// Pairs that entered the mean.
    pub pairs: usize,
    /// Pairs skipped because one vector was zero.
    pub skipped: usize,
}

/// Mean cosine similarity over unordered pairs of rows of `[n, d]`.
pub fn mean_pairwise_cosine(embeddings: &Array) -> Result<CosineResult> {
    let (n, _) = batch_dims(embeddings, "mean_pairwise_cosine")?;
    let rows: Vec<Array> = (0..n).map(|i| embeddings.row(i)).collect::<Result<_>>()?;
    let norms: Vec<f64> = rows.iter().map(|r| r.norm_sq().sqrt()).collect();
    let (mut sum, mut pairs, mut skipped) = (0.0, 0, 0);
    for i in 0..n {
        for j in i + 1..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                skipped += 1;
                continue;
            }
            let cos = rows[i].dot(&rows[j])? / (norms[i] * norms[j]);
            sum += cos.clamp(-1.0, 1.0);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::invalid("cosine similarity needs at least two nonzero vectors"));
    }
    Ok(CosineResult {
        mean: sum / pairs as f64,
        pairs,
        skipped,
    })
}

/// Random direction scaled unit-by-unit to the parameters' own norms.
///
/// For a weight with output units on its last axis (dense `[in, out]`) each
/// column is a unit; for rank-4 convolution weights `[out, in, k, k]` each
/// output filter is. One-dimensional tensors (biases) get a zero direction.
pub fn filter_normalized_directions(params: &[Array], rng: &mut impl Rng) -> Vec<Array> {
    params
        .iter()
        .map(|p| {
            if p.shape().len() < 2 {
                return Array::zeros(p.shape());
            }
            let mut d = Array::from_fn(p.shape(), |_| rng.sample::<f64, _>(StandardNormal));
            for group in unit_groups(p.shape()) {
                let pn: f64 = group.iter().map(|&i| p.data()[i] * p.data()[i]).sum::<f64>().sqrt();
                let dn: f64 = group.iter().map(|&i| d.data()[i] * d.data()[i]).sum::<f64>().sqrt();
                let s = if dn > 0.0 { pn / dn } else { 0.0 };
                for &i in &group {
                    d.data_mut()[i] *= s;
                }
            }
            d
        })
        .collect()
}

fn unit_groups(shape: &[usize]) -> Vec<Vec<usize>> {
    match *shape {
        [rows, cols] => (0..cols).map(|c| (0..rows).map(|r| r * cols + c).collect()).collect(),
        _ => {
            let per = shape[1..].iter().product::<usize>();
            (0..shape[0]).map(|o| (o * per..(o + 1) * per).collect()).collect()
        }
    }
}

/// `n x n` losses on the plane `φ + a·d₁ + b·d₂`, `a, b` evenly spaced in
/// `[-radius, radius]`; `None` marks a non-finite loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossGrid {
    pub n: usize,
    pub radius: f64,
    pub coords: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl LossGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.n + j]
    }
}

/// Evenly spaced points of `[-radius, radius]`; the middle one of an odd
/// count is exactly zero.
pub fn lattice(n: usize, radius: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let half = (n - 1) as f64;
    (0..n).map(|i| radius * (2.0 * i as f64 - half) / half).collect()
}

pub fn loss_slice<F>(params: &[Array], mut loss: F, d1: &[Array], d2: &[Array], n: usize, radius: f64) -> Result<LossGrid>
where
    F: FnMut(&[Array]) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::invalid("loss grid needs at least one point per axis"));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be finite and non-negative, got {radius}")));
    }
    for d in [d1, d2] {
        if d.len() != params.len() || d.iter().zip(params).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::invalid("direction does not match parameter shapes"));
        }
    }
    let coords = lattice(n, radius);
    let mut values = Vec::with_capacity(n * n);
    for &a in &coords {
        for &b in &coords {
            let moved: Vec<Array> = params
                .iter()
                .zip(d1.iter().zip(d2))
                .map(|(p, (u, v))| {
                    let pu = p.zip_map(u, "loss_slice", |x, y| x + a * y)?;
                    pu.zip_map(v, "loss_slice", |x, y| x + b * y)
                })
                .collect::<Result<_>>()?;
            values.push(match loss(&moved) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(Error::NonFinite(_)) => None,
                Err(e) => return Err(e),
            });
        }
    }
    Ok(LossGrid {
        n,
        radius,
        coords,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearCritic;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    fn flood_fill_count(mask: &[bool], h: usize, w: usize, conn: Connectivity) -> usize {
        let mut seen = vec![false; mask.len()];
        let mut count = 0;
        for start in 0..mask.len() {
            if !mask[start] || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (r, c) = ((i / w) as isize, (i % w) as isize);
                for &(dr, dc) in conn.neighbours() {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr >= 0 && nc >= 0 && nr < h as isize && nc < w as isize {
                        let j = nr as usize * w + nc as usize;
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn zero_field_has_no_regions() {
        let r = aggregation_metric(&Field2D::zeros(8), 0.2, Connectivity::Eight).unwrap();
        assert_eq!((r.n_agg, r.r_agg), (0, 0.0));
    }

    #[test]
    fn two_blocks() {
        let f = Field2D::from_fn(8, |r, c| if (r < 2 && c < 2) || ((4..6).contains(&r) && (5..7).contains(&c)) { 1.0 } else { 0.0 });
        let r = aggregation_metric(&f, 0.5, Connectivity::Four).unwrap();
        assert_eq!(r.n_agg, 2);
        assert_eq!(r.r_agg, 2.0 / 64.0);
    }

    #[test]
    fn diagonal_pattern_depends_on_connectivity() {
        let f = Field2D::from_fn(4, |r, c| if r == c { 1.0 } else { 0.0 });
        assert_eq!(aggregation_metric(&f, 0.5, Connectivity::Four).unwrap().n_agg, 4);
        assert_eq!(aggregation_metric(&f, 0.5, Connectivity::Eight).unwrap().n_agg, 1);
    }

    #[test]
    fn threshold_bounds() {
        let f = Field2D::zeros(4);
        for tau in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(aggregation_metric(&f, tau, Connectivity::Four).is_err());
        }
    }

    #[test]
    fn u_shape_merges_labels() {
        // two arms joined only at the bottom row force a union
        let rows = ["X..X", "X..X", "XXXX"];
        let mask: Vec<bool> = rows.iter().flat_map(|r| r.chars().map(|c| c == 'X')).collect();
        let (labels, n) = label_components(&mask, 3, 4, Connectivity::Four).unwrap();
        assert_eq!(n, 1);
        assert!(labels.iter().zip(&mask).all(|(&l, &m)| (l == 1) == m));
    }

    proptest! {
        #[test]
        fn labeling_matches_flood_fill(cells in prop::collection::vec(any::<bool>(), 48), eight in any::<bool>()) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let (_, n) = label_components(&cells, 6, 8, conn).unwrap();
            prop_assert_eq!(n, flood_fill_count(&cells, 6, 8, conn));
        }

        #[test]
        fn regions_never_exceed_active_cells(vals in prop::collection::vec(0.0f64..1.0, 64), tau in 0.01f64..0.99) {
            let f = Field2D::new(8, vals.clone()).unwrap();
            let r = aggregation_metric(&f, tau, Connectivity::Four).unwrap();
            prop_assert!(r.n_agg <= vals.iter().filter(|&&v| v > tau).count());
            prop_assert!((0.0..=1.0).contains(&r.r_agg));
        }

        #[test]
        fn cosine_ignores_positive_rescaling(
            vals in prop::collection::vec(-1.0f64..1.0, 12),
            scales in prop::collection::vec(0.1f64..10.0, 4),
        ) {
            let a = Array::new(vec![4, 3], vals.clone()).unwrap();
            let b = Array::from_fn(&[4, 3], |i| vals[i] * scales[i / 3]);
            if let (Ok(x), Ok(y)) = (mean_pairwise_cosine(&a), mean_pairwise_cosine(&b)) {
                prop_assert!((x.mean - y.mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_examples() {
        let same = Array::new(vec![3, 2], vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!((mean_pairwise_cosine(&same).unwrap().mean - 1.0).abs() < 1e-15);
        let ortho = Array::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(mean_pairwise_cosine(&ortho).unwrap().mean, 0.0);
        let h = 0.5f64.sqrt();
        let three = Array::new(vec![3, 2], vec![1.0, 0.0, 0.0, 1.0, h, h]).unwrap();
        let expected = (0.0 + 2.0f64.sqrt() / 2.0 + 2.0f64.sqrt() / 2.0) / 3.0;
        assert!((mean_pairwise_cosine(&three).unwrap().mean - expected).abs() < 1e-12);
        let with_zero = Array::new(vec![3, 2], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let r = mean_pairwise_cosine(&with_zero).unwrap();
        assert_eq!((r.pairs, r.skipped, r.mean), (1, 2, 1.0));
    }

    #[test]
    fn fisher_of_linear_critic_is_near_dimension() {
        let dim = 32;
        let critic = LinearCritic::new((0..dim).map(|i| (i as f64 * 0.3).sin()).collect());
        let x = Array::from_fn(&[2, dim], |i| (i as f64).cos());
        let est = fisher_trace(&x, &critic, 256, 7).unwrap();
        assert!((est - dim as f64).abs() < 0.15 * dim as f64, "{est}");
    }

    struct BiasOnly;

    impl Critic for BiasOnly {
        fn params(&self) -> &[Array] {
            std::slice::from_ref(&BIAS)
        }

        fn logits<'g>(&self, params: &[Tensor<'g>], x: Tensor<'g>) -> Result<Tensor<'g>> {
            let rows = x.shape()[0];
            let w = x.graph().constant(Array::full(&[x.shape()[1], 1], 0.5));
            x.matmul(w)?.add(params[0].broadcast(&[rows, 1])?)
        }
    }

    static BIAS: std::sync::LazyLock<Array> = std::sync::LazyLock::new(|| Array::vector(vec![0.3]));

    #[test]
    fn fisher_is_zero_without_parameter_dependence() {
        let x = Array::full(&[3, 5], 0.2);
        assert_eq!(fisher_trace(&x, &BiasOnly, 4, 1).unwrap(), 0.0);
        assert!(fisher_trace(&x, &BiasOnly, 0, 1).is_err());
    }

    #[test]
    fn slice_of_quadratic_matches_closed_form() {
        let phi = vec![Array::vector(vec![0.5, -1.0, 2.0])];
        let d1 = vec![Array::vector(vec![1.0, 0.0, 0.0])];
        let d2 = vec![Array::vector(vec![0.0, 0.6, 0.8])];
        let grid = loss_slice(&phi, |p| Ok(p[0].norm_sq()), &d1, &d2, 5, 1.5).unwrap();
        let base = phi[0].norm_sq();
        for i in 0..5 {
            for j in 0..5 {
                let (a, b) = (grid.coords[i], grid.coords[j]);
                let cross = 2.0 * (a * d1[0].dot(&phi[0]).unwrap() + b * d2[0].dot(&phi[0]).unwrap());
                let v = grid.get(i, j).unwrap();
                assert!((v - (base + a * a + b * b + cross)).abs() < 1e-12);
            }
        }
        assert_eq!(grid.get(2, 2), Some(base));
        let flat = loss_slice(&phi, |p| Ok(p[0].norm_sq()), &d1, &d2, 3, 0.0).unwrap();
        assert!(flat.values.iter().all(|&v| v == Some(base)));
        let holes = loss_slice(&phi, |p| Ok(1.0 / p[0].data()[0]), &d1, &d2, 3, 0.5).unwrap();
        assert_eq!(holes.get(0, 0), None);
    }

    #[test]
    fn directions_match_unit_norms() {
        let w = Array::new(vec![2, 3], vec![3.0, 0.0, 1.0, 4.0, 2.0, 1.0]).unwrap();
        let b = Array::vector(vec![1.0, 2.0, 3.0]);
        let dirs = filter_normalized_directions(&[w.clone(), b], &mut ChaCha8Rng::seed_from_u64(3));
        for c in 0..3 {
            let pn = (w.data()[c].powi(2) + w.data()[3 + c].powi(2)).sqrt();
            let dn = (dirs[0].data()[c].powi(2) + dirs[0].data()[3 + c].powi(2)).sqrt();
            assert!((pn - dn).abs() < 1e-12);
        }
        assert!(dirs[1].data().iter().all(|&v| v == 0.0));
    }
}
