//! Forward kernels on plain arrays. Every differentiable op in the graph
//! evaluates its value through one of these.

use super::array::Array;
use crate::error::{Error, Result};

/// Stride and zero-padding of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub padding: usize,
}

/// Window and stride of a 2-D average pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolParams {
    pub kernel: usize,
    pub stride: usize,
}

pub fn matmul(a: &Array, b: &Array) -> Result<Array> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
        return Err(Error::shape("matmul", &[sa, sb], "expected [m,k] x [k,n]"));
    }
    let (m, k, n) = (sa[0], sa[1], sb[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Array::new(vec![m, n], out)
}

pub fn transpose(a: &Array) -> Result<Array> {
    let s = a.shape();
    if s.len() != 2 {
        return Err(Error::shape("transpose", &[s], "expected a matrix"));
    }
    let (m, n) = (s[0], s[1]);
    let d = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Array::new(vec![n, m], out)
}

fn conv_out_dim(input: usize, kernel: usize, p: ConvParams) -> Option<usize> {
    let padded = input + 2 * p.padding;
    if p.stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / p.stride + 1)
}

/// Output shape of `conv2d(x, w)` for `x: [N,C,H,W]`, `w: [O,C,KH,KW]`.
pub fn conv2d_shape(xs: &[usize], ws: &[usize], p: ConvParams) -> Result<[usize; 4]> {
    if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
        return Err(Error::shape("conv2d", &[xs, ws], "expected [N,C,H,W] and [O,C,KH,KW]"));
    }
    let oh = conv_out_dim(xs[2], ws[2], p);
    let ow = conv_out_dim(xs[3], ws[3], p);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok([xs[0], ws[0], oh, ow]),
        _ => Err(Error::shape("conv2d", &[xs, ws], format!("kernel does not fit with {p:?}"))),
    }
}

/// Visits every (input index, weight index, output index) triple of a direct
/// convolution. All three conv kernels are contractions over this set.
fn conv_for_each(
    xs: [usize; 4],
    ws: [usize; 4],
    os: [usize; 4],
    p: ConvParams,
    mut f: impl FnMut(usize, usize, usize),
) {
    let [n, c, h, w] = xs;
    let [o, _, kh, kw] = ws;
    let [_, _, oh, ow] = os;
    for b in 0..n {
        for oc in 0..o {
            for y in 0..oh {
                for x in 0..ow {
                    let out_idx = ((b * o + oc) * oh + y) * ow + x;
                    for ic in 0..c {
                        for ky in 0..kh {
                            let iy = (y * p.stride + ky) as isize - p.padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (x * p.stride + kx) as isize - p.padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let in_idx = ((b * c + ic) * h + iy as usize) * w + ix as usize;
                                let w_idx = ((oc * c + ic) * kh + ky) * kw + kx;
                                f(in_idx, w_idx, out_idx);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dims4(s: &[usize]) -> [usize; 4] {
    [s[0], s[1], s[2], s[3]]
}

pub fn conv2d(x: &Array, w: &Array, p: ConvParams) -> Result<Array> {
    let os = conv2d_shape(x.shape(), w.shape(), p)?;
    let mut out = vec![0.0; os.iter().product()];
    let (xd, wd) = (x.data(), w.data());
    conv_for_each(dims4(x.shape()), dims4(w.shape()), os, p, |i, k, o| {
        out[o] += xd[i] * wd[k];
    });
    Array::new(os.to_vec(), out)
}

/// Adjoint of `conv2d` in its input: maps an output-shaped array back to
/// `input_shape`.
pub fn conv2d_input_grad(g: &Array, w: &Array, p: ConvParams, input_shape: [usize; 4]) -> Result<Array> {
    let os = conv2d_shape(&input_shape, w.shape(), p)?;
    if g.shape() != os {
        return Err(Error::shape("conv2d_input_grad", &[g.shape(), &os], ""));
    }
    let mut out = vec![0.0; input_shape.iter().product()];
    let (gd, wd) = (g.data(), w.data());
    conv_for_each(input_shape, dims4(w.shape()), os, p, |i, k, o| {
        out[i] += gd[o] * wd[k];
    });
    Array::new(input_shape.to_vec(), out)
}

/// Adjoint of `conv2d` in its weight.
pub fn conv2d_weight_grad(x: &Array, g: &Array, p: ConvParams, weight_shape: [usize; 4]) -> Result<Array> {
    let os = conv2d_shape(x.shape(), &weight_shape, p)?;
    if g.shape() != os {
        return Err(Error::shape("conv2d_weight_grad", &[g.shape(), &os], ""));
    }
    let mut out = vec![0.0; weight_shape.iter().product()];
    let (xd, gd) = (x.data(), g.data());
    conv_for_each(dims4(x.shape()), weight_shape, os, p, |i, k, o| {
        out[k] += xd[i] * gd[o];
    });
    Array::new(weight_shape.to_vec(), out)
}

/// Splits a shape into (batch, h, w), treating the last two axes as spatial.
fn spatial(op: &'static str, s: &[usize]) -> Result<(usize, usize, usize)> {
    if s.len() < 2 {
        return Err(Error::shape(op, &[s], "expected at least two spatial axes"));
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    Ok((s[..s.len() - 2].iter().product(), h, w))
}

fn with_spatial(s: &[usize], h: usize, w: usize) -> Vec<usize> {
    let mut out = s[..s.len() - 2].to_vec();
    out.push(h);
    out.push(w);
    out
}

pub fn pool_out_dim(input: usize, p: PoolParams) -> Option<usize> {
    if p.kernel == 0 || p.stride == 0 || input < p.kernel {
        return None;
    }
    Some((input - p.kernel) / p.stride + 1)
}

pub fn avg_pool2d(x: &Array, p: PoolParams) -> Result<Array> {
    let (batch, h, w) = spatial("avg_pool2d", x.shape())?;
    let (Some(oh), Some(ow)) = (pool_out_dim(h, p), pool_out_dim(w, p)) else {
        return Err(Error::shape("avg_pool2d", &[x.shape()], format!("window does not fit with {p:?}")));
    };
    let scale = 1.0 / (p.kernel * p.kernel) as f64;
    let d = x.data();
    let mut out = vec![0.0; batch * oh * ow];
    for b in 0..batch {
        let plane = &d[b * h * w..(b + 1) * h * w];
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = 0.0;
                for ky in 0..p.kernel {
                    let row = (y * p.stride + ky) * w + xo * p.stride;
                    acc += plane[row..row + p.kernel].iter().sum::<f64>();
                }
                out[(b * oh + y) * ow + xo] = acc * scale;
            }
        }
    }
    Array::new(with_spatial(x.shape(), oh, ow), out)
}

/// Adjoint of `avg_pool2d`: spreads each pooled value uniformly over its window.
pub fn avg_pool2d_adjoint(g: &Array, p: PoolParams, h: usize, w: usize) -> Result<Array> {
    let (batch, oh, ow) = spatial("avg_pool2d_adjoint", g.shape())?;
    if pool_out_dim(h, p) != Some(oh) || pool_out_dim(w, p) != Some(ow) {
        return Err(Error::shape("avg_pool2d_adjoint", &[g.shape()], format!("does not pool from {h}x{w}")));
    }
    let scale = 1.0 / (p.kernel * p.kernel) as f64;
    let gd = g.data();
    let mut out = vec![0.0; batch * h * w];
    for b in 0..batch {
        for y in 0..oh {
            for xo in 0..ow {
                let v = gd[(b * oh + y) * ow + xo] * scale;
                for ky in 0..p.kernel {
                    let row = b * h * w + (y * p.stride + ky) * w + xo * p.stride;
                    for o in &mut out[row..row + p.kernel] {
                        *o += v;
                    }
                }
            }
        }
    }
    Array::new(with_spatial(g.shape(), h, w), out)
}

pub fn upsample_nearest(x: &Array, factor: usize) -> Result<Array> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be positive"));
    }
    let (batch, h, w) = spatial("upsample_nearest", x.shape())?;
    let (uh, uw) = (h * factor, w * factor);
    let d = x.data();
    let mut out = Vec::with_capacity(batch * uh * uw);
    for b in 0..batch {
        for y in 0..uh {
            let src = &d[b * h * w + (y / factor) * w..b * h * w + (y / factor + 1) * w];
            for xo in 0..uw {
                out.push(src[xo / factor]);
            }
        }
    }
    Array::new(with_spatial(x.shape(), uh, uw), out)
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Copies the box `ranges` (per-axis `[start, end)`) of `src` into a fresh
/// array, or scatters `src` into a zero array at offset `ranges.start` when
/// `scatter` is set.
fn box_copy(src: &Array, ranges: &[(usize, usize)], out_shape: &[usize], scatter: bool) -> Array {
    let (small_shape, big_shape) = if scatter {
        (src.shape(), out_shape)
    } else {
        (out_shape, src.shape())
    };
    let big_strides = strides(big_shape);
    let n: usize = small_shape.iter().product();
    let mut out = vec![0.0; out_shape.iter().product()];
    let mut idx = vec![0usize; small_shape.len()];
    for lin in 0..n {
        let big: usize = idx
            .iter()
            .zip(ranges)
            .zip(&big_strides)
            .map(|((&i, &(start, _)), &st)| (i + start) * st)
            .sum();
        if scatter {
            out[big] = src.data()[lin];
        } else {
            out[lin] = src.data()[big];
        }
        for axis in (0..idx.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < small_shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    Array::new(out_shape.to_vec(), out).expect("box copy shape")
}

pub fn pad_zero(x: &Array, pads: &[(usize, usize)]) -> Result<Array> {
    if pads.len() != x.shape().len() {
        return Err(Error::shape("pad_zero", &[x.shape()], "need one (before, after) pair per axis"));
    }
    let out_shape: Vec<usize> = x.shape().iter().zip(pads).map(|(&d, &(a, b))| a + d + b).collect();
    let ranges: Vec<(usize, usize)> = x.shape().iter().zip(pads).map(|(&d, &(a, _))| (a, a + d)).collect();
    Ok(box_copy(x, &ranges, &out_shape, true))
}

pub fn slice(x: &Array, ranges: &[(usize, usize)]) -> Result<Array> {
    if ranges.len() != x.shape().len()
        || ranges.iter().zip(x.shape()).any(|(&(a, b), &d)| a > b || b > d)
    {
        return Err(Error::shape("slice", &[x.shape()], format!("bad ranges {ranges:?}")));
    }
    let out_shape: Vec<usize> = ranges.iter().map(|&(a, b)| b - a).collect();
    Ok(box_copy(x, ranges, &out_shape, false))
}

pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Index of the first maximal element in row-major order.
pub fn argmax(d: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in d.iter().enumerate() {
        match best {
            Some(b) if d[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}
