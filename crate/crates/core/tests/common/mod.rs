//! Independent reference implementations used as test oracles. They share
//! no code with the library beyond plain `Vec<f64>` inputs.

#![allow(dead_code)]

/// Descriptor by direct loops: embed, normalize by the max magnitude,
/// block-average at growing block sizes, accumulate mean squared steps.
pub fn scalar_descriptor(raw: &[f64], zeta: usize) -> (Vec<f64>, f64) {
    let mut side = 1;
    while side * side < raw.len() {
        side += 1;
    }
    let mut l = zeta;
    while l < side {
        l *= zeta;
    }
    let mut field = vec![0.0; l * l];
    field[..raw.len()].copy_from_slice(raw);
    let max = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for v in field.iter_mut() {
            *v = (*v / max).abs();
        }
    }
    let mut per_scale = Vec::new();
    let mut block = zeta;
    let mut prev = field;
    while block <= l {
        let mut next = vec![0.0; l * l];
        for br in (0..l).step_by(block) {
            for bc in (0..l).step_by(block) {
                let mut sum = 0.0;
                for r in br..br + block {
                    for c in bc..bc + block {
                        sum += prev[r * l + c];
                    }
                }
                let mean = sum / (block * block) as f64;
                for r in br..br + block {
                    for c in bc..bc + block {
                        next[r * l + c] = mean;
                    }
                }
            }
        }
        let mse = prev.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (l * l) as f64;
        per_scale.push(mse);
        prev = next;
        block *= zeta;
    }
    let total = per_scale.iter().sum();
    (per_scale, total)
}

/// Component count by depth-first flood fill over a row-major grid.
pub fn flood_fill_components(mask: &[bool], h: usize, w: usize, eight: bool) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
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

/// Mean of the elementwise product.
pub fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}
