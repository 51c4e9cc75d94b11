//! Gradient of a gradient norm, checked against finite differences.
//!
//! `cargo run --example double_backprop`

use ms3d::tensor::{central_difference, max_relative_error, Array, Graph};

/// `f(x; w) = sum(tanh(x W))`, penalty `|grad_x f|^2`.
fn penalty(w: &Array, x: &Array) -> ms3d::Result<f64> {
    let g = Graph::new();
    let xv = g.variable(x.clone());
    let f = xv.matmul(g.constant(w.clone()))?.tanh().sum_reduce();
    let grad = g.backward(f, &[xv], true)?.get(0);
    grad.square().sum_reduce().item()
}

fn main() -> ms3d::Result<()> {
    let x = Array::new(vec![2, 3], vec![0.3, -0.7, 1.1, 0.5, 0.2, -0.4])?;
    let w = Array::new(vec![3, 2], vec![0.9, -0.2, 0.4, 0.6, -0.8, 0.1])?;

    let g = Graph::new();
    let wv = g.variable(w.clone());
    let xv = g.variable(x.clone());
    let f = xv.matmul(wv)?.tanh().sum_reduce();
    let grad_x = g.backward(f, &[xv], true)?.get(0);
    let pen = grad_x.square().sum_reduce();
    let analytic = g.backward(pen, &[wv], false)?.get(0).value();

    let numeric = central_difference(|w| penalty(w, &x), &w, 1e-6)?;
    println!("penalty      {:.6}", pen.item()?);
    println!("d/dW (tape)  {:?}", analytic.data());
    println!("d/dW (fd)    {:?}", numeric.data());
    println!("max rel err  {:.2e}", max_relative_error(analytic.data(), numeric.data()));
    Ok(())
}
