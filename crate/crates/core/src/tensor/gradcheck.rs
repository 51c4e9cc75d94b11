use super::{Array, Graph, Tensor};
use crate::error::{Error, Result};

/// Largest relative disagreement between the autodiff gradient of `f` at
/// `x` and a central finite difference with step `h`.
///
/// Per coordinate the error is `|a - c| / (|a| + |c| + 1e-12)`.
pub fn finite_diff_check<F>(f: F, x: &Array, h: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, Tensor<'g>) -> Result<Tensor<'g>>,
{
    let analytic = {
        let g = Graph::new();
        let xv = g.variable(x.clone());
        let out = f(&g, xv)?;
        let grad = g.backward(out, &[xv], false)?;
        (*grad.get(0).value()).clone()
    };
    let numeric = central_difference(|p| eval_scalar(&f, p), x, h)?;
    Ok(max_relative_error(analytic.data(), numeric.data()))
}

fn eval_scalar<F>(f: &F, x: &Array) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, Tensor<'g>) -> Result<Tensor<'g>>,
{
    let g = Graph::new();
    let xv = g.constant(x.clone());
    f(&g, xv)?.item()
}

/// Central-difference gradient of a scalar function.
pub fn central_difference(mut f: impl FnMut(&Array) -> Result<f64>, x: &Array, h: f64) -> Result<Array> {
    let mut probe = x.clone();
    let mut out = Array::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("finite-difference probe at coordinate {i}")));
        }
        out.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, c)| (a - c).abs() / (a.abs() + c.abs() + 1e-12))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_zero_error() {
        let x = Array::vector(vec![0.3, -0.2]);
        let err = finite_diff_check(|g, _x| Ok(g.scalar(4.0)), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_finite_probe_is_rejected() {
        let x = Array::vector(vec![1e-6]);
        let res = finite_diff_check(|_g, x| x.log().map(|l| l.sum_reduce()), &x, 1e-5);
        assert!(res.is_err());
    }
}
