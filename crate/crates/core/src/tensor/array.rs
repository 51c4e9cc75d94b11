use crate::error::{Error, Result};

/// Dense row-major array of `f64` values.
///
/// This is the plain value type; graph nodes wrap an `Array` and add
/// differentiation bookkeeping (see [`super::Tensor`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "array",
                &[&shape],
                format!("shape holds {n} values but {} were given", data.len()),
            ));
        }
        Ok(Array { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Array {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// One-dimensional array.
    pub fn vector(data: Vec<f64>) -> Self {
        Array {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n: usize = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a single-element array.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::shape("item", &[&self.shape], "expected a single element"))
        }
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Array> {
        Array::new(shape.to_vec(), self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Array, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Array> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &[&self.shape, &other.shape], ""));
        }
        Ok(Array {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Array) -> Result<f64> {
        if self.data.len() != other.data.len() {
            return Err(Error::shape("dot", &[&self.shape, &other.shape], ""));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Row `i` of the leading axis, as an array of shape `shape[1..]`.
    pub fn row(&self, i: usize) -> Result<Array> {
        let Some((&rows, rest)) = self.shape.split_first() else {
            return Err(Error::shape("row", &[&self.shape], "array has no leading axis"));
        };
        if i >= rows {
            return Err(Error::invalid(format!("row {i} out of range for {rows} rows")));
        }
        let width: usize = rest.iter().product();
        Ok(Array {
            shape: rest.to_vec(),
            data: self.data[i * width..(i + 1) * width].to_vec(),
        })
    }

    /// Stacks equally shaped arrays along a new leading axis.
    pub fn stack(rows: &[Array]) -> Result<Array> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot stack zero arrays"));
        };
        let mut data = Vec::with_capacity(rows.len() * first.len());
        for r in rows {
            if r.shape != first.shape {
                return Err(Error::shape("stack", &[&first.shape, &r.shape], ""));
            }
            data.extend_from_slice(&r.data);
        }
        let mut shape = vec![rows.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Array { shape, data })
    }
}
