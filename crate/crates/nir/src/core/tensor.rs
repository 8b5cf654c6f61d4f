//! Dense row-major tensors used for node parameters and signal values.

use crate::error::{Error, Result};

/// A dense row-major tensor of `f64` values.
///
/// Negative zero is normalized to positive zero at construction so that
/// structurally equal tensors always serialize to identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidParameter("tensor shape must be non-empty".into()));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "tensor shape {shape:?} has a zero extent"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "tensor shape {shape:?} requires {expected} elements, got {}",
                data.len()
            )));
        }
        let data = data.into_iter().map(normalize_zero).collect();
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    /// Tensor of the given shape with every element set to `value`.
    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![normalize_zero(value); n],
        }
    }

    /// Rank-1 tensor from a slice.
    pub fn vector(data: &[f64]) -> Self {
        Tensor {
            shape: vec![data.len()],
            data: data.iter().copied().map(normalize_zero).collect(),
        }
    }

    /// Rank-2 tensor from rows.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.data[flat]
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when every element is exactly zero.
    pub fn all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| normalize_zero(f(v))).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "zip over shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| normalize_zero(f(a, b)))
            .collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }
}

fn normalize_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_extent_and_bad_length() {
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0, 2.0]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
    }

    #[test]
    fn negative_zero_is_normalized() {
        let t = Tensor::vector(&[-0.0, 1.0]);
        assert!(t.get(0).is_sign_positive());
        assert_eq!(t, Tensor::vector(&[0.0, 1.0]));
    }

    #[test]
    fn zip_map_requires_equal_shapes() {
        let a = Tensor::vector(&[1.0, 2.0]);
        let b = Tensor::vector(&[1.0, 2.0, 3.0]);
        assert!(a.zip_map(&b, |x, y| x + y).is_err());
    }
}
