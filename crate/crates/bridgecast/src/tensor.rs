//! Dense row-major f64 tensor with an optional gradient buffer.
//!
//! This is the single value type shared by the autodiff tape, the neural
//! nets, the samplers and the metrics. It is deliberately small: shape
//! checking, element access, a few elementwise helpers and matrix
//! multiplication (delegated to `ndarray`). Anything fancier lives in the
//! modules that need it.

use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    /// Tensor of zeros with the given shape.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            grad: None,
        }
    }

    /// Tensor filled with a constant.
    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            grad: None,
        }
    }

    /// Rank-0-like scalar stored as shape `[1]`.
    pub fn scalar(value: f64) -> Tensor {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
        }
    }

    /// Build from raw row-major data; fails if the length does not match.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                lhs: shape.to_vec(),
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// 2-D constructor from rows; fails if rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    lhs: vec![r, c],
                    rhs: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Tensor::from_vec(&[r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consume the tensor, returning its raw row-major data.
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the data under a new shape of identical volume.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Number of rows when interpreted as a matrix.
    pub fn rows(&self) -> Result<usize> {
        self.dims2().map(|(r, _)| r)
    }

    /// Number of columns when interpreted as a matrix.
    pub fn cols(&self) -> Result<usize> {
        self.dims2().map(|(_, c)| c)
    }

    /// Shape as `(rows, cols)`; fails unless the tensor is 2-D.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "dims2",
                lhs: self.shape.clone(),
                rhs: vec![0, 0],
            });
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// Element of a 2-D tensor.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j]
    }

    /// Mutable element of a 2-D tensor.
    pub fn at2_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert_eq!(self.shape.len(), 2);
        &mut self.data[i * self.shape[1] + j]
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let c = self.shape[1];
        &self.data[i * c..(i + 1) * c]
    }

    /// Row-major `ndarray` view of a 2-D tensor.
    pub fn view2(&self) -> Result<ArrayView2<'_, f64>> {
        let (r, c) = self.dims2()?;
        ArrayView2::from_shape((r, c), &self.data)
            .map_err(|_| Error::contract("invalid 2-D view"))
    }

    /// Mutable `ndarray` view of a 2-D tensor.
    pub fn view2_mut(&mut self) -> Result<ArrayViewMut2<'_, f64>> {
        let (r, c) = self.dims2()?;
        ArrayViewMut2::from_shape((r, c), &mut self.data)
            .map_err(|_| Error::contract("invalid 2-D view"))
    }

    /// Matrix product `self * rhs` for 2-D tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2()?;
        let (k2, n) = rhs.dims2()?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        ndarray::linalg::general_mat_mul(
            1.0,
            &self.view2()?,
            &rhs.view2()?,
            0.0,
            &mut out.view2_mut()?,
        );
        Ok(out)
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_map(&self, rhs: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch {
                op: "zip_map",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            grad: None,
        })
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| k * v)
    }

    /// True if every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference between two same-shape tensors.
    pub fn max_abs_diff(&self, rhs: &Tensor) -> Result<f64> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch {
                op: "max_abs_diff",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Gradient buffer, if one has been accumulated.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Add `delta` into the gradient buffer, creating it at zero first.
    pub fn accumulate_grad(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "accumulate_grad",
                lhs: self.shape.clone(),
                rhs: vec![delta.len()],
            });
        }
        let g = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
        Ok(())
    }

    /// Drop the gradient buffer.
    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}
