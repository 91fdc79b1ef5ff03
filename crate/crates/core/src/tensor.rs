//! Minimal dense tensor: a shape plus flat `f64` storage in row-major
//! order (last index fastest). No views, no broadcasting — the network
//! code addresses data with explicit strides, which keeps every backward
//! pass auditable against finite differences.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// All-zero tensor with the given shape.
    pub fn zeros(dims: &[usize]) -> Tensor {
        let len = checked_len(dims).expect("tensor shape overflows");
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    /// Wrap existing data; the length must match the shape product.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let len = checked_len(dims)
            .ok_or_else(|| Error::argument(format!("tensor shape {dims:?} overflows")))?;
        if data.len() != len {
            return Err(Error::argument(format!(
                "shape {dims:?} wants {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Flat offset of a multi-index (row-major).
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, (&k, &d)) in idx.iter().zip(&self.dims).enumerate() {
            debug_assert!(k < d, "index {k} out of bounds for axis {i} (size {d})");
            off = off * d + k;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise accumulate: `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::argument(format!(
                "shape mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Round every value through f32 and back. Used at persistence
    /// boundaries so in-memory state matches what a stored copy reads
    /// back, making save → load → continue bit-identical.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

fn checked_len(dims: &[usize]) -> Option<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return None;
    }
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// A trainable tensor with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Param {
        let grad = Tensor::zeros(value.dims());
        Param { value, grad }
    }

    /// Disjoint views for optimizers: (shape, values, gradients).
    pub fn split_mut(&mut self) -> (&[usize], &mut [f64], &mut [f64]) {
        let Param { value, grad } = self;
        let Tensor { dims, data } = value;
        (dims, data, &mut grad.data)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}
