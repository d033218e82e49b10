//! Tensor files and synthetic teacher models.

mod desc;
mod npy;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use desc::{AttentionDesc, ConvDesc, InputDistribution, LayerDesc, LinearDesc, NetworkDesc};
pub use npy::{
    decode as decode_npy, encode_f32, encode_i32, read_int_tensor, read_npy, read_tensor,
    write_int_tensor, write_tensor, NpyArray,
};
pub use synth::{synth_model, ModelBundle};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an NPY file (magic mismatch)")]
    Magic,
    #[error("unsupported NPY version {0}.{1}")]
    Version(u8, u8),
    #[error("malformed NPY header: {0}")]
    Header(String),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(String),
    #[error("unsupported array order (Fortran order)")]
    UnsupportedOrder,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("shape {shape:?} does not match {len} elements")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("tensor contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("network description: {0}")]
    Desc(String),
    #[error("unsupported layer kind `{0}`")]
    UnsupportedLayer(String),
    #[error("bundle: {0}")]
    Bundle(String),
}

/// Row-major `float32` tensor with finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::ShapeMismatch {
                shape,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Largest absolute value, or 0 for an empty tensor.
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// Row-major `int32` tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntTensor {
    shape: Vec<usize>,
    data: Vec<i32>,
}

impl IntTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i32>) -> Result<Self, TensorError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::ShapeMismatch {
                shape,
                len: data.len(),
            });
        }
        Ok(IntTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shape_and_nan() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![0.0; 3]),
            Err(TensorError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2], vec![0.0, f32::NAN]),
            Err(TensorError::NonFinite(1))
        ));
    }

    #[test]
    fn max_abs() {
        let t = Tensor::new(vec![3], vec![0.5, -2.0, 1.0]).unwrap();
        assert_eq!(t.max_abs(), 2.0);
    }
}
