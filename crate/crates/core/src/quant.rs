//! Float ⇄ low-precision integer conversion.
//!
//! The quantizer always maps FP to INT and the dequantizer INT back to FP, so
//! the rest of the pipeline never sees the scheme. Signed tensors use the
//! symmetric range `[-(2^(N-1)-1), 2^(N-1)-1]`; unsigned tensors (e.g.
//! post-softmax probabilities) use `[0, 2^N - 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::QuantScheme;
use crate::tensorio::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("cannot calibrate an empty tensor")]
    Empty,
    #[error("non-finite value {0} in tensor")]
    NonFinite(f32),
    #[error("bit width {0} outside 2..=16")]
    Bits(u32),
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("value {value} outside [{min}, {max}]")]
    OutOfRange { value: i32, min: i32, max: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signedness {
    #[default]
    Signed,
    Unsigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scheme: QuantScheme,
    pub bits: u32,
    pub scale: f64,
    #[serde(default)]
    pub signedness: Signedness,
}

impl QuantParams {
    pub fn new(
        scheme: QuantScheme,
        bits: u32,
        scale: f64,
        signedness: Signedness,
    ) -> Result<Self, QuantError> {
        if !(2..=16).contains(&bits) {
            return Err(QuantError::Bits(bits));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(QuantError::Scale(scale));
        }
        Ok(QuantParams {
            scheme,
            bits,
            scale,
            signedness,
        })
    }

    pub fn qmax(&self) -> i32 {
        level_max(self.bits, self.signedness)
    }

    pub fn qmin(&self) -> i32 {
        match self.signedness {
            Signedness::Signed => -self.qmax(),
            Signedness::Unsigned => 0,
        }
    }

    #[inline]
    pub fn quantize_value(&self, x: f32) -> i32 {
        let q = (x as f64 / self.scale).round();
        q.clamp(self.qmin() as f64, self.qmax() as f64) as i32
    }
}

fn level_max(bits: u32, signedness: Signedness) -> i32 {
    match signedness {
        Signedness::Signed => (1i32 << (bits - 1)) - 1,
        Signedness::Unsigned => (1i32 << bits) - 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    values: Vec<i32>,
    params: QuantParams,
}

impl QuantizedTensor {
    /// Wraps integer values, checking each lies in the parameters' range.
    pub fn new(shape: Vec<usize>, values: Vec<i32>, params: QuantParams) -> Result<Self, QuantError> {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape does not match value count"
        );
        let (min, max) = (params.qmin(), params.qmax());
        if let Some(&value) = values.iter().find(|&&v| v < min || v > max) {
            return Err(QuantError::OutOfRange { value, min, max });
        }
        Ok(QuantizedTensor {
            shape,
            values,
            params,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn params(&self) -> &QuantParams {
        &self.params
    }

    /// View as a 2-D matrix `[rows, cols]` where cols is the last extent.
    pub fn as_matrix(&self) -> (usize, usize) {
        let cols = *self.shape.last().unwrap_or(&1);
        (self.values.len() / cols.max(1), cols)
    }
}

fn max_abs(values: &[f32]) -> Result<f64, QuantError> {
    if values.is_empty() {
        return Err(QuantError::Empty);
    }
    let mut m = 0.0f64;
    for &v in values {
        if !v.is_finite() {
            return Err(QuantError::NonFinite(v));
        }
        m = m.max((v as f64).abs());
    }
    Ok(m)
}

/// Calibrates a scale from raw values.
pub fn calibrate_values(
    values: &[f32],
    scheme: QuantScheme,
    bits: u32,
    signedness: Signedness,
) -> Result<QuantParams, QuantError> {
    if !(2..=16).contains(&bits) {
        return Err(QuantError::Bits(bits));
    }
    let max = max_abs(values)?;
    let qmax = level_max(bits, signedness) as f64;
    let scale = if max == 0.0 {
        1.0
    } else {
        match scheme {
            QuantScheme::UniformSymmetric => max / qmax,
            QuantScheme::DynamicFixedPoint => dynamic_fixed_point_scale(max, qmax),
        }
    };
    QuantParams::new(scheme, bits, scale, signedness)
}

/// `2^-FL` with FL the largest integer such that `max <= qmax * 2^-FL`.
fn dynamic_fixed_point_scale(max: f64, qmax: f64) -> f64 {
    let fits = |fl: i32| max <= qmax * 2f64.powi(-fl);
    let mut fl = (qmax / max).log2().floor() as i32;
    while !fits(fl) {
        fl -= 1;
    }
    while fits(fl + 1) {
        fl += 1;
    }
    2f64.powi(-fl)
}

/// Signed calibration of a tensor.
pub fn calibrate(t: &Tensor, scheme: QuantScheme, bits: u32) -> Result<QuantParams, QuantError> {
    calibrate_values(t.data(), scheme, bits, Signedness::Signed)
}

pub fn quantize_values(values: &[f32], p: &QuantParams) -> Vec<i32> {
    values.iter().map(|&x| p.quantize_value(x)).collect()
}

/// `q = clamp(round_half_away(t / s), qmin, qmax)`.
pub fn quantize(t: &Tensor, p: &QuantParams) -> QuantizedTensor {
    QuantizedTensor {
        shape: t.shape().to_vec(),
        values: quantize_values(t.data(), p),
        params: *p,
    }
}

/// `x̂ = q · s`.
pub fn dequantize(q: &QuantizedTensor) -> Tensor {
    let s = q.params.scale;
    let data = q.values.iter().map(|&v| (v as f64 * s) as f32).collect();
    Tensor::new(q.shape.clone(), data).expect("dequantized values are finite")
}
