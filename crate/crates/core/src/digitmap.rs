//! Integer → digit decomposition and the inverse assembly.
//!
//! Weights become unsigned k-bit digit planes, each with a signed
//! significance, in one of three layouts:
//!
//! * Design1: N-bit two's complement. The MSB is a dedicated 1-bit sign plane
//!   of significance `-2^(N-1)`; the low N-1 bits are packed LSB-first into
//!   `ceil((N-1)/k)` base-2^k planes.
//! * Design2: `w⁺ = max(w, 0)` and `w⁻ = max(-w, 0)`, each split into
//!   `ceil(N/k)` planes; the `w⁻` planes carry negative significance.
//! * Design3: `w + 2^(N-1)` split into `ceil(N/k)` planes, plus one dummy
//!   column per subarray storing the constant `2^(N-1)` that assembly
//!   subtracts.
//!
//! Inputs are always binary: one bit plane per cycle, LSB first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Design, InputSignMode};
use crate::quant::{QuantizedTensor, Signedness};

#[derive(Debug, Error, PartialEq)]
pub enum DigitError {
    #[error("weight {value} outside the {bits}-bit symmetric range")]
    ValueOutOfRange { value: i32, bits: u32 },
    #[error("cell bits {cell_bits} outside 1..={bits}")]
    CellBits { cell_bits: u32, bits: u32 },
    #[error("weights must be quantized with a signed range")]
    UnsignedWeights,
    #[error("negative input {0} in unsigned bit-serial mode")]
    NegativeInput(i32),
    #[error("input {value} does not fit {bits} bits")]
    InputOutOfRange { value: i32, bits: u32 },
    #[error("partials shaped {found:?}, expected {expected:?}")]
    IndexMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Digit planes one weight occupies in a single array (one polarity for
/// Design2).
pub fn planes_per_weight(design: Design, bits: u32, cell_bits: u32) -> usize {
    match design {
        Design::Design1 => 1 + (bits - 1).div_ceil(cell_bits) as usize,
        Design::Design2 | Design::Design3 => bits.div_ceil(cell_bits) as usize,
    }
}

/// Total digit planes produced by [`decompose_weights`], dummy excluded.
pub fn digit_plane_count(design: Design, bits: u32, cell_bits: u32) -> usize {
    match design {
        Design::Design2 => 2 * planes_per_weight(design, bits, cell_bits),
        _ => planes_per_weight(design, bits, cell_bits),
    }
}

/// Non-weight columns each subarray reserves.
pub fn extra_columns_per_subarray(design: Design) -> usize {
    match design {
        Design::Design3 => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneRole {
    Sign,
    Magnitude,
    Positive,
    Negative,
    Shifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitPlane {
    pub role: PlaneRole,
    pub significance: i64,
    pub digits: Vec<u8>,
}

/// Constant column of a Design3 subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DummyColumn {
    pub digit: u8,
    /// Negative: assembly subtracts the dummy contribution.
    pub significance: i64,
}

impl DummyColumn {
    /// Dummy column encoding `2^(bits-1)` in one k-bit cell.
    pub fn for_bits(bits: u32, cell_bits: u32) -> Self {
        let shift = bits - 1;
        DummyColumn {
            digit: 1u8 << (shift % cell_bits),
            significance: -(1i64 << (cell_bits * (shift / cell_bits))),
        }
    }

    pub fn value(&self) -> i64 {
        -(self.digit as i64 * self.significance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitPlanes {
    pub design: Design,
    pub bits: u32,
    pub cell_bits: u32,
    pub shape: Vec<usize>,
    pub planes: Vec<DigitPlane>,
    pub dummy: Option<DummyColumn>,
}

impl DigitPlanes {
    /// Plane significances, followed by the dummy's when present.
    pub fn plane_weights(&self) -> Vec<i64> {
        let mut w: Vec<i64> = self.planes.iter().map(|p| p.significance).collect();
        if let Some(d) = self.dummy {
            w.push(d.significance);
        }
        w
    }

    /// Signed integer stored at element `idx`.
    pub fn reconstruct(&self, idx: usize) -> i64 {
        let mut v: i64 = self
            .planes
            .iter()
            .map(|p| p.significance * p.digits[idx] as i64)
            .sum();
        if let Some(d) = self.dummy {
            v += d.significance * d.digit as i64;
        }
        v
    }
}

/// Per-element digits of `w`, in plane order.
pub fn weight_digits(w: i32, design: Design, bits: u32, cell_bits: u32) -> Vec<u8> {
    let base_mask = (1u32 << cell_bits) - 1;
    let split = |u: u32, count: usize| -> Vec<u8> {
        (0..count)
            .map(|j| ((u >> (j as u32 * cell_bits)) & base_mask) as u8)
            .collect()
    };
    match design {
        Design::Design1 => {
            let u = (w as u32) & ((1u32 << bits) - 1);
            let sign = ((u >> (bits - 1)) & 1) as u8;
            let low = u & ((1u32 << (bits - 1)) - 1);
            let mut d = vec![sign];
            d.extend(split(low, (bits - 1).div_ceil(cell_bits) as usize));
            d
        }
        Design::Design2 => {
            let count = bits.div_ceil(cell_bits) as usize;
            let mut d = split(w.max(0) as u32, count);
            d.extend(split((-w).max(0) as u32, count));
            d
        }
        Design::Design3 => {
            let shifted = (w + (1 << (bits - 1))) as u32;
            split(shifted, bits.div_ceil(cell_bits) as usize)
        }
    }
}

/// Significance and role of each plane, in the order of [`weight_digits`].
pub fn plane_layout(design: Design, bits: u32, cell_bits: u32) -> Vec<(PlaneRole, i64)> {
    let base = 1i64 << cell_bits;
    match design {
        Design::Design1 => {
            let mut v = vec![(PlaneRole::Sign, -(1i64 << (bits - 1)))];
            v.extend((0..(bits - 1).div_ceil(cell_bits)).map(|j| (PlaneRole::Magnitude, base.pow(j))));
            v
        }
        Design::Design2 => {
            let count = bits.div_ceil(cell_bits);
            let mut v: Vec<_> = (0..count).map(|j| (PlaneRole::Positive, base.pow(j))).collect();
            v.extend((0..count).map(|j| (PlaneRole::Negative, -base.pow(j))));
            v
        }
        Design::Design3 => (0..bits.div_ceil(cell_bits))
            .map(|j| (PlaneRole::Shifted, base.pow(j)))
            .collect(),
    }
}

pub fn check_cell_bits(bits: u32, cell_bits: u32) -> Result<(), DigitError> {
    if cell_bits == 0 || cell_bits > bits || cell_bits > 8 {
        return Err(DigitError::CellBits { cell_bits, bits });
    }
    Ok(())
}

pub fn decompose_weights(
    q: &QuantizedTensor,
    design: Design,
    cell_bits: u32,
) -> Result<DigitPlanes, DigitError> {
    let p = q.params();
    if p.signedness != Signedness::Signed {
        return Err(DigitError::UnsignedWeights);
    }
    let bits = p.bits;
    check_cell_bits(bits, cell_bits)?;
    let limit = (1i32 << (bits - 1)) - 1;
    if let Some(&value) = q.values().iter().find(|v| v.abs() > limit) {
        return Err(DigitError::ValueOutOfRange { value, bits });
    }
    let layout = plane_layout(design, bits, cell_bits);
    let mut planes: Vec<DigitPlane> = layout
        .iter()
        .map(|&(role, significance)| DigitPlane {
            role,
            significance,
            digits: Vec::with_capacity(q.values().len()),
        })
        .collect();
    for &w in q.values() {
        for (plane, d) in planes.iter_mut().zip(weight_digits(w, design, bits, cell_bits)) {
            plane.digits.push(d);
        }
    }
    Ok(DigitPlanes {
        design,
        bits,
        cell_bits,
        shape: q.shape().to_vec(),
        planes,
        dummy: (design == Design::Design3).then(|| DummyColumn::for_bits(bits, cell_bits)),
    })
}

/// Significance of each input cycle: `2^t`, with the MSB cycle negated in
/// two's-complement mode.
pub fn cycle_weights(bits: u32, mode: InputSignMode) -> Vec<i64> {
    (0..bits)
        .map(|t| {
            let w = 1i64 << t;
            if mode == InputSignMode::TwosComplementBitserial && t == bits - 1 {
                -w
            } else {
                w
            }
        })
        .collect()
}

/// Bit of `x` driven in cycle `t`.
#[inline]
pub fn input_bit(x: i32, t: u32) -> bool {
    (x as u32 >> t) & 1 == 1
}

pub fn check_input(x: i32, bits: u32, mode: InputSignMode) -> Result<(), DigitError> {
    let (lo, hi) = match mode {
        InputSignMode::UnsignedBitserial => {
            if x < 0 {
                return Err(DigitError::NegativeInput(x));
            }
            (0, (1i32 << bits) - 1)
        }
        InputSignMode::TwosComplementBitserial => (-(1i32 << (bits - 1)), (1i32 << (bits - 1)) - 1),
    };
    if x < lo || x > hi {
        return Err(DigitError::InputOutOfRange { value: x, bits });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitCycle {
    pub weight: i64,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitPlanes {
    pub bits: u32,
    pub mode: InputSignMode,
    pub shape: Vec<usize>,
    pub cycles: Vec<BitCycle>,
}

pub fn decompose_inputs(q: &QuantizedTensor, mode: InputSignMode) -> Result<BitPlanes, DigitError> {
    let bits = q.params().bits;
    for &x in q.values() {
        check_input(x, bits, mode)?;
    }
    let cycles = cycle_weights(bits, mode)
        .into_iter()
        .enumerate()
        .map(|(t, weight)| BitCycle {
            weight,
            bits: q.values().iter().map(|&x| input_bit(x, t as u32) as u8).collect(),
        })
        .collect();
    Ok(BitPlanes {
        bits,
        mode,
        shape: q.shape().to_vec(),
        cycles,
    })
}

fn check_partials<T>(partials: &[Vec<T>], cycles: usize, planes: usize) -> Result<(), DigitError> {
    let inner = partials.first().map_or(planes, Vec::len);
    if partials.len() != cycles || partials.iter().any(|p| p.len() != planes) {
        return Err(DigitError::IndexMismatch {
            expected: (cycles, planes),
            found: (partials.len(), inner),
        });
    }
    Ok(())
}

/// `Σ_t Σ_j cycle_weights[t] · plane_weights[j] · partials[t][j]`.
pub fn assemble(
    partials: &[Vec<i64>],
    cycle_weights: &[i64],
    plane_weights: &[i64],
) -> Result<i64, DigitError> {
    check_partials(partials, cycle_weights.len(), plane_weights.len())?;
    Ok(partials
        .iter()
        .zip(cycle_weights)
        .map(|(row, &cw)| cw * row.iter().zip(plane_weights).map(|(&p, &pw)| p * pw).sum::<i64>())
        .sum())
}

/// [`assemble`] over real-valued (post-ADC) partials.
pub fn assemble_real(
    partials: &[Vec<f64>],
    cycle_weights: &[i64],
    plane_weights: &[i64],
) -> Result<f64, DigitError> {
    check_partials(partials, cycle_weights.len(), plane_weights.len())?;
    Ok(partials
        .iter()
        .zip(cycle_weights)
        .map(|(row, &cw)| {
            cw as f64 * row.iter().zip(plane_weights).map(|(&p, &pw)| p * pw as f64).sum::<f64>()
        })
        .sum())
}
