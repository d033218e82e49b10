//! Analog front end: digit → conductance programming and the piecewise ADC.

mod adc;
mod cell;

use std::path::PathBuf;

use thiserror::Error;

pub use adc::{build_linear_adc, calibrate_nonlinear_adc, lossless_adc, AdcSpec};
pub use cell::{digit_to_cell, program_array, CellArray};

#[derive(Debug, Error)]
pub enum AnalogError {
    #[error("digit {digit} outside 0..{} for {cell_bits}-bit cells", 1u32 << cell_bits)]
    DigitRange { digit: u32, cell_bits: u32 },
    #[error("{cell_bits}-bit cells exceed the device limit of {max}")]
    CellBits { cell_bits: u32, max: u32 },
    #[error("ADC precision {0} outside 1..=16")]
    Precision(u32),
    #[error("invalid ADC full-scale range [{lo}, {hi}]")]
    Range { lo: f64, hi: f64 },
    #[error("invalid ADC spec: {0}")]
    Spec(String),
    #[error("{distinct} distinct samples cannot calibrate {needed} levels")]
    InsufficientSamples { distinct: usize, needed: usize },
    #[error("non-finite sample {0}")]
    NonFinite(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
