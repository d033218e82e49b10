//! Tiling and the functional CIM matmul pipeline:
//! decompose → program → bit-serial analog MAC → offset cancellation → ADC →
//! shift-and-add.

mod engine;
mod tile;

use thiserror::Error;

pub use engine::{
    cim_matmul, offset_cancel, resolve_adc, AnalogPass, CimOutput, ColumnSums, MacTrace,
    ProgrammedMatrix,
};
pub use tile::{tile, Polarity, ReadUnit, SlotPlan, TilePlan, TileSpec};

use crate::analog::{AdcSpec, AnalogError};
use crate::config::{
    AdcKind, Design, DeviceModel, InputSignMode, OffsetCancellation, SimulationConfig,
};
use crate::digitmap::DigitError;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("tiling: {0}")]
    Geometry(String),
    #[error(transparent)]
    Digit(#[from] DigitError),
    #[error(transparent)]
    Analog(#[from] AnalogError),
}

/// How corrected column sums are digitized.
#[derive(Debug, Clone, PartialEq)]
pub enum AdcMode {
    /// Unquantized pass-through.
    Ideal,
    Linear {
        precision: u32,
        /// `[lo, hi]`; `None` uses the default full scale.
        full_scale: Option<[f64; 2]>,
    },
    /// Quantile fit over the sums of each call (or pooled calls).
    Calibrated { precision: u32 },
    Custom(AdcSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub design: Design,
    pub cell_bits: u32,
    pub input_sign_mode: InputSignMode,
    pub offset_cancellation: OffsetCancellation,
    pub device: DeviceModel,
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub adc_share: usize,
    pub adc: AdcMode,
}

impl PipelineConfig {
    /// Infinite on/off ratio, no variation, no ADC loss.
    pub fn ideal(design: Design, cell_bits: u32) -> Self {
        PipelineConfig {
            design,
            cell_bits,
            input_sign_mode: InputSignMode::TwosComplementBitserial,
            offset_cancellation: OffsetCancellation::DummyColumn,
            device: DeviceModel {
                cell_bits_max: 8,
                ..DeviceModel::ideal()
            },
            subarray_rows: 128,
            subarray_cols: 128,
            adc_share: 8,
            adc: AdcMode::Ideal,
        }
    }

    /// Static-weight (eNVM) arrays of a simulation config.
    pub fn smm(cfg: &SimulationConfig) -> Result<Self, KernelError> {
        Ok(PipelineConfig {
            design: cfg.mapping.design,
            cell_bits: cfg.mapping.cell_bits,
            input_sign_mode: cfg.mapping.input_sign_mode,
            offset_cancellation: cfg.mapping.offset_cancellation,
            device: cfg.device.clone(),
            subarray_rows: cfg.arch.subarray_rows,
            subarray_cols: cfg.arch.subarray_cols,
            adc_share: cfg.arch.adc_share,
            adc: adc_mode(cfg)?,
        })
    }

    /// Dynamic-operand (SRAM) arrays; cell precision is capped by the device.
    pub fn dmm(cfg: &SimulationConfig) -> Result<Self, KernelError> {
        let dev = cfg.arch.dmm_device.clone();
        Ok(PipelineConfig {
            design: cfg.mapping.design,
            cell_bits: cfg.mapping.cell_bits.min(dev.cell_bits_max),
            input_sign_mode: cfg.mapping.input_sign_mode,
            offset_cancellation: cfg.mapping.offset_cancellation,
            device: dev,
            subarray_rows: cfg.arch.dmm_subarray_rows,
            subarray_cols: cfg.arch.dmm_subarray_cols,
            adc_share: cfg.arch.adc_share.min(cfg.arch.dmm_subarray_cols),
            adc: adc_mode(cfg)?,
        })
    }

    pub fn tile_spec(&self, weight_bits: u32) -> TileSpec {
        TileSpec {
            subarray_rows: self.subarray_rows,
            subarray_cols: self.subarray_cols,
            design: self.design,
            weight_bits,
            cell_bits: self.cell_bits,
        }
    }

    /// Default linear full scale: `[0, min(rows, 64)·(2^k-1)]`, mirrored
    /// around zero for the differential Design2 read.
    pub fn default_full_scale(&self) -> [f64; 2] {
        let hi = (self.subarray_rows.min(64) * ((1usize << self.cell_bits) - 1)) as f64;
        match self.design {
            Design::Design2 => [-hi, hi],
            _ => [0.0, hi],
        }
    }
}

fn adc_mode(cfg: &SimulationConfig) -> Result<AdcMode, KernelError> {
    let a = &cfg.adc;
    Ok(match a.kind {
        AdcKind::Linear => AdcMode::Linear {
            precision: a.precision,
            full_scale: a.full_scale,
        },
        AdcKind::Calibrated => AdcMode::Calibrated {
            precision: a.precision,
        },
        AdcKind::Custom => {
            let path = a
                .custom_spec
                .as_ref()
                .ok_or_else(|| AnalogError::Spec("custom ADC without custom_spec path".into()))?;
            AdcMode::Custom(AdcSpec::load(path)?)
        }
    })
}
