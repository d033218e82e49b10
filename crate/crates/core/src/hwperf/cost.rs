//! Analytical per-component cost coefficients and the subarray read model.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::DeviceKind;

const DEFAULTS_JSON: &str = include_str!("../../defaults/cost_params.json");

/// Version of the pinned defaults file.
pub const COST_DEFAULTS_VERSION: u32 = 1;

macro_rules! cost_params {
    ($($(#[$doc:meta])* $name:ident,)*) => {
        /// Cost-model coefficients, all in SI units.
        ///
        /// Defaults come from `defaults/cost_params.json`; any subset can be
        /// overridden in the `cost` section of a config.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct CostParams {
            $($(#[$doc])* pub $name: f64,)*
        }

        impl CostParams {
            pub const FIELDS: &'static [&'static str] = &[$(stringify!($name)),*];

            fn from_map(
                map: &BTreeMap<String, f64>,
                fallback: Option<&CostParams>,
            ) -> Result<Self, String> {
                if let Some(key) = map.keys().find(|k| !Self::FIELDS.contains(&k.as_str())) {
                    return Err(format!("unknown cost coefficient `{key}`"));
                }
                Ok(CostParams {
                    $($name: match (map.get(stringify!($name)), fallback) {
                        (Some(v), _) => *v,
                        (None, Some(d)) => d.$name,
                        (None, None) => {
                            return Err(format!("missing cost coefficient `{}`", stringify!($name)))
                        }
                    },)*
                })
            }
        }
    };
}

cost_params! {
    /// Area of one eNVM cell (m²).
    cell_area_envm,
    /// Area of one SRAM cell (m²).
    cell_area_sram,
    /// ADC area = adc_area_exp·2^p + adc_area_lin·p (m²).
    adc_area_exp,
    adc_area_lin,
    /// Wordline driver area per row (m²).
    wl_driver_area,
    /// Shift-and-add unit area per ADC (m²).
    shift_add_area,
    /// Bitline read energy per active row·column·unit normalized conductance (J).
    e_cell,
    /// Wordline energy per used row per read cycle (J).
    e_wl,
    /// ADC energy per ADC per read cycle = adc_energy_exp·2^p + adc_energy_lin·p (J).
    adc_energy_exp,
    adc_energy_lin,
    /// Wordline settle time per read cycle (s).
    t_wl,
    /// Time per SAR comparison (s); one conversion takes p comparisons.
    t_comp,
    /// Shift-and-add energy per ADC per accumulated bit (J).
    shift_add_energy_per_bit,
    /// Shift-and-add time per read cycle (s).
    shift_add_time,
    buffer_area_per_bit,
    /// Energy per bit written or read from a buffer (J).
    buffer_energy_per_bit,
    buffer_bandwidth_bits,
    buffer_cycle_time,
    /// Local buffer capacity per tile (bits).
    tile_buffer_bits,
    /// Interconnect energy per bit per mm of H-tree distance (J).
    ic_energy_per_bit_mm,
    ic_bus_width_bits,
    /// Fixed latency per bus transfer (s).
    ic_hop_time,
    /// Additional latency per bus transfer per mm of distance (s).
    ic_time_per_mm,
    /// H-tree wiring area as a fraction of the rest of the chip.
    ic_area_fraction,
    /// Accumulator/activation logic per tile (m²).
    digital_area_per_tile,
    digital_energy_per_op,
    digital_time_per_op,
    /// Digital operations executed in parallel.
    digital_lanes,
    softmax_energy_per_element,
    softmax_time_per_element,
}

impl<'de> Deserialize<'de> for CostParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        CostParams::from_map(&map, Some(&CostParams::default())).map_err(D::Error::custom)
    }
}

#[derive(Deserialize)]
struct DefaultsFile {
    version: u32,
    params: BTreeMap<String, f64>,
}

impl Default for CostParams {
    fn default() -> Self {
        let file: DefaultsFile = serde_json::from_str(DEFAULTS_JSON)
            .unwrap_or_else(|e| panic!("embedded cost defaults are malformed: {e}"));
        assert_eq!(file.version, COST_DEFAULTS_VERSION);
        CostParams::from_map(&file.params, None)
            .unwrap_or_else(|e| panic!("embedded cost defaults: {e}"))
    }
}

impl CostParams {
    /// All coefficients as `(name, value)` pairs, in declaration order.
    pub fn coefficients(&self) -> Vec<(String, f64)> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map
                .into_iter()
                .map(|(k, v)| (k, v.as_f64().unwrap_or(f64::NAN)))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn cell_area(&self, kind: DeviceKind) -> f64 {
        match kind {
            DeviceKind::Envm => self.cell_area_envm,
            DeviceKind::Sram => self.cell_area_sram,
        }
    }

    pub fn adc_area(&self, precision: u32) -> f64 {
        self.adc_area_exp * (1u64 << precision) as f64 + self.adc_area_lin * precision as f64
    }

    pub fn adc_energy(&self, precision: u32) -> f64 {
        self.adc_energy_exp * (1u64 << precision) as f64 + self.adc_energy_lin * precision as f64
    }
}

/// Used region of one subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadEnergy {
    pub bitline: f64,
    pub wordline: f64,
    pub adc: f64,
    pub shift_add: f64,
}

impl ReadEnergy {
    pub fn total(&self) -> f64 {
        self.bitline + self.wordline + self.adc + self.shift_add
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReadCost {
    /// Seconds per read cycle.
    pub latency: f64,
    /// Joules per read cycle.
    pub energy: ReadEnergy,
}

/// Cost of one bit-serial read cycle of a subarray whose used region is
/// `mask`, with fraction `alpha` of the used rows driven and mean normalized
/// conductance `g_mean` over the driven cells.
///
/// Only the bitline term depends on the data. Latency is constant per cycle.
pub fn subarray_read_cost(
    mask: Mask,
    alpha: f64,
    g_mean: f64,
    cell_bits: u32,
    adc_precision: u32,
    adc_share: usize,
    params: &CostParams,
) -> ReadCost {
    let adcs = mask.cols.div_ceil(adc_share) as f64;
    let p = adc_precision;
    let energy = ReadEnergy {
        bitline: params.e_cell * alpha * mask.rows as f64 * mask.cols as f64 * g_mean,
        wordline: params.e_wl * mask.rows as f64,
        adc: params.adc_energy(p) * adcs,
        shift_add: params.shift_add_energy_per_bit * (p + cell_bits) as f64 * adcs,
    };
    let latency =
        params.t_wl + p as f64 * params.t_comp * adc_share as f64 + params.shift_add_time;
    ReadCost { latency, energy }
}
