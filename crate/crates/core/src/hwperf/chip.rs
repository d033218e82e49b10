use serde::Serialize;

use super::{subarray_read_cost, CostParams, HwError};
use crate::cimkernel::{tile, TilePlan, TileSpec};
use crate::config::{DeviceKind, DeviceModel, SimulationConfig};
use crate::netgraph::{Network, Stage, UnitKind};

/// One network stage mapped onto tiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StagePlan {
    pub unit: String,
    pub layer: String,
    pub stage: Stage,
    pub kind: UnitKind,
    /// `None` for digital stages.
    pub tile_kind: Option<DeviceKind>,
    pub tile: Option<TilePlan>,
    pub copies: usize,
    pub subarrays: usize,
    pub tiles: usize,
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub cell_bits: u32,
    pub adc_precision: u32,
    pub adc_share: usize,
    pub input_bits: u32,
    pub weight_bits: u32,
    /// Input vectors per copy per inference.
    pub vectors: usize,
    pub macs: u64,
    /// Elements produced per inference.
    pub output_elements: usize,
    /// Runtime-written cells per inference (DMM operands).
    pub write_cells: u64,
    /// Rows written per DMM subarray; rows of one subarray are written serially.
    pub write_rows: usize,
}

impl StagePlan {
    /// Seconds per bit-serial read cycle.
    pub fn cycle_latency(&self, params: &CostParams) -> f64 {
        let mask = crate::hwperf::Mask {
            rows: self.subarray_rows,
            cols: self.subarray_cols,
        };
        subarray_read_cost(mask, 0.0, 0.0, self.cell_bits, self.adc_precision, self.adc_share, params)
            .latency
    }

    /// Read cycles per inference on each copy.
    pub fn cycles(&self) -> u64 {
        (self.vectors * self.input_bits as usize) as u64
    }

    pub fn bands(&self) -> usize {
        self.tile.as_ref().map_or(1, |t| t.bands)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interconnect {
    pub topology: &'static str,
    /// Area the tree spans (everything but the interconnect itself), mm².
    pub spanned_area_mm2: f64,
    /// Mean source-to-root wire length, mm.
    pub hop_distance_mm: f64,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipPlan {
    pub network: String,
    pub stages: Vec<StagePlan>,
    pub smm_device: DeviceModel,
    pub dmm_device: DeviceModel,
    pub global_buffer_bits: u64,
    pub tile_buffer_bits: u64,
    pub tiles: usize,
    pub v_write_overlap: bool,
    pub interconnect: Interconnect,
    pub cost: CostParams,
    pub macs_per_inference: u64,
}

impl ChipPlan {
    pub fn stage(&self, unit: &str) -> Option<&StagePlan> {
        self.stages.iter().find(|s| s.unit == unit)
    }

    pub fn subarrays(&self) -> usize {
        self.stages.iter().map(|s| s.subarrays).sum()
    }
}

/// Maps every unit of `net`: static matmuls onto tiles of the main device,
/// dynamic ones onto tiles of `arch.dmm_device`, softmax onto digital logic.
pub fn build_chip(net: &Network, cfg: &SimulationConfig) -> Result<ChipPlan, HwError> {
    let arch = &cfg.arch;
    let per_tile = arch.subarrays_per_pe * arch.pes_per_tile;
    let n = cfg.quant.weight_bits;
    let m = cfg.quant.input_bits;
    let mut stages = Vec::new();
    let mut largest_activation = (net.input_elements() as u64) * m as u64;
    for u in net.units() {
        largest_activation = largest_activation.max(u.output_elements as u64 * m as u64);
        let (device, rows, cols, cell_bits) = match u.kind {
            UnitKind::Smm => (&cfg.device, arch.subarray_rows, arch.subarray_cols, cfg.mapping.cell_bits),
            UnitKind::Dmm => (
                &arch.dmm_device,
                arch.dmm_subarray_rows,
                arch.dmm_subarray_cols,
                cfg.mapping.cell_bits.min(arch.dmm_device.cell_bits_max),
            ),
            UnitKind::Softmax => {
                stages.push(StagePlan {
                    unit: u.id.clone(),
                    layer: u.layer.clone(),
                    stage: u.stage,
                    kind: u.kind,
                    tile_kind: None,
                    tile: None,
                    copies: u.copies,
                    subarrays: 0,
                    tiles: 0,
                    subarray_rows: 0,
                    subarray_cols: 0,
                    cell_bits: 0,
                    adc_precision: 0,
                    adc_share: 1,
                    input_bits: m,
                    weight_bits: 0,
                    vectors: 0,
                    macs: 0,
                    output_elements: u.output_elements,
                    write_cells: 0,
                    write_rows: 0,
                });
                continue;
            }
        };
        let plan = tile(
            u.rows,
            u.cols,
            TileSpec {
                subarray_rows: rows,
                subarray_cols: cols,
                design: cfg.mapping.design,
                weight_bits: n,
                cell_bits,
            },
        )?;
        let subarrays = plan.slots.len() * u.copies;
        let dmm = u.kind == UnitKind::Dmm;
        stages.push(StagePlan {
            unit: u.id.clone(),
            layer: u.layer.clone(),
            stage: u.stage,
            kind: u.kind,
            tile_kind: Some(device.kind),
            copies: u.copies,
            subarrays,
            tiles: subarrays.div_ceil(per_tile),
            subarray_rows: rows,
            subarray_cols: cols,
            cell_bits,
            adc_precision: cfg.adc.precision,
            adc_share: arch.adc_share.min(cols),
            input_bits: m,
            weight_bits: n,
            vectors: u.vectors,
            macs: u.macs_per_sample(),
            output_elements: u.output_elements,
            write_cells: if dmm { (plan.used_cells() * u.copies) as u64 } else { 0 },
            write_rows: if dmm { plan.slots.iter().map(|s| s.used_rows).max().unwrap_or(0) } else { 0 },
            tile: Some(plan),
        });
    }
    let tiles: usize = stages.iter().map(|s| s.tiles).sum();
    let tile_buffer_bits = cfg.cost.tile_buffer_bits as u64;
    let mut plan = ChipPlan {
        network: net.name.clone(),
        macs_per_inference: stages.iter().map(|s| s.macs).sum(),
        stages,
        smm_device: cfg.device.clone(),
        dmm_device: arch.dmm_device.clone(),
        global_buffer_bits: largest_activation,
        tile_buffer_bits,
        tiles,
        v_write_overlap: arch.v_write_overlap,
        interconnect: Interconnect {
            topology: "h-tree",
            spanned_area_mm2: 0.0,
            hop_distance_mm: 0.0,
            leaves: tiles,
        },
        cost: cfg.cost.clone(),
    };
    let spanned = super::area::components(&plan).spanned_mm2();
    plan.interconnect.spanned_area_mm2 = spanned;
    plan.interconnect.hop_distance_mm = 0.5 * spanned.sqrt();
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Design;
    use crate::tensorio::{synth_model, NetworkDesc};

    #[test]
    fn cnn_is_all_envm() {
        let b = synth_model(1, &NetworkDesc::tiny_cnn()).unwrap();
        let plan = build_chip(&b.network().unwrap(), &SimulationConfig::example()).unwrap();
        assert!(plan.stages.iter().all(|s| s.tile_kind == Some(DeviceKind::Envm)));
        assert!(plan.interconnect.hop_distance_mm > 0.0);
    }

    #[test]
    fn attention_dmm_on_sram() {
        let b = synth_model(1, &NetworkDesc::tiny_attention(1)).unwrap();
        let plan = build_chip(&b.network().unwrap(), &SimulationConfig::example()).unwrap();
        for s in &plan.stages {
            let expect = match s.kind {
                UnitKind::Smm => Some(DeviceKind::Envm),
                UnitKind::Dmm => Some(DeviceKind::Sram),
                UnitKind::Softmax => None,
            };
            assert_eq!(s.tile_kind, expect, "{}", s.unit);
        }
        assert!(plan.stage("attn.qk").unwrap().write_cells > 0);
    }

    #[test]
    fn design2_doubles_subarrays() {
        let b = synth_model(1, &NetworkDesc::tiny_cnn()).unwrap();
        let net = b.network().unwrap();
        let mut cfg = SimulationConfig::example();
        cfg.mapping.design = Design::Design2;
        let d2 = build_chip(&net, &cfg).unwrap().subarrays();
        cfg.mapping.design = Design::Design3;
        let d3 = build_chip(&net, &cfg).unwrap().subarrays();
        assert_eq!(d2, 2 * d3);
    }
}
