use super::{Breakdown, ChipPlan};
use crate::netgraph::UnitKind;

const MM2_PER_M2: f64 = 1e6;

/// Area of one allocated subarray (m²).
pub fn subarray_area(plan: &ChipPlan, stage: &super::StagePlan) -> f64 {
    let Some(kind) = stage.tile_kind else { return 0.0 };
    let p = &plan.cost;
    let (rows, cols) = (stage.subarray_rows as f64, stage.subarray_cols as f64);
    let adcs = stage.subarray_cols.div_ceil(stage.adc_share) as f64;
    rows * cols * p.cell_area(kind)
        + adcs * (p.adc_area(stage.adc_precision) + p.shift_add_area)
        + rows * p.wl_driver_area
}

pub(super) struct Components {
    pub subarray: f64,
    pub buffer: f64,
    pub digital: f64,
}

impl Components {
    pub fn spanned_mm2(&self) -> f64 {
        (self.subarray + self.buffer + self.digital) * MM2_PER_M2
    }
}

pub(super) fn components(plan: &ChipPlan) -> Components {
    let p = &plan.cost;
    let subarray = plan
        .stages
        .iter()
        .map(|s| s.subarrays as f64 * subarray_area(plan, s))
        .sum();
    let buffer_bits = plan.global_buffer_bits + plan.tile_buffer_bits * plan.tiles as u64;
    let softmax_units = plan.stages.iter().filter(|s| s.kind == UnitKind::Softmax).count();
    Components {
        subarray,
        buffer: buffer_bits as f64 * p.buffer_area_per_bit,
        digital: (plan.tiles + softmax_units) as f64 * p.digital_area_per_tile,
    }
}

/// Chip area in mm².
pub fn chip_area(plan: &ChipPlan) -> Breakdown {
    let c = components(plan);
    Breakdown {
        subarray: c.subarray * MM2_PER_M2,
        buffer: c.buffer * MM2_PER_M2,
        interconnect: plan.cost.ic_area_fraction * c.spanned_mm2(),
        digital: c.digital * MM2_PER_M2,
    }
}
