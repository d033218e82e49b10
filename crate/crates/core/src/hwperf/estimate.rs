use std::collections::BTreeMap;

use super::{subarray_read_cost, Breakdown, ChipPlan, HardwareReport, HwError, Mask, ReadEnergy, StagePlan};
use crate::cimkernel::MacTrace;
use crate::config::Mode;
use crate::netgraph::{LayerStats, Stage, UnitKind};

/// Bits moved between the global buffer and the stage's tiles per inference.
pub fn traffic_bits(s: &StagePlan) -> u64 {
    let m = s.input_bits as u64;
    match s.kind {
        UnitKind::Softmax => 2 * s.output_elements as u64 * m,
        UnitKind::Smm | UnitKind::Dmm => {
            let rows = s.tile.as_ref().map_or(0, |t| t.rows) as u64;
            let cols = s.tile.as_ref().map_or(0, |t| t.cols) as u64;
            let input = (s.vectors * s.copies) as u64 * rows * m;
            let output = s.output_elements as u64 * m;
            let operand = if s.kind == UnitKind::Dmm {
                rows * cols * s.copies as u64 * s.weight_bits as u64
            } else {
                0
            };
            input + output + operand
        }
    }
}

/// Digital operations per inference: band accumulation plus activation.
pub fn digital_ops(s: &StagePlan) -> u64 {
    match s.kind {
        UnitKind::Softmax => s.output_elements as u64,
        _ => s.output_elements as u64 * (s.bands() as u64 + 1),
    }
}

fn transfers(bits: u64, width: f64) -> f64 {
    (bits as f64 / width.max(1.0)).ceil()
}

/// Per-stage parts of one inference that do not depend on the data.
#[derive(Debug, Clone, Copy, Default)]
pub(super) struct FixedCost {
    pub compute: f64,
    pub write: f64,
    pub latency: Breakdown,
    pub energy: Breakdown,
}

pub(super) fn fixed_costs(plan: &ChipPlan) -> Vec<FixedCost> {
    let p = &plan.cost;
    let hop = plan.interconnect.hop_distance_mm;
    let mut out: Vec<FixedCost> = plan
        .stages
        .iter()
        .map(|s| {
            let bits = traffic_bits(s);
            let ops = digital_ops(s);
            let compute = if s.tile.is_some() {
                s.cycles() as f64 * s.cycle_latency(p)
            } else {
                0.0
            };
            let write = s.write_rows as f64 * plan.dmm_device.write_latency;
            let (dig_t, dig_e) = match s.kind {
                UnitKind::Softmax => (p.softmax_time_per_element, p.softmax_energy_per_element),
                _ => (p.digital_time_per_op, p.digital_energy_per_op),
            };
            FixedCost {
                compute,
                write,
                latency: Breakdown {
                    subarray: compute + write,
                    buffer: transfers(bits, p.buffer_bandwidth_bits) * p.buffer_cycle_time,
                    interconnect: transfers(bits, p.ic_bus_width_bits) * (p.ic_hop_time + p.ic_time_per_mm * hop),
                    digital: transfers(ops, p.digital_lanes) * dig_t,
                },
                energy: Breakdown {
                    subarray: s.write_cells as f64 * plan.dmm_device.write_energy,
                    buffer: bits as f64 * p.buffer_energy_per_bit,
                    interconnect: bits as f64 * p.ic_energy_per_bit_mm * hop,
                    digital: ops as f64 * dig_e,
                },
            }
        })
        .collect();
    if plan.v_write_overlap {
        // V is written while QKᵀ and softmax run.
        for i in 0..plan.stages.len() {
            if plan.stages[i].stage != Stage::Pv {
                continue;
            }
            let layer = &plan.stages[i].layer;
            let find = |st: Stage| plan.stages.iter().position(|s| s.stage == st && &s.layer == layer);
            let window = find(Stage::QkT).map_or(0.0, |j| out[j].compute)
                + find(Stage::Softmax).map_or(0.0, |j| out[j].latency.digital);
            let f = &mut out[i];
            f.latency.subarray = f.compute + (f.write - window).max(0.0);
        }
    }
    out
}

/// Subarray latency of the attention core of `layer`:
/// K write, V write (hidden behind QKᵀ and softmax when overlapped), both
/// compute stages and softmax.
pub fn attention_core_latency(plan: &ChipPlan, layer: &str) -> Option<f64> {
    let fixed = fixed_costs(plan);
    let find = |st: Stage| plan.stages.iter().position(|s| s.stage == st && s.layer == layer);
    let (qk, sm, pv) = (find(Stage::QkT)?, find(Stage::Softmax)?, find(Stage::Pv)?);
    Some(fixed[qk].latency.subarray + fixed[sm].latency.digital + fixed[pv].latency.subarray)
}

fn add(a: &mut ReadEnergy, b: ReadEnergy, times: f64) {
    a.bitline += b.bitline * times;
    a.wordline += b.wordline * times;
    a.adc += b.adc * times;
    a.shift_add += b.shift_add * times;
}

fn samples_of(s: &StagePlan, vectors: u64, found: &mut Option<u64>) -> Result<(), HwError> {
    let per = (s.vectors * s.copies) as u64;
    if per == 0 || vectors % per != 0 {
        return Err(HwError::Inconsistent(format!(
            "{}: {vectors} vectors is not a multiple of {per} per inference",
            s.unit
        )));
    }
    let n = vectors / per;
    match *found {
        Some(prev) if prev != n => Err(HwError::Inconsistent(format!(
            "{}: {n} inferences, earlier units saw {prev}",
            s.unit
        ))),
        _ => {
            *found = Some(n);
            Ok(())
        }
    }
}

fn finish(
    plan: &ChipPlan,
    mode: Mode,
    samples: Option<u64>,
    reads: Vec<(ReadEnergy, u64)>,
) -> Result<HardwareReport, HwError> {
    let samples = samples.filter(|&n| n > 0).ok_or(HwError::NoSamples)?;
    let per: Vec<(ReadEnergy, u64)> = reads
        .into_iter()
        .map(|(mut e, calls)| {
            let inv = 1.0 / samples as f64;
            e = ReadEnergy {
                bitline: e.bitline * inv,
                wordline: e.wordline * inv,
                adc: e.adc * inv,
                shift_add: e.shift_add * inv,
            };
            (e, calls)
        })
        .collect();
    HardwareReport::assemble(plan, mode, samples, per)
}

/// Costs every read cycle of every slot individually, using its observed
/// activity and the conductance of the rows it drove.
pub fn estimate_trace(
    plan: &ChipPlan,
    traces: &BTreeMap<String, Vec<MacTrace>>,
) -> Result<HardwareReport, HwError> {
    let p = &plan.cost;
    let mut samples = None;
    let mut reads = Vec::with_capacity(plan.stages.len());
    for s in &plan.stages {
        if s.tile.is_none() {
            reads.push((ReadEnergy::default(), 0));
            continue;
        }
        let calls = traces.get(&s.unit).ok_or_else(|| HwError::MissingTrace(s.unit.clone()))?;
        let mut energy = ReadEnergy::default();
        let mut n = 0u64;
        let mut vectors = 0u64;
        for t in calls {
            if t.cycles != s.input_bits as usize {
                return Err(HwError::Inconsistent(format!(
                    "{}: trace has {} cycles, plan expects {}",
                    s.unit, t.cycles, s.input_bits
                )));
            }
            vectors += t.vectors as u64;
            for v in 0..t.vectors {
                for c in 0..t.cycles {
                    for slot in 0..t.slots() {
                        let mask = Mask {
                            rows: t.slot_rows[slot],
                            cols: t.slot_cols[slot],
                        };
                        let active = t.active(v, c, t.slot_band[slot]);
                        let alpha = active as f64 / mask.rows as f64;
                        let g = if active == 0 {
                            0.0
                        } else {
                            t.active_conductance(v, c, slot) / (active as f64 * mask.cols as f64)
                        };
                        let cost =
                            subarray_read_cost(mask, alpha, g, s.cell_bits, s.adc_precision, s.adc_share, p);
                        add(&mut energy, cost.energy, 1.0);
                        n += 1;
                    }
                }
            }
        }
        samples_of(s, vectors, &mut samples)?;
        reads.push((energy, n));
    }
    finish(plan, Mode::Trace, samples, reads)
}

/// Costs each distinct utilization mask once with the unit's average
/// activity and conductance, scaled by how often it is read.
pub fn estimate_average(plan: &ChipPlan, stats: &LayerStats) -> Result<HardwareReport, HwError> {
    let p = &plan.cost;
    let mut samples = None;
    let mut reads = Vec::with_capacity(plan.stages.len());
    for s in &plan.stages {
        if s.tile.is_none() {
            reads.push((ReadEnergy::default(), 0));
            continue;
        }
        let u = stats.get(&s.unit).ok_or_else(|| HwError::MissingStats(s.unit.clone()))?;
        if u.cycles != s.input_bits {
            return Err(HwError::Inconsistent(format!(
                "{}: stats have {} cycles, plan expects {}",
                s.unit, u.cycles, s.input_bits
            )));
        }
        samples_of(s, u.vectors, &mut samples)?;
        let per_copy = (u.vectors / u.copies.max(1) as u64) * u.cycles as u64;
        let mut energy = ReadEnergy::default();
        let mut n = 0u64;
        for m in &u.masks {
            let mask = Mask { rows: m.rows, cols: m.cols };
            let cost = subarray_read_cost(
                mask,
                u.alpha_avg,
                u.g_avg,
                s.cell_bits,
                s.adc_precision,
                s.adc_share,
                p,
            );
            add(&mut energy, cost.energy, (m.count as u64 * per_copy) as f64);
            n += 1;
        }
        reads.push((energy, n));
    }
    finish(plan, Mode::Average, samples, reads)
}

/// Dispatches on `mode`; trace mode needs recorded traces.
pub fn estimate(
    plan: &ChipPlan,
    mode: Mode,
    stats: &LayerStats,
    traces: &BTreeMap<String, Vec<MacTrace>>,
) -> Result<HardwareReport, HwError> {
    match mode {
        Mode::Trace => estimate_trace(plan, traces),
        Mode::Average => estimate_average(plan, stats),
    }
}
