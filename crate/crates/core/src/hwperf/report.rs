use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::area::chip_area;
use super::estimate::fixed_costs;
use super::{ChipPlan, HwError, ReadEnergy};
use crate::config::{DeviceKind, Mode};
use crate::netgraph::{Stage, UnitKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A quantity split by hardware component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Breakdown {
    pub subarray: f64,
    pub buffer: f64,
    pub interconnect: f64,
    pub digital: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.subarray + self.buffer + self.interconnect + self.digital
    }

    fn accumulate(&mut self, o: &Breakdown) {
        self.subarray += o.subarray;
        self.buffer += o.buffer;
        self.interconnect += o.interconnect;
        self.digital += o.digital;
    }

    pub fn components(&self) -> [(&'static str, f64); 4] {
        [
            ("subarray", self.subarray),
            ("buffer", self.buffer),
            ("interconnect", self.interconnect),
            ("digital", self.digital),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub unit: String,
    pub layer: String,
    pub stage: Stage,
    pub kind: UnitKind,
    pub tile_kind: Option<DeviceKind>,
    pub subarrays: usize,
    pub tiles: usize,
    pub macs: u64,
    /// Seconds per inference.
    pub latency: Breakdown,
    /// Joules per inference.
    pub energy: Breakdown,
    /// Subarray read energy by term, joules per inference.
    pub read_energy: ReadEnergy,
    pub cost_model_calls: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tops: f64,
    pub tops_per_w: f64,
    pub tops_per_mm2: f64,
}

/// Per-inference area, latency and energy of a mapped network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub network: String,
    pub samples: u64,
    pub macs_per_inference: u64,
    pub subarrays: usize,
    pub tiles: usize,
    /// mm².
    pub area: Breakdown,
    /// Seconds per inference.
    pub latency: Breakdown,
    /// Joules per inference.
    pub energy: Breakdown,
    pub area_mm2: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub metrics: Metrics,
    pub stages: Vec<StageReport>,
    pub cost_model_calls: u64,
}

/// Throughput, energy efficiency and compute density.
pub fn summarize(macs: u64, area_mm2: f64, latency_s: f64, energy_j: f64) -> Result<Metrics, HwError> {
    for (name, v) in [("area", area_mm2), ("latency", latency_s), ("energy", energy_j)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(HwError::Degenerate(name));
        }
    }
    if macs == 0 {
        return Err(HwError::Degenerate("macs"));
    }
    let ops = 2.0 * macs as f64;
    let tops = ops / latency_s / 1e12;
    Ok(Metrics {
        tops,
        tops_per_w: ops / energy_j / 1e12,
        tops_per_mm2: tops / area_mm2,
    })
}

impl HardwareReport {
    pub(super) fn assemble(
        plan: &ChipPlan,
        mode: Mode,
        samples: u64,
        reads: Vec<(ReadEnergy, u64)>,
    ) -> Result<Self, HwError> {
        let fixed = fixed_costs(plan);
        let mut latency = Breakdown::default();
        let mut energy = Breakdown::default();
        let mut stages = Vec::with_capacity(plan.stages.len());
        let mut calls = 0;
        for ((s, f), (read, n)) in plan.stages.iter().zip(&fixed).zip(reads) {
            let mut e = f.energy;
            e.subarray += read.total();
            latency.accumulate(&f.latency);
            energy.accumulate(&e);
            calls += n;
            stages.push(StageReport {
                unit: s.unit.clone(),
                layer: s.layer.clone(),
                stage: s.stage,
                kind: s.kind,
                tile_kind: s.tile_kind,
                subarrays: s.subarrays,
                tiles: s.tiles,
                macs: s.macs,
                latency: f.latency,
                energy: e,
                read_energy: read,
                cost_model_calls: n,
            });
        }
        let area = chip_area(plan);
        let (area_mm2, latency_s, energy_j) = (area.total(), latency.total(), energy.total());
        Ok(HardwareReport {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            network: plan.network.clone(),
            samples,
            macs_per_inference: plan.macs_per_inference,
            subarrays: plan.subarrays(),
            tiles: plan.tiles,
            metrics: summarize(plan.macs_per_inference, area_mm2, latency_s, energy_j)?,
            area,
            latency,
            energy,
            area_mm2,
            latency_s,
            energy_j,
            stages,
            cost_model_calls: calls,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, HwError> {
        let r: HardwareReport =
            serde_json::from_str(text).map_err(|e| HwError::Parse(e.to_string()))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(HwError::Schema(r.schema_version));
        }
        Ok(r)
    }

    /// Human-readable summary table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            Mode::Trace => "trace",
            Mode::Average => "average",
        };
        let _ = writeln!(out, "network {} ({mode} mode, {} inferences)", self.network, self.samples);
        let _ = writeln!(out, "{:<28}{:>14}", "MACs / inference", self.macs_per_inference);
        let _ = writeln!(out, "{:<28}{:>14}", "subarrays", self.subarrays);
        let _ = writeln!(out, "{:<28}{:>14.6}", "area (mm^2)", self.area_mm2);
        let _ = writeln!(out, "{:<28}{:>14.6e}", "latency (s)", self.latency_s);
        let _ = writeln!(out, "{:<28}{:>14.6e}", "energy (J)", self.energy_j);
        let _ = writeln!(out, "{:<28}{:>14.6}", "throughput (TOPS)", self.metrics.tops);
        let _ = writeln!(out, "{:<28}{:>14.6}", "energy eff. (TOPS/W)", self.metrics.tops_per_w);
        let _ = writeln!(out, "{:<28}{:>14.6}", "compute eff. (TOPS/mm^2)", self.metrics.tops_per_mm2);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<14}{:>10}{:>10}{:>10}", "component", "area %", "lat %", "energy %");
        let pct = |x: f64, t: f64| if t > 0.0 { 100.0 * x / t } else { 0.0 };
        for (((name, a), (_, l)), (_, e)) in self
            .area
            .components()
            .into_iter()
            .zip(self.latency.components())
            .zip(self.energy.components())
        {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}",
                name,
                pct(a, self.area_mm2),
                pct(l, self.latency_s),
                pct(e, self.energy_j)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<14}{:>8}{:>14}{:>14}", "unit", "arrays", "latency (s)", "energy (J)");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{:<14}{:>8}{:>14.4e}{:>14.4e}",
                s.unit,
                s.subarrays,
                s.latency.total(),
                s.energy.total()
            );
        }
        out
    }
}
