use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::UnitKind;
use crate::cimkernel::MacTrace;
use crate::hwperf::Mask;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskCount {
    pub rows: usize,
    pub cols: usize,
    pub count: usize,
}

/// Activity statistics of one matmul unit over a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStats {
    pub unit: String,
    pub kind: UnitKind,
    /// Input vectors presented, summed over copies.
    pub vectors: u64,
    pub cycles: u32,
    pub copies: usize,
    /// Mean over vectors, cycles and slots of the masked nonzero fraction.
    pub alpha_avg: f64,
    /// Mean normalized conductance over every used cell programmed.
    pub g_avg: f64,
    /// Utilization masks over all copies' slots.
    pub masks: Vec<MaskCount>,
    pub conversions: u64,
    /// Kernel calls (one per DMM operand programmed).
    pub calls: u64,
}

impl UnitStats {
    pub fn slots(&self) -> usize {
        self.masks.iter().map(|m| m.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub units: Vec<UnitStats>,
}

impl LayerStats {
    pub fn get(&self, unit: &str) -> Option<&UnitStats> {
        self.units.iter().find(|u| u.unit == unit)
    }
}

#[derive(Debug, Clone)]
pub(super) struct Accumulator {
    kind: UnitKind,
    copies: usize,
    cycles: u32,
    vectors: u64,
    alpha: NeumaierSum,
    alpha_terms: u64,
    conductance: NeumaierSum,
    cells: u64,
    masks: BTreeMap<Mask, usize>,
    conversions: u64,
    calls: u64,
}

impl Accumulator {
    pub(super) fn new(kind: UnitKind, copies: usize, masks: BTreeMap<Mask, usize>) -> Self {
        Accumulator {
            kind,
            copies,
            cycles: 0,
            vectors: 0,
            alpha: NeumaierSum::default(),
            alpha_terms: 0,
            conductance: NeumaierSum::default(),
            cells: 0,
            masks: masks.into_iter().map(|(m, c)| (m, c * copies)).collect(),
            conversions: 0,
            calls: 0,
        }
    }

    pub(super) fn add_arrays(&mut self, conductance: f64, cells: usize) {
        self.conductance.add(conductance);
        self.cells += cells as u64;
    }

    pub(super) fn add_trace(&mut self, t: &MacTrace) {
        self.cycles = t.cycles as u32;
        self.vectors += t.vectors as u64;
        self.conversions += t.conversions;
        self.calls += 1;
        for v in 0..t.vectors {
            for c in 0..t.cycles {
                for s in 0..t.slots() {
                    self.alpha.add(t.alpha(v, c, s));
                }
            }
        }
        self.alpha_terms += (t.vectors * t.cycles * t.slots()) as u64;
    }

    pub(super) fn finish(&self, unit: &str) -> UnitStats {
        UnitStats {
            unit: unit.to_string(),
            kind: self.kind,
            vectors: self.vectors,
            cycles: self.cycles,
            copies: self.copies,
            alpha_avg: if self.alpha_terms == 0 {
                0.0
            } else {
                self.alpha.value() / self.alpha_terms as f64
            },
            g_avg: if self.cells == 0 {
                0.0
            } else {
                self.conductance.value() / self.cells as f64
            },
            masks: self
                .masks
                .iter()
                .map(|(m, &count)| MaskCount {
                    rows: m.rows,
                    cols: m.cols,
                    count,
                })
                .collect(),
            conversions: self.conversions,
            calls: self.calls,
        }
    }
}
