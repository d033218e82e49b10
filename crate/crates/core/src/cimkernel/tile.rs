use std::collections::BTreeMap;

use serde::Serialize;

use super::KernelError;
use crate::config::Design;
use crate::digitmap::{extra_columns_per_subarray, planes_per_weight};
use crate::hwperf::Mask;

/// Geometry and encoding a weight matrix is tiled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TileSpec {
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub design: Design,
    pub weight_bits: u32,
    pub cell_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Single,
    Positive,
    Negative,
}

/// One physical subarray.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotPlan {
    pub band: usize,
    pub unit: usize,
    pub polarity: Polarity,
    pub row_start: usize,
    pub used_rows: usize,
    /// First logical output column stored here.
    pub weight_start: usize,
    pub weights: usize,
    /// Digit columns plus the dummy column, if any.
    pub used_cols: usize,
}

impl SlotPlan {
    pub fn mask(&self) -> Mask {
        Mask {
            rows: self.used_rows,
            cols: self.used_cols,
        }
    }
}

/// Slots whose columns feed the same ADC channels: a single slot, or a
/// Design2 positive/negative pair read differentially.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReadUnit {
    pub band: usize,
    pub weight_start: usize,
    pub weights: usize,
    pub channels: usize,
    /// Offset of this unit's first channel in a cycle's channel vector.
    pub channel_offset: usize,
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilePlan {
    pub spec: TileSpec,
    /// Logical rows (input features).
    pub rows: usize,
    /// Logical columns (output features).
    pub cols: usize,
    pub planes_per_weight: usize,
    pub weights_per_slot: usize,
    pub bands: usize,
    pub units_per_band: usize,
    pub slots: Vec<SlotPlan>,
    pub units: Vec<ReadUnit>,
    pub channels: usize,
}

impl TilePlan {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Distinct utilization masks with their slot counts.
    pub fn masks(&self) -> BTreeMap<Mask, usize> {
        let mut m = BTreeMap::new();
        for s in &self.slots {
            *m.entry(s.mask()).or_insert(0) += 1;
        }
        m
    }

    pub fn used_cells(&self) -> usize {
        self.slots.iter().map(|s| s.used_rows * s.used_cols).sum()
    }

    /// ADC conversions per input cycle.
    pub fn conversions_per_cycle(&self, adc_share: usize) -> usize {
        self.slots.iter().map(|s| s.used_cols.div_ceil(adc_share)).sum()
    }

    pub fn band_rows(&self, band: usize) -> std::ops::Range<usize> {
        let start = band * self.spec.subarray_rows;
        start..(start + self.spec.subarray_rows).min(self.rows)
    }
}

pub fn tile(rows: usize, cols: usize, spec: TileSpec) -> Result<TilePlan, KernelError> {
    if rows == 0 || cols == 0 {
        return Err(KernelError::Geometry(format!("empty {rows}×{cols} matrix")));
    }
    let planes = planes_per_weight(spec.design, spec.weight_bits, spec.cell_bits);
    let extra = extra_columns_per_subarray(spec.design);
    let weights_per_slot = spec.subarray_cols.saturating_sub(extra) / planes;
    if weights_per_slot == 0 || spec.subarray_rows == 0 {
        return Err(KernelError::Geometry(format!(
            "{}×{} subarray cannot hold one {}-column weight",
            spec.subarray_rows,
            spec.subarray_cols,
            planes + extra
        )));
    }
    let bands = rows.div_ceil(spec.subarray_rows);
    let units_per_band = cols.div_ceil(weights_per_slot);
    let polarities: &[Polarity] = match spec.design {
        Design::Design2 => &[Polarity::Positive, Polarity::Negative],
        _ => &[Polarity::Single],
    };
    let mut slots = Vec::new();
    let mut units = Vec::new();
    let mut channel_offset = 0;
    for band in 0..bands {
        let row_start = band * spec.subarray_rows;
        let used_rows = (rows - row_start).min(spec.subarray_rows);
        for g in 0..units_per_band {
            let weight_start = g * weights_per_slot;
            let weights = (cols - weight_start).min(weights_per_slot);
            let used_cols = weights * planes + extra;
            let unit = units.len();
            let mut ids = Vec::new();
            for &polarity in polarities {
                ids.push(slots.len());
                slots.push(SlotPlan {
                    band,
                    unit,
                    polarity,
                    row_start,
                    used_rows,
                    weight_start,
                    weights,
                    used_cols,
                });
            }
            units.push(ReadUnit {
                band,
                weight_start,
                weights,
                channels: used_cols,
                channel_offset,
                slots: ids,
            });
            channel_offset += used_cols;
        }
    }
    Ok(TilePlan {
        spec,
        rows,
        cols,
        planes_per_weight: planes,
        weights_per_slot,
        bands,
        units_per_band,
        slots,
        units,
        channels: channel_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(design: Design, bits: u32, k: u32) -> TileSpec {
        TileSpec {
            subarray_rows: 128,
            subarray_cols: 128,
            design,
            weight_bits: bits,
            cell_bits: k,
        }
    }

    #[test]
    fn design3_square_layer() {
        let p = tile(128, 128, spec(Design::Design3, 4, 2)).unwrap();
        assert_eq!((p.bands, p.units_per_band), (1, 3));
        assert_eq!(p.slots.len(), 3);
        assert_eq!(p.slots[0].used_cols, 127);
        assert_eq!(p.slots[2].weights, 2);
        assert_eq!(p.slots[2].used_cols, 5);
    }

    #[test]
    fn single_column() {
        let p = tile(64, 1, spec(Design::Design1, 4, 2)).unwrap();
        assert_eq!(p.slots.len(), 1);
        assert_eq!(p.slots[0].mask(), Mask { rows: 64, cols: 3 });
    }

    #[test]
    fn design2_doubles_design3() {
        for (r, c) in [(128, 128), (300, 70), (5, 500)] {
            let d2 = tile(r, c, spec(Design::Design2, 4, 2)).unwrap();
            let d3 = tile(r, c, spec(Design::Design3, 4, 2)).unwrap();
            assert!(d2.slots.len() >= d3.slots.len());
            assert_eq!(d2.slots.len(), 2 * d2.units.len());
        }
        let d2 = tile(128, 128, spec(Design::Design2, 4, 2)).unwrap();
        assert_eq!(d2.slots.len(), 4);
    }

    #[test]
    fn slots_cover_matrix_once() {
        for design in Design::ALL {
            let p = tile(300, 77, spec(design, 5, 2)).unwrap();
            let mut hits = vec![0u32; 300 * 77];
            for s in p.slots.iter().filter(|s| s.polarity != Polarity::Negative) {
                for r in s.row_start..s.row_start + s.used_rows {
                    for c in s.weight_start..s.weight_start + s.weights {
                        hits[r * 77 + c] += 1;
                    }
                }
            }
            assert!(hits.iter().all(|&h| h == 1), "{design}");
        }
    }

    #[test]
    fn too_narrow_subarray() {
        let mut s = spec(Design::Design3, 8, 1);
        s.subarray_cols = 8;
        assert!(matches!(tile(4, 4, s), Err(KernelError::Geometry(_))));
    }
}
