use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tile::{tile, Polarity, TilePlan};
use super::{AdcMode, KernelError, PipelineConfig};
use crate::analog::{build_linear_adc, lossless_adc, AdcSpec, CellArray};
use crate::config::{Design, InputSignMode, OffsetCancellation, OnOffRatio};
use crate::digitmap::{
    check_input, cycle_weights, decompose_weights, input_bit, plane_layout, DummyColumn,
};
use crate::quant::{QuantParams, QuantizedTensor, Signedness};
use crate::tensorio::Tensor;

/// Upper bound on samples fed to quantile calibration.
pub const CALIBRATION_SAMPLES: usize = 16384;

/// Per-call activity statistics for hardware estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct MacTrace {
    pub vectors: usize,
    pub cycles: usize,
    pub bands: usize,
    pub slot_band: Vec<usize>,
    pub slot_rows: Vec<usize>,
    pub slot_cols: Vec<usize>,
    /// Σ normalized conductance over each slot's used cells.
    pub slot_conductance: Vec<f64>,
    pub conversions: u64,
    active: Vec<u32>,
    active_conductance: Vec<f64>,
}

impl MacTrace {
    pub fn slots(&self) -> usize {
        self.slot_band.len()
    }

    /// Active (bit = 1) rows of band `band` in cycle `t` of vector `v`.
    pub fn active(&self, v: usize, t: usize, band: usize) -> u32 {
        self.active[(v * self.cycles + t) * self.bands + band]
    }

    /// Nonzero fraction of the slot's masked input bit-vector.
    pub fn alpha(&self, v: usize, t: usize, slot: usize) -> f64 {
        self.active(v, t, self.slot_band[slot]) as f64 / self.slot_rows[slot] as f64
    }

    /// Σ over active rows of the row's used-cell conductance.
    pub fn active_conductance(&self, v: usize, t: usize, slot: usize) -> f64 {
        self.active_conductance[(v * self.cycles + t) * self.slots() + slot]
    }

    pub fn slot_mean_conductance(&self, slot: usize) -> f64 {
        self.slot_conductance[slot] / (self.slot_rows[slot] * self.slot_cols[slot]) as f64
    }
}

/// Column sums of one call, before digitization.
#[derive(Debug, Clone)]
pub struct AnalogPass {
    pub vectors: usize,
    pub cycles: usize,
    pub cycle_weights: Vec<i64>,
    pub input_scale: f64,
    /// `[vector][cycle][channel]`.
    pub values: Vec<f64>,
    pub trace: MacTrace,
}

/// Integer matmul result; real value = `values · scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct CimOutput {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<i64>,
    pub scale: f64,
}

impl CimOutput {
    pub fn dequantize(&self) -> Tensor {
        let data = self.values.iter().map(|&v| (v as f64 * self.scale) as f32).collect();
        Tensor::new(vec![self.rows, self.cols], data).expect("finite products")
    }
}

/// A weight matrix programmed onto its subarrays.
#[derive(Debug, Clone)]
pub struct ProgrammedMatrix {
    plan: TilePlan,
    arrays: Vec<CellArray>,
    row_conductance: Vec<Vec<f64>>,
    weight_params: QuantParams,
    plane_sig: Vec<i64>,
    dummy_sig: Option<i64>,
    cancel_offset: bool,
    adc_share: usize,
}

impl ProgrammedMatrix {
    /// Programs `w` (`[R, C]`). Noise is drawn slot by slot from `rng`.
    pub fn program<R: Rng + ?Sized>(
        w: &QuantizedTensor,
        cfg: &PipelineConfig,
        rng: &mut R,
    ) -> Result<Self, KernelError> {
        let (rows, cols) = w.as_matrix();
        let bits = w.params().bits;
        let planes = decompose_weights(w, cfg.design, cfg.cell_bits)?;
        let plan = tile(rows, cols, cfg.tile_spec(bits))?;
        let p = plan.planes_per_weight;
        let (sr, sc) = (cfg.subarray_rows, cfg.subarray_cols);
        let dummy = (cfg.design == Design::Design3).then(|| DummyColumn::for_bits(bits, cfg.cell_bits));

        let mut arrays = Vec::with_capacity(plan.slots.len());
        for s in &plan.slots {
            let plane_base = if s.polarity == Polarity::Negative { p } else { 0 };
            let mut digits = vec![0u8; sr * sc];
            let mut used = vec![false; sr * sc];
            for i in 0..s.used_rows {
                let r = s.row_start + i;
                for j in 0..s.weights {
                    let idx = r * cols + s.weight_start + j;
                    for q in 0..p {
                        digits[i * sc + j * p + q] = planes.planes[plane_base + q].digits[idx];
                    }
                }
                if let Some(d) = dummy {
                    digits[i * sc + s.weights * p] = d.digit;
                }
                used[i * sc..i * sc + s.used_cols].fill(true);
            }
            arrays.push(CellArray::program(sr, sc, digits, used, &cfg.device, cfg.cell_bits, rng)?);
        }
        let row_conductance = plan
            .slots
            .iter()
            .zip(&arrays)
            .map(|(s, a)| (0..s.used_rows).map(|i| a.row_conductance(i)).collect())
            .collect();
        let plane_sig = plane_layout(cfg.design, bits, cfg.cell_bits)
            .into_iter()
            .take(p)
            .map(|(_, sig)| sig)
            .collect();
        Ok(ProgrammedMatrix {
            plan,
            arrays,
            row_conductance,
            weight_params: *w.params(),
            plane_sig,
            dummy_sig: dummy.map(|d| d.significance),
            cancel_offset: cfg.offset_cancellation == OffsetCancellation::DummyColumn,
            adc_share: cfg.adc_share,
        })
    }

    pub fn plan(&self) -> &TilePlan {
        &self.plan
    }

    pub fn arrays(&self) -> &[CellArray] {
        &self.arrays
    }

    pub fn weight_params(&self) -> &QuantParams {
        &self.weight_params
    }

    /// Σ conductance over used cells, and the used-cell count.
    pub fn used_conductance(&self) -> (f64, usize) {
        let g = self.row_conductance.iter().flatten().sum();
        (g, self.plan.used_cells())
    }

    /// Bit-serial analog MAC of every vector of `x` (`[V, R]`).
    pub fn analog_pass(
        &self,
        x: &QuantizedTensor,
        sign_mode: InputSignMode,
    ) -> Result<AnalogPass, KernelError> {
        let (vectors, r) = x.as_matrix();
        if r != self.plan.rows {
            return Err(KernelError::Shape(format!(
                "input has {r} features, weights have {} rows",
                self.plan.rows
            )));
        }
        let mode = match x.params().signedness {
            Signedness::Unsigned => InputSignMode::UnsignedBitserial,
            Signedness::Signed => sign_mode,
        };
        let m = x.params().bits;
        for &v in x.values() {
            check_input(v, m, mode)?;
        }
        let plan = &self.plan;
        let cycles = m as usize;
        let (l, b, s) = (plan.channels, plan.bands, plan.slots.len());
        let mut values = vec![0.0; vectors * cycles * l];
        let mut active = vec![0u32; vectors * cycles * b];
        let mut active_g = vec![0.0; vectors * cycles * s];
        let xv = x.values();

        values
            .par_chunks_mut(cycles * l)
            .zip(active.par_chunks_mut(cycles * b))
            .zip(active_g.par_chunks_mut(cycles * s))
            .enumerate()
            .for_each(|(v, ((vals, act), ag))| {
                let xr = &xv[v * r..(v + 1) * r];
                let mut rows_on: Vec<Vec<usize>> = vec![Vec::new(); b];
                let mut d = vec![[0i32; 2]; 0];
                let mut e = vec![[0.0f64; 2]; 0];
                for t in 0..cycles {
                    for (band, on) in rows_on.iter_mut().enumerate() {
                        on.clear();
                        let range = plan.band_rows(band);
                        let start = range.start;
                        on.extend(range.filter(|&i| input_bit(xr[i], t as u32)).map(|i| i - start));
                        act[t * b + band] = on.len() as u32;
                    }
                    for u in &plan.units {
                        let on = &rows_on[u.band];
                        d.clear();
                        d.resize(u.channels, [0; 2]);
                        e.clear();
                        e.resize(u.channels, [0.0; 2]);
                        for (side, &slot) in u.slots.iter().enumerate() {
                            let arr = &self.arrays[slot];
                            let mut g = 0.0;
                            for &i in on {
                                for (acc, &digit) in d.iter_mut().zip(&arr.digit_row(i)[..u.channels]) {
                                    acc[side] += digit as i32;
                                }
                                if arr.is_noisy() {
                                    for (acc, &n) in e.iter_mut().zip(&arr.noise_row(i)[..u.channels]) {
                                        acc[side] += n;
                                    }
                                }
                                g += self.row_conductance[slot][i];
                            }
                            ag[t * s + slot] = g;
                        }
                        let out = &mut vals[t * l + u.channel_offset..t * l + u.channel_offset + u.channels];
                        if u.slots.len() == 2 {
                            for (o, (dd, ee)) in out.iter_mut().zip(d.iter().zip(&e)) {
                                *o = (dd[0] - dd[1]) as f64 + (ee[0] - ee[1]);
                            }
                        } else {
                            let offset = if self.cancel_offset {
                                0.0
                            } else {
                                on.len() as f64 * self.arrays[u.slots[0]].offset()
                            };
                            for (o, (dd, ee)) in out.iter_mut().zip(d.iter().zip(&e)) {
                                *o = dd[0] as f64 + offset + ee[0];
                            }
                        }
                    }
                }
            });

        let trace = MacTrace {
            vectors,
            cycles,
            bands: b,
            slot_band: plan.slots.iter().map(|s| s.band).collect(),
            slot_rows: plan.slots.iter().map(|s| s.used_rows).collect(),
            slot_cols: plan.slots.iter().map(|s| s.used_cols).collect(),
            slot_conductance: self.row_conductance.iter().map(|r| r.iter().sum()).collect(),
            conversions: (vectors * cycles * plan.conversions_per_cycle(self.adc_share)) as u64,
            active,
            active_conductance: active_g,
        };
        Ok(AnalogPass {
            vectors,
            cycles,
            cycle_weights: cycle_weights(m, mode),
            input_scale: x.params().scale,
            values,
            trace,
        })
    }

    /// ADC conversion and shift-and-add; `None` skips quantization.
    pub fn digitize(&self, pass: &AnalogPass, spec: Option<&AdcSpec>) -> CimOutput {
        let plan = &self.plan;
        let (c, l, cycles) = (plan.cols, plan.channels, pass.cycles);
        let p = plan.planes_per_weight;
        let conv = |x: f64| spec.map_or(x, |s| s.convert(x));
        let mut out = vec![0i64; pass.vectors * c];
        out.par_chunks_mut(c).enumerate().for_each(|(v, row)| {
            for u in &plan.units {
                for j in 0..u.weights {
                    let mut acc = 0.0;
                    for (t, &cw) in pass.cycle_weights.iter().enumerate() {
                        let base = (v * cycles + t) * l + u.channel_offset;
                        let ch = &pass.values[base..base + u.channels];
                        let mut inner: f64 = self
                            .plane_sig
                            .iter()
                            .enumerate()
                            .map(|(q, &sig)| sig as f64 * conv(ch[j * p + q]))
                            .sum();
                        if let Some(dsig) = self.dummy_sig {
                            inner += dsig as f64 * conv(ch[u.weights * p]);
                        }
                        acc += cw as f64 * inner;
                    }
                    row[u.weight_start + j] += acc.round() as i64;
                }
            }
        });
        CimOutput {
            rows: pass.vectors,
            cols: c,
            values: out,
            scale: pass.input_scale * self.weight_params.scale,
        }
    }
}

/// Single-ended or differential (Design2) column sums of one cycle.
pub enum ColumnSums<'a> {
    Single(&'a [f64]),
    Differential { pos: &'a [f64], neg: &'a [f64] },
}

/// Removes the on/off offset `active·(2^k-1)/(r-1)` from raw column sums.
pub fn offset_cancel(
    sums: ColumnSums<'_>,
    active: usize,
    cell_bits: u32,
    ratio: OnOffRatio,
    mode: OffsetCancellation,
) -> Vec<f64> {
    match sums {
        ColumnSums::Differential { pos, neg } => pos.iter().zip(neg).map(|(a, b)| a - b).collect(),
        ColumnSums::Single(s) => match mode {
            OffsetCancellation::None => s.to_vec(),
            OffsetCancellation::DummyColumn => {
                let corr = active as f64 * ratio.normalized_offset(cell_bits);
                s.iter().map(|v| v - corr).collect()
            }
        },
    }
}

/// Builds the ADC for `mode`; calibrated ADCs are fitted to `samples`.
pub fn resolve_adc(
    mode: &AdcMode,
    cfg: &PipelineConfig,
    samples: &[f64],
) -> Result<Option<AdcSpec>, KernelError> {
    Ok(match mode {
        AdcMode::Ideal => None,
        AdcMode::Linear {
            precision,
            full_scale,
        } => {
            let [lo, hi] = full_scale.unwrap_or_else(|| cfg.default_full_scale());
            Some(build_linear_adc(*precision, lo, hi)?)
        }
        AdcMode::Calibrated { precision } => {
            if samples.len() <= CALIBRATION_SAMPLES {
                Some(lossless_adc(samples, *precision)?)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let sub: Vec<f64> = index::sample(&mut rng, samples.len(), CALIBRATION_SAMPLES)
                    .into_iter()
                    .map(|i| samples[i])
                    .collect();
                Some(lossless_adc(&sub, *precision)?)
            }
        }
        AdcMode::Custom(spec) => Some(spec.clone()),
    })
}

/// Program, read, digitize: `x` is `[V, R]`, `w` is `[R, C]`.
pub fn cim_matmul<R: Rng + ?Sized>(
    x: &QuantizedTensor,
    w: &QuantizedTensor,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<(CimOutput, MacTrace), KernelError> {
    let prog = ProgrammedMatrix::program(w, cfg, rng)?;
    let pass = prog.analog_pass(x, cfg.input_sign_mode)?;
    let spec = resolve_adc(&cfg.adc, cfg, &pass.values)?;
    let out = prog.digitize(&pass, spec.as_ref());
    Ok((out, pass.trace))
}
