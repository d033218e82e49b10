use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stats::{Accumulator, LayerStats};
use super::{NetError, UnitKind};
use crate::cimkernel::{resolve_adc, CimOutput, MacTrace, PipelineConfig, ProgrammedMatrix};
use crate::config::{Design, QuantConfig, SimulationConfig};
use crate::quant::{calibrate_values, quantize_values, QuantizedTensor, Signedness};
use crate::tensorio::Tensor;

/// Integer matmul executor.
pub trait Backend {
    /// `x` is `[V, R]`; `w` is the float `[R, C]` weight, quantized by the
    /// backend on first use of `unit`.
    fn smm(&mut self, unit: &str, x: &QuantizedTensor, w: &Tensor) -> Result<CimOutput, NetError>;
    /// Runtime operands, `copies` consecutive items per sample.
    fn dmm(
        &mut self,
        unit: &str,
        xs: &[QuantizedTensor],
        operands: &[QuantizedTensor],
        copies: usize,
    ) -> Result<Vec<CimOutput>, NetError>;
}

/// Per-tensor signed quantization of a static weight.
pub fn quantize_weight(w: &Tensor, q: &QuantConfig) -> Result<QuantizedTensor, NetError> {
    let p = calibrate_values(w.data(), q.scheme, q.weight_bits, Signedness::Signed)?;
    Ok(QuantizedTensor::new(w.shape().to_vec(), quantize_values(w.data(), &p), p)?)
}

fn int_matmul(x: &QuantizedTensor, w: &QuantizedTensor) -> Result<CimOutput, NetError> {
    let (v, r) = x.as_matrix();
    let (wr, c) = w.as_matrix();
    if r != wr {
        return Err(NetError::Shape(format!("[{v}, {r}] · [{wr}, {c}]")));
    }
    let (xv, wv) = (x.values(), w.values());
    let mut out = vec![0i64; v * c];
    out.par_chunks_mut(c).enumerate().for_each(|(a, row)| {
        for k in 0..r {
            let xk = xv[a * r + k] as i64;
            for (o, &wk) in row.iter_mut().zip(&wv[k * c..(k + 1) * c]) {
                *o += xk * wk as i64;
            }
        }
    });
    Ok(CimOutput {
        rows: v,
        cols: c,
        values: out,
        scale: x.params().scale * w.params().scale,
    })
}

/// Exact integer arithmetic on the quantized operands.
#[derive(Debug, Clone)]
pub struct SoftwareBackend {
    quant: QuantConfig,
    weights: HashMap<String, QuantizedTensor>,
}

impl SoftwareBackend {
    pub fn new(quant: QuantConfig) -> Self {
        SoftwareBackend {
            quant,
            weights: HashMap::new(),
        }
    }
}

impl Backend for SoftwareBackend {
    fn smm(&mut self, unit: &str, x: &QuantizedTensor, w: &Tensor) -> Result<CimOutput, NetError> {
        if !self.weights.contains_key(unit) {
            let q = quantize_weight(w, &self.quant)?;
            self.weights.insert(unit.to_string(), q);
        }
        int_matmul(x, &self.weights[unit])
    }

    fn dmm(
        &mut self,
        _: &str,
        xs: &[QuantizedTensor],
        operands: &[QuantizedTensor],
        _: usize,
    ) -> Result<Vec<CimOutput>, NetError> {
        xs.iter().zip(operands).map(|(x, w)| int_matmul(x, w)).collect()
    }
}

/// Pipelines for the static and dynamic arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct CimSettings {
    pub quant: QuantConfig,
    pub smm: PipelineConfig,
    pub dmm: PipelineConfig,
}

impl CimSettings {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self, NetError> {
        Ok(CimSettings {
            quant: cfg.quant.clone(),
            smm: PipelineConfig::smm(cfg)?,
            dmm: PipelineConfig::dmm(cfg)?,
        })
    }

    /// Lossless hardware for both array kinds.
    pub fn ideal(quant: QuantConfig, design: Design, cell_bits: u32) -> Self {
        let smm = PipelineConfig::ideal(design, cell_bits);
        CimSettings {
            quant,
            dmm: smm.clone(),
            smm,
        }
    }
}

/// Functional CIM execution with per-unit statistics.
#[derive(Debug)]
pub struct CimBackend {
    settings: CimSettings,
    rng: ChaCha8Rng,
    programmed: HashMap<String, ProgrammedMatrix>,
    order: Vec<String>,
    acc: HashMap<String, Accumulator>,
    traces: Option<BTreeMap<String, Vec<MacTrace>>>,
}

impl CimBackend {
    pub fn new(settings: CimSettings, seed: u64) -> Self {
        CimBackend {
            settings,
            rng: ChaCha8Rng::seed_from_u64(seed),
            programmed: HashMap::new(),
            order: Vec::new(),
            acc: HashMap::new(),
            traces: None,
        }
    }

    /// Keep every call's `MacTrace` (needed for trace-mode estimation).
    pub fn record_traces(&mut self, on: bool) {
        self.traces = on.then(BTreeMap::new);
    }

    pub fn settings(&self) -> &CimSettings {
        &self.settings
    }

    pub fn stats(&self) -> LayerStats {
        LayerStats {
            units: self.order.iter().map(|u| self.acc[u].finish(u)).collect(),
        }
    }

    pub fn finish(self) -> (LayerStats, BTreeMap<String, Vec<MacTrace>>) {
        let stats = self.stats();
        (stats, self.traces.unwrap_or_default())
    }

    fn accumulator(&mut self, unit: &str, kind: UnitKind, copies: usize, prog: &ProgrammedMatrix) -> &mut Accumulator {
        if !self.acc.contains_key(unit) {
            self.order.push(unit.to_string());
            self.acc
                .insert(unit.to_string(), Accumulator::new(kind, copies, prog.plan().masks()));
        }
        self.acc.get_mut(unit).expect("inserted")
    }

    fn keep(&mut self, unit: &str, trace: MacTrace) {
        if let Some(t) = self.traces.as_mut() {
            t.entry(unit.to_string()).or_default().push(trace);
        }
    }
}

impl Backend for CimBackend {
    fn smm(&mut self, unit: &str, x: &QuantizedTensor, w: &Tensor) -> Result<CimOutput, NetError> {
        if !self.programmed.contains_key(unit) {
            let wq = quantize_weight(w, &self.settings.quant)?;
            let prog = ProgrammedMatrix::program(&wq, &self.settings.smm, &mut self.rng)?;
            let (g, cells) = prog.used_conductance();
            self.accumulator(unit, UnitKind::Smm, 1, &prog).add_arrays(g, cells);
            self.programmed.insert(unit.to_string(), prog);
        }
        let cfg = &self.settings.smm;
        let prog = &self.programmed[unit];
        let pass = prog.analog_pass(x, cfg.input_sign_mode)?;
        let spec = resolve_adc(&cfg.adc, cfg, &pass.values)?;
        let out = prog.digitize(&pass, spec.as_ref());
        self.acc.get_mut(unit).expect("programmed").add_trace(&pass.trace);
        self.keep(unit, pass.trace);
        Ok(out)
    }

    fn dmm(
        &mut self,
        unit: &str,
        xs: &[QuantizedTensor],
        operands: &[QuantizedTensor],
        copies: usize,
    ) -> Result<Vec<CimOutput>, NetError> {
        let cfg = self.settings.dmm.clone();
        let mut progs = Vec::with_capacity(operands.len());
        for o in operands {
            progs.push(ProgrammedMatrix::program(o, &cfg, &mut self.rng)?);
        }
        let passes = xs
            .iter()
            .zip(&progs)
            .map(|(x, p)| p.analog_pass(x, cfg.input_sign_mode))
            .collect::<Result<Vec<_>, _>>()?;
        let pooled: Vec<f64> = passes.iter().flat_map(|p| p.values.iter().copied()).collect();
        let spec = resolve_adc(&cfg.adc, &cfg, &pooled)?;
        let outs = progs
            .iter()
            .zip(&passes)
            .map(|(p, pass)| p.digitize(pass, spec.as_ref()))
            .collect();
        for (prog, pass) in progs.iter().zip(passes) {
            let (g, cells) = prog.used_conductance();
            let acc = self.accumulator(unit, UnitKind::Dmm, copies, prog);
            acc.add_arrays(g, cells);
            acc.add_trace(&pass.trace);
            self.keep(unit, pass.trace);
        }
        Ok(outs)
    }
}
