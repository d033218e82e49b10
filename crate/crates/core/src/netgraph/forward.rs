use std::collections::BTreeMap;

use rayon::prelude::*;

use super::backend::{Backend, CimBackend, CimSettings, SoftwareBackend};
use super::stats::LayerStats;
use super::{AttentionLayer, ConvLayer, Layer, LinearLayer, NetError, Network};
use crate::cimkernel::{CimOutput, MacTrace};
use crate::config::{QuantConfig, SimulationConfig};
use crate::quant::{calibrate_values, quantize_values, QuantizedTensor, Signedness};
use crate::tensorio::Tensor;

/// Row-major `[rows, k] · [k, cols]` in f32.
pub fn matmul_f32(a: &[f32], rows: usize, k: usize, b: &[f32], cols: usize) -> Vec<f32> {
    assert_eq!(a.len(), rows * k);
    assert_eq!(b.len(), k * cols);
    let mut out = vec![0.0f32; rows * cols];
    out.par_chunks_mut(cols.max(1)).enumerate().for_each(|(r, row)| {
        for (kk, &av) in a[r * k..(r + 1) * k].iter().enumerate() {
            for (o, &bv) in row.iter_mut().zip(&b[kk * cols..(kk + 1) * cols]) {
                *o += av * bv;
            }
        }
    });
    out
}

/// Numerically stable softmax over each row of length `n`.
pub fn softmax_rows(x: &mut [f32], n: usize) {
    for row in x.chunks_mut(n) {
        let m = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Executes the matmuls of a forward pass.
trait Engine {
    /// `x` is `[V, R]`, `w` is `[R, C]`.
    fn smm(&mut self, unit: &str, x: &Tensor, w: &Tensor) -> Result<Tensor, NetError>;
    /// Item `i` multiplies `xs[i]` by `operands[i]`; items are grouped by
    /// sample, `copies` consecutive items per sample.
    fn dmm(
        &mut self,
        unit: &str,
        xs: &[Tensor],
        operands: &[Tensor],
        copies: usize,
        x_unsigned: bool,
    ) -> Result<Vec<Tensor>, NetError>;
}

struct Reference;

impl Engine for Reference {
    fn smm(&mut self, _: &str, x: &Tensor, w: &Tensor) -> Result<Tensor, NetError> {
        let (r, c) = (w.shape()[0], w.shape()[1]);
        let v = x.len() / r;
        Ok(Tensor::new(vec![v, c], matmul_f32(x.data(), v, r, w.data(), c))?)
    }

    fn dmm(
        &mut self,
        unit: &str,
        xs: &[Tensor],
        operands: &[Tensor],
        _: usize,
        _: bool,
    ) -> Result<Vec<Tensor>, NetError> {
        xs.iter().zip(operands).map(|(x, w)| self.smm(unit, x, w)).collect()
    }
}

struct Quantized<'a> {
    backend: &'a mut dyn Backend,
    quant: QuantConfig,
}

impl Quantized<'_> {
    fn quantize(&self, x: &Tensor, bits: u32, sign: Signedness) -> Result<QuantizedTensor, NetError> {
        let p = calibrate_values(x.data(), self.quant.scheme, bits, sign)?;
        Ok(QuantizedTensor::new(x.shape().to_vec(), quantize_values(x.data(), &p), p)?)
    }
}

fn concat(ts: &[Tensor]) -> Vec<f32> {
    ts.iter().flat_map(|t| t.data().iter().copied()).collect()
}

impl Engine for Quantized<'_> {
    fn smm(&mut self, unit: &str, x: &Tensor, w: &Tensor) -> Result<Tensor, NetError> {
        let xq = self.quantize(x, self.quant.input_bits, Signedness::Signed)?;
        Ok(self.backend.smm(unit, &xq, w)?.dequantize())
    }

    fn dmm(
        &mut self,
        unit: &str,
        xs: &[Tensor],
        operands: &[Tensor],
        copies: usize,
        x_unsigned: bool,
    ) -> Result<Vec<Tensor>, NetError> {
        let (scheme, m, n) = (self.quant.scheme, self.quant.input_bits, self.quant.weight_bits);
        let sign = if x_unsigned {
            Signedness::Unsigned
        } else {
            Signedness::Signed
        };
        let xp = calibrate_values(&concat(xs), scheme, m, sign)?;
        let xqs = xs
            .iter()
            .map(|x| QuantizedTensor::new(x.shape().to_vec(), quantize_values(x.data(), &xp), xp))
            .collect::<Result<Vec<_>, _>>()?;
        let mut oqs = Vec::with_capacity(operands.len());
        for group in operands.chunks(copies) {
            let p = calibrate_values(&concat(group), scheme, n, Signedness::Signed)?;
            for o in group {
                oqs.push(QuantizedTensor::new(
                    o.shape().to_vec(),
                    quantize_values(o.data(), &p),
                    p,
                )?);
            }
        }
        Ok(self
            .backend
            .dmm(unit, &xqs, &oqs, copies)?
            .iter()
            .map(CimOutput::dequantize)
            .collect())
    }
}

fn im2col(x: &[f32], layer: &ConvLayer, samples: usize) -> Vec<f32> {
    let [c, h, w] = layer.in_shape;
    let [_, oh, ow] = layer.out_shape;
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding as isize);
    let cols = c * k * k;
    let mut out = vec![0.0f32; samples * oh * ow * cols];
    out.par_chunks_mut(oh * ow * cols)
        .enumerate()
        .for_each(|(n, sample)| {
            let img = &x[n * c * h * w..(n + 1) * c * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &mut sample[(oy * ow + ox) * cols..(oy * ow + ox + 1) * cols];
                    for ch in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - p;
                                let ix = (ox * s + kx) as isize - p;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    row[(ch * k + ky) * k + kx] =
                                        img[(ch * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        });
    out
}

fn bias_relu(out: &mut [f32], cols: usize, bias: Option<&[f32]>, relu: bool) {
    for row in out.chunks_mut(cols) {
        if let Some(b) = bias {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        if relu {
            for o in row.iter_mut() {
                *o = o.max(0.0);
            }
        }
    }
}

fn conv<E: Engine>(e: &mut E, l: &ConvLayer, x: &Tensor, samples: usize) -> Result<Tensor, NetError> {
    let [cout, oh, ow] = l.out_shape;
    let k = l.weight.shape()[0];
    let cols = Tensor::new(vec![samples * oh * ow, k], im2col(x.data(), l, samples))?;
    let mut mm = e.smm(&l.name, &cols, &l.weight)?.into_data();
    bias_relu(&mut mm, cout, l.bias.as_deref(), l.relu);
    let positions = oh * ow;
    let mut out = vec![0.0f32; samples * cout * positions];
    for n in 0..samples {
        for p in 0..positions {
            for co in 0..cout {
                out[(n * cout + co) * positions + p] = mm[(n * positions + p) * cout + co];
            }
        }
    }
    Ok(Tensor::new(vec![samples, cout, oh, ow], out)?)
}

fn linear<E: Engine>(e: &mut E, l: &LinearLayer, x: &Tensor, samples: usize) -> Result<Tensor, NetError> {
    let flat = Tensor::new(vec![samples, l.in_features], x.data().to_vec())?;
    let mut mm = e.smm(&l.name, &flat, &l.weight)?.into_data();
    bias_relu(&mut mm, l.out_features, l.bias.as_deref(), l.relu);
    Ok(Tensor::new(vec![samples, l.out_features], mm)?)
}

/// Columns `[start, start+width)` of rows `rows` of a row-major matrix.
fn block(data: &[f32], stride: usize, rows: std::ops::Range<usize>, start: usize, width: usize) -> Vec<f32> {
    rows.flat_map(|r| data[r * stride + start..r * stride + start + width].iter().copied())
        .collect()
}

fn transposed(data: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    (0..cols)
        .flat_map(|c| (0..rows).map(move |r| data[r * cols + c]))
        .collect()
}

fn attention<E: Engine>(
    e: &mut E,
    a: &AttentionLayer,
    x: &Tensor,
    samples: usize,
) -> Result<Tensor, NetError> {
    let (d, s, h, dh) = (a.d_model, a.seq_len, a.heads, a.head_dim());
    let id = |stage: &str| format!("{}.{stage}", a.name);
    let x2 = Tensor::new(vec![samples * s, d], x.data().to_vec())?;
    let qkv = e.smm(&id("qkv"), &x2, &a.wqkv)?;
    let qkv = qkv.data();

    let mut qs = Vec::with_capacity(samples * h);
    let mut kts = Vec::with_capacity(samples * h);
    let mut vs = Vec::with_capacity(samples * h);
    for n in 0..samples {
        let rows = n * s..(n + 1) * s;
        for head in 0..h {
            qs.push(Tensor::new(vec![s, dh], block(qkv, 3 * d, rows.clone(), head * dh, dh))?);
            let k = block(qkv, 3 * d, rows.clone(), d + head * dh, dh);
            kts.push(Tensor::new(vec![dh, s], transposed(&k, s, dh))?);
            vs.push(Tensor::new(vec![s, dh], block(qkv, 3 * d, rows.clone(), 2 * d + head * dh, dh))?);
        }
    }
    let scores = e.dmm(&id("qk"), &qs, &kts, h, false)?;
    let inv = 1.0 / (dh as f32).sqrt();
    let probs = scores
        .into_iter()
        .map(|t| {
            let mut v: Vec<f32> = t.into_data().into_iter().map(|x| x * inv).collect();
            softmax_rows(&mut v, s);
            Tensor::new(vec![s, s], v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let heads_out = e.dmm(&id("pv"), &probs, &vs, h, true)?;

    let mut concat = vec![0.0f32; samples * s * d];
    for (i, o) in heads_out.iter().enumerate() {
        let (n, head) = (i / h, i % h);
        for r in 0..s {
            let dst = (n * s + r) * d + head * dh;
            concat[dst..dst + dh].copy_from_slice(&o.data()[r * dh..(r + 1) * dh]);
        }
    }
    let concat = Tensor::new(vec![samples * s, d], concat)?;
    let proj = e.smm(&id("wo"), &concat, &a.wo)?;
    let x1: Vec<f32> = x.data().iter().zip(proj.data()).map(|(a, b)| a + b).collect();
    let x1 = Tensor::new(vec![samples * s, d], x1)?;
    let mut hidden = e.smm(&id("ffn1"), &x1, &a.w1)?.into_data();
    bias_relu(&mut hidden, a.d_ff, None, true);
    let hidden = Tensor::new(vec![samples * s, a.d_ff], hidden)?;
    let ff = e.smm(&id("ffn2"), &hidden, &a.w2)?;
    let out: Vec<f32> = x1.data().iter().zip(ff.data()).map(|(a, b)| a + b).collect();
    Ok(Tensor::new(vec![samples, s, d], out)?)
}

fn forward<E: Engine>(net: &Network, inputs: &Tensor, e: &mut E) -> Result<Tensor, NetError> {
    if inputs.shape().len() != net.input_shape.len() + 1 || inputs.shape()[1..] != net.input_shape[..] {
        return Err(NetError::Shape(format!(
            "inputs {:?} do not match [N, {:?}]",
            inputs.shape(),
            net.input_shape
        )));
    }
    let samples = inputs.shape()[0];
    let mut x = inputs.clone();
    for layer in &net.layers {
        x = match layer {
            Layer::Conv2d(c) => conv(e, c, &x, samples)?,
            Layer::Linear(l) => linear(e, l, &x, samples)?,
            Layer::Attention(a) => attention(e, a, &x, samples)?,
        };
    }
    Ok(x)
}

/// Full-precision f32 forward pass.
pub fn run_reference(net: &Network, inputs: &Tensor) -> Result<Tensor, NetError> {
    forward(net, inputs, &mut Reference)
}

/// Forward pass with quantized matmuls executed by `backend`; activations
/// are calibrated per batch, nonlinearities stay in f32.
pub fn run_quantized(
    net: &Network,
    inputs: &Tensor,
    backend: &mut dyn Backend,
    quant: &QuantConfig,
) -> Result<Tensor, NetError> {
    forward(
        net,
        inputs,
        &mut Quantized {
            backend,
            quant: quant.clone(),
        },
    )
}

/// Quantized software inference: exact integer matmuls.
pub fn run_software(net: &Network, inputs: &Tensor, quant: &QuantConfig) -> Result<Tensor, NetError> {
    run_quantized(net, inputs, &mut SoftwareBackend::new(quant.clone()), quant)
}

#[derive(Debug, Clone)]
pub struct CimRun {
    pub outputs: Tensor,
    pub stats: LayerStats,
    /// Per unit, one trace per kernel call.
    pub traces: BTreeMap<String, Vec<MacTrace>>,
}

/// CIM inference under `cfg`, programming noise seeded by `cfg.seed`.
pub fn run_cim(net: &Network, inputs: &Tensor, cfg: &SimulationConfig) -> Result<CimRun, NetError> {
    let mut backend = CimBackend::new(CimSettings::from_config(cfg)?, cfg.seed);
    backend.record_traces(true);
    let outputs = run_quantized(net, inputs, &mut backend, &cfg.quant)?;
    let (stats, traces) = backend.finish();
    Ok(CimRun {
        outputs,
        stats,
        traces,
    })
}
