//! Networks lowered to matmul units, their reference and CIM forward passes,
//! and the fidelity metric.

mod backend;
mod forward;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{quantize_weight, Backend, CimBackend, CimSettings, SoftwareBackend};
pub use forward::{matmul_f32, run_cim, run_quantized, run_reference, run_software, softmax_rows, CimRun};
pub use stats::{LayerStats, NeumaierSum, UnitStats};

use crate::cimkernel::KernelError;
use crate::quant::QuantError;
use crate::tensorio::{LayerDesc, ModelBundle, NetworkDesc, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("missing weight `{0}`")]
    MissingWeight(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitKind {
    /// Static weights on eNVM tiles.
    Smm,
    /// Runtime operands written into SRAM tiles.
    Dmm,
    /// Digital softmax.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Conv,
    Linear,
    Qkv,
    QkT,
    Softmax,
    Pv,
    OutProj,
    Ffn1,
    Ffn2,
}

/// One matmul (or digital) unit of a layer, per input sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitInfo {
    pub id: String,
    pub layer: String,
    pub stage: Stage,
    pub kind: UnitKind,
    /// Matmul extents `R × C` (inputs × outputs); zero for softmax.
    pub rows: usize,
    pub cols: usize,
    /// Input vectors per copy per sample.
    pub vectors: usize,
    /// Parallel array copies (attention heads for DMM units).
    pub copies: usize,
    /// Elements produced per sample.
    pub output_elements: usize,
}

impl UnitInfo {
    pub fn macs_per_sample(&self) -> u64 {
        (self.vectors * self.copies * self.rows * self.cols) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub relu: bool,
    /// `[cin·k·k, cout]`, rows ordered `(c, ky, kx)`.
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
    pub relu: bool,
    /// `[in, out]`.
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub name: String,
    pub d_model: usize,
    pub heads: usize,
    pub seq_len: usize,
    pub d_ff: usize,
    /// `[d, 3d]`: Q, K and V projections side by side.
    pub wqkv: Tensor,
    pub wo: Tensor,
    pub w1: Tensor,
    pub w2: Tensor,
}

impl AttentionLayer {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(ConvLayer),
    Linear(LinearLayer),
    Attention(AttentionLayer),
}

impl Layer {
    pub fn name(&self) -> &str {
        match self {
            Layer::Conv2d(c) => &c.name,
            Layer::Linear(l) => &l.name,
            Layer::Attention(a) => &a.name,
        }
    }

    pub fn units(&self) -> Vec<UnitInfo> {
        let smm = |id: String, layer: &str, stage, rows, cols, vectors| UnitInfo {
            id,
            layer: layer.to_string(),
            stage,
            kind: UnitKind::Smm,
            rows,
            cols,
            vectors,
            copies: 1,
            output_elements: vectors * cols,
        };
        match self {
            Layer::Conv2d(c) => {
                let [cout, oh, ow] = c.out_shape;
                vec![smm(c.name.clone(), &c.name, Stage::Conv, c.weight.shape()[0], cout, oh * ow)]
            }
            Layer::Linear(l) => vec![smm(
                l.name.clone(),
                &l.name,
                Stage::Linear,
                l.in_features,
                l.out_features,
                1,
            )],
            Layer::Attention(a) => {
                let (n, d, s, h, dh) = (&a.name, a.d_model, a.seq_len, a.heads, a.head_dim());
                let id = |stage: &str| format!("{n}.{stage}");
                let dmm = |stage: &str, st, rows, cols| UnitInfo {
                    id: id(stage),
                    layer: n.clone(),
                    stage: st,
                    kind: UnitKind::Dmm,
                    rows,
                    cols,
                    vectors: s,
                    copies: h,
                    output_elements: s * cols * h,
                };
                vec![
                    smm(id("qkv"), n, Stage::Qkv, d, 3 * d, s),
                    dmm("qk", Stage::QkT, dh, s),
                    UnitInfo {
                        id: id("softmax"),
                        layer: n.clone(),
                        stage: Stage::Softmax,
                        kind: UnitKind::Softmax,
                        rows: 0,
                        cols: 0,
                        vectors: 0,
                        copies: h,
                        output_elements: h * s * s,
                    },
                    dmm("pv", Stage::Pv, s, dh),
                    smm(id("wo"), n, Stage::OutProj, d, d, s),
                    smm(id("ffn1"), n, Stage::Ffn1, d, a.d_ff, s),
                    smm(id("ffn2"), n, Stage::Ffn2, a.d_ff, d, s),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// `[out, in]` → `[in, out]`.
fn transpose(t: &Tensor) -> Tensor {
    let (rows, cols) = (t.shape()[0], t.len() / t.shape()[0]);
    let d = t.data();
    let data = (0..cols)
        .flat_map(|c| (0..rows).map(move |r| d[r * cols + c]))
        .collect();
    Tensor::new(vec![cols, rows], data).expect("same values")
}

impl Network {
    /// Lowers every layer of `desc` to matmul form using the bundle's weights.
    pub fn build(desc: &NetworkDesc, bundle: &ModelBundle) -> Result<Self, NetError> {
        let shapes = desc.shapes()?;
        let get = |layer: &str, p: &str| {
            bundle
                .param(layer, p)
                .ok_or_else(|| NetError::MissingWeight(format!("{layer}.{p}")))
        };
        let mut layers = Vec::new();
        for (i, l) in desc.layers.iter().enumerate() {
            for (p, shape) in l.params() {
                let t = get(l.name(), p)?;
                if t.shape() != shape.as_slice() {
                    return Err(NetError::Shape(format!(
                        "{}.{p} is {:?}, expected {shape:?}",
                        l.name(),
                        t.shape()
                    )));
                }
            }
            let input = if i == 0 { &desc.input_shape } else { &shapes[i - 1] };
            let output = &shapes[i];
            layers.push(match l {
                LayerDesc::Conv2d(c) => Layer::Conv2d(ConvLayer {
                    name: c.name.clone(),
                    in_shape: [input[0], input[1], input[2]],
                    out_shape: [output[0], output[1], output[2]],
                    kernel: c.kernel,
                    stride: c.stride,
                    padding: c.padding,
                    relu: c.relu,
                    weight: transpose(get(&c.name, "weight")?),
                    bias: if c.bias {
                        Some(get(&c.name, "bias")?.data().to_vec())
                    } else {
                        None
                    },
                }),
                LayerDesc::Linear(d) => Layer::Linear(LinearLayer {
                    name: d.name.clone(),
                    in_features: d.in_features,
                    out_features: d.out_features,
                    relu: d.relu,
                    weight: transpose(get(&d.name, "weight")?),
                    bias: if d.bias {
                        Some(get(&d.name, "bias")?.data().to_vec())
                    } else {
                        None
                    },
                }),
                LayerDesc::AttentionBlock(a) => {
                    let d = a.d_model;
                    let (q, k, v) = (
                        transpose(get(&a.name, "wq")?),
                        transpose(get(&a.name, "wk")?),
                        transpose(get(&a.name, "wv")?),
                    );
                    let mut wqkv = Vec::with_capacity(3 * d * d);
                    for r in 0..d {
                        for m in [&q, &k, &v] {
                            wqkv.extend_from_slice(&m.data()[r * d..(r + 1) * d]);
                        }
                    }
                    Layer::Attention(AttentionLayer {
                        name: a.name.clone(),
                        d_model: d,
                        heads: a.heads,
                        seq_len: a.seq_len,
                        d_ff: a.d_ff,
                        wqkv: Tensor::new(vec![d, 3 * d], wqkv)?,
                        wo: transpose(get(&a.name, "wo")?),
                        w1: transpose(get(&a.name, "w1")?),
                        w2: transpose(get(&a.name, "w2")?),
                    })
                }
            });
        }
        Ok(Network {
            name: desc.name.clone(),
            input_shape: desc.input_shape.clone(),
            layers,
        })
    }

    pub fn units(&self) -> Vec<UnitInfo> {
        self.layers.iter().flat_map(Layer::units).collect()
    }

    pub fn macs_per_sample(&self) -> u64 {
        self.units().iter().map(UnitInfo::macs_per_sample).sum()
    }

    /// Static matmul weights in `[R, C]` form, keyed by unit id.
    pub fn static_weights(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv2d(c) => out.push((c.name.clone(), &c.weight)),
                Layer::Linear(d) => out.push((d.name.clone(), &d.weight)),
                Layer::Attention(a) => {
                    for (stage, w) in [("qkv", &a.wqkv), ("wo", &a.wo), ("ffn1", &a.w1), ("ffn2", &a.w2)] {
                        out.push((format!("{}.{stage}", a.name), w));
                    }
                }
            }
        }
        out
    }

    /// Elements of one sample's input.
    pub fn input_elements(&self) -> usize {
        self.input_shape.iter().product()
    }
}

/// Index of the first maximum of each row of a `[n, classes]` tensor.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let n = t.shape()[0];
    let c = t.len() / n.max(1);
    t.data()
        .chunks(c.max(1))
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Fraction of rows whose argmax equals the label.
pub fn fidelity(outputs: &Tensor, labels: &[u32]) -> Result<f64, NetError> {
    let pred = argmax_rows(outputs);
    if pred.len() != labels.len() || labels.is_empty() {
        return Err(NetError::Shape(format!(
            "{} outputs for {} labels",
            pred.len(),
            labels.len()
        )));
    }
    let hits = pred.iter().zip(labels).filter(|(&p, &l)| p as u32 == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Fraction of rows whose argmax agrees between two output tensors.
pub fn agreement(outputs: &Tensor, reference: &Tensor) -> Result<f64, NetError> {
    if outputs.shape() != reference.shape() {
        return Err(NetError::Shape(format!(
            "outputs {:?} vs reference {:?}",
            outputs.shape(),
            reference.shape()
        )));
    }
    let labels: Vec<u32> = argmax_rows(reference).into_iter().map(|l| l as u32).collect();
    fidelity(outputs, &labels)
}
