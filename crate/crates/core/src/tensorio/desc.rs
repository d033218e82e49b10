//! Network description documents.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TensorError;

fn one() -> usize {
    1
}

fn default_num_inputs() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputDistribution {
    /// U[0, 1), image-like.
    #[default]
    Uniform,
    /// N(0, 1), embedding-like.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvDesc {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Square kernel extent.
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    #[serde(default)]
    pub relu: bool,
    #[serde(default)]
    pub bias: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDesc {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
    #[serde(default)]
    pub relu: bool,
    #[serde(default)]
    pub bias: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionDesc {
    pub name: String,
    pub d_model: usize,
    pub heads: usize,
    pub seq_len: usize,
    pub d_ff: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerDesc {
    Conv2d(ConvDesc),
    Linear(LinearDesc),
    #[serde(alias = "attention")]
    AttentionBlock(AttentionDesc),
}

impl LayerDesc {
    pub fn name(&self) -> &str {
        match self {
            LayerDesc::Conv2d(c) => &c.name,
            LayerDesc::Linear(l) => &l.name,
            LayerDesc::AttentionBlock(a) => &a.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerDesc::Conv2d(_) => "conv2d",
            LayerDesc::Linear(_) => "linear",
            LayerDesc::AttentionBlock(_) => "attention-block",
        }
    }

    pub fn weight_refs(&self) -> &BTreeMap<String, String> {
        match self {
            LayerDesc::Conv2d(c) => &c.weights,
            LayerDesc::Linear(l) => &l.weights,
            LayerDesc::AttentionBlock(a) => &a.weights,
        }
    }

    pub fn weight_refs_mut(&mut self) -> &mut BTreeMap<String, String> {
        match self {
            LayerDesc::Conv2d(c) => &mut c.weights,
            LayerDesc::Linear(l) => &mut l.weights,
            LayerDesc::AttentionBlock(a) => &mut a.weights,
        }
    }

    /// Parameter names and shapes, PyTorch layout (`[out, in, ...]`).
    pub fn params(&self) -> Vec<(&'static str, Vec<usize>)> {
        match self {
            LayerDesc::Conv2d(c) => {
                let mut p = vec![(
                    "weight",
                    vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
                )];
                if c.bias {
                    p.push(("bias", vec![c.out_channels]));
                }
                p
            }
            LayerDesc::Linear(l) => {
                let mut p = vec![("weight", vec![l.out_features, l.in_features])];
                if l.bias {
                    p.push(("bias", vec![l.out_features]));
                }
                p
            }
            LayerDesc::AttentionBlock(a) => {
                let d = a.d_model;
                vec![
                    ("wq", vec![d, d]),
                    ("wk", vec![d, d]),
                    ("wv", vec![d, d]),
                    ("wo", vec![d, d]),
                    ("w1", vec![a.d_ff, d]),
                    ("w2", vec![d, a.d_ff]),
                ]
            }
        }
    }

    /// Output shape of one sample given its input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        let err = |m: String| Err(TensorError::Desc(format!("layer `{}`: {m}", self.name())));
        match self {
            LayerDesc::Conv2d(c) => {
                if input.len() != 3 || input[0] != c.in_channels {
                    return err(format!(
                        "expected input [{}, H, W], got {input:?}",
                        c.in_channels
                    ));
                }
                if c.kernel == 0 || c.stride == 0 || c.out_channels == 0 {
                    return err("kernel, stride and out_channels must be positive".into());
                }
                let (h, w) = (input[1] + 2 * c.padding, input[2] + 2 * c.padding);
                if h < c.kernel || w < c.kernel {
                    return err(format!("kernel {} larger than padded input", c.kernel));
                }
                Ok(vec![
                    c.out_channels,
                    (h - c.kernel) / c.stride + 1,
                    (w - c.kernel) / c.stride + 1,
                ])
            }
            LayerDesc::Linear(l) => {
                let flat: usize = input.iter().product();
                if flat != l.in_features {
                    return err(format!(
                        "in_features {} does not match flattened input {flat}",
                        l.in_features
                    ));
                }
                if l.out_features == 0 {
                    return err("out_features must be positive".into());
                }
                Ok(vec![l.out_features])
            }
            LayerDesc::AttentionBlock(a) => {
                if input != [a.seq_len, a.d_model] {
                    return err(format!(
                        "expected input [{}, {}], got {input:?}",
                        a.seq_len, a.d_model
                    ));
                }
                if a.heads == 0 || a.d_model % a.heads != 0 {
                    return err(format!("heads {} must divide d_model {}", a.heads, a.d_model));
                }
                if a.d_ff == 0 {
                    return err("d_ff must be positive".into());
                }
                Ok(input.to_vec())
            }
        }
    }
}

/// A network: input sample shape plus an ordered layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDesc {
    pub name: String,
    /// Shape of one input sample.
    pub input_shape: Vec<usize>,
    #[serde(default = "default_num_inputs")]
    pub num_inputs: usize,
    #[serde(default)]
    pub input_distribution: InputDistribution,
    pub layers: Vec<LayerDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
}

impl NetworkDesc {
    pub fn from_json(text: &str) -> Result<Self, TensorError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.into_inner().to_string();
            if msg.contains("unknown variant") {
                TensorError::UnsupportedLayer(format!("{msg} at `{path}`"))
            } else {
                TensorError::Desc(format!("{msg} at `{path}`"))
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TensorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("description serialization is infallible")
    }

    /// Per-layer output shapes; errors on the first inconsistency.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, TensorError> {
        if self.layers.is_empty() {
            return Err(TensorError::Desc("network has no layers".into()));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(TensorError::Desc(format!(
                "input_shape must have positive extents, got {:?}",
                self.input_shape
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            if !names.insert(layer.name()) {
                return Err(TensorError::Desc(format!("duplicate layer name `{}`", layer.name())));
            }
            shape = layer.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    /// Two 3×3 convolutions and two linear layers on 3×8×8 inputs.
    pub fn tiny_cnn() -> Self {
        NetworkDesc {
            name: "tiny-cnn".into(),
            input_shape: vec![3, 8, 8],
            num_inputs: 256,
            input_distribution: InputDistribution::Uniform,
            layers: vec![
                LayerDesc::Conv2d(ConvDesc {
                    name: "conv1".into(),
                    in_channels: 3,
                    out_channels: 8,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    relu: true,
                    bias: false,
                    weights: BTreeMap::new(),
                }),
                LayerDesc::Conv2d(ConvDesc {
                    name: "conv2".into(),
                    in_channels: 8,
                    out_channels: 16,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                    relu: true,
                    bias: false,
                    weights: BTreeMap::new(),
                }),
                LayerDesc::Linear(LinearDesc {
                    name: "fc1".into(),
                    in_features: 256,
                    out_features: 32,
                    relu: true,
                    bias: false,
                    weights: BTreeMap::new(),
                }),
                LayerDesc::Linear(LinearDesc {
                    name: "fc2".into(),
                    in_features: 32,
                    out_features: 10,
                    relu: false,
                    bias: false,
                    weights: BTreeMap::new(),
                }),
            ],
            inputs: None,
            labels: None,
        }
    }

    /// One attention block (`heads` heads, d=16, sequence 8) and a 10-way
    /// linear classifier over the flattened block output.
    pub fn tiny_attention(heads: usize) -> Self {
        NetworkDesc {
            name: "tiny-attention".into(),
            input_shape: vec![8, 16],
            num_inputs: 64,
            input_distribution: InputDistribution::Normal,
            layers: vec![
                LayerDesc::AttentionBlock(AttentionDesc {
                    name: "attn".into(),
                    d_model: 16,
                    heads,
                    seq_len: 8,
                    d_ff: 32,
                    weights: BTreeMap::new(),
                }),
                LayerDesc::Linear(LinearDesc {
                    name: "head".into(),
                    in_features: 128,
                    out_features: 10,
                    relu: false,
                    bias: false,
                    weights: BTreeMap::new(),
                }),
            ],
            inputs: None,
            labels: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        let shapes = NetworkDesc::tiny_cnn().shapes().unwrap();
        assert_eq!(shapes, vec![vec![8, 8, 8], vec![16, 4, 4], vec![32], vec![10]]);
        let shapes = NetworkDesc::tiny_attention(1).shapes().unwrap();
        assert_eq!(shapes, vec![vec![8, 16], vec![10]]);
    }

    #[test]
    fn json_round_trip_and_kind_tags() {
        let desc = NetworkDesc::tiny_attention(2);
        let text = desc.to_json();
        assert!(text.contains("\"kind\": \"attention-block\""));
        assert_eq!(NetworkDesc::from_json(&text).unwrap(), desc);
        let alias = text.replace("attention-block", "attention");
        assert_eq!(NetworkDesc::from_json(&alias).unwrap(), desc);
    }

    #[test]
    fn unsupported_kind() {
        let text = NetworkDesc::tiny_cnn().to_json().replace("\"conv2d\"", "\"lstm\"");
        assert!(matches!(
            NetworkDesc::from_json(&text),
            Err(TensorError::UnsupportedLayer(_))
        ));
    }

    #[test]
    fn empty_and_mismatched() {
        let mut d = NetworkDesc::tiny_cnn();
        d.layers.clear();
        assert!(d.shapes().is_err());
        let mut d = NetworkDesc::tiny_cnn();
        if let LayerDesc::Linear(l) = &mut d.layers[2] {
            l.in_features = 100;
        }
        assert!(d.shapes().is_err());
    }
}
