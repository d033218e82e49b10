//! Deterministic teacher models.
//!
//! A bundle is a network description, one weight tensor per parameter, an
//! evaluation input set and the full-precision teacher's argmax labels. On
//! disk it is a directory holding `network.json` plus NPY files referenced
//! from it.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardUniform};

use super::{
    read_int_tensor, read_tensor, write_int_tensor, write_tensor, InputDistribution, IntTensor,
    NetworkDesc, Tensor, TensorError,
};
use crate::netgraph::{argmax_rows, run_reference, Network};

pub const NETWORK_FILE: &str = "network.json";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub desc: NetworkDesc,
    /// Keyed `"<layer>.<param>"`.
    pub params: BTreeMap<String, Tensor>,
    /// `[num_inputs, ...input_shape]`.
    pub inputs: Tensor,
    pub labels: Vec<u32>,
}

fn param_key(layer: &str, param: &str) -> String {
    format!("{layer}.{param}")
}

impl ModelBundle {
    pub fn param(&self, layer: &str, param: &str) -> Option<&Tensor> {
        self.params.get(&param_key(layer, param))
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn network(&self) -> Result<Network, crate::netgraph::NetError> {
        Network::build(&self.desc, self)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), TensorError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| TensorError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut desc = self.desc.clone();
        for layer in &mut desc.layers {
            let name = layer.name().to_string();
            let refs: Vec<_> = layer.params().iter().map(|(p, _)| *p).collect();
            let map = layer.weight_refs_mut();
            map.clear();
            for p in refs {
                let file = format!("{}.npy", param_key(&name, p));
                let tensor = self
                    .params
                    .get(&param_key(&name, p))
                    .ok_or_else(|| TensorError::Bundle(format!("missing {name}.{p}")))?;
                write_tensor(dir.join(&file), tensor)?;
                map.insert(p.to_string(), file);
            }
        }
        desc.inputs = Some("inputs.npy".into());
        desc.labels = Some("labels.npy".into());
        write_tensor(dir.join("inputs.npy"), &self.inputs)?;
        let labels = IntTensor::new(
            vec![self.labels.len()],
            self.labels.iter().map(|&l| l as i32).collect(),
        )?;
        write_int_tensor(dir.join("labels.npy"), &labels)?;
        let path = dir.join(NETWORK_FILE);
        std::fs::write(&path, desc.to_json() + "\n").map_err(|source| TensorError::Io { path, source })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, TensorError> {
        let dir = dir.as_ref();
        let desc = NetworkDesc::load(dir.join(NETWORK_FILE))?;
        desc.shapes()?;
        let mut params = BTreeMap::new();
        for layer in &desc.layers {
            for (p, shape) in layer.params() {
                let file = layer.weight_refs().get(p).ok_or_else(|| {
                    TensorError::Bundle(format!("layer `{}` has no file for `{p}`", layer.name()))
                })?;
                let t = read_tensor(dir.join(file))?;
                if t.shape() != shape.as_slice() {
                    return Err(TensorError::Bundle(format!(
                        "{}.{p}: expected shape {shape:?}, file has {:?}",
                        layer.name(),
                        t.shape()
                    )));
                }
                params.insert(param_key(layer.name(), p), t);
            }
        }
        let inputs_file = desc.inputs.clone().unwrap_or_else(|| "inputs.npy".into());
        let labels_file = desc.labels.clone().unwrap_or_else(|| "labels.npy".into());
        let inputs = read_tensor(dir.join(inputs_file))?;
        if inputs.shape().len() != desc.input_shape.len() + 1
            || inputs.shape()[1..] != desc.input_shape[..]
        {
            return Err(TensorError::Bundle(format!(
                "inputs shape {:?} does not match input_shape {:?}",
                inputs.shape(),
                desc.input_shape
            )));
        }
        let labels = read_int_tensor(dir.join(labels_file))?;
        if labels.data().len() != inputs.shape()[0] || labels.data().iter().any(|&l| l < 0) {
            return Err(TensorError::Bundle(format!(
                "labels length {} does not match {} inputs",
                labels.data().len(),
                inputs.shape()[0]
            )));
        }
        Ok(ModelBundle {
            desc,
            params,
            inputs,
            labels: labels.data().iter().map(|&l| l as u32).collect(),
        })
    }
}

/// Draws a teacher model from `seed`: weights ~ N(0, 1/sqrt(fan_in)), inputs
/// from the description's distribution, labels = teacher argmax.
pub fn synth_model(seed: u64, desc: &NetworkDesc) -> Result<ModelBundle, TensorError> {
    desc.shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = BTreeMap::new();
    for layer in &desc.layers {
        for (p, shape) in layer.params() {
            let fan_in: usize = match p {
                "bias" => match layer {
                    super::LayerDesc::Conv2d(c) => c.in_channels * c.kernel * c.kernel,
                    super::LayerDesc::Linear(l) => l.in_features,
                    super::LayerDesc::AttentionBlock(a) => a.d_model,
                },
                _ => shape[1..].iter().product(),
            };
            let normal = Normal::new(0.0f32, 1.0 / (fan_in as f32).sqrt())
                .expect("positive standard deviation");
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
            params.insert(param_key(layer.name(), p), Tensor::new(shape, data)?);
        }
    }

    let mut in_shape = vec![desc.num_inputs];
    in_shape.extend_from_slice(&desc.input_shape);
    let n: usize = in_shape.iter().product();
    let data: Vec<f32> = match desc.input_distribution {
        InputDistribution::Uniform => (0..n).map(|_| StandardUniform.sample(&mut rng)).collect(),
        InputDistribution::Normal => {
            let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        }
    };
    let inputs = Tensor::new(in_shape, data)?;

    let mut bundle = ModelBundle {
        desc: desc.clone(),
        params,
        inputs,
        labels: Vec::new(),
    };
    let net = bundle
        .network()
        .map_err(|e| TensorError::Bundle(e.to_string()))?;
    let logits = run_reference(&net, &bundle.inputs).map_err(|e| TensorError::Bundle(e.to_string()))?;
    bundle.labels = argmax_rows(&logits).into_iter().map(|l| l as u32).collect();
    Ok(bundle)
}
