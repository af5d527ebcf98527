//! WB1 weight bundles.
//!
//! Layout: the line `WB1\n`, one line of JSON manifest, then every tensor's
//! little-endian `f32` payload concatenated in manifest order. Each tensor
//! entry in the manifest carries its shape and the CRC32 of its payload bytes.
//!
//! Tensor layouts follow the usual deep-learning conventions: linear weights
//! are `[out, in]`, transposed-convolution weights are
//! `[in_channels, out_channels, k, k, k]`, batch-norm layers hold `scale`,
//! `shift`, `running_mean` and `running_var`, each `[channels]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::neural::NeuralGeneratorSpec;
use super::{GeneratorError, Result};

const MAGIC: &[u8] = b"WB1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Linear,
    TransposedConv3d,
    BatchNorm1d,
    BatchNorm3d,
}

impl LayerKind {
    fn is_batch_norm(self) -> bool {
        matches!(self, LayerKind::BatchNorm1d | LayerKind::BatchNorm3d)
    }

    /// Tensor names in storage order.
    pub fn tensor_names(self) -> &'static [&'static str] {
        if self.is_batch_norm() {
            &["scale", "shift", "running_mean", "running_var"]
        } else {
            &["weight", "bias"]
        }
    }

    /// Expected tensor shapes given the layer shape.
    fn tensor_shapes(self, shape: &[usize]) -> Result<Vec<Vec<usize>>> {
        let bad = || GeneratorError::MalformedManifest(format!("{self:?} layer shape {shape:?}"));
        Ok(match self {
            LayerKind::Linear => {
                let [out, inp] = shape else { return Err(bad()) };
                vec![vec![*out, *inp], vec![*out]]
            }
            LayerKind::TransposedConv3d => {
                let [cin, cout, k0, k1, k2] = shape else { return Err(bad()) };
                vec![vec![*cin, *cout, *k0, *k1, *k2], vec![*cout]]
            }
            LayerKind::BatchNorm1d | LayerKind::BatchNorm3d => {
                let [c] = shape else { return Err(bad()) };
                vec![vec![*c]; 4]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    fn bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub name: String,
    pub kind: LayerKind,
    pub shape: Vec<usize>,
    pub tensors: Vec<Tensor>,
}

impl LayerWeights {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Trainable parameters; batch-norm running statistics are excluded.
    pub fn parameter_count(&self) -> usize {
        self.tensors
            .iter()
            .filter(|t| !t.name.starts_with("running_"))
            .map(Tensor::numel)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub role: String,
    pub bn_eps: f64,
    pub leaky_slope: f64,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub layers: Vec<LayerWeights>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    crc32: u32,
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    name: String,
    kind: LayerKind,
    shape: Vec<usize>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    role: String,
    bn_eps: f64,
    leaky_slope: f64,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
    layers: Vec<LayerEntry>,
}

impl WeightBundle {
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerWeights::parameter_count).sum()
    }

    pub fn layer(&self, name: &str) -> Option<&LayerWeights> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Structural checks independent of any architecture.
    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            let shapes = layer.kind.tensor_shapes(&layer.shape)?;
            let names = layer.kind.tensor_names();
            if layer.tensors.len() != names.len() {
                return Err(GeneratorError::ShapeMismatch(format!(
                    "layer `{}` has {} tensors, expected {}",
                    layer.name,
                    layer.tensors.len(),
                    names.len()
                )));
            }
            for ((t, name), shape) in layer.tensors.iter().zip(names).zip(&shapes) {
                if t.name != *name || &t.shape != shape || t.data.len() != t.numel() {
                    return Err(GeneratorError::ShapeMismatch(format!(
                        "layer `{}` tensor `{}` shape {:?} (len {}), expected `{name}` {shape:?}",
                        layer.name,
                        t.name,
                        t.shape,
                        t.data.len()
                    )));
                }
            }
            if let Some(var) = layer.tensor("running_var") {
                if var.data.iter().any(|v| !(*v > 0.0)) {
                    return Err(GeneratorError::MalformedManifest(format!(
                        "layer `{}` has non-positive running variance",
                        layer.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Randomly initialized generator weights for `spec`: uniform
    /// `±1/sqrt(fan_in)` weights and biases, unit batch-norm statistics.
    pub fn random(spec: &NeuralGeneratorSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_plan()
            .into_iter()
            .map(|(name, kind, shape)| {
                let fan_in = match kind {
                    LayerKind::Linear => shape[1],
                    LayerKind::TransposedConv3d => shape[1] * shape[2] * shape[3] * shape[4],
                    _ => 1,
                };
                let bound = 1.0 / (fan_in as f32).sqrt();
                let tensor_shapes = kind.tensor_shapes(&shape).expect("plan shapes are well formed");
                let tensors = kind
                    .tensor_names()
                    .iter()
                    .zip(tensor_shapes)
                    .map(|(tname, tshape)| {
                        let n: usize = tshape.iter().product();
                        let data = match *tname {
                            "scale" | "running_var" => vec![1.0; n],
                            "shift" | "running_mean" => vec![0.0; n],
                            _ => (0..n).map(|_| rng.random_range(-bound..bound)).collect(),
                        };
                        Tensor {
                            name: tname.to_string(),
                            shape: tshape,
                            data,
                        }
                    })
                    .collect();
                LayerWeights {
                    name,
                    kind,
                    shape,
                    tensors,
                }
            })
            .collect();
        Self {
            role: "generator".into(),
            bn_eps: spec.bn_eps,
            leaky_slope: spec.leaky_slope,
            metadata: BTreeMap::new(),
            layers,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = Manifest {
            format: "WB1".into(),
            role: self.role.clone(),
            bn_eps: self.bn_eps,
            leaky_slope: self.leaky_slope,
            metadata: self.metadata.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerEntry {
                    name: l.name.clone(),
                    kind: l.kind,
                    shape: l.shape.clone(),
                    tensors: l
                        .tensors
                        .iter()
                        .map(|t| TensorEntry {
                            name: t.name.clone(),
                            shape: t.shape.clone(),
                            crc32: crc32fast::hash(&t.bytes()),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut out = MAGIC.to_vec();
        serde_json::to_writer(&mut out, &manifest).expect("manifest serializes");
        out.push(b'\n');
        for l in &self.layers {
            for t in &l.tensors {
                out.extend_from_slice(&t.bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| GeneratorError::MalformedManifest("missing WB1 magic".into()))?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| GeneratorError::MalformedManifest("unterminated manifest".into()))?;
        let manifest: Manifest = serde_json::from_slice(&rest[..nl])
            .map_err(|e| GeneratorError::MalformedManifest(e.to_string()))?;
        if manifest.format != "WB1" {
            return Err(GeneratorError::MalformedManifest(format!(
                "unknown format `{}`",
                manifest.format
            )));
        }
        let mut payload = &rest[nl + 1..];
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for entry in manifest.layers {
            let mut tensors = Vec::with_capacity(entry.tensors.len());
            for t in entry.tensors {
                let nbytes = t.shape.iter().product::<usize>() * 4;
                if payload.len() < nbytes {
                    return Err(GeneratorError::ShapeMismatch(format!(
                        "tensor `{}.{}` needs {nbytes} bytes, {} remain",
                        entry.name,
                        t.name,
                        payload.len()
                    )));
                }
                let (chunk, tail) = payload.split_at(nbytes);
                payload = tail;
                if crc32fast::hash(chunk) != t.crc32 {
                    return Err(GeneratorError::ChecksumMismatch(format!("{}.{}", entry.name, t.name)));
                }
                tensors.push(Tensor {
                    name: t.name,
                    shape: t.shape,
                    data: chunk
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                });
            }
            layers.push(LayerWeights {
                name: entry.name,
                kind: entry.kind,
                shape: entry.shape,
                tensors,
            });
        }
        if !payload.is_empty() {
            return Err(GeneratorError::ShapeMismatch(format!(
                "{} trailing payload bytes",
                payload.len()
            )));
        }
        let bundle = Self {
            role: manifest.role,
            bn_eps: manifest.bn_eps,
            leaky_slope: manifest.leaky_slope,
            metadata: manifest.metadata,
            layers,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn load_weight_bundle(path: impl AsRef<Path>) -> Result<WeightBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| GeneratorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    WeightBundle::from_bytes(&bytes)
}

pub fn save_weight_bundle(bundle: &WeightBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle.to_bytes()).map_err(|source| GeneratorError::Io {
        path: path.display().to_string(),
        source,
    })
}
