//! Inference for the deconvolutional generator.
//!
//! Activations are kept channels-last (`[d][h][w][c]`) between layers so the
//! innermost loops run over contiguous channels. The public
//! [`transposed_conv3d`] takes and returns channel-major data.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::weights::{LayerKind, LayerWeights, WeightBundle};
use super::{check_dim, postprocess, GeneratorError, LatentVector, Result, VolumeGenerator};
use crate::volume::{VoxelVolume, DEFAULT_VOXEL_SIZE_UM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralGeneratorSpec {
    pub latent_dim: usize,
    /// Spatial edge of the tensor the linear layer is reshaped into.
    pub base_size: usize,
    /// Channel counts from the reshaped tensor to the output, which must end in 1.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub bn_eps: f64,
    pub leaky_slope: f64,
}

impl Default for NeuralGeneratorSpec {
    fn default() -> Self {
        Self {
            latent_dim: 20,
            base_size: 8,
            channels: vec![256, 128, 64, 32, 1],
            kernel: 4,
            stride: 2,
            padding: 1,
            bn_eps: 1e-5,
            leaky_slope: 0.2,
        }
    }
}

impl NeuralGeneratorSpec {
    pub fn geometry(&self) -> TransposedConvGeometry {
        TransposedConvGeometry {
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeneratorError::InvalidConfig(m.into()));
        if self.latent_dim == 0 || self.base_size == 0 {
            return bad("latent_dim and base_size must be >= 1");
        }
        if self.channels.len() < 2 || self.channels.contains(&0) || *self.channels.last().unwrap() != 1 {
            return bad("channels need at least two positive entries ending in 1");
        }
        if self.kernel == 0 || self.stride == 0 {
            return bad("kernel and stride must be >= 1");
        }
        if !(self.bn_eps > 0.0) || !self.leaky_slope.is_finite() {
            return bad("bn_eps must be > 0 and leaky_slope finite");
        }
        let mut s = self.base_size;
        for _ in 1..self.channels.len() {
            s = self
                .geometry()
                .output_len(s)
                .ok_or_else(|| GeneratorError::InvalidConfig("transposed convolution collapses".into()))?;
        }
        Ok(())
    }

    /// Tensor shapes `(C, D, H, W)` after the reshape and after every stage.
    pub fn shape_chain(&self) -> Vec<[usize; 4]> {
        let g = self.geometry();
        let mut s = self.base_size;
        let mut out = vec![[self.channels[0], s, s, s]];
        for &c in &self.channels[1..] {
            s = g.output_len(s).unwrap_or(0);
            out.push([c, s, s, s]);
        }
        out
    }

    pub fn output_size(&self) -> usize {
        self.shape_chain().last().unwrap()[1]
    }

    fn fc_width(&self) -> usize {
        self.channels[0] * self.base_size.pow(3)
    }

    /// Layer names, kinds and shapes a matching bundle must contain, in order.
    pub fn layer_plan(&self) -> Vec<(String, LayerKind, Vec<usize>)> {
        let k = self.kernel;
        let mut plan = vec![
            ("fc".to_string(), LayerKind::Linear, vec![self.fc_width(), self.latent_dim]),
            ("fc_bn".to_string(), LayerKind::BatchNorm1d, vec![self.fc_width()]),
        ];
        let stages = self.channels.len() - 1;
        for i in 0..stages {
            let (cin, cout) = (self.channels[i], self.channels[i + 1]);
            plan.push((format!("up{i}"), LayerKind::TransposedConv3d, vec![cin, cout, k, k, k]));
            if i + 1 < stages {
                plan.push((format!("up{i}_bn"), LayerKind::BatchNorm3d, vec![cout]));
            }
        }
        plan
    }

    /// Trainable parameters implied by the architecture alone.
    pub fn parameter_count(&self) -> usize {
        self.layer_plan()
            .iter()
            .map(|(_, kind, shape)| match kind {
                LayerKind::Linear | LayerKind::TransposedConv3d => {
                    shape.iter().product::<usize>() + shape[if *kind == LayerKind::Linear { 0 } else { 1 }]
                }
                LayerKind::BatchNorm1d | LayerKind::BatchNorm3d => 2 * shape[0],
            })
            .sum()
    }
}

impl WeightBundle {
    /// Checks layer order, kinds, shapes and the shared constants against `spec`.
    pub fn validate_against(&self, spec: &NeuralGeneratorSpec) -> Result<()> {
        spec.validate()?;
        self.validate()?;
        let plan = spec.layer_plan();
        if plan.len() != self.layers.len() {
            return Err(GeneratorError::ShapeMismatch(format!(
                "bundle has {} layers, architecture needs {}",
                self.layers.len(),
                plan.len()
            )));
        }
        for ((name, kind, shape), layer) in plan.iter().zip(&self.layers) {
            if &layer.name != name || layer.kind != *kind || &layer.shape != shape {
                return Err(GeneratorError::ShapeMismatch(format!(
                    "layer `{}` {:?} {:?}, expected `{name}` {kind:?} {shape:?}",
                    layer.name, layer.kind, layer.shape
                )));
            }
        }
        if self.bn_eps != spec.bn_eps || self.leaky_slope != spec.leaky_slope {
            return Err(GeneratorError::ShapeMismatch(format!(
                "bundle constants (eps {}, slope {}) differ from the architecture (eps {}, slope {})",
                self.bn_eps, self.leaky_slope, spec.bn_eps, spec.leaky_slope
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransposedConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl TransposedConvGeometry {
    /// `(n - 1)·stride - 2·padding + kernel`, or `None` when not positive.
    pub fn output_len(&self, n: usize) -> Option<usize> {
        let full = (n.checked_sub(1)?) * self.stride + self.kernel;
        full.checked_sub(2 * self.padding).filter(|&v| v > 0)
    }

    /// For each output index, the `(input index, kernel tap)` pairs feeding it.
    fn taps(&self, n_in: usize, n_out: usize) -> Vec<Vec<(usize, usize)>> {
        (0..n_out)
            .map(|o| {
                (0..self.kernel)
                    .filter_map(|a| {
                        let num = (o + self.padding).checked_sub(a)?;
                        (num % self.stride == 0 && num / self.stride < n_in).then_some((num / self.stride, a))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Channels-last transposed convolution. `weight` is pre-packed as
/// `[a][b][c][cin][cout]`.
fn tconv_cl(
    input: &[f32],
    spatial: [usize; 3],
    cin: usize,
    packed: &[f32],
    bias: &[f32],
    geom: TransposedConvGeometry,
) -> Option<(Vec<f32>, [usize; 3])> {
    let cout = bias.len();
    let k = geom.kernel;
    let [d, h, w] = spatial;
    let out_sp = [geom.output_len(d)?, geom.output_len(h)?, geom.output_len(w)?];
    let (td, th, tw) = (geom.taps(d, out_sp[0]), geom.taps(h, out_sp[1]), geom.taps(w, out_sp[2]));
    let plane = out_sp[1] * out_sp[2] * cout;
    let mut out = vec![0.0f32; out_sp[0] * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(od, slab)| {
        for oh in 0..out_sp[1] {
            for ow in 0..out_sp[2] {
                let acc = &mut slab[(oh * out_sp[2] + ow) * cout..][..cout];
                acc.copy_from_slice(bias);
                for &(i, a) in &td[od] {
                    for &(j, b) in &th[oh] {
                        for &(l, c) in &tw[ow] {
                            let x = &input[((i * h + j) * w + l) * cin..][..cin];
                            let wt = &packed[((a * k + b) * k + c) * cin * cout..][..cin * cout];
                            for (ci, &xv) in x.iter().enumerate() {
                                let row = &wt[ci * cout..][..cout];
                                for (o, &wv) in acc.iter_mut().zip(row) {
                                    *o += xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    Some((out, out_sp))
}

/// `[cin][cout][a][b][c]` to `[a][b][c][cin][cout]`.
fn pack_weight(weight: &[f32], cin: usize, cout: usize, k: usize) -> Vec<f32> {
    let k3 = k * k * k;
    let mut packed = vec![0.0; weight.len()];
    for ci in 0..cin {
        for co in 0..cout {
            for t in 0..k3 {
                packed[(t * cin + ci) * cout + co] = weight[(ci * cout + co) * k3 + t];
            }
        }
    }
    packed
}

fn to_channels_last(x: &[f32], c: usize, spatial: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for s in 0..spatial {
            out[s * c + ch] = x[ch * spatial + s];
        }
    }
    out
}

fn to_channel_major(x: &[f32], c: usize, spatial: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for s in 0..spatial {
        for ch in 0..c {
            out[ch * spatial + s] = x[s * c + ch];
        }
    }
    out
}

/// 3D transposed convolution on channel-major data.
///
/// `input` has shape `[cin, d, h, w]` (w fastest), `weight` is
/// `[cin, cout, k, k, k]` and `bias` is `[cout]`. Returns the output and its
/// `[cout, d', h', w']` shape.
pub fn transposed_conv3d(
    input: &[f32],
    in_shape: [usize; 4],
    weight: &[f32],
    bias: &[f32],
    geom: TransposedConvGeometry,
) -> Result<(Vec<f32>, [usize; 4])> {
    let [cin, d, h, w] = in_shape;
    let cout = bias.len();
    let k = geom.kernel;
    if input.len() != cin * d * h * w || weight.len() != cin * cout * k * k * k || cout == 0 || geom.stride == 0 {
        return Err(GeneratorError::ShapeMismatch(format!(
            "input {} for {in_shape:?}, weight {} for {cin}x{cout}x{k}^3",
            input.len(),
            weight.len()
        )));
    }
    let cl = to_channels_last(input, cin, d * h * w);
    let packed = pack_weight(weight, cin, cout, k);
    let (out, [od, oh, ow]) = tconv_cl(&cl, [d, h, w], cin, &packed, bias, geom)
        .ok_or_else(|| GeneratorError::ShapeMismatch("output would be empty".into()))?;
    Ok((to_channel_major(&out, cout, od * oh * ow), [cout, od, oh, ow]))
}

fn tensor<'a>(layer: &'a LayerWeights, name: &str) -> &'a [f32] {
    &layer.tensor(name).expect("validated bundle").data
}

/// Inference-mode batch norm over the trailing channel axis.
fn batch_norm(x: &mut [f32], layer: &LayerWeights, eps: f64) {
    let c = layer.shape[0];
    let (scale, shift) = (tensor(layer, "scale"), tensor(layer, "shift"));
    let (mean, var) = (tensor(layer, "running_mean"), tensor(layer, "running_var"));
    let gain: Vec<f32> = (0..c)
        .map(|i| (scale[i] as f64 / (var[i] as f64 + eps).sqrt()) as f32)
        .collect();
    let offset: Vec<f32> = (0..c).map(|i| shift[i] - gain[i] * mean[i]).collect();
    for row in x.chunks_exact_mut(c) {
        for ((v, g), o) in row.iter_mut().zip(&gain).zip(&offset) {
            *v = *v * g + o;
        }
    }
}

fn leaky_relu(x: &mut [f32], slope: f32) {
    for v in x {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

fn check_finite(x: &[f32], layer: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GeneratorError::NonFiniteActivation(layer.to_string()))
    }
}

fn forward(z: &LatentVector, bundle: &WeightBundle, spec: &NeuralGeneratorSpec) -> Result<Vec<f32>> {
    check_dim(spec.latent_dim, z)?;
    let slope = spec.leaky_slope as f32;
    let mut layers = bundle.layers.iter();
    let mut next = || layers.next().expect("validated bundle");

    let fc = next();
    let (w, b) = (tensor(fc, "weight"), tensor(fc, "bias"));
    let zf: Vec<f32> = z.values().iter().map(|&v| v as f32).collect();
    let mut x: Vec<f32> = w
        .chunks_exact(spec.latent_dim)
        .zip(b)
        .map(|(row, &bias)| row.iter().zip(&zf).fold(bias, |acc, (a, b)| acc + a * b))
        .collect();
    check_finite(&x, &fc.name)?;
    let bn = next();
    batch_norm(&mut x, bn, spec.bn_eps);
    leaky_relu(&mut x, slope);
    check_finite(&x, &bn.name)?;

    let s = spec.base_size;
    let mut x = to_channels_last(&x, spec.channels[0], s * s * s);
    let mut spatial = [s; 3];
    let stages = spec.channels.len() - 1;
    for i in 0..stages {
        let conv = next();
        let (cin, cout) = (spec.channels[i], spec.channels[i + 1]);
        let packed = pack_weight(tensor(conv, "weight"), cin, cout, spec.kernel);
        let (y, sp) = tconv_cl(&x, spatial, cin, &packed, tensor(conv, "bias"), spec.geometry())
            .expect("validated geometry");
        x = y;
        spatial = sp;
        check_finite(&x, &conv.name)?;
        if i + 1 < stages {
            let bn = next();
            batch_norm(&mut x, bn, spec.bn_eps);
            leaky_relu(&mut x, slope);
            check_finite(&x, &bn.name)?;
        } else {
            x.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
    Ok(x)
}

/// Forward pass producing the raw `tanh` output as a continuous volume of
/// edge `spec.output_size()`.
pub fn neural_generate(
    z: &LatentVector,
    bundle: &WeightBundle,
    spec: &NeuralGeneratorSpec,
) -> Result<VoxelVolume> {
    bundle.validate_against(spec)?;
    let x = forward(z, bundle, spec)?;
    let n = spec.output_size();
    Ok(VoxelVolume::continuous([n; 3], DEFAULT_VOXEL_SIZE_UM, x)?)
}

/// Neural generator with post-processing, usable wherever a binary
/// generator is expected.
#[derive(Debug, Clone)]
pub struct NeuralBackend {
    spec: NeuralGeneratorSpec,
    bundle: Arc<WeightBundle>,
    voxel_size_um: f64,
}

impl NeuralBackend {
    pub fn new(spec: NeuralGeneratorSpec, bundle: Arc<WeightBundle>) -> Result<Self> {
        bundle.validate_against(&spec)?;
        Ok(Self {
            spec,
            bundle,
            voxel_size_um: DEFAULT_VOXEL_SIZE_UM,
        })
    }

    pub fn with_voxel_size(mut self, voxel_size_um: f64) -> Self {
        self.voxel_size_um = voxel_size_um;
        self
    }

    pub fn spec(&self) -> &NeuralGeneratorSpec {
        &self.spec
    }

    /// Raw continuous output before post-processing.
    pub fn generate_continuous(&self, z: &LatentVector) -> Result<VoxelVolume> {
        let x = forward(z, &self.bundle, &self.spec)?;
        Ok(VoxelVolume::continuous([self.spec.output_size(); 3], self.voxel_size_um, x)?)
    }
}

impl VolumeGenerator for NeuralBackend {
    fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    fn generate(&self, z: &LatentVector) -> Result<VoxelVolume> {
        postprocess(&self.generate_continuous(z)?)
    }
}
