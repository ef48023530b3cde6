//! DCGAN-style convolutional generator built from the tensor primitives.
//!
//! The generator maps a fixed latent tensor `z` of shape `[latent, 1, 1]`
//! through a chain of transposed convolutions; hidden layers use channel
//! normalization and ReLU, the final layer uses tanh, so outputs always lie
//! in `[-1, 1]`. Odd output sizes are produced by generating the next
//! power-of-two square and center-cropping, which is differentiable (the
//! crop's backward pass zero-pads).
//!
//! The latent is sampled once from `N(0, I)` and never optimized; all
//! fitting happens in the weights. Kernels initialize as `N(0, 0.02^2)`,
//! gains as 1, biases as 0.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    activation, activation_backward, channel_norm, channel_norm_backward, conv_transpose2d,
    conv_transpose2d_backward, Activation, Tensor,
};

/// Standard deviation of kernel initialization.
pub const KERNEL_INIT_STD: f64 = 0.02;

/// One transposed-convolution layer of the generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Apply channel normalization (with learnable gain/bias) after the
    /// convolution.
    pub normalize: bool,
    pub activation: Activation,
}

/// Full generator architecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// Final `(channels, height, width)` after center-cropping.
    pub output_shape: (usize, usize, usize),
}

impl GeneratorConfig {
    /// Standard architecture for a `size x size` output with `channels`
    /// color channels: latent 128 at spatial 1x1, a first 4x4 stride-1
    /// transposed convolution to 4x4, then stride-2 doublings up to the next
    /// power of two >= `size`, cropping down at the end. Hidden channel
    /// counts halve from 128 down to 16.
    pub fn dcgan(channels: usize, size: usize) -> GeneratorConfig {
        let full = size.max(4).next_power_of_two();
        let latent = 128;
        // 1x1 -> 4x4 -> ... -> full x full: one layer per doubling plus the
        // initial 4x4 layer.
        let n_layers = (full.trailing_zeros() as usize) - 1;
        let mut layers = Vec::with_capacity(n_layers);
        let mut in_ch = latent;
        for i in 0..n_layers {
            let last = i + 1 == n_layers;
            let out_ch = if last {
                channels
            } else {
                (16usize << (n_layers - 2 - i)).min(128)
            };
            layers.push(LayerSpec {
                in_channels: in_ch,
                out_channels: out_ch,
                kernel: 4,
                stride: if i == 0 { 1 } else { 2 },
                pad: if i == 0 { 0 } else { 1 },
                normalize: !last,
                activation: if last { Activation::Tanh } else { Activation::Relu },
            });
            in_ch = out_ch;
        }
        GeneratorConfig { latent_dim: latent, layers, output_shape: (channels, size, size) }
    }

    /// Spatial size produced by the layer chain before cropping, starting
    /// from 1x1.
    pub fn full_size(&self) -> (usize, usize) {
        let mut h = 1usize;
        let mut w = 1usize;
        for l in &self.layers {
            h = l.stride * (h - 1) + l.kernel - 2 * l.pad;
            w = l.stride * (w - 1) + l.kernel - 2 * l.pad;
        }
        (h, w)
    }

    /// Validates channel chaining, output reachability, and the final tanh.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("GeneratorConfig", "no layers"));
        }
        if self.layers[0].in_channels != self.latent_dim {
            return Err(Error::invalid(
                "GeneratorConfig",
                format!(
                    "first layer expects {} channels, latent has {}",
                    self.layers[0].in_channels, self.latent_dim
                ),
            ));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::invalid(
                    "GeneratorConfig",
                    format!(
                        "layer {} emits {} channels, layer {} expects {}",
                        i,
                        pair[0].out_channels,
                        i + 1,
                        pair[1].in_channels
                    ),
                ));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.stride == 0 || l.pad >= l.kernel {
                return Err(Error::invalid(
                    "GeneratorConfig",
                    format!("layer {i}: kernel {} / stride {} / pad {}", l.kernel, l.stride, l.pad),
                ));
            }
        }
        let last = self.layers.last().expect("non-empty");
        if last.activation != Activation::Tanh {
            return Err(Error::invalid(
                "GeneratorConfig",
                "final activation must be tanh so outputs stay in [-1, 1]",
            ));
        }
        let (c, h, w) = self.output_shape;
        if last.out_channels != c {
            return Err(Error::invalid(
                "GeneratorConfig",
                format!("last layer emits {} channels, output wants {c}", last.out_channels),
            ));
        }
        let (fh, fw) = self.full_size();
        if fh < h || fw < w {
            return Err(Error::invalid(
                "GeneratorConfig",
                format!("layers produce {fh}x{fw}, cannot crop up to {h}x{w}"),
            ));
        }
        Ok(())
    }
}

/// Parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `[C_in, C_out, K, K]` transposed-convolution kernels.
    pub kernels: Tensor,
    /// Channel-norm gain, present iff the layer normalizes.
    pub gain: Option<Tensor>,
    /// Channel-norm bias, present iff the layer normalizes.
    pub bias: Option<Tensor>,
}

/// All generator parameters, carrying their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWeights {
    pub config: GeneratorConfig,
    pub layers: Vec<LayerWeights>,
}

impl GeneratorWeights {
    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.kernels.len()
                    + l.gain.as_ref().map_or(0, Tensor::len)
                    + l.bias.as_ref().map_or(0, Tensor::len)
            })
            .sum()
    }

    /// Parameters of each layer in canonical order (kernels, gain, bias),
    /// as one flat vector per layer.
    pub fn layer_params(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|l| {
                let mut v = l.kernels.data().to_vec();
                if let Some(g) = &l.gain {
                    v.extend_from_slice(g.data());
                }
                if let Some(b) = &l.bias {
                    v.extend_from_slice(b.data());
                }
                v
            })
            .collect()
    }

    /// All parameters flattened in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layer_params().concat()
    }

    /// Visits every parameter tensor in canonical order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.kernels);
            if let Some(g) = &l.gain {
                out.push(g);
            }
            if let Some(b) = &l.bias {
                out.push(b);
            }
        }
        out
    }

    /// Mutable variant of [`GeneratorWeights::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.kernels);
            if let Some(g) = &mut l.gain {
                out.push(g);
            }
            if let Some(b) = &mut l.bias {
                out.push(b);
            }
        }
        out
    }

    /// Rebuilds weights with the same structure from a flat vector in
    /// canonical order.
    pub fn from_flat(config: &GeneratorConfig, flat: &[f64]) -> Result<GeneratorWeights> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut off = 0usize;
        let mut take = |len: usize, shape: &[usize]| -> Result<Tensor> {
            if off + len > flat.len() {
                return Err(Error::shape("GeneratorWeights::from_flat", "buffer too short"));
            }
            let t = Tensor::from_vec(shape, flat[off..off + len].to_vec())?;
            off += len;
            Ok(t)
        };
        for spec in &config.layers {
            let klen = spec.in_channels * spec.out_channels * spec.kernel * spec.kernel;
            let kernels =
                take(klen, &[spec.in_channels, spec.out_channels, spec.kernel, spec.kernel])?;
            let (gain, bias) = if spec.normalize {
                (Some(take(spec.out_channels, &[spec.out_channels])?),
                 Some(take(spec.out_channels, &[spec.out_channels])?))
            } else {
                (None, None)
            };
            layers.push(LayerWeights { kernels, gain, bias });
        }
        if off != flat.len() {
            return Err(Error::shape(
                "GeneratorWeights::from_flat",
                format!("buffer has {} entries, architecture wants {off}", flat.len()),
            ));
        }
        Ok(GeneratorWeights { config: config.clone(), layers })
    }
}

/// Fixed latent input: `[latent, 1, 1]` i.i.d. standard normal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeed {
    seed: u64,
    z: Tensor,
}

impl LatentSeed {
    /// Draws the latent once from its seed.
    pub fn sample(latent_dim: usize, seed: u64) -> LatentSeed {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = Tensor::from_vec(&[latent_dim, 1, 1], data).expect("shape matches");
        LatentSeed { seed, z }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn z(&self) -> &Tensor {
        &self.z
    }
}

/// Draws fresh weights for `config`: kernels `N(0, 0.02^2)`, gains 1,
/// biases 0.
pub fn init_weights(config: &GeneratorConfig, seed: u64) -> Result<GeneratorWeights> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, KERNEL_INIT_STD).expect("valid std");
    let layers = config
        .layers
        .iter()
        .map(|spec| {
            let klen = spec.in_channels * spec.out_channels * spec.kernel * spec.kernel;
            let kernels = Tensor::from_vec(
                &[spec.in_channels, spec.out_channels, spec.kernel, spec.kernel],
                (0..klen).map(|_| normal.sample(&mut rng)).collect(),
            )
            .expect("shape matches");
            let (gain, bias) = if spec.normalize {
                (
                    Some(Tensor::from_vec(&[spec.out_channels], vec![1.0; spec.out_channels])
                        .expect("shape matches")),
                    Some(Tensor::zeros(&[spec.out_channels])),
                )
            } else {
                (None, None)
            };
            LayerWeights { kernels, gain, bias }
        })
        .collect();
    Ok(GeneratorWeights { config: config.clone(), layers })
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct ForwardTrace {
    /// Input to each layer's convolution.
    layer_inputs: Vec<Tensor>,
    /// Each layer's convolution output (input of the norm, if any).
    conv_outs: Vec<Tensor>,
    /// Pre-activation values of each layer (post-norm when normalizing).
    pre_acts: Vec<Tensor>,
    /// Cropped final output.
    pub output: Tensor,
}

fn check_latent(weights: &GeneratorWeights, z: &LatentSeed) -> Result<()> {
    if z.z.shape() != [weights.config.latent_dim, 1, 1] {
        return Err(Error::shape(
            "generator::forward",
            format!(
                "latent shape {:?}, config wants [{}, 1, 1]",
                z.z.shape(),
                weights.config.latent_dim
            ),
        ));
    }
    Ok(())
}

pub(crate) fn forward_traced(weights: &GeneratorWeights, z: &LatentSeed) -> Result<ForwardTrace> {
    weights.config.validate()?;
    check_latent(weights, z)?;
    let n_layers = weights.config.layers.len();
    if weights.layers.len() != n_layers {
        return Err(Error::shape(
            "generator::forward",
            format!("{} weight layers for {} config layers", weights.layers.len(), n_layers),
        ));
    }
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut conv_outs = Vec::with_capacity(n_layers);
    let mut pre_acts = Vec::with_capacity(n_layers);
    let mut x = z.z.clone();
    for (spec, w) in weights.config.layers.iter().zip(&weights.layers) {
        layer_inputs.push(x.clone());
        let conv = conv_transpose2d(&x, &w.kernels, spec.stride, spec.pad)?;
        let pre_act = if spec.normalize {
            let gain = w.gain.as_ref().ok_or_else(|| {
                Error::invalid("generator::forward", "normalizing layer without gain")
            })?;
            let bias = w.bias.as_ref().ok_or_else(|| {
                Error::invalid("generator::forward", "normalizing layer without bias")
            })?;
            channel_norm(&conv, gain, bias)?
        } else {
            conv.clone()
        };
        x = activation(&pre_act, spec.activation)?;
        conv_outs.push(conv);
        pre_acts.push(pre_act);
    }
    let (c, h, w) = weights.config.output_shape;
    let output = center_crop(&x, c, h, w)?;
    Ok(ForwardTrace { layer_inputs, conv_outs, pre_acts, output })
}

/// Runs the generator: `z -> image` of the configured output shape, entries
/// in `[-1, 1]`.
pub fn forward(weights: &GeneratorWeights, z: &LatentSeed) -> Result<Tensor> {
    Ok(forward_traced(weights, z)?.output)
}

/// Backward pass: gradient of a scalar loss with respect to every weight,
/// given the loss gradient at the generator output. The latent never
/// receives (or needs) a gradient.
pub fn backward(
    weights: &GeneratorWeights,
    z: &LatentSeed,
    grad_output: &Tensor,
) -> Result<GeneratorWeights> {
    let trace = forward_traced(weights, z)?;
    backward_from_trace(weights, &trace, grad_output)
}

pub(crate) fn backward_from_trace(
    weights: &GeneratorWeights,
    trace: &ForwardTrace,
    grad_output: &Tensor,
) -> Result<GeneratorWeights> {
    let (c, h, w) = weights.config.output_shape;
    if grad_output.shape() != [c, h, w] {
        return Err(Error::shape(
            "generator::backward",
            format!("grad_output {:?}, output is [{c},{h},{w}]", grad_output.shape()),
        ));
    }
    let (fh, fw) = weights.config.full_size();
    let mut g = crop_backward(grad_output, fh, fw)?;
    let mut grad_layers: Vec<LayerWeights> = Vec::with_capacity(weights.layers.len());
    for (idx, (spec, wl)) in weights.config.layers.iter().zip(&weights.layers).enumerate().rev() {
        g = activation_backward(&trace.pre_acts[idx], &g, spec.activation)?;
        let (mut ggain, mut gbias) = (None, None);
        if spec.normalize {
            let (gx, gg, gb) = channel_norm_backward(
                &trace.conv_outs[idx],
                wl.gain.as_ref().expect("validated"),
                wl.bias.as_ref().expect("validated"),
                &g,
            )?;
            g = gx;
            ggain = Some(gg);
            gbias = Some(gb);
        }
        let (gx, gk) =
            conv_transpose2d_backward(&trace.layer_inputs[idx], &wl.kernels, &g, spec.stride, spec.pad)?;
        g = gx;
        grad_layers.push(LayerWeights { kernels: gk, gain: ggain, bias: gbias });
    }
    grad_layers.reverse();
    Ok(GeneratorWeights { config: weights.config.clone(), layers: grad_layers })
}

/// Center crop to `(c, h, w)`; the input must be at least that large.
fn center_crop(x: &Tensor, c: usize, h: usize, w: usize) -> Result<Tensor> {
    let [xc, xh, xw] = *x.shape() else {
        return Err(Error::shape("center_crop", format!("expected [C,H,W], got {:?}", x.shape())));
    };
    if xc != c || xh < h || xw < w {
        return Err(Error::shape(
            "center_crop",
            format!("cannot crop [{xc},{xh},{xw}] to [{c},{h},{w}]"),
        ));
    }
    if (xh, xw) == (h, w) {
        return Ok(x.clone());
    }
    let (oh, ow) = ((xh - h) / 2, (xw - w) / 2);
    let mut out = Tensor::zeros(&[c, h, w]);
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                out.data_mut()[(ch * h + i) * w + j] =
                    x.data()[(ch * xh + i + oh) * xw + j + ow];
            }
        }
    }
    Ok(out)
}

/// Backward of the center crop: zero-pad the gradient back to the full
/// generated size.
fn crop_backward(grad: &Tensor, full_h: usize, full_w: usize) -> Result<Tensor> {
    let [c, h, w] = *grad.shape() else {
        return Err(Error::shape("crop_backward", format!("expected [C,H,W], got {:?}", grad.shape())));
    };
    if (h, w) == (full_h, full_w) {
        return Ok(grad.clone());
    }
    let (oh, ow) = ((full_h - h) / 2, (full_w - w) / 2);
    let mut out = Tensor::zeros(&[c, full_h, full_w]);
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                out.data_mut()[(ch * full_h + i + oh) * full_w + j + ow] =
                    grad.data()[(ch * h + i) * w + j];
            }
        }
    }
    Ok(out)
}
