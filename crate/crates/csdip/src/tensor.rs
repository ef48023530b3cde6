//! Minimal f64 tensor and the differentiable primitives the generator needs.
//!
//! Everything is double precision and row-major; shapes are explicit and all
//! primitives validate them. There is no autodiff graph: each primitive
//! ships a hand-chained backward pass, and every backward pass is checked
//! against a central finite-difference oracle in the tests.
//!
//! Primitives:
//!
//! - [`conv_transpose2d`]: transposed (fractionally-strided) convolution,
//!   output size `H' = stride * (H - 1) + K - 2 * pad`.
//! - [`activation`]: ReLU (derivative 1 at 0) and tanh.
//! - [`channel_norm`]: per-channel standardization over the spatial extent
//!   with learnable gain and bias, epsilon 1e-5.
//!
//! Any primitive that produces a NaN or infinity reports it as an error
//! instead of letting it propagate silently.

use crate::error::{Error, Result};

/// Epsilon inside the channel-norm square root.
pub const NORM_EPS: f64 = 1e-5;

/// Dense row-major f64 tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    /// Tensor from a flat row-major buffer; the buffer length must match the
    /// shape product.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("shape {shape:?} wants {want} entries, buffer has {}", data.len()),
            ));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data, new shape (product must be preserved).
    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        let want: usize = shape.iter().product();
        if want != self.data.len() {
            return Err(Error::shape(
                "Tensor::reshape",
                format!("cannot view {} entries as {shape:?}", self.data.len()),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.data.len() != other.data.len() {
            return Err(Error::shape(
                "Tensor::dot",
                format!("{} vs {} entries", self.data.len(), other.data.len()),
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * other` (shapes must match).
    pub fn add_scaled(&mut self, other: &Tensor, alpha: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "Tensor::add_scaled",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// Errors if any entry is NaN or infinite.
    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if let Some((i, v)) = self.data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::non_finite(op, format!("entry {i} is {v}")));
        }
        Ok(())
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at `x`. ReLU's derivative at exactly 0 is taken to be 1,
    /// matching the subgradient convention used by the descent theory.
    fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Applies the nonlinearity elementwise.
pub fn activation(x: &Tensor, kind: Activation) -> Result<Tensor> {
    let out = Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| kind.eval(v)).collect(),
    };
    out.ensure_finite("activation")?;
    Ok(out)
}

/// Backward pass of [`activation`]; `x` is the pre-activation input.
pub fn activation_backward(x: &Tensor, grad_out: &Tensor, kind: Activation) -> Result<Tensor> {
    if x.shape != grad_out.shape {
        return Err(Error::shape(
            "activation_backward",
            format!("input {:?} vs grad {:?}", x.shape, grad_out.shape),
        ));
    }
    let out = Tensor {
        shape: x.shape.clone(),
        data: x
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(&v, &g)| kind.deriv(v) * g)
            .collect(),
    };
    out.ensure_finite("activation_backward")?;
    Ok(out)
}

fn validate_conv_args(
    op: &'static str,
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
    let [c_in, h, w] = *input.shape() else {
        return Err(Error::shape(op, format!("input must be [C,H,W], got {:?}", input.shape())));
    };
    let [kc_in, c_out, kh, kw] = *kernels.shape() else {
        return Err(Error::shape(
            op,
            format!("kernels must be [C_in,C_out,K,K], got {:?}", kernels.shape()),
        ));
    };
    if kh != kw {
        return Err(Error::shape(op, format!("kernel must be square, got {kh}x{kw}")));
    }
    if kc_in != c_in {
        return Err(Error::shape(
            op,
            format!("kernel expects {kc_in} input channels, input has {c_in}"),
        ));
    }
    if c_in == 0 || c_out == 0 || h == 0 || w == 0 || kh == 0 {
        return Err(Error::invalid(op, "zero-sized dimension"));
    }
    if stride == 0 {
        return Err(Error::invalid(op, "stride must be >= 1"));
    }
    if pad >= kh {
        return Err(Error::invalid(op, format!("pad {pad} must be < kernel {kh}")));
    }
    let h_out = stride * (h - 1) + kh;
    let w_out = stride * (w - 1) + kw;
    if h_out < 2 * pad + 1 || w_out < 2 * pad + 1 {
        return Err(Error::invalid(op, "padding consumes the whole output"));
    }
    Ok((c_in, c_out, h, w, kh, h_out - 2 * pad, w_out - 2 * pad))
}

/// Transposed 2-D convolution.
///
/// `input` is `[C_in, H, W]`, `kernels` is `[C_in, C_out, K, K]`; the output
/// is `[C_out, H', W']` with `H' = stride * (H - 1) + K - 2 * pad`. Each
/// input pixel scatters a kernel-sized patch into the output, which is what
/// makes this the adjoint of an ordinary strided convolution.
pub fn conv_transpose2d(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (c_in, c_out, h, w, k, h_out, w_out) =
        validate_conv_args("conv_transpose2d", input, kernels, stride, pad)?;
    let mut out = Tensor::zeros(&[c_out, h_out, w_out]);
    for ci in 0..c_in {
        for i in 0..h {
            for j in 0..w {
                let x = input.data[(ci * h + i) * w + j];
                if x == 0.0 {
                    continue;
                }
                for co in 0..c_out {
                    let kbase = ((ci * c_out + co) * k) * k;
                    let obase = co * h_out * w_out;
                    for ki in 0..k {
                        let oi = (stride * i + ki) as isize - pad as isize;
                        if oi < 0 || oi as usize >= h_out {
                            continue;
                        }
                        let orow = obase + oi as usize * w_out;
                        let krow = kbase + ki * k;
                        for kj in 0..k {
                            let oj = (stride * j + kj) as isize - pad as isize;
                            if oj < 0 || oj as usize >= w_out {
                                continue;
                            }
                            out.data[orow + oj as usize] += x * kernels.data[krow + kj];
                        }
                    }
                }
            }
        }
    }
    out.ensure_finite("conv_transpose2d")?;
    Ok(out)
}

/// Backward pass of [`conv_transpose2d`]: gradients with respect to the
/// input and the kernels, given the gradient at the output.
pub fn conv_transpose2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Tensor)> {
    let (c_in, c_out, h, w, k, h_out, w_out) =
        validate_conv_args("conv_transpose2d_backward", input, kernels, stride, pad)?;
    if grad_out.shape() != [c_out, h_out, w_out] {
        return Err(Error::shape(
            "conv_transpose2d_backward",
            format!("grad_out {:?}, expected [{c_out},{h_out},{w_out}]", grad_out.shape()),
        ));
    }
    let mut grad_input = Tensor::zeros(&[c_in, h, w]);
    let mut grad_kernels = Tensor::zeros(&[c_in, c_out, k, k]);
    for ci in 0..c_in {
        for i in 0..h {
            for j in 0..w {
                let x = input.data[(ci * h + i) * w + j];
                let mut acc_in = 0.0;
                for co in 0..c_out {
                    let kbase = ((ci * c_out + co) * k) * k;
                    let obase = co * h_out * w_out;
                    for ki in 0..k {
                        let oi = (stride * i + ki) as isize - pad as isize;
                        if oi < 0 || oi as usize >= h_out {
                            continue;
                        }
                        let orow = obase + oi as usize * w_out;
                        let krow = kbase + ki * k;
                        for kj in 0..k {
                            let oj = (stride * j + kj) as isize - pad as isize;
                            if oj < 0 || oj as usize >= w_out {
                                continue;
                            }
                            let g = grad_out.data[orow + oj as usize];
                            acc_in += g * kernels.data[krow + kj];
                            grad_kernels.data[krow + kj] += g * x;
                        }
                    }
                }
                grad_input.data[(ci * h + i) * w + j] = acc_in;
            }
        }
    }
    grad_input.ensure_finite("conv_transpose2d_backward")?;
    grad_kernels.ensure_finite("conv_transpose2d_backward")?;
    Ok((grad_input, grad_kernels))
}

fn validate_norm_args(
    op: &'static str,
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
) -> Result<(usize, usize)> {
    let [c, h, w] = *x.shape() else {
        return Err(Error::shape(op, format!("input must be [C,H,W], got {:?}", x.shape())));
    };
    if gain.len() != c || bias.len() != c {
        return Err(Error::shape(
            op,
            format!("gain/bias must have {c} entries, got {}/{}", gain.len(), bias.len()),
        ));
    }
    if h * w == 0 {
        return Err(Error::invalid(op, "empty spatial extent"));
    }
    Ok((c, h * w))
}

/// Per-channel statistics used by both directions of the channel norm.
fn channel_moments(x: &Tensor, c: usize, n: usize) -> Vec<(f64, f64)> {
    (0..c)
        .map(|ch| {
            let slice = &x.data[ch * n..(ch + 1) * n];
            let mean = slice.iter().sum::<f64>() / n as f64;
            let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            (mean, var)
        })
        .collect()
}

/// Per-channel normalization over the spatial extent: each channel is
/// standardized to mean 0 / variance 1 (plus epsilon), then rescaled by a
/// learnable gain and shifted by a learnable bias. A constant channel comes
/// out as exactly its bias.
pub fn channel_norm(x: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, n) = validate_norm_args("channel_norm", x, gain, bias)?;
    let moments = channel_moments(x, c, n);
    let mut out = Tensor::zeros(x.shape());
    for ch in 0..c {
        let (mean, var) = moments[ch];
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        let (g, b) = (gain.data[ch], bias.data[ch]);
        for i in 0..n {
            out.data[ch * n + i] = g * (x.data[ch * n + i] - mean) * inv + b;
        }
    }
    out.ensure_finite("channel_norm")?;
    Ok(out)
}

/// Backward pass of [`channel_norm`]: gradients with respect to the input,
/// the gain, and the bias.
pub fn channel_norm_backward(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c, n) = validate_norm_args("channel_norm_backward", x, gain, bias)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shape(
            "channel_norm_backward",
            format!("grad_out {:?} vs input {:?}", grad_out.shape(), x.shape()),
        ));
    }
    let moments = channel_moments(x, c, n);
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_gain = Tensor::zeros(gain.shape());
    let mut grad_bias = Tensor::zeros(bias.shape());
    let nf = n as f64;
    for ch in 0..c {
        let (mean, var) = moments[ch];
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        let g = gain.data[ch];
        let xs = &x.data[ch * n..(ch + 1) * n];
        let gs = &grad_out.data[ch * n..(ch + 1) * n];
        // Gradients through the standardized values, then through the
        // per-channel mean and variance.
        let mut sum_g = 0.0;
        let mut sum_g_xhat = 0.0;
        for i in 0..n {
            let xhat = (xs[i] - mean) * inv;
            sum_g += gs[i];
            sum_g_xhat += gs[i] * xhat;
        }
        grad_gain.data[ch] = sum_g_xhat;
        grad_bias.data[ch] = sum_g;
        let dvar = -0.5 * g * inv * inv * inv * {
            let mut acc = 0.0;
            for i in 0..n {
                acc += gs[i] * (xs[i] - mean);
            }
            acc
        };
        let dmean = -g * inv * sum_g;
        for i in 0..n {
            grad_x.data[ch * n + i] =
                g * inv * gs[i] + dvar * 2.0 * (xs[i] - mean) / nf + dmean / nf;
        }
    }
    grad_x.ensure_finite("channel_norm_backward")?;
    Ok((grad_x, grad_gain, grad_bias))
}
