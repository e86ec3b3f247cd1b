//! Dense `channels × height × width` tensors and the neural primitives built on them.
//!
//! Every operation here is a pure function with a fixed loop order, so two runs on the
//! same input produce bitwise-identical output. Convolutions accumulate in `f32`; spatial
//! reductions (pooling, standardization statistics) accumulate in `f64`.

use crate::error::{Error, Result};

/// Rank-3 `f32` array stored channel-major, then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::full(channels, height, width, 0.0)
    }

    pub fn full(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::contract(format!(
                "tensor dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::contract(format!(
                "buffer length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    /// Copies one channel out as a single-channel tensor.
    pub fn channel(&self, channel: usize) -> Tensor {
        Tensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.plane(channel).to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what}: shape {:?} does not match {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        self.ensure_same_shape(other, "elementwise op")?;
        Ok(Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f32) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn clamp(&self, lo: f32, hi: f32) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Multiplies every value of channel `c` by `factors[c]`.
    pub fn scale_channels(&self, factors: &[f32]) -> Result<Tensor> {
        if factors.len() != self.channels {
            return Err(Error::contract(format!(
                "per-channel factors: got {} values for {} channels",
                factors.len(),
                self.channels
            )));
        }
        let mut out = self.clone();
        for (c, &s) in factors.iter().enumerate() {
            out.plane_mut(c).iter_mut().for_each(|v| *v *= s);
        }
        Ok(out)
    }

    /// Average over channels, producing a single-channel tensor.
    pub fn channel_mean(&self) -> Tensor {
        let n = self.plane_len();
        let mut acc = vec![0f64; n];
        for c in 0..self.channels {
            for (a, &v) in acc.iter_mut().zip(self.plane(c)) {
                *a += f64::from(v);
            }
        }
        let inv = 1.0 / self.channels as f64;
        Tensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: acc.into_iter().map(|a| (a * inv) as f32).collect(),
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    /// Largest absolute elementwise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn bitwise_eq(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Panics with `label` if any value is NaN or infinite.
pub fn assert_finite(t: &Tensor, label: &str) {
    if let Some(i) = t.data().iter().position(|v| !v.is_finite()) {
        panic!(
            "{label}: non-finite value {} at flat index {i}",
            t.data()[i]
        );
    }
}

/// Geometry of a 2-D convolution with "same" zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    pub fn dense(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            groups: 1,
            has_bias: true,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::dense(in_channels, out_channels, 1)
    }

    pub fn depthwise(channels: usize, kernel: usize) -> Self {
        Self {
            groups: channels,
            ..Self::dense(channels, channels, kernel)
        }
    }

    pub fn with_stride(self, stride: usize) -> Self {
        Self { stride, ..self }
    }

    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// `[out_channels, in_channels / groups, kernel, kernel]`
    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel,
            self.kernel,
        ]
    }

    pub fn weight_len(&self) -> usize {
        self.weight_shape().iter().product()
    }

    /// Number of inputs feeding one output value.
    pub fn fan_in(&self) -> usize {
        self.in_channels / self.groups * self.kernel * self.kernel
    }

    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(self.stride), width.div_ceil(self.stride))
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::contract("conv: channel counts must be positive"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "conv: kernel must be odd, got {}",
                self.kernel
            )));
        }
        if self.stride != 1 && self.stride != 2 {
            return Err(Error::contract(format!(
                "conv: stride must be 1 or 2, got {}",
                self.stride
            )));
        }
        if self.groups == 0
            || !self.in_channels.is_multiple_of(self.groups)
            || !self.out_channels.is_multiple_of(self.groups)
        {
            return Err(Error::contract(format!(
                "conv: groups {} must divide in_channels {} and out_channels {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        Ok(())
    }
}

/// Zero-padded 2-D convolution (cross-correlation, as in common deep-learning frameworks).
///
/// `weights` is laid out `[out][in/groups][ky][kx]`. Each output value is the bias (or 0)
/// followed by the products summed in `(input channel, ky, kx)` order.
pub fn conv2d(
    input: &Tensor,
    spec: &ConvSpec,
    weights: &[f32],
    bias: Option<&[f32]>,
) -> Result<Tensor> {
    spec.validate()?;
    if input.channels() != spec.in_channels {
        return Err(Error::contract(format!(
            "conv: input has {} channels, spec expects in_channels={}",
            input.channels(),
            spec.in_channels
        )));
    }
    if weights.len() != spec.weight_len() {
        return Err(Error::contract(format!(
            "conv: weight buffer has {} values, expected {:?} = {}",
            weights.len(),
            spec.weight_shape(),
            spec.weight_len()
        )));
    }
    if let Some(b) = bias {
        if b.len() != spec.out_channels {
            return Err(Error::contract(format!(
                "conv: bias has {} values, expected out_channels={}",
                b.len(),
                spec.out_channels
            )));
        }
    }

    let (h, w) = (input.height(), input.width());
    let (oh, ow) = spec.output_dims(h, w);
    let k = spec.kernel;
    let s = spec.stride;
    let pad = spec.padding() as isize;
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;

    let mut out = Tensor::zeros(spec.out_channels, oh, ow);
    for o in 0..spec.out_channels {
        let group = o / cout_g;
        let plane = out.plane_mut(o);
        if let Some(b) = bias {
            plane.fill(b[o]);
        }
        for ci in 0..cin_g {
            let src = input.plane(group * cin_g + ci);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weights[((o * cin_g + ci) * k + ky) * k + kx];
                    let dx = kx as isize - pad;
                    // output columns whose source column ox*s + dx lies in [0, w)
                    let lo = if dx < 0 {
                        ((-dx) as usize).div_ceil(s)
                    } else {
                        0
                    };
                    let hi_src = w as isize - 1 - dx;
                    if hi_src < 0 {
                        continue;
                    }
                    let hi = (hi_src as usize / s + 1).min(ow);
                    if lo >= hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * s) as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let orow = &mut plane[oy * ow..(oy + 1) * ow];
                        let first = (lo * s) as isize + dx;
                        if s == 1 {
                            let srow = &row[first as usize..];
                            for (acc, &v) in orow[lo..hi].iter_mut().zip(srow) {
                                *acc += wv * v;
                            }
                        } else {
                            for (i, acc) in orow[lo..hi].iter_mut().enumerate() {
                                *acc += wv * row[first as usize + i * s];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Sigmoid,
}

/// GELU, tanh approximation.
#[inline]
pub fn gelu(x: f32) -> f32 {
    const SQRT_2_OVER_PI: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
}

/// Logistic sigmoid, saturated strictly inside `(0, 1)`.
#[inline]
pub fn sigmoid(x: f32) -> f32 {
    const LO: f32 = f32::MIN_POSITIVE;
    const HI: f32 = 1.0 - f32::EPSILON / 2.0;
    (1.0 / (1.0 + (-x).exp())).clamp(LO, HI)
}

pub fn activation(input: &Tensor, mode: Activation) -> Tensor {
    match mode {
        Activation::Gelu => input.map(gelu),
        Activation::Sigmoid => input.map(sigmoid),
    }
}

/// Inference-mode batch normalization parameters, one entry per channel.
#[derive(Clone, Copy, Debug)]
pub struct BatchNorm<'a> {
    pub gamma: &'a [f32],
    pub beta: &'a [f32],
    pub running_mean: &'a [f32],
    pub running_var: &'a [f32],
}

pub fn batchnorm_infer(input: &Tensor, bn: &BatchNorm<'_>, eps: f32) -> Result<Tensor> {
    let c = input.channels();
    for (name, v) in [
        ("gamma", bn.gamma),
        ("beta", bn.beta),
        ("running_mean", bn.running_mean),
        ("running_var", bn.running_var),
    ] {
        if v.len() != c {
            return Err(Error::contract(format!(
                "batchnorm: {name} has {} entries for {c} channels",
                v.len()
            )));
        }
    }
    if let Some(i) = bn.running_var.iter().position(|&v| v < 0.0) {
        return Err(Error::contract(format!(
            "batchnorm: negative running variance {} in channel {i}",
            bn.running_var[i]
        )));
    }
    let mut out = input.clone();
    for ch in 0..c {
        let scale = bn.gamma[ch] / (bn.running_var[ch] + eps).sqrt();
        let mean = bn.running_mean[ch];
        let beta = bn.beta[ch];
        out.plane_mut(ch)
            .iter_mut()
            .for_each(|v| *v = scale * (*v - mean) + beta);
    }
    Ok(out)
}

/// Per-channel spatial mean.
pub fn global_avg_pool(input: &Tensor) -> Vec<f32> {
    let n = input.plane_len() as f64;
    (0..input.channels())
        .map(|c| {
            let sum: f64 = input.plane(c).iter().map(|&v| f64::from(v)).sum();
            (sum / n) as f32
        })
        .collect()
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat(inputs: &[&Tensor]) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::contract("concat: no inputs"))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::new();
    let mut channels = 0;
    for t in inputs {
        if t.height() != h || t.width() != w {
            return Err(Error::contract(format!(
                "concat: spatial dims {}x{} do not match {h}x{w}",
                t.height(),
                t.width()
            )));
        }
        channels += t.channels();
        data.extend_from_slice(t.data());
    }
    Tensor::from_vec(channels, h, w, data)
}

/// Splits a tensor into its first and last `C/2` channels.
pub fn split_halves(input: &Tensor) -> Result<(Tensor, Tensor)> {
    let c = input.channels();
    if !c.is_multiple_of(2) {
        return Err(Error::contract(format!(
            "split_halves: odd channel count {c}"
        )));
    }
    let mid = c / 2 * input.plane_len();
    let (a, b) = input.data().split_at(mid);
    Ok((
        Tensor::from_vec(c / 2, input.height(), input.width(), a.to_vec())?,
        Tensor::from_vec(c / 2, input.height(), input.width(), b.to_vec())?,
    ))
}

/// Per-channel standardization over spatial positions: `(x - mean) / sqrt(var + eps)`.
pub fn spatial_normalize(input: &Tensor, eps: f32) -> Tensor {
    let n = input.plane_len() as f64;
    let mut out = input.clone();
    for c in 0..input.channels() {
        let plane = input.plane(c);
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = plane
            .iter()
            .map(|&v| {
                let d = f64::from(v) - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let inv = 1.0 / (var + f64::from(eps)).sqrt();
        for (o, &v) in out.plane_mut(c).iter_mut().zip(plane) {
            *o = ((f64::from(v) - mean) * inv) as f32;
        }
    }
    out
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Tensor {
    let (c, h, w) = input.shape();
    Tensor::from_fn(c, h * factor, w * factor, |ch, y, x| {
        input.get(ch, y / factor, x / factor)
    })
}
