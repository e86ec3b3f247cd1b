//! Named parameter storage shared by every learned block.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{conv2d, BatchNorm, ConvSpec, Tensor};

/// Deterministic generator for weight initialisation; each block draws from its own stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// An n-dimensional parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Param {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::contract(format!(
                "param: dims {dims:?} hold {n} values, buffer has {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: Vec<usize>, value: f32) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![value; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered map from dotted names (`gcm.dw.weight`) to parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    entries: BTreeMap<String, Param>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a parameter.
    pub fn insert(&mut self, name: impl Into<String>, param: Param) {
        self.entries.insert(name.into(), param);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    /// Looks up `name` and checks that it has exactly `dims`.
    pub fn get_shaped(&self, name: &str, dims: &[usize]) -> Result<&[f32]> {
        let p = self.get(name)?;
        if p.dims() != dims {
            return Err(Error::WeightShape {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: p.dims().to_vec(),
            });
        }
        Ok(p.data())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates entries in sorted-name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.entries.values().map(Param::len).sum()
    }

    /// Adds every entry of `other`, replacing on name collisions.
    pub fn extend(&mut self, other: WeightStore) {
        self.entries.extend(other.entries);
    }

    /// Sets every parameter whose name starts with `prefix` to zero.
    pub fn zero_prefix(&mut self, prefix: &str) {
        for (name, p) in self.entries.iter_mut() {
            if name.starts_with(prefix) {
                p.data.fill(0.0);
            }
        }
    }

    /// Inserts a zero-initialised conv layer (`{name}.weight`, `{name}.bias`).
    pub fn insert_conv_zeros(&mut self, name: &str, spec: &ConvSpec) {
        self.insert(
            format!("{name}.weight"),
            Param::zeros(spec.weight_shape().to_vec()),
        );
        if spec.has_bias {
            self.insert(
                format!("{name}.bias"),
                Param::zeros(vec![spec.out_channels]),
            );
        }
    }

    /// Inserts a conv layer with weights and bias drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn insert_conv_uniform(&mut self, name: &str, spec: &ConvSpec, rng: &mut impl Rng) {
        let bound = 1.0 / (spec.fan_in() as f32).sqrt();
        let weights = (0..spec.weight_len())
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        self.insert(
            format!("{name}.weight"),
            Param {
                dims: spec.weight_shape().to_vec(),
                data: weights,
            },
        );
        if spec.has_bias {
            let bias = (0..spec.out_channels)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            self.insert(
                format!("{name}.bias"),
                Param {
                    dims: vec![spec.out_channels],
                    data: bias,
                },
            );
        }
    }

    /// Inserts batch-norm parameters at identity (`gamma=1, beta=0, mean=0, var=1`).
    pub fn insert_bn_identity(&mut self, name: &str, channels: usize) {
        self.insert(format!("{name}.gamma"), Param::filled(vec![channels], 1.0));
        self.insert(format!("{name}.beta"), Param::zeros(vec![channels]));
        self.insert(format!("{name}.mean"), Param::zeros(vec![channels]));
        self.insert(format!("{name}.var"), Param::filled(vec![channels], 1.0));
    }

    /// Applies the conv layer stored under `name`.
    pub fn conv(&self, name: &str, spec: &ConvSpec, input: &Tensor) -> Result<Tensor> {
        let w = self.get_shaped(&format!("{name}.weight"), &spec.weight_shape())?;
        let b = if spec.has_bias {
            Some(self.get_shaped(&format!("{name}.bias"), &[spec.out_channels])?)
        } else {
            None
        };
        conv2d(input, spec, w, b)
    }

    /// Applies a 1×1 layer to a vector, treated as a `len × 1 × 1` tensor.
    pub fn dense(
        &self,
        name: &str,
        in_len: usize,
        out_len: usize,
        input: &[f32],
    ) -> Result<Vec<f32>> {
        let t = Tensor::from_vec(in_len, 1, 1, input.to_vec())?;
        Ok(self
            .conv(name, &ConvSpec::pointwise(in_len, out_len), &t)?
            .into_vec())
    }

    pub fn batchnorm(&self, name: &str, channels: usize) -> Result<BatchNorm<'_>> {
        let dims = [channels];
        Ok(BatchNorm {
            gamma: self.get_shaped(&format!("{name}.gamma"), &dims)?,
            beta: self.get_shaped(&format!("{name}.beta"), &dims)?,
            running_mean: self.get_shaped(&format!("{name}.mean"), &dims)?,
            running_var: self.get_shaped(&format!("{name}.var"), &dims)?,
        })
    }
}
