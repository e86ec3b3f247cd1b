//! Frequency-domain decoupling.
//!
//! Features are projected with an orthonormal 2-D DCT, split into low/mid/high bands by
//! fixed-ratio masks, refined by one expert per band, recombined with per-channel gates
//! in `(0, 2)`, returned to the spatial domain and added back to the input.

pub mod dct;
pub mod experts;
pub mod masks;

use crate::error::{Error, Result};
use crate::tensor::{concat, global_avg_pool, sigmoid, ConvSpec, Tensor};
use crate::weights::{seeded_rng, WeightStore};

pub use dct::{dct2, dct2_naive, dct2_naive_f64, idct2, Dct2d};
pub use experts::{ansu_forward, drg_forward, gcm_forward};
pub use masks::{band_masks, band_split, BandMasks, BandSet};

const STREAM: u64 = 0x22;

#[derive(Clone, Debug, PartialEq)]
pub struct FddConfig {
    pub channels: usize,
    pub gcm_kernel: usize,
    pub gcm_mlp_expand: usize,
    pub ansu_noise_kernel: usize,
    pub ansu_gate_kernel: usize,
    pub acgf_reduction: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Epsilon of the high-band input standardization.
    pub normalize_eps: f32,
}

impl Default for FddConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            gcm_kernel: 7,
            gcm_mlp_expand: 2,
            ansu_noise_kernel: 7,
            ansu_gate_kernel: 3,
            acgf_reduction: 4,
            alpha: 0.25,
            beta: 0.5,
            normalize_eps: 1e-6,
        }
    }
}

/// Convolution geometry of every FDD layer for one configuration.
#[derive(Clone, Debug)]
pub struct FddSpecs {
    pub gcm_dw: ConvSpec,
    pub gcm_pw1: ConvSpec,
    pub gcm_pw2: ConvSpec,
    pub gcm_res: ConvSpec,
    pub drg_expand: ConvSpec,
    pub drg_sca: ConvSpec,
    pub drg_proj: ConvSpec,
    pub ansu_noise_dw: ConvSpec,
    pub ansu_noise_pw: ConvSpec,
    pub ansu_gate: ConvSpec,
    pub acgf_fc1: ConvSpec,
    pub acgf_fc2: ConvSpec,
}

impl FddConfig {
    pub fn acgf_hidden(&self) -> usize {
        (3 * self.channels / self.acgf_reduction.max(1)).max(4)
    }

    pub fn specs(&self) -> FddSpecs {
        let c = self.channels;
        let wide = c * self.gcm_mlp_expand;
        FddSpecs {
            gcm_dw: ConvSpec::depthwise(c, self.gcm_kernel),
            gcm_pw1: ConvSpec::pointwise(c, wide),
            gcm_pw2: ConvSpec::pointwise(wide, c),
            gcm_res: ConvSpec::pointwise(c, c),
            drg_expand: ConvSpec::pointwise(c, 2 * c),
            drg_sca: ConvSpec::pointwise(c, c),
            drg_proj: ConvSpec::pointwise(c, c),
            ansu_noise_dw: ConvSpec::depthwise(c, self.ansu_noise_kernel),
            ansu_noise_pw: ConvSpec::pointwise(c, c),
            ansu_gate: ConvSpec::dense(c, c, self.ansu_gate_kernel),
            acgf_fc1: ConvSpec::pointwise(3 * c, self.acgf_hidden()),
            acgf_fc2: ConvSpec::pointwise(self.acgf_hidden(), 3 * c),
        }
    }

    fn layers(&self) -> Vec<(&'static str, ConvSpec)> {
        let s = self.specs();
        vec![
            ("gcm.dw", s.gcm_dw),
            ("gcm.pw1", s.gcm_pw1),
            ("gcm.pw2", s.gcm_pw2),
            ("gcm.res", s.gcm_res),
            ("drg.expand", s.drg_expand),
            ("drg.sca", s.drg_sca),
            ("drg.proj", s.drg_proj),
            ("ansu.noise.dw", s.ansu_noise_dw),
            ("ansu.noise.pw", s.ansu_noise_pw),
            ("ansu.gate", s.ansu_gate),
            ("acgf.fc1", s.acgf_fc1),
            ("acgf.fc2", s.acgf_fc2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        masks::validate_ratios(self.alpha, self.beta).map_err(|e| Error::Config(e.to_string()))?;
        if self.channels == 0 || self.gcm_mlp_expand == 0 || self.acgf_reduction == 0 {
            return Err(Error::Config(
                "fdd channels, gcm_mlp_expand and acgf_reduction must be positive".into(),
            ));
        }
        for (name, k) in [
            ("gcm_kernel", self.gcm_kernel),
            ("ansu_noise_kernel", self.ansu_noise_kernel),
            ("ansu_gate_kernel", self.ansu_gate_kernel),
        ] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("fdd.{name} must be odd, got {k}")));
            }
        }
        Ok(())
    }
}

/// Seeded weights for every FDD layer, uniform in `±1/sqrt(fan_in)`.
pub fn fdd_init_weights(seed: u64, cfg: &FddConfig) -> WeightStore {
    let mut rng = seeded_rng(seed, STREAM);
    let mut store = WeightStore::new();
    for (name, spec) in cfg.layers() {
        store.insert_conv_uniform(name, &spec, &mut rng);
    }
    store
}

/// All-zero FDD weights: every expert is the identity and every fusion gate is 1.
pub fn fdd_zero_weights(cfg: &FddConfig) -> WeightStore {
    let mut store = WeightStore::new();
    for (name, spec) in cfg.layers() {
        store.insert_conv_zeros(name, &spec);
    }
    store
}

/// Fusion gates `2 * sigmoid(fc2(gelu(fc1(gap(concat(bands))))))`, laid out low | mid | high.
pub fn acgf_gates(bands: &BandSet, weights: &WeightStore, cfg: &FddConfig) -> Result<Vec<f32>> {
    let c = cfg.channels;
    let stacked = concat(&[&bands.low, &bands.mid, &bands.high])?;
    if stacked.channels() != 3 * c {
        return Err(Error::contract(format!(
            "acgf: bands carry {} channels in total, expected {}",
            stacked.channels(),
            3 * c
        )));
    }
    let context = global_avg_pool(&stacked);
    let hidden: Vec<f32> = weights
        .dense("acgf.fc1", 3 * c, cfg.acgf_hidden(), &context)?
        .into_iter()
        .map(crate::tensor::gelu)
        .collect();
    Ok(weights
        .dense("acgf.fc2", cfg.acgf_hidden(), 3 * c, &hidden)?
        .into_iter()
        .map(|v| 2.0 * sigmoid(v))
        .collect())
}

/// Channel-wise gated sum of the three bands.
pub fn acgf_fuse(bands: &BandSet, weights: &WeightStore, cfg: &FddConfig) -> Result<Tensor> {
    bands
        .low
        .ensure_same_shape(&bands.mid, "acgf: low vs mid")?;
    bands
        .low
        .ensure_same_shape(&bands.high, "acgf: low vs high")?;
    let gates = acgf_gates(bands, weights, cfg)?;
    let c = cfg.channels;
    let low = bands.low.scale_channels(&gates[..c])?;
    let mid = bands.mid.scale_channels(&gates[c..2 * c])?;
    let high = bands.high.scale_channels(&gates[2 * c..])?;
    low.add(&mid)?.add(&high)
}

/// Applies the three experts to their bands.
pub fn refine_bands(bands: &BandSet, weights: &WeightStore, cfg: &FddConfig) -> Result<BandSet> {
    Ok(BandSet {
        low: gcm_forward(&bands.low, weights, cfg)?,
        mid: drg_forward(&bands.mid, weights, cfg)?,
        high: ansu_forward(&bands.high, weights, cfg)?,
    })
}

/// `x + idct2(fuse(experts(split(dct2(x)))))`
pub fn fdd_apply(spatial: &Tensor, weights: &WeightStore, cfg: &FddConfig) -> Result<Tensor> {
    cfg.validate()?;
    if spatial.channels() != cfg.channels {
        return Err(Error::contract(format!(
            "fdd: input has {} channels, configured for {}",
            spatial.channels(),
            cfg.channels
        )));
    }
    let plan = Dct2d::new(spatial.height(), spatial.width());
    let spectrum = plan.forward(spatial);
    let masks = band_masks(spatial.height(), spatial.width(), cfg.alpha, cfg.beta)?;
    let bands = band_split(&spectrum, &masks)?;
    let refined = refine_bands(&bands, weights, cfg)?;
    let fused = acgf_fuse(&refined, weights, cfg)?;
    spatial.add(&plan.inverse(&fused))
}
