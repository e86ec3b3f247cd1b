//! Band-specific expert blocks. Each one is residual: at zero weights it returns its input.

use crate::error::Result;
use crate::tensor::{
    activation, global_avg_pool, spatial_normalize, split_halves, Activation, Tensor,
};
use crate::weights::WeightStore;

use super::FddConfig;

/// Low band: `x + dw(x) + mlp(x) + res(x)`, three branches on the same input.
pub fn gcm_forward(low: &Tensor, weights: &WeightStore, cfg: &FddConfig) -> Result<Tensor> {
    let s = cfg.specs();
    let dw = weights.conv("gcm.dw", &s.gcm_dw, low)?;
    let hidden = activation(&weights.conv("gcm.pw1", &s.gcm_pw1, low)?, Activation::Gelu);
    let pw = weights.conv("gcm.pw2", &s.gcm_pw2, &hidden)?;
    let res = weights.conv("gcm.res", &s.gcm_res, low)?;
    low.add(&dw)?.add(&pw)?.add(&res)
}

/// Mid band: split gating `f1 * gelu(f2)`, then sigmoid channel attention and a projection.
pub fn drg_forward(mid: &Tensor, weights: &WeightStore, cfg: &FddConfig) -> Result<Tensor> {
    let s = cfg.specs();
    let expanded = weights.conv("drg.expand", &s.drg_expand, mid)?;
    let (f1, f2) = split_halves(&expanded)?;
    let gated = f1.mul(&activation(&f2, Activation::Gelu))?;
    let pooled = global_avg_pool(&gated);
    let attn: Vec<f32> = weights
        .dense("drg.sca", cfg.channels, cfg.channels, &pooled)?
        .into_iter()
        .map(crate::tensor::sigmoid)
        .collect();
    let proj = weights.conv("drg.proj", &s.drg_proj, &gated.scale_channels(&attn)?)?;
    mid.add(&proj)
}

/// High band: subtract predicted noise, modulated by a sigmoid gate, both computed on the
/// spatially standardized input.
pub fn ansu_forward(high: &Tensor, weights: &WeightStore, cfg: &FddConfig) -> Result<Tensor> {
    let s = cfg.specs();
    let normed = spatial_normalize(high, cfg.normalize_eps);
    let noise = weights.conv("ansu.noise.dw", &s.ansu_noise_dw, &normed)?;
    let noise = weights.conv("ansu.noise.pw", &s.ansu_noise_pw, &noise)?;
    let gate = activation(
        &weights.conv("ansu.gate", &s.ansu_gate, &normed)?,
        Activation::Sigmoid,
    );
    high.sub(&noise.mul(&gate)?)
}
