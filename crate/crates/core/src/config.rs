//! `key = value` configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! k = 1.0
//! feature_channels = 16
//! fdd.alpha = 0.25
//! loss.edge = 0.1
//! ```
//!
//! `fdd.channels` follows `feature_channels` unless set explicitly.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::EnhanceConfig;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value `{value}` for `{key}`")))
}

/// Sets one field by its dotted key.
pub fn set_key(cfg: &mut EnhanceConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "k" => cfg.k = parse(key, value)?,
        "feature_channels" => cfg.feature_channels = parse(key, value)?,
        "downsample_levels" => cfg.downsample_levels = parse(key, value)?,
        "irm.hidden_channels" => cfg.irm.hidden_channels = parse(key, value)?,
        "irm.core_kernel" => cfg.irm.core_kernel = parse(key, value)?,
        "irm.bn_eps" => cfg.irm.bn_eps = parse(key, value)?,
        "irm.clamp_min" => cfg.irm.output_clamp.0 = parse(key, value)?,
        "irm.clamp_max" => cfg.irm.output_clamp.1 = parse(key, value)?,
        "fdd.channels" => cfg.fdd.channels = parse(key, value)?,
        "fdd.gcm_kernel" => cfg.fdd.gcm_kernel = parse(key, value)?,
        "fdd.gcm_mlp_expand" => cfg.fdd.gcm_mlp_expand = parse(key, value)?,
        "fdd.ansu_noise_kernel" => cfg.fdd.ansu_noise_kernel = parse(key, value)?,
        "fdd.ansu_gate_kernel" => cfg.fdd.ansu_gate_kernel = parse(key, value)?,
        "fdd.acgf_reduction" => cfg.fdd.acgf_reduction = parse(key, value)?,
        "fdd.alpha" => cfg.fdd.alpha = parse(key, value)?,
        "fdd.beta" => cfg.fdd.beta = parse(key, value)?,
        "fdd.normalize_eps" => cfg.fdd.normalize_eps = parse(key, value)?,
        "loss.aux" => cfg.loss.aux = parse(key, value)?,
        "loss.hvi" => cfg.loss.hvi = parse(key, value)?,
        "loss.l1" => cfg.loss.l1 = parse(key, value)?,
        "loss.perceptual" => cfg.loss.perceptual = parse(key, value)?,
        "loss.edge" => cfg.loss.edge = parse(key, value)?,
        "loss.ssim" => cfg.loss.ssim = parse(key, value)?,
        _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<EnhanceConfig> {
    let mut cfg = EnhanceConfig::default();
    let mut explicit_fdd_channels = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        set_key(&mut cfg, key, value.trim()).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
            other => other,
        })?;
        explicit_fdd_channels |= key == "fdd.channels";
    }
    if !explicit_fdd_channels {
        cfg.fdd.channels = cfg.feature_channels;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<EnhanceConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
