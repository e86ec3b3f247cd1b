//! Synthetic low-light degradation: gamma darkening plus signal-dependent Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::color::RgbImage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DegradeParams {
    pub gamma: f64,
    pub dim: f64,
    pub sigma_read: f64,
    pub sigma_shot: f64,
    pub seed: u64,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            gamma: 2.2,
            dim: 0.2,
            sigma_read: 0.02,
            sigma_shot: 0.05,
            seed: 0,
        }
    }
}

impl DegradeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be >= 1, got {}",
                self.gamma
            )));
        }
        if !(self.dim > 0.0 && self.dim <= 1.0) {
            return Err(Error::Config(format!(
                "dim must be in (0, 1], got {}",
                self.dim
            )));
        }
        for (name, v) in [
            ("sigma_read", self.sigma_read),
            ("sigma_shot", self.sigma_shot),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Same darkening with both noise terms removed.
    pub fn noise_free(&self) -> Self {
        Self {
            sigma_read: 0.0,
            sigma_shot: 0.0,
            ..self.clone()
        }
    }
}

/// `clamp(dim * clean^gamma + n, 0, 1)` with `n ~ N(0, sigma_read^2 + sigma_shot^2 * signal)`.
///
/// Each (channel, row) pair draws from its own ChaCha stream, so any row can be
/// regenerated independently of the others.
pub fn degrade(clean: &RgbImage, params: &DegradeParams) -> Result<RgbImage> {
    params.validate()?;
    let t = clean.tensor();
    let (c, h, w) = t.shape();
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for y in 0..h {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream((ch * h + y) as u64);
            for x in 0..w {
                let signal = params.dim * f64::from(t.get(ch, y, x)).powf(params.gamma);
                let var = params.sigma_read * params.sigma_read
                    + params.sigma_shot * params.sigma_shot * signal;
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = (signal + var.sqrt() * z).clamp(0.0, 1.0);
                out.set(ch, y, x, v as f32);
            }
        }
    }
    RgbImage::new(out)
}
