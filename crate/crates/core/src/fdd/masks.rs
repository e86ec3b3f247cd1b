//! Fixed-ratio partition of a DCT spectrum into low, mid and high bands.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Binary band masks over an `height × width` spectrum.
///
/// With `la = floor(alpha H)`, `lb = floor(beta H)` (and likewise for W):
/// low is `i < la && j < la_w`, high is `i >= lb || j >= lb_w`, and mid is the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMasks {
    pub height: usize,
    pub width: usize,
    pub alpha: f64,
    pub beta: f64,
    pub low: Vec<bool>,
    pub mid: Vec<bool>,
    pub high: Vec<bool>,
}

impl BandMasks {
    pub fn count_low(&self) -> usize {
        self.low.iter().filter(|&&b| b).count()
    }

    pub fn count_mid(&self) -> usize {
        self.mid.iter().filter(|&&b| b).count()
    }

    pub fn count_high(&self) -> usize {
        self.high.iter().filter(|&&b| b).count()
    }
}

/// Three equal-shaped frequency-domain tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct BandSet {
    pub low: Tensor,
    pub mid: Tensor,
    pub high: Tensor,
}

pub fn validate_ratios(alpha: f64, beta: f64) -> Result<()> {
    if alpha > 0.0 && alpha < beta && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "band ratios must satisfy 0 < alpha < beta <= 1, got alpha={alpha}, beta={beta}"
        )))
    }
}

pub fn band_masks(height: usize, width: usize, alpha: f64, beta: f64) -> Result<BandMasks> {
    validate_ratios(alpha, beta)?;
    let low_h = (alpha * height as f64).floor() as usize;
    let low_w = (alpha * width as f64).floor() as usize;
    let high_h = (beta * height as f64).floor() as usize;
    let high_w = (beta * width as f64).floor() as usize;
    let n = height * width;
    let (mut low, mut mid, mut high) = (vec![false; n], vec![false; n], vec![false; n]);
    for i in 0..height {
        for j in 0..width {
            let idx = i * width + j;
            low[idx] = i < low_h && j < low_w;
            high[idx] = i >= high_h || j >= high_w;
            mid[idx] = !low[idx] && !high[idx];
        }
    }
    Ok(BandMasks {
        height,
        width,
        alpha,
        beta,
        low,
        mid,
        high,
    })
}

fn apply_mask(spectrum: &Tensor, mask: &[bool]) -> Tensor {
    let mut out = spectrum.clone();
    for c in 0..spectrum.channels() {
        for (v, &keep) in out.plane_mut(c).iter_mut().zip(mask) {
            if !keep {
                *v = 0.0;
            }
        }
    }
    out
}

/// Multiplies the spectrum by each mask, broadcasting over channels.
pub fn band_split(spectrum: &Tensor, masks: &BandMasks) -> Result<BandSet> {
    if (spectrum.height(), spectrum.width()) != (masks.height, masks.width) {
        return Err(Error::contract(format!(
            "band_split: spectrum is {}x{}, masks are {}x{}",
            spectrum.height(),
            spectrum.width(),
            masks.height,
            masks.width
        )));
    }
    Ok(BandSet {
        low: apply_mask(spectrum, &masks.low),
        mid: apply_mask(spectrum, &masks.mid),
        high: apply_mask(spectrum, &masks.high),
    })
}
