//! Full-reference image quality metrics. All accumulation is in `f64`.

use crate::color::RgbImage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn mean_abs_diff(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "mean_abs_diff")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak 1.0, capped at [`PSNR_CAP`].
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let m = mse(a.tensor(), b.tensor())?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP))
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian filter over valid window positions.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane[y * w + x + k])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

/// SSIM of two same-shaped tensors, averaged over valid windows and then channels.
pub fn ssim_tensor(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (c, h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::contract(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let taps = gaussian_taps();
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.plane(ch).iter().map(|&v| f64::from(v)).collect();
        let pb: Vec<f64> = b.plane(ch).iter().map(|&v| f64::from(v)).collect();
        let prod =
            |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let mu_a = filter_valid(&pa, h, w, &taps);
        let mu_b = filter_valid(&pb, h, w, &taps);
        let e_aa = filter_valid(&prod(&pa, &pa), h, w, &taps);
        let e_bb = filter_valid(&prod(&pb, &pb), h, w, &taps);
        let e_ab = filter_valid(&prod(&pa, &pb), h, w, &taps);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
            sum += num / den;
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    ssim_tensor(a.tensor(), b.tensor())
}

/// Sobel gradient magnitude per channel, borders replicated.
pub fn sobel_magnitude(t: &Tensor) -> Vec<f64> {
    let (c, h, w) = t.shape();
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let p = t.plane(ch);
        let at = |y: isize, x: isize| -> f64 {
            let yy = y.clamp(0, h as isize - 1) as usize;
            let xx = x.clamp(0, w as isize - 1) as usize;
            f64::from(p[yy * w + xx])
        };
        for y in 0..h as isize {
            for x in 0..w as isize {
                let gx = at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)
                    - at(y - 1, x - 1)
                    - 2.0 * at(y, x - 1)
                    - at(y + 1, x - 1);
                let gy = at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)
                    - at(y - 1, x - 1)
                    - 2.0 * at(y - 1, x)
                    - at(y - 1, x + 1);
                out.push((gx * gx + gy * gy).sqrt());
            }
        }
    }
    out
}

/// Mean absolute difference of Sobel magnitudes.
pub fn edge_loss_tensor(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "edge_loss")?;
    let (ma, mb) = (sobel_magnitude(a), sobel_magnitude(b));
    Ok(ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum::<f64>() / ma.len() as f64)
}

pub fn edge_loss(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    edge_loss_tensor(a.tensor(), b.tensor())
}
