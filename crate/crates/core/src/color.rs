//! Max-RGB illumination, the noise-induced bias of the max operator, and the HVI
//! luminance/chrominance transform with its robust (refined-illumination) variant.
//!
//! The chrominance plane is a polar map of hexcone hue and saturation whose radius
//! collapses with intensity:
//!
//! ```text
//! r(I) = (sin(pi * I / 2) + 1e-8)^(1 / k)
//! H    = r(I) * s * cos(2 pi h)
//! V    = r(I) * s * sin(2 pi h)
//! ```

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::irm::{irm_forward, IrmConfig};
use crate::tensor::Tensor;
use crate::weights::WeightStore;

const EPS: f64 = 1e-8;

/// Three-channel image (R, G, B) with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage(Tensor);

impl RgbImage {
    /// Wraps a 3-channel tensor, clamping values into `[0, 1]`.
    pub fn new(tensor: Tensor) -> Result<Self> {
        if tensor.channels() != 3 {
            return Err(Error::contract(format!(
                "rgb image needs 3 channels, got {}",
                tensor.channels()
            )));
        }
        Ok(Self(tensor.clamp(0.0, 1.0)))
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        Self(Tensor::from_fn(3, height, width, f).clamp(0.0, 1.0))
    }

    pub fn constant(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        Self::from_fn(height, width, |c, _, _| rgb[c])
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        [
            self.0.get(0, y, x),
            self.0.get(1, y, x),
            self.0.get(2, y, x),
        ]
    }
}

/// Chrominance planes `h`, `v` and luminance plane `i`, with the density `k` that built them.
#[derive(Clone, Debug, PartialEq)]
pub struct HviImage {
    pub h: Tensor,
    pub v: Tensor,
    pub i: Tensor,
    pub k: f32,
}

impl HviImage {
    /// Stacks the planes as a 3-channel tensor in `(H, V, I)` order.
    pub fn to_tensor(&self) -> Tensor {
        crate::tensor::concat(&[&self.h, &self.v, &self.i]).expect("aligned planes")
    }
}

/// Per-pixel and summary statistics of the Max-RGB noise bias.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub bias_map: Tensor,
    pub mean_bias: f64,
    pub positive_fraction: f64,
    pub max_bias: f64,
}

/// Collapse radius of the chrominance disc at intensity `i`.
pub fn collapse_radius(i: f64, k: f64) -> f64 {
    ((FRAC_PI_2 * i).sin() + EPS).powf(1.0 / k)
}

/// Per-pixel channel maximum.
pub fn max_rgb(img: &RgbImage) -> Tensor {
    let t = img.tensor();
    let (_, h, w) = t.shape();
    let mut data = Vec::with_capacity(h * w);
    for ((&r, &g), &b) in t.plane(0).iter().zip(t.plane(1)).zip(t.plane(2)) {
        data.push(r.max(g).max(b));
    }
    Tensor::from_vec(1, h, w, data).expect("plane dims")
}

/// `max_rgb(noisy) - max_rgb(clean)` and its summary statistics.
pub fn noise_bias(clean: &RgbImage, noisy: &RgbImage) -> Result<BiasReport> {
    clean
        .tensor()
        .ensure_same_shape(noisy.tensor(), "noise_bias")?;
    let bias_map = max_rgb(noisy).sub(&max_rgb(clean))?;
    let n = bias_map.plane_len() as f64;
    let vals = bias_map.data();
    let mean_bias = vals.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let positive_fraction = vals.iter().filter(|&&v| v > 0.0).count() as f64 / n;
    let max_bias = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    Ok(BiasReport {
        bias_map,
        mean_bias,
        positive_fraction,
        max_bias,
    })
}

/// Hexcone hue in `[0, 1)` and saturation in `[0, 1]`.
fn hue_saturation(r: f64, g: f64, b: f64) -> (f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= 0.0 {
        return (0.0, 0.0);
    }
    let s = delta / max.max(EPS);
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    (h, s.clamp(0.0, 1.0))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match (sector as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Builds H and V from the raw pixels, with the radius evaluated on `luminance`.
fn chroma_planes(img: &RgbImage, luminance: &Tensor, k: f64) -> (Tensor, Tensor) {
    let t = img.tensor();
    let (_, hgt, wid) = t.shape();
    let n = hgt * wid;
    let mut hp = Vec::with_capacity(n);
    let mut vp = Vec::with_capacity(n);
    for idx in 0..n {
        let (r, g, b) = (
            f64::from(t.plane(0)[idx]),
            f64::from(t.plane(1)[idx]),
            f64::from(t.plane(2)[idx]),
        );
        let (hue, sat) = hue_saturation(r, g, b);
        let radius = collapse_radius(f64::from(luminance.data()[idx]), k);
        let (sin, cos) = (TAU * hue).sin_cos();
        hp.push((radius * sat * cos) as f32);
        vp.push((radius * sat * sin) as f32);
    }
    (
        Tensor::from_vec(1, hgt, wid, hp).expect("plane dims"),
        Tensor::from_vec(1, hgt, wid, vp).expect("plane dims"),
    )
}

fn check_k(k: f32) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "density k must be positive, got {k}"
        )))
    }
}

pub fn hvi_forward(img: &RgbImage, k: f32) -> Result<HviImage> {
    check_k(k)?;
    let i = max_rgb(img);
    let (h, v) = chroma_planes(img, &i, f64::from(k));
    Ok(HviImage { h, v, i, k })
}

pub fn hvi_inverse(hvi: &HviImage) -> Result<RgbImage> {
    check_k(hvi.k)?;
    hvi.h.ensure_same_shape(&hvi.v, "hvi_inverse: H vs V")?;
    hvi.h.ensure_same_shape(&hvi.i, "hvi_inverse: H vs I")?;
    if hvi.h.channels() != 1 {
        return Err(Error::contract(
            "hvi_inverse: planes must be single-channel",
        ));
    }
    let k = f64::from(hvi.k);
    let (_, hgt, wid) = hvi.i.shape();
    let mut out = Tensor::zeros(3, hgt, wid);
    for idx in 0..hgt * wid {
        let hh = f64::from(hvi.h.data()[idx]);
        let vv = f64::from(hvi.v.data()[idx]);
        let value = f64::from(hvi.i.data()[idx]);
        let radius = collapse_radius(value, k);
        let sat = ((hh * hh + vv * vv).sqrt() / radius.max(EPS)).clamp(0.0, 1.0);
        let hue = if hh == 0.0 && vv == 0.0 {
            0.0
        } else {
            (vv.atan2(hh) / TAU).rem_euclid(1.0)
        };
        let rgb = hsv_to_rgb(hue, sat, value);
        for (c, v) in rgb.iter().enumerate() {
            out.data_mut()[c * hgt * wid + idx] = v.clamp(0.0, 1.0) as f32;
        }
    }
    RgbImage::new(out)
}

/// HVI with the luminance plane replaced by the refined illumination map.
///
/// Hue and saturation still come from the raw pixels; the refined map supplies both the
/// `I` plane and the collapse radius. Returns the transform and the refined map.
pub fn rhvi_forward(
    img: &RgbImage,
    irm_weights: &WeightStore,
    irm_cfg: &IrmConfig,
    k: f32,
) -> Result<(HviImage, Tensor)> {
    check_k(k)?;
    let initial = max_rgb(img);
    let refined = irm_forward(&initial, irm_weights, irm_cfg)?;
    let (h, v) = chroma_planes(img, &refined, f64::from(k));
    Ok((
        HviImage {
            h,
            v,
            i: refined.clone(),
            k,
        },
        refined,
    ))
}
