//! Composite training objective, evaluated as a plain function of images.
//!
//! ```text
//! main  = l1 * L1 + e * Edge + s * (1 - SSIM)            on sRGB
//!       + hvi * (l1 * L1 + e * Edge + s * (1 - SSIM))    on (H, V, I)
//! total = main + aux * |I_refined - max_rgb(gt)|
//! ```

use crate::color::{hvi_forward, max_rgb, RgbImage};
use crate::error::{Error, Result};
use crate::metrics::{edge_loss_tensor, mean_abs_diff, ssim_tensor};
use crate::pipeline::{EnhanceConfig, LossWeights};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub edge: f64,
    pub ssim_loss: f64,
    pub hvi_l1: f64,
    pub hvi_edge: f64,
    pub hvi_ssim: f64,
    pub aux: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Weighted sum of the individual terms.
    pub fn recompute(&self, w: &LossWeights) -> f64 {
        let srgb = w.l1 * self.l1 + w.edge * self.edge + w.ssim * self.ssim_loss;
        let hvi = w.l1 * self.hvi_l1 + w.edge * self.hvi_edge + w.ssim * self.hvi_ssim;
        srgb + w.hvi * hvi + w.aux * self.aux
    }
}

pub fn loss_total(
    pred: &RgbImage,
    gt: &RgbImage,
    refined_illumination: &Tensor,
    cfg: &EnhanceConfig,
    k: f32,
) -> Result<LossBreakdown> {
    let (p, g) = (pred.tensor(), gt.tensor());
    p.ensure_same_shape(g, "loss_total: pred vs gt")?;
    let target = max_rgb(gt);
    refined_illumination.ensure_same_shape(&target, "loss_total: refined illumination")?;
    let hp = hvi_forward(pred, k)?.to_tensor();
    let hg = hvi_forward(gt, k)?.to_tensor();
    let mut parts = LossBreakdown {
        l1: mean_abs_diff(p, g)?,
        edge: edge_loss_tensor(p, g)?,
        ssim_loss: (1.0 - ssim_tensor(p, g)?).max(0.0),
        hvi_l1: mean_abs_diff(&hp, &hg)?,
        hvi_edge: edge_loss_tensor(&hp, &hg)?,
        hvi_ssim: (1.0 - ssim_tensor(&hp, &hg)?).max(0.0),
        aux: mean_abs_diff(refined_illumination, &target)?,
        total: 0.0,
    };
    parts.total = parts.recompute(&cfg.loss);
    Ok(parts)
}

/// Central differences of `f` along `direction` at steps `h` and `h / 2`.
pub fn fd_gradient_check<F>(
    mut f: F,
    point: &[f64],
    direction: &[f64],
    h: f64,
) -> Result<(f64, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract(format!("step must be positive, got {h}")));
    }
    if point.len() != direction.len() {
        return Err(Error::contract(format!(
            "point has {} entries, direction has {}",
            point.len(),
            direction.len()
        )));
    }
    let mut eval = |t: f64| -> Result<f64> {
        let moved: Vec<f64> = point
            .iter()
            .zip(direction)
            .map(|(p, d)| p + t * d)
            .collect();
        let v = f(&moved)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::contract(format!(
                "non-finite evaluation at offset {t}"
            )))
        }
    };
    let mut central =
        |step: f64| -> Result<f64> { Ok((eval(step)? - eval(-step)?) / (2.0 * step)) };
    Ok((central(h)?, central(h / 2.0)?))
}
