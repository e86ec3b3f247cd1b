//! End-to-end enhancement graph.
//!
//! ```text
//! rgb ──rhvi──┬─ (H, V) ─ encode ─ fdd ─ decode ─(+)─┐
//!             └─ I_ref ── encode ──────── decode ─(+)─┴─ hvi_inverse ─ rgb
//! ```
//!
//! The two branches share the layout of a small strided-conv encoder and a
//! nearest-upsample decoder; frequency decoupling sits at the chrominance bottleneck.

use crate::color::{hvi_inverse, rhvi_forward, HviImage, RgbImage};
use crate::error::{Error, Result};
use crate::fdd::{
    band_masks, band_split, fdd_apply, fdd_init_weights, fdd_zero_weights, Dct2d, FddConfig,
};
use crate::irm::{irm_init_weights, irm_zero_weights, IrmConfig};
use crate::tensor::{activation, concat, upsample_nearest, Activation, ConvSpec, Tensor};
use crate::weights::{seeded_rng, WeightStore};

/// Weights of the composite training objective.
#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub aux: f64,
    pub hvi: f64,
    pub l1: f64,
    /// Perceptual term; always 0 since no perceptual network is available.
    pub perceptual: f64,
    pub edge: f64,
    pub ssim: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            aux: 0.3,
            hvi: 1.0,
            l1: 1.0,
            perceptual: 0.0,
            edge: 0.1,
            ssim: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnhanceConfig {
    pub feature_channels: usize,
    pub downsample_levels: usize,
    pub irm: IrmConfig,
    pub fdd: FddConfig,
    pub k: f32,
    pub loss: LossWeights,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            feature_channels: 16,
            downsample_levels: 2,
            irm: IrmConfig::default(),
            fdd: FddConfig::default(),
            k: 1.0,
            loss: LossWeights::default(),
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.irm.validate()?;
        self.fdd.validate()?;
        if self.downsample_levels == 0 {
            return Err(Error::Config("downsample_levels must be >= 1".into()));
        }
        let step = 1usize << (self.downsample_levels - 1);
        if self.feature_channels == 0 || !self.feature_channels.is_multiple_of(step) {
            return Err(Error::Config(format!(
                "feature_channels {} must be a positive multiple of {step}",
                self.feature_channels
            )));
        }
        if self.fdd.channels != self.feature_channels {
            return Err(Error::Config(format!(
                "fdd.channels {} must equal feature_channels {}",
                self.fdd.channels, self.feature_channels
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        let l = &self.loss;
        if l.perceptual != 0.0 {
            return Err(Error::Config("perceptual loss weight must be 0".into()));
        }
        if [l.aux, l.hvi, l.l1, l.edge, l.ssim]
            .iter()
            .any(|&v| v.is_nan() || v < 0.0)
        {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Spatial dims must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.downsample_levels
    }

    /// Encoder width at `level`: doubles per level, ending at `feature_channels`.
    fn width(&self, level: usize) -> usize {
        self.feature_channels >> (self.downsample_levels - 1 - level)
    }
}

/// Which of the two backbone branches a layer belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Two planes (H, V).
    Chroma,
    /// One plane (I).
    Luma,
}

impl Branch {
    pub fn prefix(self) -> &'static str {
        match self {
            Branch::Chroma => "chroma",
            Branch::Luma => "luma",
        }
    }

    pub fn planes(self) -> usize {
        match self {
            Branch::Chroma => 2,
            Branch::Luma => 1,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Branch::Chroma => 0x33,
            Branch::Luma => 0x44,
        }
    }
}

fn backbone_layers(cfg: &EnhanceConfig, branch: Branch) -> Vec<(String, ConvSpec)> {
    let p = branch.prefix();
    let levels = cfg.downsample_levels;
    let mut layers = Vec::new();
    for level in 0..levels {
        let cin = if level == 0 {
            branch.planes()
        } else {
            cfg.width(level - 1)
        };
        layers.push((
            format!("{p}.enc{level}"),
            ConvSpec::dense(cin, cfg.width(level), 3).with_stride(2),
        ));
    }
    for level in (0..levels).rev() {
        let cout = if level == 0 {
            cfg.width(0)
        } else {
            cfg.width(level - 1)
        };
        layers.push((
            format!("{p}.dec{level}"),
            ConvSpec::dense(cfg.width(level), cout, 3),
        ));
    }
    layers.push((
        format!("{p}.head"),
        ConvSpec::pointwise(cfg.width(0), branch.planes()),
    ));
    layers
}

fn check_divisible(cfg: &EnhanceConfig, h: usize, w: usize) -> Result<()> {
    let m = cfg.size_multiple();
    if !h.is_multiple_of(m) || !w.is_multiple_of(m) {
        let pad_h = (m - h % m) % m;
        let pad_w = (m - w % m) % m;
        return Err(Error::contract(format!(
            "spatial size {h}x{w} must be divisible by {m}; pad by {pad_h} rows and {pad_w} columns"
        )));
    }
    Ok(())
}

/// Strided 3×3 conv + GELU per level.
pub fn backbone_encode(
    planes: &Tensor,
    weights: &WeightStore,
    cfg: &EnhanceConfig,
    branch: Branch,
) -> Result<Tensor> {
    if planes.channels() != branch.planes() {
        return Err(Error::contract(format!(
            "{} branch expects {} planes, got {}",
            branch.prefix(),
            branch.planes(),
            planes.channels()
        )));
    }
    check_divisible(cfg, planes.height(), planes.width())?;
    let layers = backbone_layers(cfg, branch);
    let mut x = planes.clone();
    for (name, spec) in &layers[..cfg.downsample_levels] {
        x = activation(&weights.conv(name, spec, &x)?, Activation::Gelu);
    }
    Ok(x)
}

/// Nearest 2× upsample + 3×3 conv + GELU per level, then a 1×1 head back to the plane count.
pub fn backbone_decode(
    features: &Tensor,
    weights: &WeightStore,
    cfg: &EnhanceConfig,
    branch: Branch,
) -> Result<Tensor> {
    if features.channels() != cfg.feature_channels {
        return Err(Error::contract(format!(
            "decoder expects {} feature channels, got {}",
            cfg.feature_channels,
            features.channels()
        )));
    }
    let layers = backbone_layers(cfg, branch);
    let (decoders, head) = layers[cfg.downsample_levels..].split_at(cfg.downsample_levels);
    let mut x = features.clone();
    for (name, spec) in decoders {
        x = upsample_nearest(&x, 2);
        x = activation(&weights.conv(name, spec, &x)?, Activation::Gelu);
    }
    let (name, spec) = &head[0];
    weights.conv(name, spec, &x)
}

/// Seeded weights for the whole graph. The IRM and FDD parts equal their standalone inits.
pub fn init_weights(seed: u64, cfg: &EnhanceConfig) -> WeightStore {
    let mut store = irm_init_weights(seed, &cfg.irm);
    store.extend(fdd_init_weights(seed, &cfg.fdd));
    for branch in [Branch::Chroma, Branch::Luma] {
        let mut rng = seeded_rng(seed, branch.stream());
        for (name, spec) in backbone_layers(cfg, branch) {
            store.insert_conv_uniform(&name, &spec, &mut rng);
        }
    }
    store
}

/// Every convolution zero, batch norm at identity.
pub fn zero_weights(cfg: &EnhanceConfig) -> WeightStore {
    let mut store = irm_zero_weights(&cfg.irm);
    store.extend(fdd_zero_weights(&cfg.fdd));
    for branch in [Branch::Chroma, Branch::Luma] {
        for (name, spec) in backbone_layers(cfg, branch) {
            store.insert_conv_zeros(&name, &spec);
        }
    }
    store
}

/// Output of [`enhance_detailed`].
#[derive(Clone, Debug)]
pub struct Enhanced {
    pub image: RgbImage,
    /// Illumination map produced by the refinement module.
    pub refined_illumination: Tensor,
    /// Transform planes after both branches, before the inverse transform.
    pub planes: HviImage,
}

pub fn enhance(img: &RgbImage, weights: &WeightStore, cfg: &EnhanceConfig) -> Result<RgbImage> {
    Ok(enhance_detailed(img, weights, cfg)?.image)
}

pub fn enhance_detailed(
    img: &RgbImage,
    weights: &WeightStore,
    cfg: &EnhanceConfig,
) -> Result<Enhanced> {
    cfg.validate()?;
    check_divisible(cfg, img.height(), img.width())?;
    let (hvi, refined) = rhvi_forward(img, weights, &cfg.irm, cfg.k)?;

    let chroma = concat(&[&hvi.h, &hvi.v])?;
    let feats = backbone_encode(&chroma, weights, cfg, Branch::Chroma)?;
    let feats = fdd_apply(&feats, weights, &cfg.fdd)?;
    let chroma = chroma.add(&backbone_decode(&feats, weights, cfg, Branch::Chroma)?)?;

    let luma = backbone_encode(&refined, weights, cfg, Branch::Luma)?;
    let luma = refined.add(&backbone_decode(&luma, weights, cfg, Branch::Luma)?)?;
    let (lo, hi) = cfg.irm.output_clamp;

    let planes = HviImage {
        h: chroma.channel(0).clamp(-1.0, 1.0),
        v: chroma.channel(1).clamp(-1.0, 1.0),
        i: luma.clamp(lo, hi),
        k: cfg.k,
    };
    let image = hvi_inverse(&planes)?;
    if !image.tensor().is_finite() {
        return Err(Error::contract("enhance produced non-finite output"));
    }
    Ok(Enhanced {
        image,
        refined_illumination: refined,
        planes,
    })
}

/// Replicates the last row and column until both dims are multiples of `multiple`.
pub fn pad_replicate(img: &RgbImage, multiple: usize) -> RgbImage {
    let (h, w) = (img.height(), img.width());
    let ph = h.div_ceil(multiple) * multiple;
    let pw = w.div_ceil(multiple) * multiple;
    let t = img.tensor();
    RgbImage::from_fn(ph, pw, |c, y, x| t.get(c, y.min(h - 1), x.min(w - 1)))
}

/// Top-left `height × width` window.
pub fn crop(img: &RgbImage, height: usize, width: usize) -> RgbImage {
    let t = img.tensor();
    RgbImage::from_fn(height, width, |c, y, x| t.get(c, y, x))
}

/// [`enhance`] on any size: pads by edge replication, then crops back.
pub fn enhance_any_size(
    img: &RgbImage,
    weights: &WeightStore,
    cfg: &EnhanceConfig,
) -> Result<RgbImage> {
    if img.height() == 0 || img.width() == 0 {
        return Err(Error::contract("cannot enhance an empty image"));
    }
    let padded = pad_replicate(img, cfg.size_multiple());
    let out = enhance(&padded, weights, cfg)?;
    Ok(crop(&out, img.height(), img.width()))
}

/// Spatial responses of each frequency band of the chrominance bottleneck.
#[derive(Clone, Debug)]
pub struct BandResponses {
    /// Channel-averaged bottleneck features.
    pub bottleneck: Tensor,
    /// Channel-averaged inverse transform of the full spectrum.
    pub full: Tensor,
    pub low: Tensor,
    pub mid: Tensor,
    pub high: Tensor,
}

impl BandResponses {
    /// The three band planes rescaled to `[0, 1]` for export.
    pub fn normalized(&self) -> [Tensor; 3] {
        [
            min_max_normalize(&self.low),
            min_max_normalize(&self.mid),
            min_max_normalize(&self.high),
        ]
    }
}

/// Rescales to `[0, 1]`; a constant tensor maps to zeros.
pub fn min_max_normalize(t: &Tensor) -> Tensor {
    let lo = t.data().iter().copied().fold(f32::INFINITY, f32::min);
    let hi = t.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let range = hi - lo;
    if range > 0.0 {
        t.map(|v| (v - lo) / range)
    } else {
        t.map(|_| 0.0)
    }
}

/// Projects each band of the chrominance bottleneck spectrum back to the spatial domain.
pub fn bands_visualize(
    img: &RgbImage,
    weights: &WeightStore,
    cfg: &EnhanceConfig,
) -> Result<BandResponses> {
    cfg.validate()?;
    check_divisible(cfg, img.height(), img.width())?;
    let (hvi, _) = rhvi_forward(img, weights, &cfg.irm, cfg.k)?;
    let chroma = concat(&[&hvi.h, &hvi.v])?;
    let feats = backbone_encode(&chroma, weights, cfg, Branch::Chroma)?;
    let plan = Dct2d::new(feats.height(), feats.width());
    let spectrum = plan.forward(&feats);
    let masks = band_masks(feats.height(), feats.width(), cfg.fdd.alpha, cfg.fdd.beta)?;
    let bands = band_split(&spectrum, &masks)?;
    Ok(BandResponses {
        bottleneck: feats.channel_mean(),
        full: plan.inverse(&spectrum).channel_mean(),
        low: plan.inverse(&bands.low).channel_mean(),
        mid: plan.inverse(&bands.mid).channel_mean(),
        high: plan.inverse(&bands.high).channel_mean(),
    })
}
