use serde::{Deserialize, Serialize};

use super::{decode, encode_with, Error, FeatureMap, NetworkWeights, Preprocess, Result};
use crate::imagecore::{resize, ImageTile};

/// Per-channel mean and standard deviation over the spatial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// `mean_c` over `H x W`, `std_c = sqrt(population variance + eps)`.
pub fn channel_stats(f: &FeatureMap, eps: f64) -> FeatureStats {
    let n = (f.height() * f.width()) as f64;
    let (mut mean, mut std) = (Vec::with_capacity(f.channels()), Vec::with_capacity(f.channels()));
    for c in 0..f.channels() {
        let plane = f.channel(c);
        let m = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = plane.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n;
        mean.push(m);
        std.push((var + eps).sqrt());
    }
    FeatureStats { mean, std }
}

/// Adaptive instance normalization: shifts and scales every content channel
/// so its mean and standard deviation become those of the matching style
/// channel. A content channel with zero spread maps to the style mean.
pub fn adain_align(content: &FeatureMap, style: &FeatureMap, eps: f64) -> Result<FeatureMap> {
    if content.channels() != style.channels() {
        return Err(Error::ChannelMismatch {
            expected: content.channels(),
            actual: style.channels(),
        });
    }
    let cs = channel_stats(content, eps);
    let ss = channel_stats(style, eps);
    let mut data = Vec::with_capacity(content.data().len());
    for c in 0..content.channels() {
        let (mc, sc) = (cs.mean[c], cs.std[c]);
        let (ms, sd) = (ss.mean[c], ss.std[c]);
        if sc == 0.0 {
            data.extend(std::iter::repeat_n(ms as f32, content.channel(c).len()));
            continue;
        }
        let scale = sd / sc;
        data.extend(content.channel(c).iter().map(|&v| ((v as f64 - mc) * scale + ms) as f32));
    }
    FeatureMap::new(content.channels(), content.height(), content.width(), data)
}

/// `alpha * target + (1 - alpha) * content`, elementwise.
pub fn blend(content: &FeatureMap, target: &FeatureMap, alpha: f64) -> Result<FeatureMap> {
    if content.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "cannot blend {:?} with {:?}",
            content.shape(),
            target.shape()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    let data = content
        .data()
        .iter()
        .zip(target.data())
        .map(|(&c, &t)| (alpha * t as f64 + (1.0 - alpha) * c as f64) as f32)
        .collect();
    let (c, h, w) = content.shape();
    FeatureMap::new(c, h, w, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StylizeConfig {
    /// Stylization coefficient: 1 uses the aligned features only, 0 keeps the content features.
    pub alpha: f64,
    /// Side length the content tile is resized to.
    pub content_size: usize,
    /// Side length the style image is resized to.
    pub style_size: usize,
    /// Added to the variance before the square root.
    pub eps: f64,
    pub preprocess: Preprocess,
}

impl Default for StylizeConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            content_size: 1024,
            style_size: 256,
            eps: 1e-5,
            preprocess: Preprocess::Raw,
        }
    }
}

impl StylizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps {} must be positive", self.eps)));
        }
        if self.content_size == 0 || self.style_size == 0 {
            return Err(Error::InvalidConfig("image sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Renders `content` in the style of `style`: both are resized to their
/// configured squares and encoded; the aligned features are blended with
/// `alpha` and decoded.
/// The output carries the content tile's metadata.
pub fn stylize(net: &NetworkWeights, content: &ImageTile, style: &ImageTile, cfg: &StylizeConfig) -> Result<ImageTile> {
    cfg.validate()?;
    net.feature_shape(cfg.content_size, cfg.content_size)?;
    net.feature_shape(cfg.style_size, cfg.style_size)?;
    let content_img = resize(content, cfg.content_size, cfg.content_size)?;
    let content_feats = encode_with(net, &content_img, cfg.preprocess)?;
    let mixed = if cfg.alpha == 0.0 {
        content_feats
    } else {
        let style_img = resize(style, cfg.style_size, cfg.style_size)?;
        let style_feats = encode_with(net, &style_img, cfg.preprocess)?;
        let target = adain_align(&content_feats, &style_feats, cfg.eps)?;
        blend(&content_feats, &target, cfg.alpha)?
    };
    Ok(decode(net, &mixed)?.with_meta(content.meta().clone()))
}
