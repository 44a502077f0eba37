use rayon::prelude::*;

use super::{Conv2d, Error, Layer, LayerKind, NetworkWeights, Result};
use crate::imagecore::ImageTile;

/// Channel-major `C x H x W` activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch("feature map with a zero dimension".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}x{height}x{width} feature map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature);
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Planar copy of the tile's RGB channels.
    pub fn from_tile(tile: &ImageTile) -> Self {
        let (w, h) = (tile.width(), tile.height());
        let mut data = vec![0.0; 3 * w * h];
        for (i, px) in tile.pixels().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = px[c];
            }
        }
        Self {
            channels: 3,
            height: h,
            width: w,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn from_parts(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }
}

/// Input scaling applied before the first encoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocess {
    /// Feed `[0, 1]` RGB unchanged.
    #[default]
    Raw,
    /// Subtract the ImageNet channel means and divide by their standard
    /// deviations, as expected by converted torchvision VGG weights.
    Imagenet,
}

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// Reflection index for padding: `-1 -> 1`, `n -> n - 2`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

/// Upper bound on the number of `f64` entries in one im2col block.
const IM2COL_BLOCK: usize = 1 << 20;

/// Stride-1 convolution with reflection padding, so spatial size is kept.
///
/// Rows of the output are processed in blocks: each block is unrolled into a
/// `(C_in * k * k) x (rows * W)` column matrix and multiplied with the kernel
/// matrix in double precision, then rounded to `f32` once.
pub fn conv2d(input: &FeatureMap, conv: &Conv2d) -> Result<FeatureMap> {
    if input.channels != conv.in_channels {
        return Err(Error::ChannelMismatch {
            expected: conv.in_channels,
            actual: input.channels,
        });
    }
    let (h, w, k) = (input.height, input.width, conv.kernel);
    let pad = (k / 2) as isize;
    let kdim = conv.in_channels * k * k;
    let rows_per_block = (IM2COL_BLOCK / (kdim * w)).clamp(1, h);
    let cout = conv.out_channels;
    let weights = conv.weight_f64();

    let blocks: Vec<(usize, Vec<f64>)> = (0..h)
        .step_by(rows_per_block)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|y0| {
            let rows = rows_per_block.min(h - y0);
            let n = rows * w;
            let mut cols = vec![0.0f64; kdim * n];
            for ci in 0..conv.in_channels {
                let plane = input.channel(ci);
                for ky in 0..k {
                    for kx in 0..k {
                        let r = (ci * k + ky) * k + kx;
                        let dst = &mut cols[r * n..(r + 1) * n];
                        for dy in 0..rows {
                            let sy = reflect((y0 + dy) as isize + ky as isize - pad, h);
                            let src = &plane[sy * w..(sy + 1) * w];
                            let out_row = &mut dst[dy * w..(dy + 1) * w];
                            for (x, o) in out_row.iter_mut().enumerate() {
                                *o = src[reflect(x as isize + kx as isize - pad, w)] as f64;
                            }
                        }
                    }
                }
            }
            let mut out = vec![0.0f64; cout * n];
            for (co, row) in out.chunks_exact_mut(n).enumerate() {
                row.fill(conv.bias[co] as f64);
            }
            // SAFETY: the slices hold exactly cout*kdim, kdim*n and cout*n
            // elements laid out row-major with the strides passed below.
            unsafe {
                matrixmultiply::dgemm(
                    cout,
                    kdim,
                    n,
                    1.0,
                    weights.as_ptr(),
                    kdim as isize,
                    1,
                    cols.as_ptr(),
                    n as isize,
                    1,
                    1.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            (y0, out)
        })
        .collect();

    let mut data = vec![0.0f32; cout * h * w];
    for (y0, block) in blocks {
        let n = block.len() / cout;
        for co in 0..cout {
            let dst = &mut data[co * h * w + y0 * w..co * h * w + y0 * w + n];
            for (d, s) in dst.iter_mut().zip(&block[co * n..(co + 1) * n]) {
                *d = *s as f32;
            }
        }
    }
    Ok(FeatureMap::from_parts(cout, h, w, data))
}

pub fn relu(mut f: FeatureMap) -> FeatureMap {
    for v in &mut f.data {
        *v = v.max(0.0);
    }
    f
}

/// 2x2 max pooling with stride 2. Dimensions must be even.
pub fn max_pool2(f: &FeatureMap) -> Result<FeatureMap> {
    if !f.height.is_multiple_of(2) || !f.width.is_multiple_of(2) {
        return Err(Error::IndivisibleInput {
            width: f.width,
            height: f.height,
            factor: 2,
        });
    }
    let (oh, ow) = (f.height / 2, f.width / 2);
    let mut data = Vec::with_capacity(f.channels * oh * ow);
    for c in 0..f.channels {
        let p = f.channel(c);
        for y in 0..oh {
            let r0 = &p[2 * y * f.width..(2 * y + 1) * f.width];
            let r1 = &p[(2 * y + 1) * f.width..(2 * y + 2) * f.width];
            for x in 0..ow {
                data.push(r0[2 * x].max(r0[2 * x + 1]).max(r1[2 * x]).max(r1[2 * x + 1]));
            }
        }
    }
    Ok(FeatureMap::from_parts(f.channels, oh, ow, data))
}

/// Nearest-neighbour x2 upsampling.
pub fn upsample2(f: &FeatureMap) -> FeatureMap {
    let (oh, ow) = (f.height * 2, f.width * 2);
    let mut data = Vec::with_capacity(f.channels * oh * ow);
    for c in 0..f.channels {
        let p = f.channel(c);
        for y in 0..oh {
            let row = &p[(y / 2) * f.width..(y / 2 + 1) * f.width];
            for x in 0..ow {
                data.push(row[x / 2]);
            }
        }
    }
    FeatureMap::from_parts(f.channels, oh, ow, data)
}

/// Applies `layers` in order.
pub fn run_layers(layers: &[Layer], mut f: FeatureMap) -> Result<FeatureMap> {
    for layer in layers {
        f = match &layer.kind {
            LayerKind::Conv(c) => conv2d(&f, c)?,
            LayerKind::Relu => relu(f),
            LayerKind::MaxPool => max_pool2(&f)?,
            LayerKind::Upsample => upsample2(&f),
        };
    }
    if !f.is_finite() {
        return Err(Error::NonFiniteFeature);
    }
    Ok(f)
}

/// Encoder forward pass on raw `[0, 1]` RGB.
pub fn encode(net: &NetworkWeights, img: &ImageTile) -> Result<FeatureMap> {
    encode_with(net, img, Preprocess::Raw)
}

pub fn encode_with(net: &NetworkWeights, img: &ImageTile, preprocess: Preprocess) -> Result<FeatureMap> {
    net.feature_shape(img.height(), img.width())?;
    let mut input = FeatureMap::from_tile(img);
    if preprocess == Preprocess::Imagenet {
        let n = img.width() * img.height();
        for (c, plane) in input.data.chunks_exact_mut(n).enumerate() {
            for v in plane {
                *v = (*v - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
            }
        }
    }
    run_layers(net.encoder(), input)
}

/// Decoder forward pass; output pixels are clamped to `[0, 1]`.
pub fn decode(net: &NetworkWeights, feats: &FeatureMap) -> Result<ImageTile> {
    let expected = net.feature_channels();
    if feats.channels != expected {
        return Err(Error::ChannelMismatch {
            expected,
            actual: feats.channels,
        });
    }
    let out = run_layers(net.decoder(), feats.clone())?;
    let (h, w) = (out.height, out.width);
    let n = h * w;
    let mut rgb = Vec::with_capacity(3 * n);
    for i in 0..n {
        for c in 0..3 {
            rgb.push(out.data[c * n + i]);
        }
    }
    Ok(ImageTile::new(w, h, rgb)?)
}
