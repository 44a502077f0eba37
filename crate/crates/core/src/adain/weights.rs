use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Error, Result};
use crate::imagecore::Rng;

/// First eight bytes of every weight file.
pub const WEIGHTS_MAGIC: &[u8; 8] = b"STRAPW1\0";

const TAG_CONV: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_MAXPOOL: u8 = 2;
const TAG_UPSAMPLE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Encoder,
    Decoder,
}

/// Stride-1 convolution with reflection padding of `kernel / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    /// Row-major `out, in, ky, kx`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    weight_f64: Vec<f64>,
}

impl Conv2d {
    pub fn new(out_channels: usize, in_channels: usize, kernel: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!("kernel size {kernel} must be odd")));
        }
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::ShapeMismatch("convolution with zero channels".into()));
        }
        let expected = out_channels * in_channels * kernel * kernel;
        if weight.len() != expected || bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv {out_channels}x{in_channels}x{kernel}x{kernel} needs {expected} weights and {out_channels} biases, got {} and {}",
                weight.len(),
                bias.len()
            )));
        }
        let weight_f64 = weight.iter().map(|&w| w as f64).collect();
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            weight,
            bias,
            weight_f64,
        })
    }

    pub(crate) fn weight_f64(&self) -> &[f64] {
        &self.weight_f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv(Conv2d),
    Relu,
    /// 2x2 max pooling, stride 2.
    MaxPool,
    /// Nearest-neighbour x2 upsampling.
    Upsample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub role: Role,
    pub kind: LayerKind,
}

/// Layer recipe used to build networks with fresh weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerPlan {
    Conv { cin: usize, cout: usize, k: usize },
    Relu,
    MaxPool,
    Upsample,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: Vec<(String, LayerPlan)>,
    pub decoder: Vec<(String, LayerPlan)>,
}

impl Architecture {
    /// VGG-19 up to `relu4_1` plus the mirrored AdaIN decoder. Channel widths
    /// after the RGB input are divided by `width_divisor` (1 for the full
    /// network, larger values give small fixtures with the same topology).
    pub fn adain_vgg(width_divisor: usize) -> Self {
        let d = width_divisor.max(1);
        let c = |n: usize| (n / d).max(1);
        let conv = |cin, cout| LayerPlan::Conv { cin, cout, k: 3 };
        let (c64, c128, c256, c512) = (c(64), c(128), c(256), c(512));
        let mut encoder = Vec::new();
        let mut enc = |name: &str, plan| encoder.push((name.to_string(), plan));
        enc("conv1_1", conv(3, c64));
        enc("relu1_1", LayerPlan::Relu);
        enc("conv1_2", conv(c64, c64));
        enc("relu1_2", LayerPlan::Relu);
        enc("pool1", LayerPlan::MaxPool);
        enc("conv2_1", conv(c64, c128));
        enc("relu2_1", LayerPlan::Relu);
        enc("conv2_2", conv(c128, c128));
        enc("relu2_2", LayerPlan::Relu);
        enc("pool2", LayerPlan::MaxPool);
        enc("conv3_1", conv(c128, c256));
        enc("relu3_1", LayerPlan::Relu);
        for i in 2..=4 {
            enc(&format!("conv3_{i}"), conv(c256, c256));
            enc(&format!("relu3_{i}"), LayerPlan::Relu);
        }
        enc("pool3", LayerPlan::MaxPool);
        enc("conv4_1", conv(c256, c512));
        enc("relu4_1", LayerPlan::Relu);

        let mut decoder = Vec::new();
        let mut dec = |name: &str, plan| decoder.push((name.to_string(), plan));
        dec("dec_conv4_1", conv(c512, c256));
        dec("dec_relu4_1", LayerPlan::Relu);
        dec("dec_up3", LayerPlan::Upsample);
        for i in (2..=4).rev() {
            dec(&format!("dec_conv3_{i}"), conv(c256, c256));
            dec(&format!("dec_relu3_{i}"), LayerPlan::Relu);
        }
        dec("dec_conv3_1", conv(c256, c128));
        dec("dec_relu3_1", LayerPlan::Relu);
        dec("dec_up2", LayerPlan::Upsample);
        dec("dec_conv2_2", conv(c128, c128));
        dec("dec_relu2_2", LayerPlan::Relu);
        dec("dec_conv2_1", conv(c128, c64));
        dec("dec_relu2_1", LayerPlan::Relu);
        dec("dec_up1", LayerPlan::Upsample);
        dec("dec_conv1_2", conv(c64, c64));
        dec("dec_relu1_2", LayerPlan::Relu);
        dec("dec_conv1_1", conv(c64, 3));
        Self { encoder, decoder }
    }

    /// One 1x1 convolution per role with identity kernels and zero bias.
    pub fn identity() -> Self {
        let plan = LayerPlan::Conv { cin: 3, cout: 3, k: 1 };
        Self {
            encoder: vec![("enc_identity".into(), plan)],
            decoder: vec![("dec_identity".into(), plan)],
        }
    }

    /// He-uniform kernels and small uniform biases drawn from `seed`.
    pub fn random_weights(&self, seed: u64) -> Result<NetworkWeights> {
        let mut rng = Rng::new(seed);
        self.build(|cin, cout, k| {
            let bound = (6.0 / (cin * k * k) as f64).sqrt();
            let weight = (0..cout * cin * k * k)
                .map(|_| rng.uniform_range(-bound, bound) as f32)
                .collect();
            let bias = (0..cout).map(|_| rng.uniform_range(-0.01, 0.01) as f32).collect();
            (weight, bias)
        })
    }

    /// Kernels that copy channel `i` to channel `i` (only meaningful when
    /// every convolution is square in channels); used for identity fixtures.
    pub fn identity_weights(&self) -> Result<NetworkWeights> {
        self.build(|cin, cout, k| {
            let mut weight = vec![0.0; cout * cin * k * k];
            for c in 0..cout.min(cin) {
                weight[((c * cin + c) * k + k / 2) * k + k / 2] = 1.0;
            }
            (weight, vec![0.0; cout])
        })
    }

    fn build(&self, mut init: impl FnMut(usize, usize, usize) -> (Vec<f32>, Vec<f32>)) -> Result<NetworkWeights> {
        let mut layers = Vec::new();
        for (role, plans) in [(Role::Encoder, &self.encoder), (Role::Decoder, &self.decoder)] {
            for (name, plan) in plans {
                let kind = match *plan {
                    LayerPlan::Conv { cin, cout, k } => {
                        let (w, b) = init(cin, cout, k);
                        LayerKind::Conv(Conv2d::new(cout, cin, k, w, b)?)
                    }
                    LayerPlan::Relu => LayerKind::Relu,
                    LayerPlan::MaxPool => LayerKind::MaxPool,
                    LayerPlan::Upsample => LayerKind::Upsample,
                };
                layers.push(Layer {
                    name: name.clone(),
                    role,
                    kind,
                });
            }
        }
        NetworkWeights::new(layers)
    }
}

/// Validated encoder/decoder layer stack. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    layers: Vec<Layer>,
    split: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    layers: Vec<SidecarLayer>,
}

#[derive(Serialize, Deserialize)]
struct SidecarLayer {
    name: String,
    role: Role,
    kind: String,
    shape: Vec<usize>,
}

impl NetworkWeights {
    /// Checks role ordering (all encoder layers first), channel compatibility
    /// of consecutive convolutions, RGB input/output and that the decoder
    /// consumes what the encoder produces.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let split = layers.iter().position(|l| l.role == Role::Decoder).unwrap_or(layers.len());
        if layers[split..].iter().any(|l| l.role == Role::Encoder) {
            return Err(Error::FormatError("encoder layer after decoder layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if let LayerKind::Conv(conv) = &layer.kind {
                if conv.weight.iter().chain(&conv.bias).any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteWeight(i));
                }
            }
        }
        let check_chain = |stack: &[Layer], what: &str| -> Result<(usize, usize)> {
            let mut convs = stack.iter().filter_map(|l| match &l.kind {
                LayerKind::Conv(c) => Some(c),
                _ => None,
            });
            let first = convs
                .next()
                .ok_or_else(|| Error::FormatError(format!("{what} has no convolution")))?;
            let mut channels = first.out_channels;
            for c in convs {
                if c.in_channels != channels {
                    return Err(Error::ShapeMismatch(format!(
                        "{what} convolution expects {} input channels but receives {channels}",
                        c.in_channels
                    )));
                }
                channels = c.out_channels;
            }
            Ok((first.in_channels, channels))
        };
        let (enc_in, enc_out) = check_chain(&layers[..split], "encoder")?;
        let (dec_in, dec_out) = check_chain(&layers[split..], "decoder")?;
        if enc_in != 3 {
            return Err(Error::ShapeMismatch(format!("encoder input has {enc_in} channels, expected 3")));
        }
        if enc_out != dec_in {
            return Err(Error::ShapeMismatch(format!(
                "encoder emits {enc_out} channels but decoder expects {dec_in}"
            )));
        }
        if dec_out != 3 {
            return Err(Error::ShapeMismatch(format!("decoder output has {dec_out} channels, expected 3")));
        }
        Ok(Self { layers, split })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn encoder(&self) -> &[Layer] {
        &self.layers[..self.split]
    }

    pub fn decoder(&self) -> &[Layer] {
        &self.layers[self.split..]
    }

    fn last_conv(layers: &[Layer]) -> &Conv2d {
        layers
            .iter()
            .rev()
            .find_map(|l| match &l.kind {
                LayerKind::Conv(c) => Some(c),
                _ => None,
            })
            .expect("validated stack has a convolution")
    }

    pub fn feature_channels(&self) -> usize {
        Self::last_conv(self.encoder()).out_channels
    }

    pub fn downsample_factor(&self) -> usize {
        1 << self.encoder().iter().filter(|l| l.kind == LayerKind::MaxPool).count()
    }

    pub fn upsample_factor(&self) -> usize {
        1 << self.decoder().iter().filter(|l| l.kind == LayerKind::Upsample).count()
    }

    /// `(channels, height, width)` of the features for an input of the given size.
    pub fn feature_shape(&self, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let f = self.downsample_factor();
        if !height.is_multiple_of(f) || !width.is_multiple_of(f) || height == 0 || width == 0 {
            return Err(Error::IndivisibleInput { width, height, factor: f });
        }
        Ok((self.feature_channels(), height / f, width / f))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = WEIGHTS_MAGIC.to_vec();
        out.extend((self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.push(match layer.role {
                Role::Encoder => 0,
                Role::Decoder => 1,
            });
            match &layer.kind {
                LayerKind::Conv(c) => {
                    out.push(TAG_CONV);
                    for d in [c.out_channels, c.in_channels, c.kernel, c.kernel] {
                        out.extend((d as u32).to_le_bytes());
                    }
                    for v in c.weight.iter().chain(&c.bias) {
                        out.extend(v.to_le_bytes());
                    }
                }
                LayerKind::Relu => out.push(TAG_RELU),
                LayerKind::MaxPool => out.push(TAG_MAXPOOL),
                LayerKind::Upsample => out.push(TAG_UPSAMPLE),
            }
        }
        out
    }

    /// Parses the binary format. Layer names are synthesized as
    /// `<role>.<index>.<kind>`; [`load_weights`] replaces them from the sidecar.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        read_exact(&mut cur, &mut magic)?;
        if &magic != WEIGHTS_MAGIC {
            return Err(Error::FormatError("bad magic".into()));
        }
        let count = read_u32(&mut cur)? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let role = match read_u8(&mut cur)? {
                0 => Role::Encoder,
                1 => Role::Decoder,
                r => return Err(Error::FormatError(format!("layer {i}: unknown role tag {r}"))),
            };
            let (kind, label) = match read_u8(&mut cur)? {
                TAG_CONV => {
                    let mut dims = [0usize; 4];
                    for d in &mut dims {
                        *d = read_u32(&mut cur)? as usize;
                    }
                    let [cout, cin, kh, kw] = dims;
                    if kh != kw {
                        return Err(Error::ShapeMismatch(format!("layer {i}: non-square kernel {kh}x{kw}")));
                    }
                    let n = cout
                        .checked_mul(cin)
                        .and_then(|v| v.checked_mul(kh * kw))
                        .filter(|&n| n * 4 <= bytes.len())
                        .ok_or_else(|| Error::FormatError(format!("layer {i}: kernel larger than file")))?;
                    let weight = read_f32s(&mut cur, n)?;
                    let bias = read_f32s(&mut cur, cout)?;
                    (LayerKind::Conv(Conv2d::new(cout, cin, kh, weight, bias)?), "conv")
                }
                TAG_RELU => (LayerKind::Relu, "relu"),
                TAG_MAXPOOL => (LayerKind::MaxPool, "maxpool"),
                TAG_UPSAMPLE => (LayerKind::Upsample, "upsample"),
                t => return Err(Error::FormatError(format!("layer {i}: unknown kind tag {t}"))),
            };
            let role_name = match role {
                Role::Encoder => "encoder",
                Role::Decoder => "decoder",
            };
            layers.push(Layer {
                name: format!("{role_name}.{i}.{label}"),
                role,
                kind,
            });
        }
        if (cur.position() as usize) != bytes.len() {
            return Err(Error::FormatError("trailing bytes after last layer".into()));
        }
        Self::new(layers)
    }

    /// Writes the binary file and a `<path>.json` sidecar listing layer names.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        let sidecar = Sidecar {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let (kind, shape) = match &l.kind {
                        LayerKind::Conv(c) => ("conv", vec![c.out_channels, c.in_channels, c.kernel, c.kernel]),
                        LayerKind::Relu => ("relu", vec![]),
                        LayerKind::MaxPool => ("maxpool", vec![]),
                        LayerKind::Upsample => ("upsample", vec![]),
                    };
                    SidecarLayer {
                        name: l.name.clone(),
                        role: l.role,
                        kind: kind.into(),
                        shape,
                    }
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        let side = sidecar_path(path);
        fs::write(&side, json + "\n").map_err(|source| Error::Io { path: side, source })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Loads and validates a weight file, taking layer names from the JSON
/// sidecar when one is present.
pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkWeights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let mut net = NetworkWeights::from_bytes(&bytes)?;
    let side = sidecar_path(path);
    if let Ok(text) = fs::read_to_string(&side) {
        let sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::FormatError(format!("{}: {e}", side.display())))?;
        if sidecar.layers.len() != net.layers.len() {
            return Err(Error::FormatError(format!(
                "sidecar lists {} layers, weight file has {}",
                sidecar.layers.len(),
                net.layers.len()
            )));
        }
        for (layer, named) in net.layers.iter_mut().zip(sidecar.layers) {
            layer.name = named.name;
        }
    }
    Ok(net)
}

fn read_exact(cur: &mut Cursor<&[u8]>, buf: &mut [u8]) -> Result<()> {
    cur.read_exact(buf)
        .map_err(|_| Error::FormatError("unexpected end of file".into()))
}

fn read_u8(cur: &mut Cursor<&[u8]>) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(cur, &mut b)?;
    Ok(b[0])
}

fn read_u32(cur: &mut Cursor<&[u8]>) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cur, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(cur: &mut Cursor<&[u8]>, n: usize) -> Result<Vec<f32>> {
    let mut raw = vec![0u8; n * 4];
    read_exact(cur, &mut raw)?;
    Ok(raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}
