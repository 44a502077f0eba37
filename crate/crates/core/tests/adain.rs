use strapkit::adain::{
    channel_stats, conv2d, decode, encode, load_weights, stylize, Architecture, Conv2d, FeatureMap, LayerKind,
    NetworkWeights, StylizeConfig,
};
use strapkit::imagecore::resize;
use strapkit::{ImageTile, Rng};

/// Direct convolution with reflection padding, written without im2col.
fn brute_conv(input: &FeatureMap, conv: &Conv2d) -> Vec<f64> {
    let (cin, h, w) = input.shape();
    let k = conv.kernel as isize;
    let pad = k / 2;
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        if n == 1 {
            return 0;
        }
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        i as usize
    };
    let mut out = vec![0.0; conv.out_channels * h * w];
    for o in 0..conv.out_channels {
        for y in 0..h {
            for x in 0..w {
                let mut acc = conv.bias[o] as f64;
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let sy = reflect(y as isize + ky - pad, h);
                            let sx = reflect(x as isize + kx - pad, w);
                            let wt = conv.weight[((o * cin + c) * conv.kernel + ky as usize) * conv.kernel + kx as usize];
                            acc += wt as f64 * input.data()[(c * h + sy) * w + sx] as f64;
                        }
                    }
                }
                out[(o * h + y) * w + x] = acc;
            }
        }
    }
    out
}

fn random_map(c: usize, h: usize, w: usize, rng: &mut Rng) -> FeatureMap {
    FeatureMap::new(c, h, w, (0..c * h * w).map(|_| rng.uniform() as f32).collect()).unwrap()
}

#[test]
fn every_conv_layer_matches_direct_convolution() {
    let net = Architecture::adain_vgg(16).random_weights(5).unwrap();
    let mut rng = Rng::new(6);
    for layer in net.layers() {
        if let LayerKind::Conv(conv) = &layer.kind {
            for (h, w) in [(5, 5), (1, 4), (3, 2)] {
                let input = random_map(conv.in_channels, h, w, &mut rng);
                let fast = conv2d(&input, conv).unwrap();
                let slow = brute_conv(&input, conv);
                for (a, b) in fast.data().iter().zip(&slow) {
                    assert!((*a as f64 - b).abs() < 1e-6, "{}: {a} vs {b}", layer.name);
                }
            }
        }
    }
}

#[test]
fn five_by_five_kernel_and_rgb_input() {
    let mut rng = Rng::new(9);
    let w: Vec<f32> = (0..4 * 3 * 25).map(|_| rng.uniform_range(-1.0, 1.0) as f32).collect();
    let conv = Conv2d::new(4, 3, 5, w, vec![0.1, -0.2, 0.0, 0.3]).unwrap();
    let input = random_map(3, 5, 5, &mut rng);
    let fast = conv2d(&input, &conv).unwrap();
    for (a, b) in fast.data().iter().zip(brute_conv(&input, &conv)) {
        assert!((*a as f64 - b).abs() < 1e-6);
    }
}

#[test]
fn default_architecture_shapes() {
    let arch = Architecture::adain_vgg(1);
    let net = arch.random_weights(1).unwrap();
    assert_eq!(net.feature_channels(), 512);
    assert_eq!(net.feature_shape(224, 224).unwrap(), (512, 28, 28));
    assert_eq!(net.feature_shape(1024, 1024).unwrap(), (512, 128, 128));
    assert_eq!((net.downsample_factor(), net.upsample_factor()), (8, 8));
    let widths: Vec<usize> = net
        .encoder()
        .iter()
        .filter_map(|l| match &l.kind {
            LayerKind::Conv(c) => Some(c.out_channels),
            _ => None,
        })
        .collect();
    assert_eq!(widths, [64, 64, 128, 128, 256, 256, 256, 256, 512]);
    assert!(net.feature_shape(100, 100).is_err());
}

#[test]
fn full_width_network_round_trip_shapes() {
    let net = Architecture::adain_vgg(1).random_weights(2).unwrap();
    let tile = ImageTile::from_fn(32, 32, |x, y, c| ((x + 2 * y + c) % 7) as f32 / 7.0).unwrap();
    let feats = encode(&net, &tile).unwrap();
    assert_eq!(feats.shape(), (512, 4, 4));
    let out = decode(&net, &feats).unwrap();
    assert_eq!((out.width(), out.height()), (32, 32));
    assert!(out.pixels().iter().all(|v| v.is_finite()));
}

#[test]
fn full_width_224_encoder() {
    let net = Architecture::adain_vgg(1).random_weights(2).unwrap();
    let tile = ImageTile::filled(224, 224, 0.5).unwrap();
    let feats = encode(&net, &tile).unwrap();
    assert_eq!(feats.shape(), (512, 28, 28));
    let out = decode(&net, &feats).unwrap();
    assert_eq!((out.width(), out.height()), (224, 224));
}

fn tiny_net() -> NetworkWeights {
    Architecture::adain_vgg(16).random_weights(42).unwrap()
}

fn pattern(seed: u64, size: usize) -> ImageTile {
    let mut rng = Rng::new(seed);
    ImageTile::new(size, size, (0..size * size * 3).map(|_| rng.uniform() as f32).collect()).unwrap()
}

#[test]
fn default_stylize_produces_content_sized_output() {
    let net = tiny_net();
    let cfg = StylizeConfig::default();
    assert_eq!((cfg.alpha, cfg.content_size, cfg.style_size), (1.0, 1024, 256));
    let out = stylize(&net, &pattern(1, 64), &pattern(2, 300), &cfg).unwrap();
    assert_eq!((out.width(), out.height()), (1024, 1024));
    assert!(out.pixels().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
}

#[test]
fn alpha_zero_ignores_style() {
    let net = tiny_net();
    let cfg = StylizeConfig {
        alpha: 0.0,
        content_size: 64,
        style_size: 32,
        ..Default::default()
    };
    let content = pattern(3, 48);
    let a = stylize(&net, &content, &pattern(4, 40), &cfg).unwrap();
    let b = stylize(&net, &content, &pattern(5, 40), &cfg).unwrap();
    let direct = decode(&net, &encode(&net, &resize(&content, 64, 64).unwrap()).unwrap()).unwrap();
    assert_eq!(a.pixels(), b.pixels());
    assert_eq!(a.pixels(), direct.pixels());
}

#[test]
fn identity_network_stylize_moves_statistics() {
    let net = Architecture::identity().identity_weights().unwrap();
    let cfg = StylizeConfig {
        content_size: 16,
        style_size: 16,
        ..Default::default()
    };
    let content = ImageTile::from_fn(16, 16, |x, y, c| 0.3 + 0.2 * (((x + y + c) % 2) as f32)).unwrap();
    let style = ImageTile::from_fn(16, 16, |x, y, c| 0.5 + 0.1 * (((x * y + c) % 3) as f32 - 1.0)).unwrap();
    let out = stylize(&net, &content, &style, &cfg).unwrap();
    let so = channel_stats(&FeatureMap::from_tile(&out), 1e-5);
    let ss = channel_stats(&FeatureMap::from_tile(&style), 1e-5);
    for c in 0..3 {
        assert!((so.mean[c] - ss.mean[c]).abs() < 1e-5);
        assert!((so.std[c] - ss.std[c]).abs() < 1e-4);
    }
}

/// Needs converted pretrained weights; set STRAPKIT_TRAINED_WEIGHTS to the file.
#[test]
fn trained_self_style_preserves_statistics() {
    let Ok(path) = std::env::var("STRAPKIT_TRAINED_WEIGHTS") else {
        eprintln!("STRAPKIT_TRAINED_WEIGHTS not set; skipping");
        return;
    };
    let net = load_weights(path).unwrap();
    let cfg = StylizeConfig {
        content_size: 256,
        preprocess: strapkit::adain::Preprocess::Imagenet,
        ..Default::default()
    };
    let content = pattern(8, 256);
    let out = stylize(&net, &content, &content, &cfg).unwrap();
    let fo = channel_stats(&strapkit::adain::encode_with(&net, &out, cfg.preprocess).unwrap(), cfg.eps);
    let fc = channel_stats(&strapkit::adain::encode_with(&net, &content, cfg.preprocess).unwrap(), cfg.eps);
    for c in 0..fc.mean.len() {
        assert!((fo.mean[c] - fc.mean[c]).abs() <= 0.05 * fc.mean[c].abs().max(1e-3));
        assert!((fo.std[c] - fc.std[c]).abs() <= 0.05 * fc.std[c].max(1e-3));
    }
}
