use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcmra::model::{ClassifierConfig, ConvBlock, InputTensor, ModelShape, Network};

/// Direct zero-padded convolution + ReLU, no im2col.
#[allow(clippy::too_many_arguments)]
fn naive_conv(input: &[f64], channels: usize, width: usize, w: &[f32], b: &[f32], out_c: usize, k: usize, stride: usize) -> (Vec<f64>, usize) {
    let pad = (k / 2) as isize;
    let out_w = (width + 2 * (k / 2) - k) / stride + 1;
    let mut out = vec![0.0; out_c * out_w * out_w];
    for oc in 0..out_c {
        for oy in 0..out_w {
            for ox in 0..out_w {
                let mut acc = b[oc] as f64;
                for ic in 0..channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad;
                            let ix = (ox * stride + kx) as isize - pad;
                            if iy < 0 || ix < 0 || iy >= width as isize || ix >= width as isize {
                                continue;
                            }
                            let wi = ((oc * channels + ic) * k + ky) * k + kx;
                            acc += w[wi] as f64 * input[(ic * width + iy as usize) * width + ix as usize];
                        }
                    }
                }
                out[(oc * out_w + oy) * out_w + ox] = acc.max(0.0);
            }
        }
    }
    (out, out_w)
}

#[test]
fn forward_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..10 {
        let blocks: Vec<ConvBlock> = (0..rng.random_range(1..=3))
            .map(|_| ConvBlock::new(rng.random_range(1..=6), [1, 3, 5][rng.random_range(0..3)], rng.random_range(1..=2)))
            .collect();
        let config = ClassifierConfig { conv_blocks: blocks.clone(), ..Default::default() };
        let (channels, width) = (rng.random_range(1..=3), [8usize, 16][rng.random_range(0..2)]);
        let net = Network::init(&config, ModelShape { in_channels: channels, width, env_dim: 0 }, &mut rng).unwrap();
        let data: Vec<f32> = (0..channels * width * width).map(|_| rng.random_range(-2.0..2.0)).collect();
        let trace = net.forward(&InputTensor { channels, width, data: data.clone() }, &[]).unwrap();

        let mut x: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        let (mut c, mut w) = (channels, width);
        for layer in &net.convs {
            let (y, ow) = naive_conv(&x, c, w, &layer.weights, &layer.bias, layer.out_channels, layer.kernel, layer.stride);
            x = y;
            c = layer.out_channels;
            w = ow;
        }
        let (feats, fw) = trace.final_features();
        assert_eq!(fw, w, "trial {trial}");
        for (a, b) in feats.iter().zip(&x) {
            assert!((*a as f64 - b).abs() <= 1e-4 * (1.0 + b.abs()), "trial {trial}: {a} vs {b}");
        }
        let gap: Vec<f64> = x.chunks(w * w).map(|p| p.iter().sum::<f64>() / (w * w) as f64).collect();
        for class in 0..2 {
            let mut logit = net.head.bias[class] as f64;
            for (ch, g) in gap.iter().enumerate() {
                logit += net.head.weights[class * net.head.inputs + ch] as f64 * g;
            }
            assert!((trace.logits[class] as f64 - logit).abs() <= 1e-4 * (1.0 + logit.abs()));
        }
    }
}
