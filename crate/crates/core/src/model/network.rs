//! Convolutional classifier: conv+ReLU blocks, global average pooling, an
//! optional dense branch for predictor vectors, and a linear two-class head.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ClassifierConfig;
use super::input::InputTensor;
use crate::error::{Error, Result};

pub const N_CLASSES: usize = 2;

/// Input geometry the parameters were built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub in_channels: usize,
    pub width: usize,
    pub env_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[out][in][ky][kx]`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    fn pad(&self) -> usize {
        self.kernel / 2
    }

    fn out_width(&self, in_width: usize) -> usize {
        (in_width + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DenseLayer {
    fn forward(&self, x: &[f32]) -> Vec<f32> {
        (0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weights[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub shape: ModelShape,
    pub convs: Vec<ConvLayer>,
    pub env: Vec<DenseLayer>,
    pub head: DenseLayer,
}

/// Intermediate values kept for the backward pass.
pub struct Trace {
    /// im2col matrix fed to each conv layer, `[patch][position]`.
    cols: Vec<Vec<f32>>,
    /// Post-ReLU output of each conv layer, `[channel][position]`.
    acts: Vec<Vec<f32>>,
    widths: Vec<usize>,
    env_acts: Vec<Vec<f32>>,
    features: Vec<f32>,
    pub logits: [f32; N_CLASSES],
}

impl Trace {
    /// Final conv feature stack and its side length.
    pub fn final_features(&self) -> (&[f32], usize) {
        (self.acts.last().expect("at least one conv"), *self.widths.last().expect("at least one conv"))
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}

#[inline]
fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn im2col(layer: &ConvLayer, input: &[f32], width: usize) -> (Vec<f32>, usize) {
    let (k, s, p) = (layer.kernel, layer.stride, layer.pad() as isize);
    let out_w = layer.out_width(width);
    let positions = out_w * out_w;
    let mut col = vec![0.0f32; layer.patch_len() * positions];
    for ic in 0..layer.in_channels {
        let plane = &input[ic * width * width..(ic + 1) * width * width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ic * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..out_w {
                    let iy = (oy * s + ky) as isize - p;
                    if iy < 0 || iy >= width as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * width..][..width];
                    let dst = &mut row[oy * out_w..(oy + 1) * out_w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * s + kx) as isize - p;
                        if ix >= 0 && ix < width as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    (col, out_w)
}

fn col2im(layer: &ConvLayer, dcol: &[f32], width: usize, out_w: usize) -> Vec<f32> {
    let (k, s, p) = (layer.kernel, layer.stride, layer.pad() as isize);
    let positions = out_w * out_w;
    let mut dx = vec![0.0f32; layer.in_channels * width * width];
    for ic in 0..layer.in_channels {
        let plane = &mut dx[ic * width * width..(ic + 1) * width * width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &dcol[((ic * k + ky) * k + kx) * positions..][..positions];
                for oy in 0..out_w {
                    let iy = (oy * s + ky) as isize - p;
                    if iy < 0 || iy >= width as isize {
                        continue;
                    }
                    for ox in 0..out_w {
                        let ix = (ox * s + kx) as isize - p;
                        if ix >= 0 && ix < width as isize {
                            plane[iy as usize * width + ix as usize] += row[oy * out_w + ox];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Numerically stable two-class softmax in f64.
pub fn softmax(logits: &[f32; N_CLASSES]) -> [f64; N_CLASSES] {
    let a = logits[0] as f64;
    let b = logits[1] as f64;
    let m = a.max(b);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let z = ea + eb;
    [ea / z, eb / z]
}

impl Network {
    pub fn init<R: Rng>(config: &ClassifierConfig, shape: ModelShape, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut width = shape.width;
        let mut channels = shape.in_channels;
        let mut convs = Vec::with_capacity(config.conv_blocks.len());
        for b in &config.conv_blocks {
            if b.kernel_size > width + 2 * (b.kernel_size / 2) {
                return Err(Error::Shape(format!("kernel {} too large for width {width}", b.kernel_size)));
            }
            let fan_in = channels * b.kernel_size * b.kernel_size;
            let layer = ConvLayer {
                in_channels: channels,
                out_channels: b.out_channels,
                kernel: b.kernel_size,
                stride: b.stride,
                weights: he(rng, b.out_channels * fan_in, fan_in, 2.0),
                bias: vec![0.0; b.out_channels],
            };
            width = layer.out_width(width);
            channels = b.out_channels;
            convs.push(layer);
        }
        let mut env = Vec::new();
        let mut env_out = 0;
        if let Some(hidden) = &config.env_branch {
            let mut inputs = shape.env_dim;
            for &h in hidden {
                env.push(dense(rng, inputs, h, 2.0));
                inputs = h;
            }
            env_out = inputs;
        }
        let head = dense(rng, channels + env_out, N_CLASSES, 1.0);
        Ok(Network { shape, convs, env, head })
    }

    pub fn gap_channels(&self) -> usize {
        self.convs.last().map(|c| c.out_channels).unwrap_or(0)
    }

    fn check_input(&self, x: &InputTensor, env: &[f32]) -> Result<()> {
        if x.channels != self.shape.in_channels || x.width != self.shape.width {
            return Err(Error::Shape(format!(
                "input is {}x{}x{}, model expects {}x{}x{}",
                x.channels, x.width, x.width, self.shape.in_channels, self.shape.width, self.shape.width
            )));
        }
        let want_env = if self.env.is_empty() { 0 } else { self.shape.env_dim };
        if env.len() != want_env {
            return Err(Error::Shape(format!("predictor vector has {} values, model expects {want_env}", env.len())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &InputTensor, env: &[f32]) -> Result<Trace> {
        self.check_input(x, env)?;
        let mut cols = Vec::with_capacity(self.convs.len());
        let mut acts = Vec::with_capacity(self.convs.len());
        let mut widths = Vec::with_capacity(self.convs.len());
        let mut width = x.width;
        for layer in &self.convs {
            let input: &[f32] = acts.last().map(Vec::as_slice).unwrap_or(&x.data);
            let (col, out_w) = im2col(layer, input, width);
            let positions = out_w * out_w;
            let patch = layer.patch_len();
            let mut out = vec![0.0f32; layer.out_channels * positions];
            for (oc, plane) in out.chunks_exact_mut(positions).enumerate() {
                plane.iter_mut().for_each(|v| *v = layer.bias[oc]);
                let w = &layer.weights[oc * patch..(oc + 1) * patch];
                for (i, &wi) in w.iter().enumerate() {
                    axpy(plane, wi, &col[i * positions..(i + 1) * positions]);
                }
                plane.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            cols.push(col);
            acts.push(out);
            widths.push(out_w);
            width = out_w;
        }
        let last = acts.last().expect("at least one conv");
        let positions = width * width;
        let mut features: Vec<f32> = last
            .chunks_exact(positions)
            .map(|p| p.iter().sum::<f32>() / positions as f32)
            .collect();
        let mut env_acts = Vec::with_capacity(self.env.len());
        let mut h = env.to_vec();
        for layer in &self.env {
            h = layer.forward(&h).into_iter().map(|v| v.max(0.0)).collect();
            env_acts.push(h.clone());
        }
        if !self.env.is_empty() {
            features.extend_from_slice(&h);
        }
        let out = self.head.forward(&features);
        Ok(Trace {
            cols,
            acts,
            widths,
            env_acts,
            features,
            logits: [out[0], out[1]],
        })
    }

    /// Cross-entropy loss and its parameter gradient for one sample.
    pub fn backward(&self, trace: &Trace, env: &[f32], label: usize) -> (f64, Gradients) {
        let probs = softmax(&trace.logits);
        let loss = -probs[label].max(1e-300).ln();
        let mut g = Gradients::zeros_like(self);

        let dlogits: [f32; N_CLASSES] = [
            (probs[0] - if label == 0 { 1.0 } else { 0.0 }) as f32,
            (probs[1] - if label == 1 { 1.0 } else { 0.0 }) as f32,
        ];
        let nf = self.head.inputs;
        let mut dfeat = vec![0.0f32; nf];
        for (o, &d) in dlogits.iter().enumerate() {
            g.head_b[o] += d;
            axpy(&mut g.head_w[o * nf..(o + 1) * nf], d, &trace.features);
            axpy(&mut dfeat, d, &self.head.weights[o * nf..(o + 1) * nf]);
        }

        let gap = self.gap_channels();
        if !self.env.is_empty() {
            let mut dh = dfeat[gap..].to_vec();
            for li in (0..self.env.len()).rev() {
                let layer = &self.env[li];
                let out = &trace.env_acts[li];
                let input: &[f32] = if li == 0 { env } else { &trace.env_acts[li - 1] };
                let dz: Vec<f32> = dh.iter().zip(out).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
                let mut dx = vec![0.0f32; layer.inputs];
                for (o, &d) in dz.iter().enumerate() {
                    g.env_b[li][o] += d;
                    axpy(&mut g.env_w[li][o * layer.inputs..(o + 1) * layer.inputs], d, input);
                    axpy(&mut dx, d, &layer.weights[o * layer.inputs..(o + 1) * layer.inputs]);
                }
                dh = dx;
            }
        }

        // GAP spreads each feature gradient evenly over positions.
        let last_w = *trace.widths.last().expect("conv");
        let positions = last_w * last_w;
        let mut dact: Vec<f32> = (0..gap)
            .flat_map(|c| std::iter::repeat_n(dfeat[c] / positions as f32, positions))
            .collect();
        for li in (0..self.convs.len()).rev() {
            let layer = &self.convs[li];
            let out_w = trace.widths[li];
            let positions = out_w * out_w;
            let patch = layer.patch_len();
            let act = &trace.acts[li];
            for (d, a) in dact.iter_mut().zip(act) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let col = &trace.cols[li];
            for oc in 0..layer.out_channels {
                let dz = &dact[oc * positions..(oc + 1) * positions];
                g.conv_b[li][oc] += dz.iter().sum::<f32>();
                let gw = &mut g.conv_w[li][oc * patch..(oc + 1) * patch];
                for (i, gwi) in gw.iter_mut().enumerate() {
                    *gwi += dot(dz, &col[i * positions..(i + 1) * positions]);
                }
            }
            if li == 0 {
                break;
            }
            let mut dcol = vec![0.0f32; patch * positions];
            for oc in 0..layer.out_channels {
                let dz = &dact[oc * positions..(oc + 1) * positions];
                let w = &layer.weights[oc * patch..(oc + 1) * patch];
                for (i, &wi) in w.iter().enumerate() {
                    axpy(&mut dcol[i * positions..(i + 1) * positions], wi, dz);
                }
            }
            dact = col2im(layer, &dcol, trace.widths[li - 1], out_w);
        }
        (loss, g)
    }

    /// Named parameter tensors in a fixed order, with their shapes.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out: Vec<(String, Vec<usize>, &[f32])> = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.weight"), vec![c.out_channels, c.in_channels, c.kernel, c.kernel], &c.weights));
            out.push((format!("conv{i}.bias"), vec![c.out_channels], &c.bias));
        }
        for (i, d) in self.env.iter().enumerate() {
            out.push((format!("env{i}.weight"), vec![d.outputs, d.inputs], &d.weights));
            out.push((format!("env{i}.bias"), vec![d.outputs], &d.bias));
        }
        out.push(("head.weight".into(), vec![self.head.outputs, self.head.inputs], &self.head.weights));
        out.push(("head.bias".into(), vec![self.head.outputs], &self.head.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut out: Vec<&mut Vec<f32>> = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        for d in &mut self.env {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }
}

fn he<R: Rng>(rng: &mut R, n: usize, fan_in: usize, gain: f64) -> Vec<f32> {
    let normal = Normal::new(0.0, (gain / fan_in.max(1) as f64).sqrt()).expect("finite sd");
    (0..n).map(|_| normal.sample(rng) as f32).collect()
}

fn dense<R: Rng>(rng: &mut R, inputs: usize, outputs: usize, gain: f64) -> DenseLayer {
    DenseLayer {
        inputs,
        outputs,
        weights: he(rng, inputs * outputs, inputs, gain),
        bias: vec![0.0; outputs],
    }
}

/// Parameter gradients laid out like [`Network::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    conv_w: Vec<Vec<f32>>,
    conv_b: Vec<Vec<f32>>,
    env_w: Vec<Vec<f32>>,
    env_b: Vec<Vec<f32>>,
    head_w: Vec<f32>,
    head_b: Vec<f32>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            conv_w: net.convs.iter().map(|c| vec![0.0; c.weights.len()]).collect(),
            conv_b: net.convs.iter().map(|c| vec![0.0; c.bias.len()]).collect(),
            env_w: net.env.iter().map(|d| vec![0.0; d.weights.len()]).collect(),
            env_b: net.env.iter().map(|d| vec![0.0; d.bias.len()]).collect(),
            head_w: vec![0.0; net.head.weights.len()],
            head_b: vec![0.0; net.head.bias.len()],
        }
    }

    /// Same order as [`Network::tensors_mut`].
    pub fn tensors(&self) -> Vec<&Vec<f32>> {
        let mut out = Vec::new();
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.env_w.iter().zip(&self.env_b) {
            out.push(w);
            out.push(b);
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut out = Vec::new();
        for (w, b) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.env_w.iter_mut().zip(self.env_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ConvBlock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(env: Option<Vec<usize>>) -> (Network, InputTensor, Vec<f32>) {
        let cfg = ClassifierConfig {
            conv_blocks: vec![ConvBlock::new(3, 3, 2), ConvBlock::new(4, 3, 1)],
            env_branch: env.clone(),
            ..Default::default()
        };
        let env_dim = if env.is_some() { 2 } else { 0 };
        let shape = ModelShape { in_channels: 2, width: 8, env_dim };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::init(&cfg, shape, &mut rng).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data = (0..2 * 64).map(|_| normal.sample(&mut rng) as f32).collect();
        let envv = (0..env_dim).map(|i| 0.5 - i as f32).collect();
        (net, InputTensor { channels: 2, width: 8, data }, envv)
    }

    fn loss_of(net: &Network, x: &InputTensor, env: &[f32], label: usize) -> f64 {
        let t = net.forward(x, env).unwrap();
        -softmax(&t.logits)[label].ln()
    }

    /// Central finite differences against the analytic gradient.
    fn check_gradients(env: Option<Vec<usize>>) {
        let (net, x, e) = tiny(env);
        let trace = net.forward(&x, &e).unwrap();
        let (_, g) = net.backward(&trace, &e, 1);
        let grads: Vec<Vec<f32>> = g.tensors().into_iter().cloned().collect();
        let mask = |n: &Network| {
            let t = n.forward(&x, &e).unwrap();
            t.acts.iter().chain(&t.env_acts).flatten().map(|v| *v > 0.0).collect::<Vec<bool>>()
        };
        let base = mask(&net);
        let h = 1e-3f32;
        let (mut checked, mut total) = (0, 0);
        for (ti, gt) in grads.iter().enumerate() {
            for idx in (0..gt.len()).step_by(3) {
                total += 1;
                let mut plus = net.clone();
                plus.tensors_mut()[ti][idx] += h;
                let mut minus = net.clone();
                minus.tensors_mut()[ti][idx] -= h;
                // The loss is smooth only while no ReLU changes state.
                if mask(&plus) != base || mask(&minus) != base {
                    continue;
                }
                let fd = (loss_of(&plus, &x, &e, 1) - loss_of(&minus, &x, &e, 1)) / (2.0 * h as f64);
                let an = gt[idx] as f64;
                assert!(
                    (fd - an).abs() <= 2e-4 + 1e-2 * fd.abs().max(an.abs()),
                    "tensor {ti} idx {idx}: fd {fd} analytic {an}"
                );
                checked += 1;
            }
        }
        assert!(checked * 10 >= total * 7, "only {checked} of {total} entries away from kinks");
        assert!(checked > 20);
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(None);
    }

    #[test]
    fn gradients_with_env_branch() {
        check_gradients(Some(vec![3]));
    }

    #[test]
    fn output_sizes() {
        let (net, x, e) = tiny(None);
        let t = net.forward(&x, &e).unwrap();
        let (feat, w) = t.final_features();
        assert_eq!(w, 4);
        assert_eq!(feat.len(), 4 * 16);
        let bad = InputTensor { channels: 3, width: 8, data: vec![0.0; 3 * 64] };
        assert!(net.forward(&bad, &e).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        for l in [[0.0f32, 0.0], [100.0, -100.0], [3.5, 1e-3], [-80.0, 80.0]] {
            let p = softmax(&l);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
