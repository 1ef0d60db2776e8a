use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ClassifierConfig;
use super::input::{assemble_input, InputTensor, ModelFrame};
use super::network::{softmax, Gradients, ModelShape, Network};
use crate::dataset::{fit_norm, NormStats, SequenceSample};
use crate::error::{Error, Result};
use crate::wavelet::WaveletSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ClassifierConfig,
    pub network: Network,
    /// P(Y=1) on the training partition.
    pub prevalence: f64,
    pub norm: NormStats,
    /// Decomposition the wavelet inputs must share; `None` in raw mode.
    pub wavelet_spec: Option<WaveletSpec>,
    pub history: Vec<EpochStats>,
}

impl TrainedModel {
    pub fn shape(&self) -> ModelShape {
        self.network.shape
    }
}

pub(crate) struct Prepared {
    pub input: InputTensor,
    pub env: Vec<f32>,
}

fn prepare<F: ModelFrame>(
    sample: &SequenceSample<F>,
    config: &ClassifierConfig,
    norm: &NormStats,
) -> Result<Prepared> {
    let input = assemble_input(sample, config.input_mode, norm)?;
    let env = if config.uses_env() {
        let raw = sample.env.as_ref().ok_or_else(|| {
            Error::Shape(format!(
                "sample {} at {} has no predictor vector but the model uses one",
                sample.storm_id,
                crate::time::format_iso(&sample.t)
            ))
        })?;
        norm.env_vector(raw).into_iter().map(|v| v as f32).collect()
    } else {
        Vec::new()
    };
    Ok(Prepared { input, env })
}

fn sample_gradient(net: &Network, p: &Prepared, label: u8) -> Result<(f64, bool, Gradients)> {
    let trace = net.forward(&p.input, &p.env)?;
    let correct = (trace.logits[1] > trace.logits[0]) == (label == 1);
    let (loss, g) = net.backward(&trace, &p.env, label as usize);
    Ok((loss, correct, g))
}

fn batch_gradients(net: &Network, data: &[Prepared], labels: &[u8], batch: &[usize], parallel: bool) -> Result<Vec<(f64, bool, Gradients)>> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return batch
            .par_iter()
            .map(|&i| sample_gradient(net, &data[i], labels[i]))
            .collect();
    }
    let _ = parallel;
    batch.iter().map(|&i| sample_gradient(net, &data[i], labels[i])).collect()
}

/// Mini-batch gradient descent on the class cross-entropy.
///
/// Normalization stats are fitted on `samples` and stored in the model.
/// Initialization and the per-epoch order both come from `config.seed`.
pub fn train<F: ModelFrame>(samples: &[SequenceSample<F>], config: &ClassifierConfig) -> Result<TrainedModel> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    let positives = samples.iter().filter(|s| s.label == 1).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::Training(format!(
            "training set has a single class ({positives} positive of {})",
            samples.len()
        )));
    }
    let refs: Vec<&SequenceSample<F>> = samples.iter().collect();
    let norm = fit_norm(&refs)?;
    let wavelet_spec = samples[0].frames.first().and_then(|f| f.wavelet_spec());
    let data = samples
        .iter()
        .map(|s| prepare(s, config, &norm))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();

    let first = &data[0];
    let env_dim = first.env.len();
    if data.iter().any(|d| d.env.len() != env_dim || d.input.channels != first.input.channels) {
        return Err(Error::Shape("samples differ in frame count or predictor length".into()));
    }
    let shape = ModelShape {
        in_channels: first.input.channels,
        width: first.input.width,
        env_dim,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(config, shape, &mut rng)?;
    let mut velocity = Gradients::zeros_like(&net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let results = batch_gradients(&net, &data, &labels, batch, config.parallel)?;
            let mut grad = Gradients::zeros_like(&net);
            for (loss, ok, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, batch {b} (learning_rate {}, momentum {})",
                        config.learning_rate, config.momentum
                    )));
                }
                loss_sum += loss;
                correct += *ok as usize;
                grad.add_assign(g);
            }
            if !grad.is_finite() {
                return Err(Error::Training(format!("non-finite gradient at epoch {epoch}, batch {b}")));
            }
            let scale = 1.0 / batch.len() as f32;
            for ((w, v), g) in net
                .tensors_mut()
                .into_iter()
                .zip(velocity.tensors_mut())
                .zip(grad.tensors())
            {
                for ((wi, vi), gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = config.momentum * *vi + gi * scale;
                    *wi -= config.learning_rate * *vi;
                }
            }
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }

    Ok(TrainedModel {
        config: config.clone(),
        network: net,
        prevalence: positives as f64 / samples.len() as f64,
        norm,
        wavelet_spec,
        history,
    })
}

pub(crate) fn check_compatible<F: ModelFrame>(model: &TrainedModel, sample: &SequenceSample<F>) -> Result<()> {
    if F::MODE != model.config.input_mode {
        return Err(Error::Shape(format!(
            "model takes {:?} inputs, sample holds {:?} frames",
            model.config.input_mode,
            F::MODE
        )));
    }
    if let Some(f) = sample.frames.first() {
        if model.wavelet_spec.is_some() && f.wavelet_spec() != model.wavelet_spec {
            return Err(Error::Shape("sample was decomposed with a different wavelet spec".into()));
        }
    }
    Ok(())
}

pub(crate) fn forward_sample<F: ModelFrame>(
    model: &TrainedModel,
    sample: &SequenceSample<F>,
) -> Result<(InputTensor, super::network::Trace)> {
    check_compatible(model, sample)?;
    let p = prepare(sample, &model.config, &model.norm)?;
    let trace = model.network.forward(&p.input, &p.env)?;
    Ok((p.input, trace))
}

/// Both class probabilities for a raw (unstandardized) sample.
pub fn predict_proba<F: ModelFrame>(model: &TrainedModel, sample: &SequenceSample<F>) -> Result<[f64; 2]> {
    let (_, trace) = forward_sample(model, sample)?;
    Ok(softmax(&trace.logits))
}

/// P(Y=1 | sequence). The model's own stats standardize the sample.
pub fn predict_posterior<F: ModelFrame>(model: &TrainedModel, sample: &SequenceSample<F>) -> Result<f64> {
    Ok(predict_proba(model, sample)?[1])
}

/// Posteriors for many samples, in input order.
pub fn predict_many<F: ModelFrame>(model: &TrainedModel, samples: &[SequenceSample<F>]) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples.par_iter().map(|s| predict_posterior(model, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    samples.iter().map(|s| predict_posterior(model, s)).collect()
}

pub fn score_pt(posterior: f64, prevalence: f64) -> f64 {
    posterior - prevalence
}

pub fn is_primed(p_t: f64) -> bool {
    p_t > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::IrFrame;
    use crate::model::config::{ConvBlock, InputMode};
    use crate::time;
    use proptest::prelude::*;

    /// Class 1 frames carry a cold centre blob, class 0 a warm one.
    fn separable(n: usize, seed: u64) -> Vec<SequenceSample<IrFrame>> {
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut noise = move || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..n)
            .map(|i| {
                let label = (i % 3 == 0) as u8;
                let centre = if label == 1 { 200.0 } else { 260.0 };
                let frames = (0..2)
                    .map(|k| {
                        let temps = (0..256)
                            .map(|p| {
                                let (r, c) = ((p / 16) as f64 - 7.5, (p % 16) as f64 - 7.5);
                                let blob = (-(r * r + c * c) / 12.0).exp();
                                (280.0 + (centre - 280.0) * blob + 8.0 * noise()) as f32
                            })
                            .collect();
                        let ts = time::from_unix(21600 * (i * 4 + k) as i64).unwrap();
                        IrFrame::new("AL012000", ts, 16, 4.0, (15.0, -50.0), temps).unwrap()
                    })
                    .collect();
                SequenceSample {
                    storm_id: "AL012000".into(),
                    t: time::from_unix(21600 * (i * 4 + 1) as i64).unwrap(),
                    frame_times: vec![],
                    frames,
                    label,
                    env: None,
                }
            })
            .collect()
    }

    fn small_config() -> ClassifierConfig {
        ClassifierConfig {
            input_mode: InputMode::Raw,
            conv_blocks: vec![ConvBlock::new(4, 3, 2), ConvBlock::new(8, 3, 2)],
            epochs: 25,
            batch_size: 8,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn separable_classes_are_learned() {
        let data = separable(60, 1);
        let model = train(&data, &small_config()).unwrap();
        let acc = data
            .iter()
            .filter(|s| (predict_posterior(&model, s).unwrap() > 0.5) == (s.label == 1))
            .count() as f64
            / data.len() as f64;
        assert!(acc >= 0.95, "training accuracy {acc}");
        assert!((model.prevalence - 20.0 / 60.0).abs() < 1e-12);
        assert!(model.history.last().unwrap().mean_loss < model.history[0].mean_loss);
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = separable(24, 2);
        let mut cfg = small_config();
        cfg.epochs = 3;
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.network, b.network);
        cfg.parallel = true;
        let c = train(&data, &cfg).unwrap();
        assert_eq!(a.network, c.network);
        cfg.seed = 4;
        let d = train(&data, &cfg).unwrap();
        assert_ne!(a.network, d.network);
    }

    #[test]
    fn boundary_training_sets() {
        let cfg = small_config();
        assert!(matches!(train::<IrFrame>(&[], &cfg), Err(Error::Training(_))));
        let mut one_class = separable(6, 3);
        one_class.iter_mut().for_each(|s| s.label = 0);
        assert!(matches!(train(&one_class, &cfg), Err(Error::Training(_))));
        let diverge = ClassifierConfig { learning_rate: 1e30, epochs: 5, ..small_config() };
        assert!(matches!(train(&separable(12, 4), &diverge), Err(Error::Training(_))));
    }

    #[test]
    fn posterior_properties() {
        let data = separable(12, 5);
        let mut cfg = small_config();
        cfg.epochs = 1;
        let model = train(&data, &cfg).unwrap();
        let p = predict_proba(&model, &data[0]).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        assert_eq!(predict_posterior(&model, &data[0]).unwrap(), predict_posterior(&model, &data[0].clone()).unwrap());
        let mut zero = data[0].clone();
        for f in &mut zero.frames {
            f.temps.iter_mut().for_each(|t| *t = model.norm.raw().mean as f32);
        }
        let z = predict_posterior(&model, &zero).unwrap();
        assert!((0.0..=1.0).contains(&z));
        let mut wrong = data[0].clone();
        wrong.frames.pop();
        assert!(predict_posterior(&model, &wrong).is_err());
    }

    #[test]
    fn score_and_primed_examples() {
        assert!((score_pt(0.7, 0.3) - 0.4).abs() < 1e-15);
        assert!((score_pt(0.2, 0.3) + 0.1).abs() < 1e-15);
        assert_eq!(score_pt(0.37, 0.37), 0.0);
        assert!(is_primed(0.4));
        assert!(!is_primed(-0.1));
        assert!(!is_primed(0.0));
    }

    proptest! {
        #[test]
        fn primed_iff_posterior_exceeds_prevalence(post in 0.0f64..=1.0, prev in 0.0f64..=1.0) {
            prop_assert_eq!(is_primed(score_pt(post, prev)), post > prev);
        }
    }
}
