//! File-backed pipeline configuration and the synthetic end-to-end runs
//! used by the CLI, the benches and the acceptance suite.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{
    build_sequences, split_by_storm, Partition, SequenceSample, SplitPlan, SynthConfig, SynthCorpus,
    DEFAULT_FRACTIONS, DEFAULT_STRIDE_HOURS, DEFAULT_WINDOW_HOURS,
};
use crate::error::{Error, Result};
use crate::ingest::{compute_ri_labels, IrFrame, RiLabel, DEFAULT_LEAD_HOURS, DEFAULT_RI_THRESHOLD_KT};
use crate::model::{evaluate, train, ClassifierConfig, EvalReport, ModelFrame, TrainedModel};
use crate::wavelet::{sparsify_frame, RadialMaskSpec, SparseCoeffSet, WaveletSpec, DEFAULT_Q, DEFAULT_R_FRAC};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletParams {
    pub order: u8,
    pub levels: u8,
    pub q: f64,
    pub r_frac: f64,
    /// Scales the radial mask applies to; empty disables it.
    pub mask_scales: Vec<u8>,
}

impl Default for WaveletParams {
    fn default() -> Self {
        WaveletParams {
            order: 2,
            levels: 3,
            q: DEFAULT_Q,
            r_frac: DEFAULT_R_FRAC,
            mask_scales: vec![1],
        }
    }
}

impl WaveletParams {
    pub fn spec(&self) -> WaveletSpec {
        WaveletSpec::new(self.order, self.levels)
    }

    pub fn mask(&self) -> Result<RadialMaskSpec> {
        if self.mask_scales.is_empty() {
            Ok(RadialMaskSpec::none())
        } else {
            RadialMaskSpec::new(self.r_frac, self.mask_scales.iter().copied())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub window_hours: i64,
    pub stride_hours: i64,
    pub split_fractions: [f64; 3],
    pub seed: u64,
    pub lead_hours: i64,
    pub ri_threshold_kt: i32,
    /// Predictor columns to join from an environment table.
    pub env_predictors: Vec<String>,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            window_hours: DEFAULT_WINDOW_HOURS,
            stride_hours: DEFAULT_STRIDE_HOURS,
            split_fractions: DEFAULT_FRACTIONS,
            seed: 0,
            lead_hours: DEFAULT_LEAD_HOURS,
            ri_threshold_kt: DEFAULT_RI_THRESHOLD_KT,
            env_predictors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerParams {
    #[serde(rename = "V")]
    pub vocab_size: usize,
    pub per_scale: bool,
}

impl Default for TokenizerParams {
    fn default() -> Self {
        TokenizerParams {
            vocab_size: 64,
            per_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub wavelet: WaveletParams,
    pub dataset: DatasetParams,
    pub model: ClassifierConfig,
    pub tokenizer: TokenizerParams,
    pub synth: SynthConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sets one field by dotted path, e.g. `("wavelet.q", "0.2")`. The value
    /// is read as JSON, falling back to a bare string.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self)?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut doc;
        for part in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {path:?}")))?;
        }
        *slot = value;
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.wavelet.spec().filter_bank()?;
        self.wavelet.mask()?;
        if !(self.wavelet.q > 0.0 && self.wavelet.q <= 1.0) {
            return Err(Error::Config(format!("wavelet.q {} outside (0, 1]", self.wavelet.q)));
        }
        if self.tokenizer.vocab_size < 2 {
            return Err(Error::Config("tokenizer.V must be at least 2".into()));
        }
        self.model.validate()?;
        self.synth.validate()
    }
}

pub fn labels_for(corpus: &SynthCorpus, params: &DatasetParams) -> Vec<RiLabel> {
    corpus
        .tracks
        .iter()
        .flat_map(|t| compute_ri_labels(t, params.lead_hours, params.ri_threshold_kt))
        .collect()
}

pub fn sparsify_all(frames: &[IrFrame], params: &WaveletParams) -> Result<Vec<SparseCoeffSet>> {
    let spec = params.spec();
    let mask = params.mask()?;
    let one = |f: &IrFrame| sparsify_frame(f, &spec, params.q, &mask);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        frames.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    frames.iter().map(one).collect()
}

#[derive(Debug, Clone)]
pub struct NowcastRun {
    pub split: SplitPlan,
    pub samples: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub model: TrainedModel,
    pub report: EvalReport,
}

/// Builds sequences, splits by storm, trains on the training storms and
/// evaluates on the held-out test storms.
pub fn run_nowcast<F: ModelFrame>(frames: &[F], labels: &[RiLabel], cfg: &PipelineConfig) -> Result<NowcastRun> {
    let (samples, _) = build_sequences(frames, labels, cfg.dataset.window_hours, cfg.dataset.stride_hours)?;
    let split = split_by_storm(&samples, cfg.dataset.split_fractions, cfg.dataset.seed)?;
    let pick = |p: Partition| -> Vec<SequenceSample<F>> { split.select(&samples, p).into_iter().cloned().collect() };
    let train_set = pick(Partition::Train);
    let test_set = pick(Partition::Test);
    let model_cfg = ClassifierConfig {
        input_mode: F::MODE,
        ..cfg.model.clone()
    };
    let model = train(&train_set, &model_cfg)?;
    let report = evaluate(&model, &test_set)?;
    Ok(NowcastRun {
        samples: samples.len(),
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        split,
        model,
        report,
    })
}

pub struct ModeComparison {
    pub wavelet: NowcastRun,
    pub raw: NowcastRun,
}

impl ModeComparison {
    pub fn auc_difference(&self) -> f64 {
        self.wavelet.report.auc - self.raw.report.auc
    }
}

/// Same corpus, split, architecture and budget; only the input encoding
/// differs.
pub fn compare_modes(corpus: &SynthCorpus, cfg: &PipelineConfig) -> Result<ModeComparison> {
    let labels = labels_for(corpus, &cfg.dataset);
    let sparse = sparsify_all(&corpus.frames, &cfg.wavelet)?;
    Ok(ModeComparison {
        wavelet: run_nowcast(&sparse, &labels, cfg)?,
        raw: run_nowcast(&corpus.frames, &labels, cfg)?,
    })
}
