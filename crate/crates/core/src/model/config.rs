use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    #[default]
    Wavelet,
    Raw,
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wavelet" => Ok(InputMode::Wavelet),
            "raw" => Ok(InputMode::Raw),
            other => Err(Error::Config(format!("unknown input mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

impl ConvBlock {
    pub const fn new(out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        ConvBlock {
            out_channels,
            kernel_size,
            stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub input_mode: InputMode,
    /// Each block is conv (same padding) + ReLU.
    pub conv_blocks: Vec<ConvBlock>,
    /// Must stay true: the head is global average pooling + one linear map.
    pub global_average_pool: bool,
    /// Hidden sizes of the predictor-vector branch; `None` disables it.
    pub env_branch: Option<Vec<usize>>,
    pub seed: u64,
    pub learning_rate: f32,
    /// 0 gives plain mini-batch gradient descent.
    pub momentum: f32,
    pub epochs: usize,
    pub batch_size: usize,
    /// Spread per-sample gradients over threads; the reduction order is fixed,
    /// so results match the serial run bit for bit.
    pub parallel: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            input_mode: InputMode::Wavelet,
            conv_blocks: vec![ConvBlock::new(16, 3, 2), ConvBlock::new(32, 3, 2), ConvBlock::new(64, 3, 2)],
            global_average_pool: true,
            env_branch: None,
            seed: 0,
            learning_rate: 0.05,
            momentum: 0.0,
            epochs: 30,
            batch_size: 16,
            parallel: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.conv_blocks.is_empty() {
            return fail("at least one conv block is required");
        }
        if self
            .conv_blocks
            .iter()
            .any(|b| b.out_channels == 0 || b.kernel_size == 0 || b.stride == 0)
        {
            return fail("conv block sizes must be positive");
        }
        if !self.global_average_pool {
            return fail("the classifier head must use global average pooling");
        }
        if let Some(hidden) = &self.env_branch {
            if hidden.contains(&0) {
                return fail("env branch hidden sizes must be positive");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must be in [0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }

    pub fn uses_env(&self) -> bool {
        self.env_branch.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_strict() {
        ClassifierConfig::default().validate().unwrap();
        let err = serde_json::from_str::<ClassifierConfig>("{\"epochs\": 3, \"bogus\": 1}");
        assert!(err.is_err());
        let cfg: ClassifierConfig = serde_json::from_str("{\"epochs\": 3, \"input_mode\": \"raw\"}").unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.input_mode, InputMode::Raw);
        assert_eq!(cfg.conv_blocks.len(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let no_gap = ClassifierConfig { global_average_pool: false, ..Default::default() };
        assert!(no_gap.validate().is_err());
        let empty = ClassifierConfig { conv_blocks: vec![], ..Default::default() };
        assert!(empty.validate().is_err());
        let lr = ClassifierConfig { learning_rate: 0.0, ..Default::default() };
        assert!(lr.validate().is_err());
    }
}
