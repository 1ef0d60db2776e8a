use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sequence::SequenceSample;
use crate::error::{Error, Result};
use crate::ingest::IrFrame;
use crate::wavelet::{Orientation, SparseCoeffSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub const IDENTITY: Moments = Moments { mean: 0.0, sd: 1.0 };

    fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Moments::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Moments {
            mean,
            sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

/// Standardization fitted on the training partition.
///
/// Wavelet inputs keep one entry per (scale, orientation); raw inputs use a
/// single temperature entry. Environmental predictors are standardized
/// per column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormStats {
    /// Keyed by `"j,k"`, so the map serializes as a JSON object.
    pub subbands: BTreeMap<String, Moments>,
    pub raw: Option<Moments>,
    pub env: Vec<Moments>,
}

pub(crate) fn subband_key(scale: u8, orientation: Orientation) -> String {
    format!("{scale},{}", orientation.index())
}

impl NormStats {
    pub fn subband(&self, scale: u8, orientation: Orientation) -> Moments {
        self.subbands
            .get(&subband_key(scale, orientation))
            .copied()
            .unwrap_or(Moments::IDENTITY)
    }

    pub fn raw(&self) -> Moments {
        self.raw.unwrap_or(Moments::IDENTITY)
    }

    pub fn env_vector(&self, env: &[f64]) -> Vec<f64> {
        env.iter()
            .enumerate()
            .map(|(i, v)| self.env.get(i).copied().unwrap_or(Moments::IDENTITY).apply(*v))
            .collect()
    }
}

/// Frame types whose values can be standardized.
pub trait Normalize: Sized {
    fn collect_values(&self, sink: &mut BTreeMap<String, Vec<f64>>);
    fn normalized(&self, stats: &NormStats) -> Self;
    fn unnormalized(&self, stats: &NormStats) -> Self;
    fn raw_mode() -> bool;
}

impl Normalize for SparseCoeffSet {
    fn collect_values(&self, sink: &mut BTreeMap<String, Vec<f64>>) {
        for e in &self.entries {
            sink.entry(subband_key(e.scale, e.orientation)).or_default().push(e.value);
        }
    }

    fn normalized(&self, stats: &NormStats) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.value = stats.subband(e.scale, e.orientation).apply(e.value);
        }
        out
    }

    fn unnormalized(&self, stats: &NormStats) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.value = stats.subband(e.scale, e.orientation).invert(e.value);
        }
        out
    }

    fn raw_mode() -> bool {
        false
    }
}

const RAW_KEY: &str = "raw";

impl Normalize for IrFrame {
    fn collect_values(&self, sink: &mut BTreeMap<String, Vec<f64>>) {
        sink.entry(RAW_KEY.to_string())
            .or_default()
            .extend(self.temps.iter().map(|&t| t as f64));
    }

    // Temperatures stay in Kelvin inside the frame container; raw inputs
    // are standardized when the model input is assembled.
    fn normalized(&self, _stats: &NormStats) -> Self {
        self.clone()
    }

    fn unnormalized(&self, _stats: &NormStats) -> Self {
        self.clone()
    }

    fn raw_mode() -> bool {
        true
    }
}

pub fn fit_norm<F: Normalize>(train: &[&SequenceSample<F>]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::Config("cannot fit normalization on an empty training set".into()));
    }
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in train {
        for f in &s.frames {
            f.collect_values(&mut values);
        }
    }
    let mut stats = NormStats::default();
    if F::raw_mode() {
        stats.raw = Some(Moments::from_values(values.get(RAW_KEY).map(Vec::as_slice).unwrap_or(&[])));
    } else {
        stats.subbands = values.iter().map(|(k, v)| (k.clone(), Moments::from_values(v))).collect();
    }
    let env_dim = train.iter().filter_map(|s| s.env.as_ref()).map(Vec::len).max().unwrap_or(0);
    stats.env = (0..env_dim)
        .map(|i| {
            let col: Vec<f64> = train
                .iter()
                .filter_map(|s| s.env.as_ref().and_then(|e| e.get(i).copied()))
                .collect();
            Moments::from_values(&col)
        })
        .collect();
    Ok(stats)
}

pub fn apply_norm<F: Normalize + Clone>(sample: &SequenceSample<F>, stats: &NormStats) -> SequenceSample<F> {
    SequenceSample {
        frames: sample.frames.iter().map(|f| f.normalized(stats)).collect(),
        env: sample.env.as_ref().map(|e| stats.env_vector(e)),
        ..sample.clone()
    }
}

pub fn unapply_norm<F: Normalize + Clone>(sample: &SequenceSample<F>, stats: &NormStats) -> SequenceSample<F> {
    SequenceSample {
        frames: sample.frames.iter().map(|f| f.unnormalized(stats)).collect(),
        env: sample.env.as_ref().map(|e| {
            e.iter()
                .enumerate()
                .map(|(i, z)| stats.env.get(i).copied().unwrap_or(Moments::IDENTITY).invert(*z))
                .collect()
        }),
        ..sample.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time;
    use crate::wavelet::{sparsify, Grid, RadialMaskSpec, WaveletSpec};

    fn sample(seed: u64) -> SequenceSample<SparseCoeffSet> {
        let mut x = seed;
        let frames = (0..3)
            .map(|_| {
                let data = (0..256)
                    .map(|_| {
                        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        200.0 + (x >> 40) as f64 / (1u64 << 24) as f64 * 80.0
                    })
                    .collect();
                sparsify(&Grid::from_vec(16, data).unwrap(), &WaveletSpec::new(2, 2), 0.3, &RadialMaskSpec::default())
                    .unwrap()
            })
            .collect();
        SequenceSample {
            storm_id: "AL012000".into(),
            t: time::parse_iso("2000-01-01T00:00Z").unwrap(),
            frames,
            frame_times: vec![],
            label: 0,
            env: Some(vec![seed as f64, 3.0]),
        }
    }

    #[test]
    fn standardizes_training_groups() {
        let train: Vec<_> = (1..6).map(sample).collect();
        let refs: Vec<_> = train.iter().collect();
        let stats = fit_norm(&refs).unwrap();
        let normed: Vec<_> = train.iter().map(|s| apply_norm(s, &stats)).collect();
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in &normed {
            for f in &s.frames {
                f.collect_values(&mut groups);
            }
        }
        for (k, v) in groups {
            let m = Moments::from_values(&v);
            assert!(m.mean.abs() < 1e-6, "{k} mean {}", m.mean);
            if v.len() > 1 {
                assert!((m.sd - 1.0).abs() < 1e-6, "{k} sd {}", m.sd);
            }
        }
        // constant env column gets sd 1
        assert_eq!(stats.env[1], Moments { mean: 3.0, sd: 1.0 });
    }

    #[test]
    fn absent_subband_uses_identity() {
        let stats = NormStats::default();
        assert_eq!(stats.subband(7, Orientation::Diagonal), Moments::IDENTITY);
    }

    #[test]
    fn round_trip_within_1e12() {
        let train: Vec<_> = (1..4).map(sample).collect();
        let refs: Vec<_> = train.iter().collect();
        let stats = fit_norm(&refs).unwrap();
        let back = unapply_norm(&apply_norm(&train[0], &stats), &stats);
        for (a, b) in back.frames.iter().zip(&train[0].frames) {
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert!((x.value - y.value).abs() <= 1e-12 * y.value.abs().max(1.0));
            }
        }
    }

    #[test]
    fn empty_training_set() {
        let empty: Vec<&SequenceSample<SparseCoeffSet>> = vec![];
        assert!(fit_norm(&empty).is_err());
    }
}
