use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{Orientation, SparseCoeffSet};

/// Equal-mass bins over coefficient values.
///
/// Bin `i` is `[edges[i-1], edges[i])`, with the two end bins open towards
/// infinity so out-of-range values clamp to the extreme tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffVocabulary {
    #[serde(rename = "V")]
    pub vocab_size: usize,
    pub edges: Vec<f64>,
    pub reps: Vec<f64>,
    pub fitted_on: usize,
}

/// Sample quantile with linear interpolation between order statistics:
/// position `p * (n - 1)` in the sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn fit_vocab(values: &[f64], vocab_size: usize) -> Result<CoeffVocabulary> {
    if vocab_size < 2 {
        return Err(Error::Domain(format!("vocabulary size {vocab_size} is below 2")));
    }
    if values.is_empty() {
        return Err(Error::Domain("cannot fit a vocabulary on no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("training values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Domain("degenerate distribution: all values identical".into()));
    }
    let edges: Vec<f64> = (1..vocab_size)
        .map(|k| quantile_sorted(&sorted, k as f64 / vocab_size as f64))
        .collect();
    if let Some(w) = edges.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!(
            "too few distinct values for {vocab_size} bins (repeated edge {})",
            w[0]
        )));
    }

    let mut reps = Vec::with_capacity(vocab_size);
    let mut start = 0;
    for i in 0..vocab_size {
        let end = if i + 1 < vocab_size {
            start + sorted[start..].partition_point(|v| *v < edges[i])
        } else {
            sorted.len()
        };
        let bin = &sorted[start..end];
        reps.push(if !bin.is_empty() {
            median_sorted(bin)
        } else if i == 0 {
            edges[0] - 0.5 * (edges.get(1).copied().unwrap_or(sorted[sorted.len() - 1]) - edges[0])
        } else if i + 1 == vocab_size {
            edges[i - 1]
        } else {
            0.5 * (edges[i - 1] + edges[i])
        });
        start = end;
    }

    Ok(CoeffVocabulary {
        vocab_size,
        edges,
        reps,
        fitted_on: values.len(),
    })
}

impl CoeffVocabulary {
    pub fn validate(&self) -> Result<()> {
        let v = self.vocab_size;
        if v < 2 || self.edges.len() != v - 1 || self.reps.len() != v {
            return Err(Error::Format(format!(
                "vocabulary with V={v} needs {} edges and {v} reps, has {} and {}",
                v.saturating_sub(1),
                self.edges.len(),
                self.reps.len()
            )));
        }
        if self.edges.iter().chain(&self.reps).any(|x| !x.is_finite()) {
            return Err(Error::Format("vocabulary contains non-finite values".into()));
        }
        if self.edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("vocabulary edges are not strictly increasing".into()));
        }
        Ok(())
    }

    /// Number of edges `<= value`, i.e. the half-open bin holding it.
    pub fn token(&self, value: f64) -> u32 {
        self.edges.partition_point(|e| *e <= value) as u32
    }

    pub fn value(&self, token: u32) -> Result<f64> {
        self.reps
            .get(token as usize)
            .copied()
            .ok_or_else(|| Error::Domain(format!("token {token} outside vocabulary of size {}", self.vocab_size)))
    }

    /// Bounds of bin `i`; the end bins are unbounded.
    pub fn bin_bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.edges[i - 1] };
        let hi = self.edges.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// A single shared vocabulary, or one per detail scale plus one for the
/// approximation subband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vocabulary {
    Shared(CoeffVocabulary),
    PerScale { per_scale: BTreeMap<String, CoeffVocabulary> },
}

pub const APPROX_KEY: &str = "approx";

fn scale_key(scale: u8, orientation: Orientation) -> String {
    match orientation {
        Orientation::Approx => APPROX_KEY.to_string(),
        _ => scale.to_string(),
    }
}

impl Vocabulary {
    pub fn fit(sets: &[SparseCoeffSet], vocab_size: usize, per_scale: bool) -> Result<Self> {
        if !per_scale {
            let values: Vec<f64> = sets.iter().flat_map(|s| s.entries.iter().map(|e| e.value)).collect();
            return Ok(Vocabulary::Shared(fit_vocab(&values, vocab_size)?));
        }
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in sets {
            for e in &s.entries {
                groups.entry(scale_key(e.scale, e.orientation)).or_default().push(e.value);
            }
        }
        if groups.is_empty() {
            return Err(Error::Domain("cannot fit a vocabulary on no values".into()));
        }
        let per_scale = groups
            .into_iter()
            .map(|(k, v)| {
                fit_vocab(&v, vocab_size)
                    .map(|voc| (k.clone(), voc))
                    .map_err(|e| Error::Domain(format!("scale {k}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Vocabulary::PerScale { per_scale })
    }

    pub fn for_subband(&self, scale: u8, orientation: Orientation) -> Result<&CoeffVocabulary> {
        match self {
            Vocabulary::Shared(v) => Ok(v),
            Vocabulary::PerScale { per_scale } => {
                let k = scale_key(scale, orientation);
                per_scale
                    .get(&k)
                    .ok_or_else(|| Error::Domain(format!("no vocabulary fitted for scale {k}")))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Vocabulary::Shared(v) => v.validate(),
            Vocabulary::PerScale { per_scale } => per_scale.values().try_for_each(CoeffVocabulary::validate),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Vocabulary = serde_json::from_str(text).map_err(|e| Error::Format(format!("vocabulary: {e}")))?;
        v.validate()?;
        Ok(v)
    }
}
