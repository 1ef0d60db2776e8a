use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sequence::SequenceSample;
use crate::error::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.15, 0.15];

/// Disjoint storm partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl SplitPlan {
    pub fn partition_of(&self, storm_id: &str) -> Option<Partition> {
        if self.train.contains(storm_id) {
            Some(Partition::Train)
        } else if self.validation.contains(storm_id) {
            Some(Partition::Validation)
        } else if self.test.contains(storm_id) {
            Some(Partition::Test)
        } else {
            None
        }
    }

    pub fn select<'a, F>(&self, samples: &'a [SequenceSample<F>], part: Partition) -> Vec<&'a SequenceSample<F>> {
        samples
            .iter()
            .filter(|s| self.partition_of(&s.storm_id) == Some(part))
            .collect()
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "validation" | "val" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(Error::Config(format!("unknown partition {other:?}"))),
        }
    }
}

/// Shuffles storms with a seeded generator and hands each to the partition
/// furthest below its target sample count.
pub fn split_by_storm<F>(samples: &[SequenceSample<F>], fractions: [f64; 3], seed: u64) -> Result<SplitPlan> {
    let total_frac: f64 = fractions.iter().sum();
    if (total_frac - 1.0).abs() > 1e-9 || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.storm_id.as_str()).or_default() += 1;
    }
    if counts.len() < 3 {
        return Err(Error::Config(format!("need at least 3 storms to split, found {}", counts.len())));
    }
    let mut storms: Vec<(&str, usize)> = counts.into_iter().collect();
    storms.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let total = samples.len() as f64;
    let mut assigned = [0usize; 3];
    let mut parts: [BTreeSet<String>; 3] = Default::default();
    for (storm, n) in storms {
        let deficit = |i: usize| fractions[i] * total - assigned[i] as f64;
        let mut best = 0;
        for i in 1..3 {
            if deficit(i) > deficit(best) {
                best = i;
            }
        }
        assigned[best] += n;
        parts[best].insert(storm.to_string());
    }
    let [train, validation, test] = parts;
    Ok(SplitPlan {
        train,
        validation,
        test,
        seed,
    })
}
