use std::collections::{BTreeMap, HashMap};

use chrono::Duration;

use crate::error::{Error, Result};
use crate::ingest::{EnvRecord, IrFrame, RiLabel};
use crate::time::Timestamp;
use crate::wavelet::SparseCoeffSet;

pub const DEFAULT_WINDOW_HOURS: i64 = 24;
pub const DEFAULT_STRIDE_HOURS: i64 = 6;

/// Anything that sits at a storm and a time.
pub trait Timed {
    fn storm_id(&self) -> &str;
    fn timestamp(&self) -> Option<Timestamp>;
}

impl Timed for IrFrame {
    fn storm_id(&self) -> &str {
        &self.storm_id
    }

    fn timestamp(&self) -> Option<Timestamp> {
        Some(self.timestamp)
    }
}

impl Timed for SparseCoeffSet {
    fn storm_id(&self) -> &str {
        &self.storm_id
    }

    fn timestamp(&self) -> Option<Timestamp> {
        self.timestamp
    }
}

/// A window of frames ending at `t` with the label at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample<F> {
    pub storm_id: String,
    pub t: Timestamp,
    pub frames: Vec<F>,
    pub frame_times: Vec<Timestamp>,
    pub label: u8,
    /// `None` until joined, or when no matching record exists.
    pub env: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub labels_seen: usize,
    pub samples: usize,
    /// Labeled times skipped because a window frame was missing.
    pub skipped_gaps: usize,
}

/// One sample per labeled time whose full window is present in `frames`.
pub fn build_sequences<F: Timed + Clone>(
    frames: &[F],
    labels: &[RiLabel],
    window_hours: i64,
    stride_hours: i64,
) -> Result<(Vec<SequenceSample<F>>, BuildReport)> {
    if stride_hours <= 0 || window_hours < 0 || window_hours % stride_hours != 0 {
        return Err(Error::Config(format!(
            "window {window_hours} h must be a non-negative multiple of stride {stride_hours} h"
        )));
    }
    let index: HashMap<(&str, Timestamp), usize> = frames
        .iter()
        .enumerate()
        .filter_map(|(i, f)| Some(((f.storm_id(), f.timestamp()?), i)))
        .collect();
    let steps = window_hours / stride_hours;

    let mut ordered: Vec<&RiLabel> = labels.iter().collect();
    ordered.sort_by(|a, b| (&a.storm_id, a.timestamp).cmp(&(&b.storm_id, b.timestamp)));

    let mut report = BuildReport {
        labels_seen: labels.len(),
        ..Default::default()
    };
    let mut samples = Vec::new();
    'labels: for label in ordered {
        let mut picked = Vec::with_capacity(steps as usize + 1);
        let mut times = Vec::with_capacity(steps as usize + 1);
        for s in (0..=steps).rev() {
            let at = label.timestamp - Duration::hours(s * stride_hours);
            match index.get(&(label.storm_id.as_str(), at)) {
                Some(&i) => {
                    picked.push(frames[i].clone());
                    times.push(at);
                }
                None => {
                    report.skipped_gaps += 1;
                    continue 'labels;
                }
            }
        }
        samples.push(SequenceSample {
            storm_id: label.storm_id.clone(),
            t: label.timestamp,
            frames: picked,
            frame_times: times,
            label: label.label,
            env: None,
        });
    }
    report.samples = samples.len();
    Ok((samples, report))
}

/// Attaches predictor vectors from exactly matching `(storm_id, t)` records.
/// Samples whose record is absent, or has a missing value among the
/// requested predictors, get `env = None`.
pub fn join_env<F>(
    mut samples: Vec<SequenceSample<F>>,
    env: &[EnvRecord],
    predictor_names: &[String],
) -> Result<Vec<SequenceSample<F>>> {
    if predictor_names.is_empty() {
        for s in &mut samples {
            s.env = Some(Vec::new());
        }
        return Ok(samples);
    }
    let known: Vec<&str> = env
        .first()
        .map(|r| r.predictors.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    if let Some(unknown) = predictor_names.iter().find(|n| !known.contains(&n.as_str())) {
        return Err(Error::Config(format!("unknown predictor {unknown:?}")));
    }
    let by_key: BTreeMap<(&str, Timestamp), &EnvRecord> =
        env.iter().map(|r| ((r.storm_id.as_str(), r.timestamp), r)).collect();
    for s in &mut samples {
        s.env = by_key.get(&(s.storm_id.as_str(), s.t)).and_then(|r| {
            predictor_names
                .iter()
                .map(|n| r.get(n).flatten())
                .collect::<Option<Vec<f64>>>()
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time;

    #[derive(Clone, Debug, PartialEq)]
    struct Stub(String, Timestamp);

    impl Timed for Stub {
        fn storm_id(&self) -> &str {
            &self.0
        }
        fn timestamp(&self) -> Option<Timestamp> {
            Some(self.1)
        }
    }

    fn t0() -> Timestamp {
        time::parse_iso("2020-11-01T00:00Z").unwrap()
    }

    fn frames_every(hours: i64, count: i64, skip: Option<i64>) -> Vec<Stub> {
        (0..count)
            .filter(|i| Some(*i) != skip)
            .map(|i| Stub("AL092020".into(), t0() + Duration::hours(hours * i)))
            .collect()
    }

    fn labels_at(times: impl Iterator<Item = Timestamp>) -> Vec<RiLabel> {
        times
            .map(|t| RiLabel { storm_id: "AL092020".into(), timestamp: t, label: 0, delta_kt: 0 })
            .collect()
    }

    #[test]
    fn five_frames_per_six_hour_window() {
        let frames = frames_every(6, 9, None); // 48 h
        let labels = labels_at((0..5).map(|i| t0() + Duration::hours(6 * i)));
        let (samples, report) = build_sequences(&frames, &labels, 24, 6).unwrap();
        // only t = 24 h and later have a full window among these labels
        assert_eq!(samples.len(), 1);
        assert_eq!(report.skipped_gaps, 4);
        let s = &samples[0];
        assert_eq!(s.frames.len(), 5);
        assert_eq!(*s.frame_times.last().unwrap(), s.t);
        assert_eq!(s.frame_times[0], s.t - Duration::hours(24));
        assert!(s.frame_times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gap_skips_the_sample() {
        // frame at index 2 (t-12h for t=24h) missing
        let frames = frames_every(6, 8, Some(2));
        let labels = labels_at([t0() + Duration::hours(24), t0() + Duration::hours(42)].into_iter());
        let (samples, report) = build_sequences(&frames, &labels, 24, 6).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].t, t0() + Duration::hours(42));
        assert_eq!(report.skipped_gaps, 1);
    }

    #[test]
    fn three_hour_stride_gives_nine_frames() {
        let frames = frames_every(3, 12, None);
        let labels = labels_at([t0() + Duration::hours(24)].into_iter());
        let (samples, _) = build_sequences(&frames, &labels, 24, 3).unwrap();
        assert_eq!(samples[0].frames.len(), 9);
        assert!(build_sequences(&frames, &labels, 24, 5).is_err());
    }

    fn env_rec(t: Timestamp, shrd: Option<f64>) -> EnvRecord {
        EnvRecord {
            storm_id: "AL092020".into(),
            timestamp: t,
            predictors: vec![("SHRD".into(), shrd), ("RHLO".into(), Some(70.1))],
        }
    }

    #[test]
    fn env_join_rules() {
        let frames = frames_every(6, 7, None);
        let labels = labels_at([t0() + Duration::hours(24), t0() + Duration::hours(30), t0() + Duration::hours(36)].into_iter());
        let (samples, _) = build_sequences(&frames, &labels, 24, 6).unwrap();
        let env = vec![
            env_rec(t0() + Duration::hours(24), Some(12.5)),
            env_rec(t0() + Duration::hours(36), None),
        ];
        let names = vec!["SHRD".to_string(), "RHLO".to_string()];
        let joined = join_env(samples.clone(), &env, &names).unwrap();
        assert_eq!(joined[0].env, Some(vec![12.5, 70.1]));
        assert_eq!(joined[1].env, None);
        assert_eq!(joined[2].env, None);

        let none = join_env(samples.clone(), &env, &[]).unwrap();
        assert!(none.iter().all(|s| s.env == Some(vec![])));

        assert!(join_env(samples, &env, &["VMPI".to_string()]).is_err());
    }
}
