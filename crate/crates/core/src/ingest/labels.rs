use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::hurdat2::StormTrack;
use crate::time::{self, Timestamp};

pub const DEFAULT_LEAD_HOURS: i64 = 24;
pub const DEFAULT_RI_THRESHOLD_KT: i32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiLabel {
    pub storm_id: String,
    #[serde(with = "time::serde_iso")]
    pub timestamp: Timestamp,
    /// 1 = rapid intensification over the lead window, 0 otherwise.
    pub label: u8,
    pub delta_kt: i32,
}

/// Maximum sustained wind of the record at exactly `t`. No interpolation.
pub fn intensity_at(track: &StormTrack, t: Timestamp) -> Option<i32> {
    track
        .records
        .binary_search_by(|r| r.timestamp.cmp(&t))
        .ok()
        .and_then(|i| track.records[i].max_wind_kt)
}

/// Labels every record time `t` that has a record at exactly `t + lead_hours`
/// and known winds at both ends.
pub fn compute_ri_labels(track: &StormTrack, lead_hours: i64, threshold_kt: i32) -> Vec<RiLabel> {
    let lead = Duration::hours(lead_hours);
    track
        .records
        .iter()
        .filter_map(|r| {
            let start = r.max_wind_kt?;
            let end = intensity_at(track, r.timestamp + lead)?;
            let delta_kt = end - start;
            Some(RiLabel {
                storm_id: track.storm_id.clone(),
                timestamp: r.timestamp,
                label: u8::from(delta_kt >= threshold_kt),
                delta_kt,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::hurdat2::BestTrackRecord;
    use proptest::prelude::*;

    fn track(winds: &[Option<i32>]) -> StormTrack {
        let t0 = time::parse_iso("2020-11-01T00:00Z").unwrap();
        StormTrack {
            storm_id: "AL092020".into(),
            name: "ETA".into(),
            records: winds
                .iter()
                .enumerate()
                .map(|(i, w)| BestTrackRecord {
                    timestamp: t0 + Duration::hours(6 * i as i64),
                    record_id: None,
                    status: "HU".into(),
                    lat_deg: 15.0,
                    lon_deg: -80.0,
                    max_wind_kt: *w,
                    min_pressure_mb: None,
                })
                .collect(),
        }
    }

    fn single_delta(start: i32, end: i32) -> RiLabel {
        let t = track(&[Some(start), Some(start), Some(start), Some(start), Some(end)]);
        let labels = compute_ri_labels(&t, 24, 30);
        assert_eq!(labels.len(), 1);
        labels[0].clone()
    }

    #[test]
    fn threshold_boundaries() {
        let l = single_delta(70, 100);
        assert_eq!((l.delta_kt, l.label), (30, 1));
        let l = single_delta(70, 99);
        assert_eq!((l.delta_kt, l.label), (29, 0));
        let l = single_delta(70, 101);
        assert_eq!((l.delta_kt, l.label), (31, 1));
        let l = single_delta(70, 40);
        assert_eq!((l.delta_kt, l.label), (-30, 0));
    }

    #[test]
    fn missing_lead_record_emits_nothing() {
        let t = track(&[Some(70), Some(80), Some(90)]);
        assert!(compute_ri_labels(&t, 24, 30).is_empty());
    }

    #[test]
    fn missing_intensity_skips_timestamp() {
        let t = track(&[None, Some(50), Some(50), Some(50), Some(90), Some(90)]);
        let labels = compute_ri_labels(&t, 24, 30);
        assert_eq!(labels.len(), 1);
        assert_eq!(labels[0].timestamp, t.records[1].timestamp);
        let t = track(&[Some(50), Some(50), Some(50), Some(50), None]);
        assert!(compute_ri_labels(&t, 24, 30).is_empty());
    }

    #[test]
    fn intensity_lookup_is_exact() {
        let t = track(&[Some(40), Some(45)]);
        assert_eq!(intensity_at(&t, t.records[1].timestamp), Some(45));
        assert_eq!(intensity_at(&t, t.records[0].timestamp + Duration::hours(3)), None);
        let empty = track(&[]);
        assert_eq!(intensity_at(&empty, t.records[0].timestamp), None);
    }

    proptest! {
        #[test]
        fn label_count_for_regular_tracks(winds in prop::collection::vec(0i32..160, 9..40)) {
            let t = track(&winds.iter().copied().map(Some).collect::<Vec<_>>());
            prop_assert_eq!(compute_ri_labels(&t, 24, 30).len(), winds.len() - 4);
        }

        #[test]
        fn raising_threshold_never_creates_positives(
            winds in prop::collection::vec(0i32..160, 5..30),
            lo in 0i32..60,
            bump in 0i32..60,
        ) {
            let t = track(&winds.iter().copied().map(Some).collect::<Vec<_>>());
            let a = compute_ri_labels(&t, 24, lo);
            let b = compute_ri_labels(&t, 24, lo + bump);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(y.label <= x.label);
            }
        }
    }
}
