//! UTC timestamp helpers shared by the parsers and file formats.

use chrono::{DateTime, NaiveDateTime, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Parses ISO-8601 UTC timestamps in the forms `2020-11-02T06:00Z`,
/// `2020-11-02T06:00:00Z`, RFC 3339 with an offset, or the basic form
/// `20201102T0600Z` used in file names.
pub fn parse_iso(text: &str) -> Result<Timestamp> {
    let s = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = ["%Y-%m-%dT%H:%MZ", "%Y-%m-%dT%H:%M:%SZ", "%Y%m%dT%H%MZ", "%Y%m%dT%H%M%SZ"];
    for fmt in NAIVE {
        if let Ok(n) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Utc.from_utc_datetime(&n));
        }
    }
    Err(Error::Format(format!("unparseable timestamp {s:?}")))
}

/// `2020-11-02T06:00Z`, or with seconds when they are non-zero.
pub fn format_iso(t: &Timestamp) -> String {
    if t.second() == 0 && t.nanosecond() == 0 {
        t.format("%Y-%m-%dT%H:%MZ").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }
}

/// Compact form safe for file names: `20201102T0600Z`.
pub fn format_basic(t: &Timestamp) -> String {
    t.format("%Y%m%dT%H%MZ").to_string()
}

pub fn from_unix(secs: i64) -> Result<Timestamp> {
    Utc.timestamp_opt(secs, 0)
        .single()
        .ok_or_else(|| Error::Format(format!("timestamp {secs} out of range")))
}

/// True when `t` falls on 00/06/12/18 UTC exactly.
pub fn is_synoptic(t: &Timestamp) -> bool {
    t.hour().is_multiple_of(6) && t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

pub(crate) mod serde_iso {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Timestamp;

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_iso(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_iso(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_minute_precision_and_basic_forms() {
        let a = parse_iso("2020-11-02T06:00Z").unwrap();
        let b = parse_iso("2020-11-02T06:00:00+00:00").unwrap();
        let c = parse_iso("20201102T0600Z").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(format_iso(&a), "2020-11-02T06:00Z");
        assert_eq!(format_basic(&a), "20201102T0600Z");
        assert!(is_synoptic(&a));
        assert!(!is_synoptic(&parse_iso("2020-11-02T03:00Z").unwrap()));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_iso("yesterday").is_err());
    }
}
