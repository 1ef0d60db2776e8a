//! HURDAT2 best-track text format.
//!
//! A storm block is a header line `AL092020, ETA, 2,` followed by exactly
//! the advertised number of comma-separated data lines.

use std::fmt::Write as _;

use chrono::{NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTrackRecord {
    #[serde(with = "time::serde_iso")]
    pub timestamp: Timestamp,
    pub record_id: Option<char>,
    pub status: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub max_wind_kt: Option<i32>,
    pub min_pressure_mb: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormTrack {
    pub storm_id: String,
    pub name: String,
    pub records: Vec<BestTrackRecord>,
}

/// `[A-Z]{2}[0-9]{6}`.
pub fn is_valid_storm_id(id: &str) -> bool {
    let b = id.as_bytes();
    b.len() == 8 && b[..2].iter().all(u8::is_ascii_uppercase) && b[2..].iter().all(u8::is_ascii_digit)
}

fn is_missing_sentinel(v: i32) -> bool {
    v == -99 || v == -999
}

fn split_fields(line: &str) -> Vec<&str> {
    let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
    // Lines end with a trailing comma.
    while fields.len() > 1 && fields.last() == Some(&"") {
        fields.pop();
    }
    fields
}

fn parse_coord(token: &str, pos: char, neg: char, limit: f64, line: usize) -> Result<f64> {
    let (body, hemi) = token
        .char_indices()
        .last()
        .map(|(i, c)| (&token[..i], c.to_ascii_uppercase()))
        .ok_or_else(|| Error::parse(line, "empty coordinate"))?;
    let sign = if hemi == pos {
        1.0
    } else if hemi == neg {
        -1.0
    } else {
        return Err(Error::parse(line, format!("coordinate {token:?} lacks {pos}/{neg} suffix")));
    };
    let value: f64 = body
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("non-numeric coordinate {token:?}")))?;
    let v = sign * value;
    if !v.is_finite() || v.abs() > limit {
        return Err(Error::parse(line, format!("coordinate {token:?} out of range")));
    }
    Ok(v)
}

fn parse_int_field(token: &str, what: &str, line: usize) -> Result<Option<i32>> {
    if token.is_empty() {
        return Ok(None);
    }
    let v: i32 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("non-numeric {what} {token:?}")))?;
    Ok(if is_missing_sentinel(v) { None } else { Some(v) })
}

fn parse_data_line(text: &str, line: usize) -> Result<BestTrackRecord> {
    let f = split_fields(text);
    if f.len() < 8 {
        return Err(Error::parse(line, format!("data line has {} fields, need 8", f.len())));
    }
    let stamp = format!("{}{:0>4}", f[0], f[1]);
    let naive = NaiveDateTime::parse_from_str(&stamp, "%Y%m%d%H%M")
        .map_err(|_| Error::parse(line, format!("unparseable date/time {:?} {:?}", f[0], f[1])))?;
    let record_id = match f[2].chars().count() {
        0 => None,
        1 => f[2].chars().next(),
        _ => return Err(Error::parse(line, format!("record identifier {:?} longer than one letter", f[2]))),
    };
    let lat_deg = parse_coord(f[4], 'N', 'S', 90.0, line)?;
    let lon_deg = parse_coord(f[5], 'E', 'W', 180.0, line)?;
    let max_wind_kt = parse_int_field(f[6], "max wind", line)?;
    if matches!(max_wind_kt, Some(w) if w < 0) {
        return Err(Error::parse(line, format!("negative max wind {:?}", f[6])));
    }
    let min_pressure_mb = parse_int_field(f[7], "min pressure", line)?;
    Ok(BestTrackRecord {
        timestamp: Utc.from_utc_datetime(&naive),
        record_id,
        status: f[3].to_string(),
        lat_deg,
        lon_deg,
        max_wind_kt,
        min_pressure_mb,
    })
}

/// Parses a full HURDAT2 database text. Blank lines are skipped.
pub fn parse_hurdat2(text: &str) -> Result<Vec<StormTrack>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut tracks = Vec::new();

    while let Some((line_no, header)) = lines.next() {
        let f = split_fields(header);
        if f.len() < 3 {
            return Err(Error::parse(line_no, "malformed header: expected id, name, count"));
        }
        if !is_valid_storm_id(f[0]) {
            return Err(Error::parse(line_no, format!("invalid storm id {:?}", f[0])));
        }
        let count: usize = f[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("malformed header count {:?}", f[2])))?;

        let mut records: Vec<BestTrackRecord> = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, data) = lines.next().ok_or_else(|| {
                Error::parse(line_no, format!("header advertises {count} rows but input ended"))
            })?;
            let rec = parse_data_line(data, n)?;
            if let Some(prev) = records.last() {
                if rec.timestamp <= prev.timestamp {
                    return Err(Error::parse(n, "records not strictly increasing in time"));
                }
            }
            records.push(rec);
        }
        tracks.push(StormTrack {
            storm_id: f[0].to_string(),
            name: f[1].to_string(),
            records,
        });
    }
    Ok(tracks)
}

fn fmt_coord(v: f64, pos: char, neg: char) -> String {
    let hemi = if v < 0.0 { neg } else { pos };
    format!("{:.1}{hemi}", v.abs())
}

/// Serializes tracks in the same column layout the parser reads.
/// Coordinates are written with one decimal, as in the published database.
pub fn write_hurdat2(tracks: &[StormTrack]) -> String {
    let mut out = String::new();
    for t in tracks {
        let _ = writeln!(out, "{}, {:>18}, {:>6},", t.storm_id, t.name, t.records.len());
        for r in &t.records {
            let _ = writeln!(
                out,
                "{}, {},  {}, {}, {:>5}, {:>6}, {:>3}, {:>4},",
                r.timestamp.format("%Y%m%d"),
                r.timestamp.format("%H%M"),
                r.record_id.unwrap_or(' '),
                r.status,
                fmt_coord(r.lat_deg, 'N', 'S'),
                fmt_coord(r.lon_deg, 'E', 'W'),
                r.max_wind_kt.unwrap_or(-99),
                r.min_pressure_mb.unwrap_or(-999),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ETA: &str = "AL092020,                ETA,      2,
20201101, 0000,  , TD, 15.1N,  75.4W,  25, 1006,    0,    0,    0,    0,
20201101, 0600, L, TS, 26.3N,  88.6W,  35, -999,   60,    0,    0,    0,
";

    #[test]
    fn parses_header_and_rows() {
        let tracks = parse_hurdat2(ETA).unwrap();
        assert_eq!(tracks.len(), 1);
        let t = &tracks[0];
        assert_eq!(t.storm_id, "AL092020");
        assert_eq!(t.name, "ETA");
        assert_eq!(t.records.len(), 2);
        let r = &t.records[1];
        assert_eq!(r.lat_deg, 26.3);
        assert_eq!(r.lon_deg, -88.6);
        assert_eq!(r.record_id, Some('L'));
        assert_eq!(r.status, "TS");
        assert_eq!(r.max_wind_kt, Some(35));
        assert_eq!(r.min_pressure_mb, None);
        assert_eq!(t.records[0].record_id, None);
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_hurdat2("").unwrap().is_empty());
        assert!(parse_hurdat2("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn wind_sentinel_is_missing() {
        let text = "AL012000, X, 1,\n20000101, 0000, , TS, 10.0N, 40.0W, -99, -999,\n";
        let r = &parse_hurdat2(text).unwrap()[0].records[0];
        assert_eq!(r.max_wind_kt, None);
        assert_eq!(r.min_pressure_mb, None);
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_count = "AL092020, ETA, two,\n";
        assert_eq!(line_of(parse_hurdat2(bad_count).unwrap_err()), 1);

        let short = "AL092020, ETA, 3,\n20201101, 0000, , TD, 15.1N, 75.4W, 25, 1006,\n";
        assert!(parse_hurdat2(short).is_err());

        let bad_lat = "AL092020, ETA, 1,\n20201101, 0000, , TD, 1x.1N, 75.4W, 25, 1006,\n";
        assert_eq!(line_of(parse_hurdat2(bad_lat).unwrap_err()), 2);

        let far = "AL092020, ETA, 1,\n20201101, 0000, , TD, 95.0N, 75.4W, 25, 1006,\n";
        assert_eq!(line_of(parse_hurdat2(far).unwrap_err()), 2);

        let far_lon = "AL092020, ETA, 1,\n20201101, 0000, , TD, 15.0N, 190.4W, 25, 1006,\n";
        assert_eq!(line_of(parse_hurdat2(far_lon).unwrap_err()), 2);

        let bad_date = "AL092020, ETA, 1,\n20201341, 0000, , TD, 15.1N, 75.4W, 25, 1006,\n";
        assert_eq!(line_of(parse_hurdat2(bad_date).unwrap_err()), 2);

        let backwards = "AL092020, ETA, 2,\n20201101, 0600, , TD, 15.1N, 75.4W, 25, 1006,\n\
                         20201101, 0000, , TD, 15.1N, 75.4W, 25, 1006,\n";
        assert_eq!(line_of(parse_hurdat2(backwards).unwrap_err()), 3);

        let bad_id = "A1092020, ETA, 0,\n";
        assert_eq!(line_of(parse_hurdat2(bad_id).unwrap_err()), 1);
    }

    #[test]
    fn write_then_parse_matches() {
        let tracks = parse_hurdat2(ETA).unwrap();
        let text = write_hurdat2(&tracks);
        assert_eq!(parse_hurdat2(&text).unwrap(), tracks);
    }

    #[test]
    fn storm_id_pattern() {
        assert!(is_valid_storm_id("AL122005"));
        assert!(!is_valid_storm_id("al122005"));
        assert!(!is_valid_storm_id("AL12200"));
    }
}
