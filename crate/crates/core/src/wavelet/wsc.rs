//! `.wsc` sparse coefficient files: one JSON header line, then
//! `j,k,row,col,value` CSV lines with shortest round-trip values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sparse::{CoeffEntry, SparseCoeffSet};
use super::transform::{Extension, Orientation, WaveletSpec};
use crate::error::{Error, Result};
use crate::time::{self, Timestamp};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    storm_id: String,
    timestamp: Option<String>,
    width: usize,
    height: usize,
    family_order: u8,
    levels: u8,
    extension: String,
    q: f64,
    r_frac: Option<f64>,
}

pub fn write_wsc(s: &SparseCoeffSet) -> Result<String> {
    s.validate()?;
    let header = Header {
        storm_id: s.storm_id.clone(),
        timestamp: s.timestamp.as_ref().map(time::format_iso),
        width: s.width,
        height: s.height,
        family_order: s.spec.family_order,
        levels: s.spec.levels,
        extension: s.spec.extension.as_str().to_string(),
        q: s.q,
        r_frac: s.r_frac,
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for e in &s.entries {
        let _ = writeln!(out, "{},{},{},{},{:?}", e.scale, e.orientation.index(), e.row, e.col, e.value);
    }
    Ok(out)
}

pub fn read_wsc(text: &str) -> Result<SparseCoeffSet> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let header: Header =
        serde_json::from_str(head).map_err(|e| Error::parse(1, format!("bad header: {e}")))?;
    let extension: Extension = header.extension.parse()?;
    let timestamp: Option<Timestamp> = header.timestamp.as_deref().map(time::parse_iso).transpose()?;
    let spec = WaveletSpec {
        family_order: header.family_order,
        levels: header.levels,
        extension,
    };
    spec.filter_bank()?;

    let mut entries = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(n, format!("expected 5 fields, found {}", f.len())));
        }
        let int = |s: &str, what: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::parse(n, format!("bad {what} {s:?}")))
        };
        let k = int(f[1], "orientation")?;
        let orientation = u8::try_from(k)
            .ok()
            .and_then(Orientation::from_index)
            .ok_or_else(|| Error::parse(n, format!("orientation {k} not in 0..=3")))?;
        let value: f64 = f[4].parse().map_err(|_| Error::parse(n, format!("bad value {:?}", f[4])))?;
        entries.push(CoeffEntry {
            scale: u8::try_from(int(f[0], "scale")?).map_err(|_| Error::parse(n, "scale too large"))?,
            orientation,
            row: int(f[2], "row")?,
            col: int(f[3], "col")?,
            value,
        });
    }
    if header.width != header.height {
        return Err(Error::Shape("source dims must be square".into()));
    }
    let mut s = SparseCoeffSet::new(spec, header.width, entries)?;
    s.storm_id = header.storm_id;
    s.timestamp = timestamp;
    s.q = header.q;
    s.r_frac = header.r_frac;
    Ok(s)
}
