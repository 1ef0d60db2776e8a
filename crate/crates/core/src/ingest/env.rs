//! Environmental predictor tables exported to CSV (one row per storm and
//! synoptic time, one column per predictor).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub storm_id: String,
    #[serde(with = "time::serde_iso")]
    pub timestamp: Timestamp,
    /// Predictor values in header order; `None` for empty cells.
    pub predictors: Vec<(String, Option<f64>)>,
}

impl EnvRecord {
    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        self.predictors.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Parses an environmental predictor CSV. `storm_id` and `timestamp` are
/// mandatory columns; every other column is a numeric predictor.
pub fn parse_env_table(text: &str) -> Result<Vec<EnvRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(1, format!("bad header row: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("storm_id").ok_or_else(|| Error::parse(1, "missing mandatory column storm_id"))?;
    let ts_col = col("timestamp").ok_or_else(|| Error::parse(1, "missing mandatory column timestamp"))?;
    let predictor_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col && *i != ts_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let storm_id = row.get(id_col).unwrap_or("").to_string();
        if storm_id.is_empty() {
            return Err(Error::parse(line, "empty storm_id"));
        }
        let timestamp = time::parse_iso(row.get(ts_col).unwrap_or(""))
            .map_err(|e| Error::parse(line, e.to_string()))?;
        if !time::is_synoptic(&timestamp) {
            return Err(Error::parse(
                line,
                format!("timestamp {} is off the 6-hour grid", time::format_iso(&timestamp)),
            ));
        }
        if !seen.insert((storm_id.clone(), timestamp)) {
            return Err(Error::parse(
                line,
                format!("duplicate row for {storm_id} at {}", time::format_iso(&timestamp)),
            ));
        }
        let mut predictors = Vec::with_capacity(predictor_cols.len());
        for (i, name) in &predictor_cols {
            let cell = row.get(*i).unwrap_or("");
            let value = if cell.is_empty() {
                None
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse(line, format!("non-numeric {name} value {cell:?}")))?;
                Some(v)
            };
            predictors.push((name.clone(), value));
        }
        out.push(EnvRecord {
            storm_id,
            timestamp,
            predictors,
        });
    }
    Ok(out)
}
