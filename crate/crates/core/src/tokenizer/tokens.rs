//! Position-indexed token sequences.
//!
//! `position_id = frame * N + offset(j, k) + row * side + col`, where `N` is
//! the pixel count and subband offsets accumulate in ascending `(j, k)` order.
//! Sorting by position id therefore matches raster order over
//! `(frame, j, k, row, col)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::time::{self, Timestamp};
use crate::wavelet::{CoeffEntry, Extension, Orientation, SparseCoeffSet, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token {
    pub position_id: u64,
    pub token: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSource {
    pub storm_id: String,
    pub timestamp: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub width: usize,
    pub spec: WaveletSpec,
    pub frames: Vec<FrameSource>,
    pub tokens: Vec<Token>,
}

/// Start offset and side of one subband in the position enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubbandSlot {
    pub scale: u8,
    pub orientation: u8,
    pub offset: u64,
    pub side: usize,
}

pub fn position_layout(width: usize, spec: &WaveletSpec) -> Vec<SubbandSlot> {
    let mut keys: Vec<(u8, Orientation)> = Vec::new();
    for j in 1..=spec.levels {
        if j == spec.levels {
            keys.push((j, Orientation::Approx));
        }
        keys.extend(Orientation::DETAILS.iter().map(|&o| (j, o)));
    }
    keys.sort();
    let mut offset = 0u64;
    keys.into_iter()
        .map(|(scale, o)| {
            let side = width >> scale;
            let slot = SubbandSlot {
                scale,
                orientation: o.index(),
                offset,
                side,
            };
            offset += (side * side) as u64;
            slot
        })
        .collect()
}

fn slot_of(layout: &[SubbandSlot], scale: u8, orientation: Orientation) -> Option<&SubbandSlot> {
    layout.iter().find(|s| s.scale == scale && s.orientation == orientation.index())
}

pub fn position_id(layout: &[SubbandSlot], width: usize, frame: usize, e: &CoeffEntry) -> Result<u64> {
    let slot = slot_of(layout, e.scale, e.orientation)
        .ok_or_else(|| Error::Shape(format!("subband ({}, {:?}) not in layout", e.scale, e.orientation)))?;
    let (r, c) = (e.row as usize, e.col as usize);
    if r >= slot.side || c >= slot.side {
        return Err(Error::Shape(format!("coefficient ({r}, {c}) outside {0}x{0} subband", slot.side)));
    }
    Ok((frame * width * width) as u64 + slot.offset + (r * slot.side + c) as u64)
}

/// Inverse of [`position_id`]: `(frame, scale, orientation, row, col)`.
pub fn decode_position(layout: &[SubbandSlot], width: usize, id: u64) -> Result<(usize, u8, Orientation, u32, u32)> {
    let n = (width * width) as u64;
    let frame = (id / n) as usize;
    let within = id % n;
    let slot = layout
        .iter()
        .rev()
        .find(|s| s.offset <= within)
        .ok_or_else(|| Error::Shape(format!("position {id} outside layout")))?;
    let local = (within - slot.offset) as usize;
    let orientation = Orientation::from_index(slot.orientation).expect("layout holds valid orientations");
    Ok((frame, slot.scale, orientation, (local / slot.side) as u32, (local % slot.side) as u32))
}

/// Tokenizes one or more frames sharing width and spec.
pub fn encode_frames(sets: &[SparseCoeffSet], vocab: &Vocabulary) -> Result<TokenSequence> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Shape("no frames to encode".into()))?;
    let (width, spec) = (first.width, first.spec);
    let layout = position_layout(width, &spec);
    let mut tokens = Vec::with_capacity(sets.iter().map(SparseCoeffSet::len).sum());
    for (f, s) in sets.iter().enumerate() {
        if s.width != width || s.spec != spec {
            return Err(Error::Shape("frames differ in width or wavelet spec".into()));
        }
        for e in &s.entries {
            let v = vocab.for_subband(e.scale, e.orientation)?;
            tokens.push(Token {
                position_id: position_id(&layout, width, f, e)?,
                token: v.token(e.value),
            });
        }
    }
    tokens.sort();
    if tokens.windows(2).any(|w| w[0].position_id == w[1].position_id) {
        return Err(Error::Shape("duplicate coefficient positions".into()));
    }
    Ok(TokenSequence {
        width,
        spec,
        frames: sets
            .iter()
            .map(|s| FrameSource { storm_id: s.storm_id.clone(), timestamp: s.timestamp })
            .collect(),
        tokens,
    })
}

pub fn encode(s: &SparseCoeffSet, vocab: &Vocabulary) -> Result<TokenSequence> {
    encode_frames(std::slice::from_ref(s), vocab)
}

/// One sparse set per frame, values replaced by bin representatives.
pub fn decode(t: &TokenSequence, vocab: &Vocabulary) -> Result<Vec<SparseCoeffSet>> {
    t.spec.check_width(t.width)?;
    let layout = position_layout(t.width, &t.spec);
    let mut per_frame: Vec<Vec<CoeffEntry>> = vec![Vec::new(); t.frames.len()];
    let mut last: Option<u64> = None;
    for tok in &t.tokens {
        if last.is_some_and(|p| tok.position_id <= p) {
            return Err(Error::Shape(format!("position ids not strictly increasing at {}", tok.position_id)));
        }
        last = Some(tok.position_id);
        let (frame, scale, orientation, row, col) = decode_position(&layout, t.width, tok.position_id)?;
        let bucket = per_frame
            .get_mut(frame)
            .ok_or_else(|| Error::Shape(format!("position {} refers to frame {frame}", tok.position_id)))?;
        let value = vocab.for_subband(scale, orientation)?.value(tok.token)?;
        bucket.push(CoeffEntry { scale, orientation, row, col, value });
    }
    per_frame
        .into_iter()
        .zip(&t.frames)
        .map(|(entries, src)| {
            Ok(SparseCoeffSet::new(t.spec, t.width, entries)?.with_source(src.storm_id.clone(), src.timestamp))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    width: usize,
    family_order: u8,
    levels: u8,
    extension: String,
    frames: Vec<(String, Option<String>)>,
    position: String,
    subbands: Vec<SubbandSlot>,
}

const POSITION_RULE: &str = "frame * width^2 + subband offset + row * side + col";

pub fn write_tokens(t: &TokenSequence) -> Result<String> {
    let header = Header {
        width: t.width,
        family_order: t.spec.family_order,
        levels: t.spec.levels,
        extension: t.spec.extension.as_str().to_string(),
        frames: t
            .frames
            .iter()
            .map(|f| (f.storm_id.clone(), f.timestamp.as_ref().map(time::format_iso)))
            .collect(),
        position: POSITION_RULE.to_string(),
        subbands: position_layout(t.width, &t.spec),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for tok in &t.tokens {
        let _ = writeln!(out, "{},{}", tok.position_id, tok.token);
    }
    Ok(out)
}

pub fn read_tokens(text: &str) -> Result<TokenSequence> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::parse(1, "empty token file"))?;
    let h: Header = serde_json::from_str(head).map_err(|e| Error::parse(1, format!("bad header: {e}")))?;
    let spec = WaveletSpec {
        family_order: h.family_order,
        levels: h.levels,
        extension: h.extension.parse::<Extension>()?,
    };
    spec.check_width(h.width)?;
    if h.subbands != position_layout(h.width, &spec) {
        return Err(Error::parse(1, "subband layout does not match width and levels"));
    }
    let frames = h
        .frames
        .into_iter()
        .map(|(storm_id, ts)| {
            Ok(FrameSource {
                storm_id,
                timestamp: ts.as_deref().map(time::parse_iso).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tokens = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(i + 1, "expected position_id,token"))?;
        let position_id = a.trim().parse().map_err(|_| Error::parse(i + 1, format!("bad position id {a:?}")))?;
        let token = b.trim().parse().map_err(|_| Error::parse(i + 1, format!("bad token {b:?}")))?;
        tokens.push(Token { position_id, token });
    }
    if tokens.windows(2).any(|w| w[1].position_id <= w[0].position_id) {
        return Err(Error::Format("position ids must be strictly increasing".into()));
    }
    Ok(TokenSequence { width: h.width, spec, frames, tokens })
}
