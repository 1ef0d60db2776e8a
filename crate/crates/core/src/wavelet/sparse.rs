//! Sparse coefficient sets: top-magnitude thresholding, radial masking of
//! fine scales, and zero-filled reconstruction.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::transform::{dwt2, idwt2, Grid, Orientation, WaveletDecomposition, WaveletSpec};
use crate::error::{Error, Result};
use crate::ingest::IrFrame;
use crate::time::Timestamp;

pub const DEFAULT_Q: f64 = 0.10;
pub const DEFAULT_R_FRAC: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub scale: u8,
    pub orientation: Orientation,
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

/// Canonical position key; entries sort ascending by it.
pub type CoeffKey = (u8, Orientation, u32, u32);

impl CoeffEntry {
    pub fn key(&self) -> CoeffKey {
        (self.scale, self.orientation, self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffSet {
    pub storm_id: String,
    pub timestamp: Option<Timestamp>,
    pub width: usize,
    pub height: usize,
    pub spec: WaveletSpec,
    /// Threshold fraction the set was cut with (1.0 for dense sets).
    pub q: f64,
    /// Radius fraction of the mask, if one was applied.
    pub r_frac: Option<f64>,
    /// Sorted by [`CoeffEntry::key`].
    pub entries: Vec<CoeffEntry>,
}

impl SparseCoeffSet {
    /// Sorts entries canonically and checks bounds and uniqueness.
    pub fn new(
        spec: WaveletSpec,
        width: usize,
        mut entries: Vec<CoeffEntry>,
    ) -> Result<Self> {
        spec.check_width(width)?;
        entries.sort_by_key(CoeffEntry::key);
        let set = SparseCoeffSet {
            storm_id: String::new(),
            timestamp: None,
            width,
            height: width,
            spec,
            q: 1.0,
            r_frac: None,
            entries,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_source(mut self, storm_id: impl Into<String>, timestamp: Option<Timestamp>) -> Self {
        self.storm_id = storm_id.into();
        self.timestamp = timestamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width != self.height {
            return Err(Error::Shape(format!("source {}x{} is not square", self.width, self.height)));
        }
        self.spec.check_width(self.width)?;
        let mut seen = HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            check_bounds(e, &self.spec, self.width)?;
            if !seen.insert(e.key()) {
                return Err(Error::Shape(format!("duplicate coefficient at {:?}", e.key())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

fn check_bounds(e: &CoeffEntry, spec: &WaveletSpec, width: usize) -> Result<()> {
    let scale_ok = match e.orientation {
        Orientation::Approx => e.scale == spec.levels,
        _ => (1..=spec.levels).contains(&e.scale),
    };
    if !scale_ok {
        return Err(Error::Shape(format!(
            "no subband ({}, {:?}) in a {}-level decomposition",
            e.scale, e.orientation, spec.levels
        )));
    }
    let w = spec.subband_width(width, e.scale) as u32;
    if e.row >= w || e.col >= w {
        return Err(Error::Shape(format!(
            "({}, {}) outside {w}x{w} subband ({}, {:?})",
            e.row, e.col, e.scale, e.orientation
        )));
    }
    if !e.value.is_finite() {
        return Err(Error::Domain(format!("non-finite coefficient at {:?}", e.key())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMaskSpec {
    pub r_frac: f64,
    pub applies_to_scales: BTreeSet<u8>,
}

impl Default for RadialMaskSpec {
    fn default() -> Self {
        RadialMaskSpec {
            r_frac: DEFAULT_R_FRAC,
            applies_to_scales: BTreeSet::from([1]),
        }
    }
}

impl RadialMaskSpec {
    pub fn new(r_frac: f64, scales: impl IntoIterator<Item = u8>) -> Result<Self> {
        let m = RadialMaskSpec {
            r_frac,
            applies_to_scales: scales.into_iter().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    /// A mask that keeps everything.
    pub fn none() -> Self {
        RadialMaskSpec {
            r_frac: 1.0,
            applies_to_scales: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_frac > 0.0 && self.r_frac <= 1.0) {
            return Err(Error::Domain(format!("r_frac {} outside (0, 1]", self.r_frac)));
        }
        Ok(())
    }
}

/// Distance of a subband position from the subband center, in units of half
/// the subband width.
pub fn normalized_radius(row: u32, col: u32, subband_width: usize) -> f64 {
    let c = (subband_width as f64 - 1.0) / 2.0;
    let dr = row as f64 - c;
    let dc = col as f64 - c;
    (dr * dr + dc * dc).sqrt() / (subband_width as f64 / 2.0)
}

/// `ceil(q * n)`, treating products within 1e-9 of an integer as that
/// integer so that e.g. `0.7 * 10` keeps 7.
pub fn retained_count(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() < 1e-9 { nearest } else { x.ceil() };
    (k as usize).clamp(1, n.max(1)).min(n)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("q {q} outside (0, 1]")));
    }
    Ok(())
}

/// Keeps the `ceil(q * N)` largest-magnitude coefficients over every subband,
/// approximation included. Ties at the cutoff go to the smallest key.
pub fn threshold_top_fraction(decomp: &WaveletDecomposition, q: f64) -> Result<SparseCoeffSet> {
    check_q(q)?;
    let mut all: Vec<CoeffEntry> = Vec::with_capacity(decomp.coefficient_count());
    for (scale, orientation) in decomp.subband_keys() {
        let g = decomp.subband(scale, orientation).expect("key from spec");
        for r in 0..g.size {
            for c in 0..g.size {
                all.push(CoeffEntry {
                    scale,
                    orientation,
                    row: r as u32,
                    col: c as u32,
                    value: g.get(r, c),
                });
            }
        }
    }
    let k = retained_count(q, all.len());
    let by_rank = |a: &CoeffEntry, b: &CoeffEntry| {
        b.value.abs().total_cmp(&a.value.abs()).then_with(|| a.key().cmp(&b.key()))
    };
    if k < all.len() {
        all.select_nth_unstable_by(k, by_rank);
        all.truncate(k);
    }
    let mut set = SparseCoeffSet::new(decomp.spec, decomp.width, all)?;
    set.q = q;
    Ok(set)
}

/// Drops detail entries at the masked scales lying outside `r_frac`.
/// Approximation entries and other scales pass through.
pub fn apply_radial_mask(s: &SparseCoeffSet, mask: &RadialMaskSpec) -> Result<SparseCoeffSet> {
    mask.validate()?;
    let mut out = s.clone();
    if mask.applies_to_scales.is_empty() {
        return Ok(out);
    }
    out.entries.retain(|e| {
        if e.orientation == Orientation::Approx || !mask.applies_to_scales.contains(&e.scale) {
            return true;
        }
        let w = s.spec.subband_width(s.width, e.scale);
        normalized_radius(e.row, e.col, w) <= mask.r_frac
    });
    out.r_frac = Some(mask.r_frac);
    Ok(out)
}

pub fn sparsify(image: &Grid, spec: &WaveletSpec, q: f64, mask: &RadialMaskSpec) -> Result<SparseCoeffSet> {
    let decomp = dwt2(image, spec)?;
    apply_radial_mask(&threshold_top_fraction(&decomp, q)?, mask)
}

/// [`sparsify`] on a frame's temperatures, carrying its storm id and time.
pub fn sparsify_frame(frame: &IrFrame, spec: &WaveletSpec, q: f64, mask: &RadialMaskSpec) -> Result<SparseCoeffSet> {
    let grid = Grid::from_vec(frame.width, frame.temps_f64())?;
    Ok(sparsify(&grid, spec, q, mask)?.with_source(frame.storm_id.clone(), Some(frame.timestamp)))
}

/// Zero-filled dense pyramid.
pub fn densify(s: &SparseCoeffSet) -> Result<WaveletDecomposition> {
    s.validate()?;
    let mut d = WaveletDecomposition::zeros(s.spec, s.width)?;
    for e in &s.entries {
        d.subband_mut(e.scale, e.orientation)
            .expect("bounds validated")
            .set(e.row as usize, e.col as usize, e.value);
    }
    Ok(d)
}

pub fn reconstruct(s: &SparseCoeffSet) -> Result<Grid> {
    idwt2(&densify(s)?)
}

/// Retained entries per source pixel.
pub fn compression_ratio(s: &SparseCoeffSet) -> f64 {
    s.entries.len() as f64 / s.pixel_count() as f64
}

/// Every coefficient of a dense pyramid as a set (for `q = 1`, unmasked use).
pub fn dense_to_sparse(decomp: &WaveletDecomposition) -> Result<SparseCoeffSet> {
    threshold_top_fraction(decomp, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_decomp(values: &[f64]) -> WaveletDecomposition {
        // 4x4 image, one level: 4 approx + 12 detail slots; fill in key order.
        let spec = WaveletSpec::new(1, 1);
        let mut d = WaveletDecomposition::zeros(spec, 4).unwrap();
        let keys = d.subband_keys();
        let mut it = values.iter();
        for (scale, o) in keys {
            let g = d.subband_mut(scale, o).unwrap();
            for v in g.data.iter_mut() {
                *v = *it.next().unwrap_or(&0.0);
            }
        }
        d
    }

    #[test]
    fn keeps_the_single_largest_of_ten() {
        let mut vals: Vec<f64> = (1..=10).map(f64::from).collect();
        vals.extend([0.0; 6]);
        // 16 coefficients; with q chosen so ceil(q*16) = 1
        let s = threshold_top_fraction(&toy_decomp(&vals), 0.0625).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.entries[0].value, 10.0);
    }

    #[test]
    fn tie_break_prefers_smaller_keys() {
        let mut vals = vec![0.0; 16];
        // three fives and a one among zeros
        vals[3] = 5.0;
        vals[5] = -5.0;
        vals[9] = 5.0;
        vals[12] = 1.0;
        let s = threshold_top_fraction(&toy_decomp(&vals), 2.0 / 16.0).unwrap();
        assert_eq!(s.len(), 2);
        let d = toy_decomp(&vals);
        let keys = d.subband_keys();
        // entries 3 and 5 in fill order come first in key order
        assert_eq!(s.entries[0].value.abs(), 5.0);
        assert_eq!(s.entries[1].value.abs(), 5.0);
        assert!(s.entries[0].key() < s.entries[1].key());
        assert_eq!(s.entries[1].value, -5.0);
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn q_range_is_checked() {
        let d = toy_decomp(&[1.0; 16]);
        assert!(threshold_top_fraction(&d, 0.0).is_err());
        assert!(threshold_top_fraction(&d, 1.5).is_err());
        assert!(threshold_top_fraction(&d, f64::NAN).is_err());
        assert_eq!(threshold_top_fraction(&d, 1.0).unwrap().len(), 16);
    }

    #[test]
    fn retained_count_rounding() {
        assert_eq!(retained_count(0.1, 10), 1);
        assert_eq!(retained_count(0.7, 10), 7);
        assert_eq!(retained_count(0.1, 4096), 410);
        assert_eq!(retained_count(0.5, 4), 2);
        assert_eq!(retained_count(1e-6, 10), 1);
        assert_eq!(retained_count(1.0, 16384), 16384);
    }

    #[test]
    fn mask_center_and_corner() {
        let spec = WaveletSpec::new(2, 1);
        let entries = vec![
            CoeffEntry { scale: 1, orientation: Orientation::Diagonal, row: 0, col: 0, value: 1.0 },
            CoeffEntry { scale: 1, orientation: Orientation::Diagonal, row: 16, col: 16, value: 1.0 },
            CoeffEntry { scale: 1, orientation: Orientation::Approx, row: 0, col: 0, value: 1.0 },
        ];
        let s = SparseCoeffSet::new(spec, 64, entries).unwrap();
        let m = apply_radial_mask(&s, &RadialMaskSpec::new(0.25, [1]).unwrap()).unwrap();
        let kept: Vec<_> = m.entries.iter().map(|e| (e.orientation, e.row, e.col)).collect();
        assert_eq!(kept, vec![(Orientation::Approx, 0, 0), (Orientation::Diagonal, 16, 16)]);
        let ident = apply_radial_mask(&s, &RadialMaskSpec::new(0.25, []).unwrap()).unwrap();
        assert_eq!(ident.entries, s.entries);
        let tight = apply_radial_mask(&s, &RadialMaskSpec::new(1e-9, [1]).unwrap()).unwrap();
        // (16,16) on a 32-wide subband sits 0.5*sqrt(2) px from the center
        assert_eq!(tight.len(), 1);
        assert!(RadialMaskSpec::new(0.0, [1]).is_err());
        assert!(RadialMaskSpec::new(1.01, [1]).is_err());
    }

    #[test]
    fn corner_radius_value() {
        let r = normalized_radius(0, 0, 32);
        assert!((r - (2.0f64 * 15.5 * 15.5).sqrt() / 16.0).abs() < 1e-15);
        assert!(r > 1.36 && r < 1.38);
    }

    #[test]
    fn densify_validates_entries() {
        let spec = WaveletSpec::new(1, 2);
        let e = CoeffEntry { scale: 2, orientation: Orientation::Vertical, row: 1, col: 1, value: 2.0 };
        assert!(SparseCoeffSet::new(spec, 16, vec![e, e]).is_err());
        let out = CoeffEntry { row: 4, ..e };
        assert!(SparseCoeffSet::new(spec, 16, vec![out]).is_err());
        let bad_scale = CoeffEntry { scale: 3, ..e };
        assert!(SparseCoeffSet::new(spec, 16, vec![bad_scale]).is_err());
        let approx_wrong_scale = CoeffEntry { scale: 1, orientation: Orientation::Approx, ..e };
        assert!(SparseCoeffSet::new(spec, 16, vec![approx_wrong_scale]).is_err());

        let mut s = SparseCoeffSet::new(spec, 16, vec![e]).unwrap();
        s.entries.push(e);
        assert!(densify(&s).is_err());

        let empty = SparseCoeffSet::new(spec, 16, vec![]).unwrap();
        let d = densify(&empty).unwrap();
        assert_eq!(d.energy(), 0.0);
        assert!(reconstruct(&empty).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_image_keeps_lowest_keys() {
        let img = Grid::zeros(16);
        let spec = WaveletSpec::new(2, 2);
        let s = sparsify(&img, &spec, 0.1, &RadialMaskSpec::none()).unwrap();
        assert_eq!(s.len(), retained_count(0.1, 256));
        // the first keys in canonical order are scale-1 horizontal, row-major
        for (i, e) in s.entries.iter().enumerate() {
            let i = i as u32;
            assert_eq!((e.scale, e.orientation, e.row, e.col), (1, Orientation::Horizontal, i / 8, i % 8));
            assert_eq!(e.value, 0.0);
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let spec = WaveletSpec::new(2, 3);
        let entries: Vec<_> = (0..205u32)
            .map(|i| CoeffEntry { scale: 1, orientation: Orientation::Horizontal, row: i / 32, col: i % 32, value: 1.0 })
            .collect();
        let s = SparseCoeffSet::new(spec, 64, entries).unwrap();
        assert!((compression_ratio(&s) - 205.0 / 4096.0).abs() < 1e-15);
    }
}
