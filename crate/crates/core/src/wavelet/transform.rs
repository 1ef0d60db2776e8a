//! Separable 2D orthogonal wavelet transform (Mallat cascade) with periodic
//! boundary extension.

use serde::{Deserialize, Serialize};

use super::filters::{FilterBank, MAX_ORDER};
use crate::error::{Error, Result};

/// Row-major square grid of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(size: usize) -> Self {
        Grid {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {size}x{size} grid",
                data.len()
            )));
        }
        Ok(Grid { size, data })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.size + col] = v;
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn block(&self, row0: usize, col0: usize, size: usize) -> Grid {
        let mut out = Grid::zeros(size);
        for r in 0..size {
            let src = (row0 + r) * self.size + col0;
            out.data[r * size..(r + 1) * size].copy_from_slice(&self.data[src..src + size]);
        }
        out
    }

    fn put_block(&mut self, row0: usize, col0: usize, block: &Grid) {
        let size = block.size;
        for r in 0..size {
            let dst = (row0 + r) * self.size + col0;
            self.data[dst..dst + size].copy_from_slice(&block.data[r * size..(r + 1) * size]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    #[default]
    Periodic,
}

impl Extension {
    pub fn as_str(&self) -> &'static str {
        match self {
            Extension::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for Extension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Extension::Periodic),
            "symmetric" => Err(Error::Unsupported(
                "symmetric extension cannot keep the coefficient count with orthogonal filters".into(),
            )),
            other => Err(Error::Config(format!("unknown extension mode {other:?}"))),
        }
    }
}

/// Subband orientation. `Approx` only occurs at the coarsest scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Approx = 0,
    /// Lowpass along rows, highpass along columns.
    Horizontal = 1,
    /// Highpass along rows, lowpass along columns.
    Vertical = 2,
    Diagonal = 3,
}

impl Orientation {
    pub const DETAILS: [Orientation; 3] = [Orientation::Horizontal, Orientation::Vertical, Orientation::Diagonal];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            0 => Some(Orientation::Approx),
            1 => Some(Orientation::Horizontal),
            2 => Some(Orientation::Vertical),
            3 => Some(Orientation::Diagonal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletSpec {
    /// Daubechies order; 1 is Haar.
    pub family_order: u8,
    pub levels: u8,
    pub extension: Extension,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec {
            family_order: 2,
            levels: 3,
            extension: Extension::Periodic,
        }
    }
}

impl WaveletSpec {
    pub fn new(family_order: u8, levels: u8) -> Self {
        WaveletSpec {
            family_order,
            levels,
            extension: Extension::Periodic,
        }
    }

    pub fn filter_bank(&self) -> Result<FilterBank> {
        FilterBank::daubechies(self.family_order).ok_or_else(|| {
            Error::Domain(format!(
                "Daubechies order {} outside 1..={MAX_ORDER}",
                self.family_order
            ))
        })
    }

    /// Checks that a `width`-wide square image can be decomposed.
    pub fn check_width(&self, width: usize) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Shape("at least one decomposition level is required".into()));
        }
        let block = 1usize
            .checked_shl(self.levels as u32)
            .ok_or_else(|| Error::Shape(format!("{} levels is too many", self.levels)))?;
        if width < block || !width.is_multiple_of(block) {
            return Err(Error::Shape(format!(
                "width {width} is not a positive multiple of 2^{} = {block}",
                self.levels
            )));
        }
        let filter_len = 2 * self.family_order as usize;
        if filter_len > width {
            return Err(Error::Shape(format!("filter length {filter_len} exceeds width {width}")));
        }
        Ok(())
    }

    /// Side length of the subband at `scale` (1 = finest).
    pub fn subband_width(&self, width: usize, scale: u8) -> usize {
        width >> scale
    }
}

/// Dense coefficient pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub spec: WaveletSpec,
    pub width: usize,
    /// Coarse approximation at scale `levels`.
    pub approx: Grid,
    /// `details[j - 1]` holds the horizontal, vertical and diagonal subbands of scale `j`.
    pub details: Vec<[Grid; 3]>,
}

impl WaveletDecomposition {
    pub fn zeros(spec: WaveletSpec, width: usize) -> Result<Self> {
        spec.check_width(width)?;
        spec.filter_bank()?;
        let details = (1..=spec.levels)
            .map(|j| {
                let w = spec.subband_width(width, j);
                [Grid::zeros(w), Grid::zeros(w), Grid::zeros(w)]
            })
            .collect();
        Ok(WaveletDecomposition {
            spec,
            width,
            approx: Grid::zeros(spec.subband_width(width, spec.levels)),
            details,
        })
    }

    pub fn subband(&self, scale: u8, orientation: Orientation) -> Option<&Grid> {
        match orientation {
            Orientation::Approx => (scale == self.spec.levels).then_some(&self.approx),
            o => self.details.get((scale as usize).checked_sub(1)?).map(|d| &d[o as usize - 1]),
        }
    }

    pub fn subband_mut(&mut self, scale: u8, orientation: Orientation) -> Option<&mut Grid> {
        match orientation {
            Orientation::Approx => (scale == self.spec.levels).then_some(&mut self.approx),
            o => self
                .details
                .get_mut((scale as usize).checked_sub(1)?)
                .map(|d| &mut d[o as usize - 1]),
        }
    }

    /// All (scale, orientation) pairs, in ascending order.
    pub fn subband_keys(&self) -> Vec<(u8, Orientation)> {
        subband_keys(self.spec.levels)
    }

    pub fn coefficient_count(&self) -> usize {
        self.approx.data.len() + self.details.iter().flatten().map(|g| g.data.len()).sum::<usize>()
    }

    pub fn energy(&self) -> f64 {
        self.approx.energy() + self.details.iter().flatten().map(Grid::energy).sum::<f64>()
    }

    fn check_consistent(&self) -> Result<()> {
        self.spec.check_width(self.width)?;
        if self.details.len() != self.spec.levels as usize {
            return Err(Error::Shape(format!(
                "{} detail levels for a {}-level spec",
                self.details.len(),
                self.spec.levels
            )));
        }
        for (scale, orientation) in self.subband_keys() {
            let g = self.subband(scale, orientation).expect("key from spec");
            let w = self.spec.subband_width(self.width, scale);
            if g.size != w || g.data.len() != w * w {
                return Err(Error::Shape(format!(
                    "subband ({scale}, {orientation:?}) is {}x{}, expected {w}x{w}",
                    g.size, g.size
                )));
            }
        }
        Ok(())
    }

    /// Places subbands in one image-sized grid: approximation top-left;
    /// at each scale, vertical detail top-right, horizontal bottom-left,
    /// diagonal bottom-right.
    pub fn to_nested(&self) -> Grid {
        let mut out = Grid::zeros(self.width);
        out.put_block(0, 0, &self.approx);
        for (scale, orientation) in self.subband_keys() {
            if orientation == Orientation::Approx {
                continue;
            }
            let (r0, c0, _) = nested_origin(self.width, scale, orientation);
            out.put_block(r0, c0, self.subband(scale, orientation).expect("key from spec"));
        }
        out
    }

    pub fn from_nested(nested: &Grid, spec: WaveletSpec) -> Result<Self> {
        let mut d = WaveletDecomposition::zeros(spec, nested.size)?;
        for (scale, orientation) in d.subband_keys() {
            let (r0, c0, w) = nested_origin(nested.size, scale, orientation);
            *d.subband_mut(scale, orientation).expect("key from spec") = nested.block(r0, c0, w);
        }
        Ok(d)
    }
}

pub(crate) fn subband_keys(levels: u8) -> Vec<(u8, Orientation)> {
    let mut keys = Vec::with_capacity(3 * levels as usize + 1);
    for j in 1..=levels {
        if j == levels {
            keys.push((j, Orientation::Approx));
        }
        for o in Orientation::DETAILS {
            keys.push((j, o));
        }
    }
    keys
}

/// Top-left corner and side of a subband inside the nested layout.
pub fn nested_origin(width: usize, scale: u8, orientation: Orientation) -> (usize, usize, usize) {
    let w = width >> scale;
    match orientation {
        Orientation::Approx => (0, 0, w),
        Orientation::Horizontal => (w, 0, w),
        Orientation::Vertical => (0, w, w),
        Orientation::Diagonal => (w, w, w),
    }
}

fn analyze_1d(x: &[f64], lo: &mut [f64], hi: &mut [f64], fb: &FilterBank) {
    let n = x.len();
    for i in 0..n / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for (k, (h, g)) in fb.lowpass.iter().zip(&fb.highpass).enumerate() {
            let v = x[(2 * i + k) % n];
            a += h * v;
            d += g * v;
        }
        lo[i] = a;
        hi[i] = d;
    }
}

fn synthesize_1d(lo: &[f64], hi: &[f64], x: &mut [f64], fb: &FilterBank) {
    let n = x.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n / 2 {
        for (k, (h, g)) in fb.lowpass.iter().zip(&fb.highpass).enumerate() {
            x[(2 * i + k) % n] += h * lo[i] + g * hi[i];
        }
    }
}

/// One analysis level on the top-left `m`x`m` block of `buf` (stride `stride`).
fn analyze_level(buf: &mut [f64], stride: usize, m: usize, fb: &FilterBank) {
    let half = m / 2;
    let mut line = vec![0.0; m];
    let mut lo = vec![0.0; half];
    let mut hi = vec![0.0; half];
    for r in 0..m {
        let row = &mut buf[r * stride..r * stride + m];
        line.copy_from_slice(row);
        analyze_1d(&line, &mut lo, &mut hi, fb);
        row[..half].copy_from_slice(&lo);
        row[half..].copy_from_slice(&hi);
    }
    for c in 0..m {
        for r in 0..m {
            line[r] = buf[r * stride + c];
        }
        analyze_1d(&line, &mut lo, &mut hi, fb);
        for r in 0..half {
            buf[r * stride + c] = lo[r];
            buf[(r + half) * stride + c] = hi[r];
        }
    }
}

fn synthesize_level(buf: &mut [f64], stride: usize, m: usize, fb: &FilterBank) {
    let half = m / 2;
    let mut line = vec![0.0; m];
    let mut lo = vec![0.0; half];
    let mut hi = vec![0.0; half];
    for c in 0..m {
        for r in 0..half {
            lo[r] = buf[r * stride + c];
            hi[r] = buf[(r + half) * stride + c];
        }
        synthesize_1d(&lo, &hi, &mut line, fb);
        for r in 0..m {
            buf[r * stride + c] = line[r];
        }
    }
    for r in 0..m {
        let row = &mut buf[r * stride..r * stride + m];
        lo.copy_from_slice(&row[..half]);
        hi.copy_from_slice(&row[half..]);
        synthesize_1d(&lo, &hi, &mut line, fb);
        row.copy_from_slice(&line);
    }
}

/// Forward multi-level transform.
pub fn dwt2(image: &Grid, spec: &WaveletSpec) -> Result<WaveletDecomposition> {
    spec.check_width(image.size)?;
    let fb = spec.filter_bank()?;
    if image.data.len() != image.size * image.size {
        return Err(Error::Shape("grid storage does not match its size".into()));
    }
    if let Some(i) = image.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite pixel at index {i}")));
    }
    let n = image.size;
    let mut buf = image.data.clone();
    let mut m = n;
    for _ in 0..spec.levels {
        analyze_level(&mut buf, n, m, &fb);
        m /= 2;
    }
    WaveletDecomposition::from_nested(&Grid { size: n, data: buf }, *spec)
}

/// Inverse of [`dwt2`].
pub fn idwt2(decomp: &WaveletDecomposition) -> Result<Grid> {
    decomp.check_consistent()?;
    let fb = decomp.spec.filter_bank()?;
    let n = decomp.width;
    let mut buf = decomp.to_nested().data;
    let mut m = n >> (decomp.spec.levels - 1);
    for _ in 0..decomp.spec.levels {
        synthesize_level(&mut buf, n, m, &fb);
        m *= 2;
    }
    Ok(Grid { size: n, data: buf })
}
