//! Packing sequence samples into channel stacks.

use crate::dataset::{NormStats, Normalize, SequenceSample, Timed};
use crate::error::{Error, Result};
use crate::ingest::IrFrame;
use crate::wavelet::{nested_origin, SparseCoeffSet, WaveletSpec};

use super::config::InputMode;

/// `channels` square planes of side `width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub channels: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl InputTensor {
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Frame types the classifier can consume.
pub trait ModelFrame: Normalize + Timed + Clone + Send + Sync {
    const MODE: InputMode;

    fn width(&self) -> usize;

    fn wavelet_spec(&self) -> Option<WaveletSpec>;

    /// Writes the standardized frame into a `width * width` plane.
    fn paint(&self, stats: &NormStats, out: &mut [f32]);
}

impl ModelFrame for SparseCoeffSet {
    const MODE: InputMode = InputMode::Wavelet;

    fn width(&self) -> usize {
        self.width
    }

    fn wavelet_spec(&self) -> Option<WaveletSpec> {
        Some(self.spec)
    }

    /// Nested-quadrant layout; unlisted coefficients stay 0.
    fn paint(&self, stats: &NormStats, out: &mut [f32]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.entries {
            let (r0, c0, _) = nested_origin(self.width, e.scale, e.orientation);
            let idx = (r0 + e.row as usize) * self.width + c0 + e.col as usize;
            out[idx] = stats.subband(e.scale, e.orientation).apply(e.value) as f32;
        }
    }
}

impl ModelFrame for IrFrame {
    const MODE: InputMode = InputMode::Raw;

    fn width(&self) -> usize {
        self.width
    }

    fn wavelet_spec(&self) -> Option<WaveletSpec> {
        None
    }

    fn paint(&self, stats: &NormStats, out: &mut [f32]) {
        let m = stats.raw();
        for (o, t) in out.iter_mut().zip(&self.temps) {
            *o = m.apply(*t as f64) as f32;
        }
    }
}

/// Stacks a sample's frames as channels, standardized with `stats`.
pub fn assemble_input<F: ModelFrame>(sample: &SequenceSample<F>, mode: InputMode, stats: &NormStats) -> Result<InputTensor> {
    if mode != F::MODE {
        return Err(Error::Shape(format!("frames are {:?} inputs, {mode:?} requested", F::MODE)));
    }
    let first = sample
        .frames
        .first()
        .ok_or_else(|| Error::Shape("sample has no frames".into()))?;
    let width = first.width();
    let spec = first.wavelet_spec();
    for f in &sample.frames {
        if f.width() != width {
            return Err(Error::Shape(format!("mixed frame widths {width} and {}", f.width())));
        }
        if f.wavelet_spec() != spec {
            return Err(Error::Shape("frames were decomposed with different wavelet specs".into()));
        }
    }
    let plane = width * width;
    let mut data = vec![0.0f32; plane * sample.frames.len()];
    for (f, out) in sample.frames.iter().zip(data.chunks_exact_mut(plane)) {
        f.paint(stats, out);
    }
    Ok(InputTensor {
        channels: sample.frames.len(),
        width,
        data,
    })
}
