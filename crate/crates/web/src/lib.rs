//! Three operations for the static page in `www/`: render a synthetic storm,
//! sparsify it, and quantize the kept coefficients.
//!
//! The plain functions are what the page logic does; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tcmra::dataset::{render_vortex, VortexParams};
use tcmra::tokenizer::fit_vocab;
use tcmra::wavelet::{
    compression_ratio, densify, reconstruct, sparsify, Grid, RadialMaskSpec, SparseCoeffSet, WaveletSpec,
};
use wasm_bindgen::prelude::*;

pub fn storm(width: usize, intensity_kt: f64, priming: f64, asymmetry: f64, noise_sd: f64, seed: u64) -> Vec<f32> {
    let p = VortexParams {
        intensity_kt,
        priming,
        eye_radius_px: 0.06 * width as f64,
        gradient: 0.6,
        asymmetry,
        asymmetry_phase: 0.7,
        band_phase: 0.0,
    };
    render_vortex(&p, width, noise_sd.max(0.0), &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone)]
pub struct SparseResult {
    pub set: SparseCoeffSet,
    /// Nested coefficient layout, `log(1 + |c|)` with dropped entries at 0.
    pub layout: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub rmse: f64,
}

fn side(temps: &[f32]) -> tcmra::Result<usize> {
    let w = (temps.len() as f64).sqrt() as usize;
    if w * w != temps.len() {
        return Err(tcmra::Error::Domain(format!("{} pixels is not a square image", temps.len())));
    }
    Ok(w)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn sparse_view(temps: &[f32], order: u8, levels: u8, q: f64, r_frac: f64) -> tcmra::Result<SparseResult> {
    let w = side(temps)?;
    let image = Grid::from_vec(w, temps.iter().map(|&t| t as f64).collect())?;
    let mask = if r_frac > 0.0 { RadialMaskSpec::new(r_frac, [1])? } else { RadialMaskSpec::none() };
    let set = sparsify(&image, &WaveletSpec::new(order, levels), q, &mask)?;
    let layout = densify(&set)?.to_nested().data.iter().map(|c| c.abs().ln_1p()).collect();
    let rec = reconstruct(&set)?;
    let rmse = rmse(&rec.data, &image.data);
    Ok(SparseResult { set, layout, reconstruction: rec.data, rmse })
}

#[derive(Debug, Clone)]
pub struct TokenResult {
    pub tokens: Vec<u32>,
    pub edges: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub rmse: f64,
}

/// Fits a shared vocabulary on one frame's kept coefficients and decodes
/// them back through the bin representatives.
pub fn token_view(set: &SparseCoeffSet, vocab_size: usize) -> tcmra::Result<TokenResult> {
    let v = fit_vocab(&set.entries.iter().map(|e| e.value).collect::<Vec<_>>(), vocab_size)?;
    let mut quantized = set.clone();
    let mut tokens = Vec::with_capacity(set.len());
    for e in &mut quantized.entries {
        let t = v.token(e.value);
        e.value = v.value(t)?;
        tokens.push(t);
    }
    let exact = reconstruct(set)?;
    let rec = reconstruct(&quantized)?;
    let rmse = rmse(&rec.data, &exact.data);
    Ok(TokenResult { tokens, edges: v.edges.clone(), reconstruction: rec.data, rmse })
}

/// Grayscale RGBA for a canvas. Cold pixels are bright when `invert`.
pub fn rgba(values: &[f64], invert: bool) -> Vec<u8> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(values.len() * 4);
    for &v in values {
        let mut g = ((v - lo) / span * 255.0).round() as u8;
        if invert {
            g = 255 - g;
        }
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

fn js(e: tcmra::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Frame {
    temps: Vec<f32>,
    sparse: Option<SparseResult>,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, intensity_kt: f64, priming: f64, asymmetry: f64, noise_sd: f64, seed: u64) -> Frame {
        Frame { temps: storm(width, intensity_kt, priming, asymmetry, noise_sd, seed), sparse: None }
    }

    pub fn width(&self) -> usize {
        (self.temps.len() as f64).sqrt() as usize
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        rgba(&self.temps.iter().map(|&t| t as f64).collect::<Vec<_>>(), true)
    }

    /// Returns the compression ratio and keeps the result for the getters below.
    pub fn sparsify(&mut self, order: u8, levels: u8, q: f64, r_frac: f64) -> Result<f64, JsError> {
        let r = sparse_view(&self.temps, order, levels, q, r_frac).map_err(js)?;
        let ratio = compression_ratio(&r.set);
        self.sparse = Some(r);
        Ok(ratio)
    }

    fn current(&self) -> Result<&SparseResult, JsError> {
        self.sparse.as_ref().ok_or_else(|| JsError::new("call sparsify first"))
    }

    pub fn entries(&self) -> Result<usize, JsError> {
        Ok(self.current()?.set.len())
    }

    pub fn rmse(&self) -> Result<f64, JsError> {
        Ok(self.current()?.rmse)
    }

    pub fn layout_rgba(&self) -> Result<Vec<u8>, JsError> {
        Ok(rgba(&self.current()?.layout, false))
    }

    pub fn reconstruction_rgba(&self) -> Result<Vec<u8>, JsError> {
        Ok(rgba(&self.current()?.reconstruction, true))
    }

    /// Quantizes the kept coefficients with `vocab_size` bins. Returns
    /// `[rmse, distinct tokens used]` and leaves the image in `out`.
    pub fn quantize(&self, vocab_size: usize, out: &mut [u8]) -> Result<Vec<f64>, JsError> {
        let t = token_view(&self.current()?.set, vocab_size).map_err(js)?;
        let img = rgba(&t.reconstruction, true);
        if out.len() != img.len() {
            return Err(JsError::new("output buffer has the wrong size"));
        }
        out.copy_from_slice(&img);
        let mut used = t.tokens.clone();
        used.sort_unstable();
        used.dedup();
        Ok(vec![t.rmse, used.len() as f64])
    }
}
