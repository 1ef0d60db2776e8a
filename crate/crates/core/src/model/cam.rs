//! Class-activation maps under the global-average-pooling head.

use std::io::Write;

use super::config::InputMode;
use super::input::ModelFrame;
use super::network::N_CLASSES;
use super::train::{forward_sample, TrainedModel};
use crate::dataset::SequenceSample;
use crate::error::{Error, Result};
use crate::wavelet::{nested_origin, Orientation, WaveletSpec};

/// Frames enter the network as channels, so one map covers every frame of
/// the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CamGrid {
    pub class_index: usize,
    pub input_mode: InputMode,
    pub frames: usize,
    /// Map at final-feature resolution, row-major.
    pub feature_width: usize,
    pub features: Vec<f64>,
    /// Bilinear upsampling of `features` to the input side.
    pub width: usize,
    pub overlay: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CamSlice {
    pub scale: u8,
    pub orientation: Orientation,
    pub row0: usize,
    pub col0: usize,
    pub side: usize,
    pub values: Vec<f64>,
}

/// `sum_c w[class][c] * A_c(x, y)` over the final conv channels.
pub fn cam_from_features(features: &[f32], feature_width: usize, weights: &[f32], class_index: usize, channels: usize) -> Vec<f64> {
    let positions = feature_width * feature_width;
    let stride = weights.len() / N_CLASSES;
    let row = &weights[class_index * stride..class_index * stride + channels];
    let mut cam = vec![0.0f64; positions];
    for (c, &w) in row.iter().enumerate() {
        let plane = &features[c * positions..(c + 1) * positions];
        for (m, &a) in cam.iter_mut().zip(plane) {
            *m += w as f64 * a as f64;
        }
    }
    cam
}

/// Bilinear resize with pixel-centre alignment and edge clamping.
pub fn upsample_bilinear(src: &[f64], src_w: usize, dst_w: usize) -> Vec<f64> {
    let scale = src_w as f64 / dst_w as f64;
    let coord = |d: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_w - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_w - 1);
        (i0, i1, s - i0 as f64)
    };
    let axis: Vec<_> = (0..dst_w).map(coord).collect();
    let mut out = Vec::with_capacity(dst_w * dst_w);
    for &(y0, y1, fy) in &axis {
        for &(x0, x1, fx) in &axis {
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bot = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

pub fn compute_cam<F: ModelFrame>(model: &TrainedModel, sample: &SequenceSample<F>, class_index: usize) -> Result<CamGrid> {
    if !model.config.global_average_pool {
        return Err(Error::Unsupported("CAM needs the global-average-pooling head".into()));
    }
    if class_index >= N_CLASSES {
        return Err(Error::Domain(format!("class index {class_index} out of range")));
    }
    let (input, trace) = forward_sample(model, sample)?;
    let (features, fw) = trace.final_features();
    let net = &model.network;
    let map = cam_from_features(features, fw, &net.head.weights, class_index, net.gap_channels());
    Ok(CamGrid {
        class_index,
        input_mode: model.config.input_mode,
        frames: input.channels,
        feature_width: fw,
        overlay: upsample_bilinear(&map, fw, input.width),
        features: map,
        width: input.width,
    })
}

/// Cuts the overlay along the nested subband layout: approximation first,
/// then (H, V, D) from the coarsest scale to the finest.
pub fn cam_to_subbands(cam: &CamGrid, spec: &WaveletSpec) -> Result<Vec<CamSlice>> {
    if cam.input_mode != InputMode::Wavelet {
        return Err(Error::Unsupported("subband slicing needs a wavelet-mode CAM".into()));
    }
    spec.check_width(cam.width)?;
    let mut keys = vec![(spec.levels, Orientation::Approx)];
    for j in (1..=spec.levels).rev() {
        keys.extend(Orientation::DETAILS.iter().map(|&o| (j, o)));
    }
    Ok(keys
        .into_iter()
        .map(|(scale, orientation)| {
            let (row0, col0, side) = nested_origin(cam.width, scale, orientation);
            let values = (row0..row0 + side)
                .flat_map(|r| cam.overlay[r * cam.width + col0..r * cam.width + col0 + side].iter().copied())
                .collect();
            CamSlice { scale, orientation, row0, col0, side, values }
        })
        .collect())
}

impl CamGrid {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.overlay.chunks_exact(self.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// 8-bit binary PGM, min..max stretched to 0..255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let lo = self.overlay.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.overlay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        write!(w, "P5\n{} {}\n255\n", self.width, self.width)?;
        let bytes: Vec<u8> = self
            .overlay
            .iter()
            .map(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(width: usize, mode: InputMode) -> CamGrid {
        let overlay: Vec<f64> = (0..width * width).map(|i| i as f64).collect();
        CamGrid {
            class_index: 1,
            input_mode: mode,
            frames: 1,
            feature_width: width,
            features: overlay.clone(),
            width,
            overlay,
        }
    }

    #[test]
    fn slices_tile_the_overlay() {
        let cam = grid(64, InputMode::Wavelet);
        let slices = cam_to_subbands(&cam, &WaveletSpec::default()).unwrap();
        assert_eq!(slices.len(), 10);
        assert_eq!(slices[0].side, 8);
        assert_eq!(slices[0].orientation, Orientation::Approx);
        assert_eq!(slices.last().unwrap().side, 32);
        let mut hits = vec![0u8; 64 * 64];
        for s in &slices {
            for (i, v) in s.values.iter().enumerate() {
                let (r, c) = (s.row0 + i / s.side, s.col0 + i % s.side);
                hits[r * 64 + c] += 1;
                assert_eq!(*v, cam.overlay[r * 64 + c]);
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
        assert!(cam_to_subbands(&grid(64, InputMode::Raw), &WaveletSpec::default()).is_err());
    }

    #[test]
    fn upsample_of_constant_is_constant() {
        let up = upsample_bilinear(&[2.5; 16], 4, 32);
        assert_eq!(up.len(), 1024);
        assert!(up.iter().all(|&v| (v - 2.5).abs() < 1e-15));
        let id = upsample_bilinear(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        assert_eq!(id, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_weights_zero_cam() {
        let feats = vec![1.5f32; 3 * 4];
        assert!(cam_from_features(&feats, 2, &[0.0; 6], 1, 3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pgm_header() {
        let mut buf = Vec::new();
        grid(16, InputMode::Raw).write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(buf.len(), 13 + 256);
        assert_eq!(*buf.last().unwrap(), 255);
    }
}
