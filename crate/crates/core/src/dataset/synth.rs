//! Seeded synthetic storm corpus: intensity trajectories, best-track
//! records and rendered IR frames of an idealized vortex whose inner-core
//! structure sharpens and symmetrizes ahead of intensification.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BestTrackRecord, IrFrame, RiLabel, StormTrack, DEFAULT_RI_THRESHOLD_KT};

/// Steps of 6 h in the 24 h lead window.
const LEAD_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_storms: usize,
    pub frames_per_storm: usize,
    pub image_width: usize,
    /// Kelvin.
    pub noise_sd: f64,
    pub ri_fraction: f64,
    pub seed: u64,
    /// Eye radius as a fraction of the image width.
    pub eye_radius_frac: [f64; 2],
    /// Baseline eye-edge steepness, 1/px.
    pub eyewall_gradient: [f64; 2],
    /// Wavenumber-1 asymmetry amplitude before priming.
    pub asymmetry: [f64; 2],
    pub pixel_scale_km: f32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_storms: 100,
            frames_per_storm: 16,
            image_width: 64,
            noise_sd: 2.0,
            ri_fraction: 0.3,
            seed: 7,
            eye_radius_frac: [0.04, 0.08],
            eyewall_gradient: [0.35, 0.7],
            asymmetry: [0.3, 0.7],
            pixel_scale_km: 4.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.ri_fraction > 0.0 && self.ri_fraction < 1.0) {
            return fail(format!("ri_fraction {} outside (0, 1)", self.ri_fraction));
        }
        if !self.image_width.is_power_of_two() || !(16..=4096).contains(&self.image_width) {
            return fail(format!("image_width {} must be a power of two in [16, 4096]", self.image_width));
        }
        if self.frames_per_storm < 2 * LEAD_STEPS + 1 {
            return fail(format!("frames_per_storm must be at least {}", 2 * LEAD_STEPS + 1));
        }
        if self.n_storms == 0 || self.n_storms > 99 * 50 {
            return fail(format!("n_storms {} outside 1..={}", self.n_storms, 99 * 50));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd {} must be finite and non-negative", self.noise_sd));
        }
        for (name, [lo, hi]) in [
            ("eye_radius_frac", self.eye_radius_frac),
            ("eyewall_gradient", self.eyewall_gradient),
            ("asymmetry", self.asymmetry),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return fail(format!("{name} range [{lo}, {hi}] is invalid"));
            }
        }
        if self.eye_radius_frac[0] <= 0.0 || self.eyewall_gradient[0] <= 0.0 {
            return fail("eye radius and gradient must be positive".into());
        }
        Ok(())
    }
}

/// Structure of one rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexParams {
    pub intensity_kt: f64,
    /// Upcoming 24 h intensity change in units of 30 kt, clipped to [0, 1.5].
    pub priming: f64,
    pub eye_radius_px: f64,
    pub gradient: f64,
    pub asymmetry: f64,
    pub asymmetry_phase: f64,
    pub band_phase: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Noise-free brightness temperature of the vortex model at a pixel.
pub fn vortex_temperature(p: &VortexParams, width: usize, row: usize, col: usize) -> f64 {
    let c = (width as f64 - 1.0) / 2.0;
    let dx = col as f64 - c;
    let dy = row as f64 - c;
    let r = (dx * dx + dy * dy).sqrt();
    let theta = dy.atan2(dx);
    let s = p.priming.clamp(0.0, 1.5);
    let asym = p.asymmetry * (1.0 - 0.75 * s.min(1.0));
    let tilt = (theta - p.asymmetry_phase).cos();

    let eye_edge = p.eye_radius_px * (1.0 + 0.3 * asym * tilt);
    let steep = p.gradient * (1.0 + 2.0 * s);
    let eye_t = (240.0 + 0.4 * p.intensity_kt).min(295.0);

    let scale = width as f64 / 64.0;
    let shield_r = 0.36 * width as f64;
    let cloud_t = 222.0 - 0.08 * (p.intensity_kt - 50.0);
    let bands = 5.0 * (2.0 * theta - 0.25 * r / scale + p.band_phase).cos() * logistic(r - eye_edge - 4.0 * scale);
    let shield_t = cloud_t + bands + 6.0 * asym * tilt;
    let outside = logistic((r - shield_r) / (3.0 * scale));
    let base = shield_t * (1.0 - outside) + 288.0 * outside;

    let ring_w = 1.5 * scale + 1.0 / steep;
    let ring_depth = (10.0 + 10.0 * s) * (1.0 - asym * tilt);
    let ring = ring_depth * (-((r - eye_edge - 0.5 * ring_w) / ring_w).powi(2)).exp();

    let e = logistic(steep * (r - eye_edge));
    (eye_t * (1.0 - e) + (base - ring) * e).clamp(150.0, 320.0)
}

/// Renders a `width`-square frame; `noise_sd = 0` gives the exact model.
pub fn render_vortex<R: Rng>(p: &VortexParams, width: usize, noise_sd: f64, rng: &mut R) -> Vec<f32> {
    let noise = (noise_sd > 0.0).then(|| Normal::new(0.0, noise_sd).expect("finite sd"));
    let mut out = Vec::with_capacity(width * width);
    for row in 0..width {
        for col in 0..width {
            let mut t = vortex_temperature(p, width, row, col);
            if let Some(n) = &noise {
                t += n.sample(rng);
            }
            out.push(t.clamp(1.0, 400.0) as f32);
        }
    }
    out
}

/// SplitMix64 finalizer, used to derive per-storm seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub frames: Vec<IrFrame>,
    pub tracks: Vec<StormTrack>,
    /// Labels implied by the generated trajectories.
    pub intended_labels: Vec<RiLabel>,
    pub ri_storms: BTreeSet<String>,
}

pub fn storm_id_for(index: usize) -> String {
    format!("AL{:02}{:04}", index % 50 + 1, 2000 + index / 50)
}

fn status_for(wind: i32) -> &'static str {
    match wind {
        w if w < 34 => "TD",
        w if w < 64 => "TS",
        _ => "HU",
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Integer winds for `len` six-hourly steps. Non-RI storms never gain 30 kt
/// over four steps; RI storms ramp by at least 36 kt from `onset`.
fn trajectory(rng: &mut ChaCha8Rng, len: usize, ri_onset: Option<usize>) -> Vec<i32> {
    let mut w = Vec::with_capacity(len);
    let mut v: i32 = match ri_onset {
        Some(_) => rng.random_range(30..=50),
        None => rng.random_range(30..=70),
    };
    let ramp_len = rng.random_range(4..=6);
    for i in 0..len {
        w.push(v);
        let step = match ri_onset {
            Some(o) if (o..o + ramp_len).contains(&i) => rng.random_range(9..=13),
            Some(o) if i < o => rng.random_range(-4..=3),
            _ => rng.random_range(-4..=6),
        };
        v = (v + step).max(15);
    }
    w
}

fn generate_storm(cfg: &SynthConfig, index: usize, is_ri: bool) -> (Vec<IrFrame>, StormTrack, Vec<RiLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, index as u64));
    let n = cfg.frames_per_storm;
    let width = cfg.image_width;
    let storm_id = storm_id_for(index);
    let year = 2000 + (index / 50) as i32;
    let start = Utc.from_utc_datetime(
        &NaiveDate::from_ymd_opt(year, 6, 1)
            .expect("valid date")
            .and_hms_opt(0, 0, 0)
            .expect("valid time"),
    ) + Duration::days(2 * (index % 50) as i64);

    let onset = is_ri.then(|| rng.random_range(LEAD_STEPS..=n - LEAD_STEPS - 1));
    let winds = trajectory(&mut rng, n + LEAD_STEPS, onset);

    let eye_radius_px = width as f64 * uniform(&mut rng, cfg.eye_radius_frac);
    let gradient = uniform(&mut rng, cfg.eyewall_gradient);
    let asymmetry = uniform(&mut rng, cfg.asymmetry);
    let asymmetry_phase = rng.random_range(0.0..2.0 * PI);
    let mut band_phase = rng.random_range(0.0..2.0 * PI);
    let mut lat: f64 = rng.random_range(12.0..22.0);
    let mut lon: f64 = rng.random_range(-70.0..-40.0);

    let mut frames = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for step in 0..n {
        let t = start + Duration::hours(6 * step as i64);
        let wind = winds[step];
        let upcoming = (winds[step + LEAD_STEPS] - wind) as f64;
        let params = VortexParams {
            intensity_kt: wind as f64,
            priming: (upcoming / DEFAULT_RI_THRESHOLD_KT as f64).clamp(0.0, 1.5),
            eye_radius_px,
            gradient,
            asymmetry,
            asymmetry_phase,
            band_phase,
        };
        let temps = render_vortex(&params, width, cfg.noise_sd, &mut rng);
        let lat_r = (lat * 10.0).round() / 10.0;
        let lon_r = (lon * 10.0).round() / 10.0;
        frames.push(IrFrame {
            storm_id: storm_id.clone(),
            timestamp: t,
            width,
            height: width,
            pixel_scale_km: cfg.pixel_scale_km,
            center_lat_deg: lat_r as f32,
            center_lon_deg: lon_r as f32,
            temps,
        });
        records.push(BestTrackRecord {
            timestamp: t,
            record_id: None,
            status: status_for(wind).to_string(),
            lat_deg: lat_r,
            lon_deg: lon_r,
            max_wind_kt: Some(wind),
            min_pressure_mb: Some(1012 - ((wind - 20) as f64 * 0.8).round() as i32),
        });
        band_phase += 0.3;
        lat += rng.random_range(0.1..0.5);
        lon -= rng.random_range(0.2..0.8);
    }
    let labels = (0..n.saturating_sub(LEAD_STEPS))
        .map(|step| {
            let delta_kt = winds[step + LEAD_STEPS] - winds[step];
            RiLabel {
                storm_id: storm_id.clone(),
                timestamp: records[step].timestamp,
                label: u8::from(delta_kt >= DEFAULT_RI_THRESHOLD_KT),
                delta_kt,
            }
        })
        .collect();
    let track = StormTrack {
        storm_id,
        name: format!("SYN{index:03}"),
        records,
    };
    (frames, track, labels)
}

/// Generates the corpus. Per-storm generators are seeded independently, so
/// serial and parallel runs agree exactly.
pub fn gen_synthetic_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let n_ri = ((cfg.ri_fraction * cfg.n_storms as f64).round() as usize).clamp(1, cfg.n_storms.max(2) - 1);
    let mut order: Vec<usize> = (0..cfg.n_storms).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, u64::MAX)));
    let ri: BTreeSet<usize> = order[..n_ri.min(cfg.n_storms)].iter().copied().collect();

    let make = |i: usize| generate_storm(cfg, i, ri.contains(&i));
    #[cfg(feature = "parallel")]
    let storms: Vec<_> = {
        use rayon::prelude::*;
        (0..cfg.n_storms).into_par_iter().map(make).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let storms: Vec<_> = (0..cfg.n_storms).map(make).collect();

    let mut corpus = SynthCorpus {
        frames: Vec::with_capacity(cfg.n_storms * cfg.frames_per_storm),
        tracks: Vec::with_capacity(cfg.n_storms),
        intended_labels: Vec::new(),
        ri_storms: ri.iter().map(|&i| storm_id_for(i)).collect(),
    };
    for (frames, track, labels) in storms {
        corpus.frames.extend(frames);
        corpus.tracks.push(track);
        corpus.intended_labels.extend(labels);
    }
    Ok(corpus)
}
