use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use tcmra::dataset::{read_manifest, ManifestEntry, SequenceSample, SplitPlan, Timed};
use tcmra::ingest::{read_ir_frame, IrFrame};
use tcmra::wavelet::{read_wsc, SparseCoeffSet};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    /// clap already printed its message.
    Reported,
    Data { kind: &'static str, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Reported => 1,
            Failure::Data { .. } => 2,
        }
    }

    pub fn to_json(&self) -> Option<serde_json::Value> {
        match self {
            Failure::Usage(m) => Some(json!({"error": "usage", "message": m})),
            Failure::Reported => None,
            Failure::Data { kind, message } => Some(json!({"error": kind, "message": message})),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure::Data { kind: "data", message: message.into() }
    }
}

impl From<tcmra::Error> for Failure {
    fn from(e: tcmra::Error) -> Self {
        match e {
            tcmra::Error::Config(m) => Failure::Usage(m),
            other => Failure::Data { kind: other.kind(), message: other.to_string() },
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data { kind: "io", message: format!("{}: {e}", path.display()) }
}

fn in_file(path: &Path, e: tcmra::Error) -> Failure {
    match Failure::from(e) {
        Failure::Data { kind, message } => Failure::Data { kind, message: format!("{}: {message}", path.display()) },
        other => other,
    }
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io_failure(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

pub fn load_frame(path: &Path) -> Result<IrFrame, Failure> {
    read_ir_frame(&read_bytes(path)?).map_err(|e| in_file(path, e))
}

pub fn load_wsc(path: &Path) -> Result<SparseCoeffSet, Failure> {
    read_wsc(&read_text(path)?).map_err(|e| in_file(path, e))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::Data { kind: "json", message: format!("{}: {e}", path.display()) })
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, Failure> {
    read_manifest(&read_text(path)?).map_err(|e| in_file(path, e))
}

pub fn load_split(path: &Path) -> Result<SplitPlan, Failure> {
    load_json(path)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Relative manifest paths are resolved against the manifest's directory.
pub fn resolve(manifest: &Path, frame: &str) -> PathBuf {
    let p = Path::new(frame);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir(manifest).join(p)
    }
}

/// Path to store in a manifest for `frame`, relative when it sits under the
/// manifest's directory.
pub fn relativize(manifest: &Path, frame: &Path) -> String {
    let base = manifest_dir(manifest);
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (b, f) = (abs(if base.as_os_str().is_empty() { Path::new(".") } else { &base }), abs(frame));
    f.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(f).to_string_lossy().into_owned()
}

/// Frame types loadable from manifest paths.
pub trait FrameFile: Sized {
    const EXT: &'static str;
    fn load(path: &Path) -> Result<Self, Failure>;
}

impl FrameFile for IrFrame {
    const EXT: &'static str = "irf";
    fn load(path: &Path) -> Result<Self, Failure> {
        load_frame(path)
    }
}

impl FrameFile for SparseCoeffSet {
    const EXT: &'static str = "wsc";
    fn load(path: &Path) -> Result<Self, Failure> {
        load_wsc(path)
    }
}

pub fn samples_from_manifest<F: FrameFile + Timed>(manifest: &Path, entries: &[ManifestEntry]) -> Result<Vec<SequenceSample<F>>, Failure> {
    entries
        .iter()
        .map(|e| {
            let mut frames = Vec::with_capacity(e.frame_paths.len());
            for p in &e.frame_paths {
                let path = resolve(manifest, p);
                if path.extension().and_then(|x| x.to_str()) != Some(F::EXT) {
                    return Err(Failure::data(format!(
                        "{} is not a .{} frame as the model mode requires",
                        path.display(),
                        F::EXT
                    )));
                }
                frames.push(F::load(&path)?);
            }
            Ok(SequenceSample {
                storm_id: e.storm_id.clone(),
                t: e.t,
                frame_times: frames.iter().filter_map(Timed::timestamp).collect(),
                frames,
                label: e.label,
                env: e.env.clone(),
            })
        })
        .collect()
}

pub fn csv_grid(values: &[f64], width: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv_grid(text: &str) -> Result<(usize, Vec<f64>), Failure> {
    let mut values = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| Failure::Data { kind: "parse", message: format!("line {}: bad number {c:?}", i + 1) }))
            .collect::<Result<_, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Failure::Data { kind: "shape", message: format!("line {}: {} columns, expected {w}", i + 1, row.len()) })
            }
            _ => {}
        }
        values.extend(row);
    }
    let w = width.ok_or_else(|| Failure::Data { kind: "shape", message: "empty grid".into() })?;
    if values.len() != w * w {
        return Err(Failure::Data { kind: "shape", message: format!("grid is {}x{w}, not square", values.len() / w) });
    }
    Ok((w, values))
}

/// 8-bit PGM with min..max stretched to 0..255.
pub fn pgm(values: &[f64], width: usize) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{width} {}\n255\n", values.len() / width.max(1)).into_bytes();
    out.extend(values.iter().map(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 }));
    out
}
