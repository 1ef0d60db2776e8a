use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Tropical-cyclone IR wavelet pipeline.
///
/// Any config field can be set with its dotted name, e.g. `--wavelet.q 0.2`
/// or `--model.epochs=10`; these override `--config`.
#[derive(Debug, Parser)]
#[command(name = "tcmra", version)]
pub struct Cli {
    /// Pipeline config JSON; unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse best-track and environmental inputs.
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Convert between temperature grids and .irf frames.
    #[command(subcommand)]
    Frame(FrameCmd),
    /// Decompose, sparsify and reconstruct frames.
    #[command(subcommand)]
    Wavelet(WaveletCmd),
    /// Generate the synthetic storm corpus.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Build sequence manifests and storm splits.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train, evaluate and explain the nowcast classifier.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Quantize coefficients into tokens.
    #[command(subcommand)]
    Token(TokenCmd),
}

#[derive(Debug, Subcommand)]
pub enum IngestCmd {
    /// HURDAT2 text to a track JSON and an RI label CSV.
    Hurdat2 {
        /// Best-track file; omit when using --url.
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "input")]
        url: Option<String>,
        /// Also save the downloaded text here.
        #[arg(long, requires = "url")]
        save: Option<PathBuf>,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Environmental predictor CSV to JSON lines.
    Env {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FrameCmd {
    /// Square CSV grid of Kelvin temperatures to .irf.
    Pack {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        storm_id: String,
        /// ISO time, e.g. 2020-11-02T06:00Z.
        #[arg(long)]
        time: String,
        #[arg(long, default_value_t = 4.0)]
        pixel_km: f32,
        #[arg(long, allow_hyphen_values = true)]
        lat: f32,
        #[arg(long, allow_hyphen_values = true)]
        lon: f32,
    },
    /// .irf to a CSV grid, optionally with a PGM preview.
    Unpack {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SparsifyFlags {
    /// Retained fraction (overrides wavelet.q).
    #[arg(long)]
    pub q: Option<f64>,
    /// Radial mask fraction (overrides wavelet.r_frac).
    #[arg(long)]
    pub r_frac: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum WaveletCmd {
    /// Full decomposition as a dense .wsc, plus an optional nested-layout CSV.
    Decompose {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        nested_csv: Option<PathBuf>,
    },
    /// Top-q thresholding and radial masking.
    Sparsify {
        #[command(flatten)]
        flags: SparsifyFlags,
        input: PathBuf,
        output: PathBuf,
    },
    /// Zero-filled inverse transform to a CSV grid.
    Reconstruct {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Retained entries per pixel.
    Ratio { input: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Frames, best track and intended labels under one directory.
    Generate {
        out_dir: PathBuf,
        /// Also write sparsified .wsc frames with the wavelet config.
        #[arg(long)]
        sparsify: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Sequence manifest from frame files and best-track labels.
    Build {
        /// Directory of .irf or .wsc frames.
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        hurdat2: PathBuf,
        /// Environmental CSV joined on dataset.env_predictors.
        #[arg(long)]
        env: Option<PathBuf>,
        /// Frame file extension to collect.
        #[arg(long, default_value = "wsc")]
        ext: String,
        output: PathBuf,
    },
    /// Storm-level train/validation/test split.
    Split { manifest: PathBuf, output: PathBuf },
}

#[derive(Debug, Args)]
pub struct DataSel {
    pub manifest: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    /// Train on the training partition and write a WNC1 model.
    Train {
        #[command(flatten)]
        data: DataSel,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC, AUC and the p_t > 0 operating point.
    Eval {
        model: PathBuf,
        #[command(flatten)]
        data: DataSel,
        #[arg(long, default_value = "test")]
        partition: String,
        #[arg(long)]
        roc: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-sample posterior and p_t CSV.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Class-activation map for one manifest sample.
    Cam {
        model: PathBuf,
        manifest: PathBuf,
        /// Zero-based line in the manifest.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        class: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Per-subband attention totals (wavelet models only).
        #[arg(long)]
        subbands: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TokenCmd {
    /// Fit a quantile vocabulary on .wsc files.
    Fit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokenize one or more .wsc frames into a single sequence.
    Encode {
        vocab: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokens back to .wsc; multi-frame files get `.N` before the extension.
    Decode {
        vocab: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}
