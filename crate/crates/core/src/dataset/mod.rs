//! Labeled frame sequences, storm-level splits, normalization, predictor
//! joins and the synthetic verification corpus.

mod manifest;
mod norm;
mod sequence;
mod split;
mod synth;

pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use norm::{apply_norm, fit_norm, unapply_norm, Moments, NormStats, Normalize};
pub use sequence::{build_sequences, join_env, BuildReport, SequenceSample, Timed, DEFAULT_STRIDE_HOURS, DEFAULT_WINDOW_HOURS};
pub use split::{split_by_storm, Partition, SplitPlan, DEFAULT_FRACTIONS};
pub use synth::{
    gen_synthetic_corpus, mix_seed, render_vortex, storm_id_for, vortex_temperature, SynthConfig, SynthCorpus,
    VortexParams,
};
