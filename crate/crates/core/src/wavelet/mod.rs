//! Daubechies multi-level 2D wavelet transform and sparse coefficient sets.

mod filters;
mod sparse;
mod transform;
mod wsc;

pub use filters::{FilterBank, MAX_ORDER};
pub use sparse::{
    apply_radial_mask, compression_ratio, dense_to_sparse, densify, normalized_radius, reconstruct,
    retained_count, sparsify, sparsify_frame, threshold_top_fraction, CoeffEntry, CoeffKey, RadialMaskSpec,
    SparseCoeffSet, DEFAULT_Q, DEFAULT_R_FRAC,
};
pub use transform::{dwt2, idwt2, nested_origin, Extension, Grid, Orientation, WaveletDecomposition, WaveletSpec};
pub use wsc::{read_wsc, write_wsc};
