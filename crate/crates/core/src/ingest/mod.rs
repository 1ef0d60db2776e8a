//! Best-track and environmental-predictor parsing, the IR frame container,
//! and rapid-intensification labels.

mod env;
#[cfg(feature = "fetch")]
mod fetch;
mod hurdat2;
mod irf;
mod labels;

pub use env::{parse_env_table, EnvRecord};
#[cfg(feature = "fetch")]
pub use fetch::fetch_hurdat2;
pub use hurdat2::{is_valid_storm_id, parse_hurdat2, write_hurdat2, BestTrackRecord, StormTrack};
pub use irf::{read_ir_frame, write_ir_frame, IrFrame};
pub use labels::{compute_ri_labels, intensity_at, RiLabel, DEFAULT_LEAD_HOURS, DEFAULT_RI_THRESHOLD_KT};
