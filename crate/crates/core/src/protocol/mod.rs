//! Blockade drive parameters, the three-phase drive schedule and full
//! protocol runs.

mod params;
mod run;
mod schedule;

pub use params::{alpha_from_drive, derive_blockade_params, linear_init_amplitude, BlockadeParams};
pub use run::{blockade_peak_photons, run_protocol, run_protocol_recording, ProtocolResult};
pub use schedule::{
    build_protocol_schedule, init_segments, warm_start_shape, ErrorSpec, FinalDisplacement,
    HoldDuration, InitShape, ProtocolConfig,
};

pub(crate) use run::run_protocol_with;
