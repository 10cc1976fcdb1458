//! Multi-core ring-core fiber between the mode MUX and DEMUX.
//!
//! Each (core, mode group) pair is a 4-mode group. A group sees a random
//! unitary mixing, per-port differential mode delay, the group's bulk delay
//! and attenuation. Crosstalk between groups is lumped into the end modules.

mod channel;
mod noise;
mod probe;
mod profile;
pub mod unitary;

pub use channel::{
    build_channel, FiberChannel, IntraGroupChannel, LinkRealization, ModeSignals, MuxDemuxMatrix,
    PropagateOptions, XtBlock,
};
pub use noise::{add_optical_noise, OSNR_REF_BANDWIDTH_HZ};
pub use probe::{impulse_response, measure_crosstalk, ImpulseResponse, XtMatrix};
pub use profile::{FiberProfile, InlineXt};

/// The calibrated 5-km installed-cable profile.
pub fn default_profile() -> FiberProfile {
    FiberProfile::field_deployed()
}
