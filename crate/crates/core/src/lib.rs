//! Simulator of a bidirectional space-division-multiplexed coherent link over a
//! weakly-coupled seven-core ring-core fiber carrying OAM mode groups.
//!
//! The crate is organised along the signal path:
//!
//! * [`txgen`]: PRBS source, star-8QAM mapping and Nyquist pulse shaping.
//! * [`fiberchan`]: mode-group channel with loss, delay, intra-group mixing,
//!   end-module crosstalk, drift and ASE noise.
//! * [`rbnoise`]: Rayleigh backscattering and Fresnel reflection from the
//!   counter-propagating direction.
//! * [`rxdsp`]: blind coherent receiver (timing, 4x4 MIMO CMA/RDE, FOE, CPE).
//! * [`metrics`]: BER alignment, SNR/EVM, spectral efficiency, complexity and
//!   power-budget accounting.

pub mod error;
pub mod fiberchan;
pub mod metrics;
pub mod rbnoise;
pub mod rng;
pub mod rxdsp;
pub mod signal;
pub mod spectral;
pub mod txgen;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::{ComplexEnvelope, Direction, ModeId, Polarization, MODES_PER_GROUP};
