//! Shared signal and channel-identity types.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modes per OAM mode group: (+l, -l) x (R, L).
pub const MODES_PER_GROUP: usize = 4;

/// A uniformly sampled complex baseband field for one spatial/polarization channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Latency accumulated by filtering stages, in samples.
    pub delay_samples: f64,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
            delay_samples: 0.0,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x|^2 over all samples.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            ..self.clone()
        }
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Checks that a set of envelopes share length and sample rate.
pub fn check_aligned(signals: &[&ComplexEnvelope]) -> Result<(usize, f64)> {
    let first = signals
        .first()
        .ok_or_else(|| Error::Shape("no input signals".into()))?;
    for s in signals.iter().skip(1) {
        if s.len() != first.len() {
            return Err(Error::Shape(format!(
                "length {} differs from {}",
                s.len(),
                first.len()
            )));
        }
        if s.sample_rate_hz != first.sample_rate_hz {
            return Err(Error::Shape(format!(
                "sample rate {} differs from {}",
                s.sample_rate_hz, first.sample_rate_hz
            )));
        }
    }
    Ok((first.len(), first.sample_rate_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Polarization {
    /// Right-handed circular.
    R,
    /// Left-handed circular.
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Backward => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

/// One spatial channel: core (1-based), signed topological charge,
/// circular polarization and propagation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ModeId {
    pub core: u8,
    pub charge: i8,
    pub pol: Polarization,
    pub direction: Direction,
}

impl ModeId {
    /// The four modes of group |l| in a core, in the canonical order
    /// <+l,R>, <+l,L>, <-l,R>, <-l,L>.
    pub fn group(core: u8, mode_group: u8, direction: Direction) -> [ModeId; MODES_PER_GROUP] {
        let l = mode_group as i8;
        [
            (l, Polarization::R),
            (l, Polarization::L),
            (-l, Polarization::R),
            (-l, Polarization::L),
        ]
        .map(|(charge, pol)| ModeId {
            core,
            charge,
            pol,
            direction,
        })
    }

    pub fn mode_group(&self) -> u8 {
        self.charge.unsigned_abs()
    }

    /// Position within the canonical group order.
    pub fn index_in_group(&self) -> usize {
        let sign = if self.charge >= 0 { 0 } else { 2 };
        let pol = match self.pol {
            Polarization::R => 0,
            Polarization::L => 1,
        };
        sign + pol
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "core{}<{:+},{:?}>{}",
            self.core,
            self.charge,
            self.pol,
            match self.direction {
                Direction::Forward => "F",
                Direction::Backward => "B",
            }
        )
    }
}
