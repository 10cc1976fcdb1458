use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRBS_DEGREE: u32 = 18;
/// Feedback taps of x^18 + x^16 + x^15 + x^7 + x^6 + x^2 + 1, as 1-based
/// register positions. A dense primitive polynomial: the sparse trinomial
/// x^18 + x^11 + 1 ties bits a few symbols apart by a single XOR, which blind
/// equalizers latch onto as spurious source structure.
pub const PRBS_TAPS: [u32; 6] = [18, 16, 15, 7, 6, 2];
pub const PRBS_PERIOD: usize = (1 << PRBS_DEGREE) - 1;

/// Serializable snapshot of a generator: enough to regenerate its stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrbsDescriptor {
    pub degree: u32,
    pub tap_mask: u32,
    pub state: u32,
}

/// Fibonacci LFSR. The emitted bit is the feedback bit, which is also shifted
/// into the register's low end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrbsGenerator {
    degree: u32,
    tap_mask: u32,
    state: u32,
}

fn taps_to_mask(taps: &[u32]) -> u32 {
    taps.iter().fold(0, |m, t| m | 1 << (t - 1))
}

impl PrbsGenerator {
    /// Degree-18 generator with the default polynomial.
    pub fn new(state: u32) -> Result<Self> {
        Self::with_taps(PRBS_DEGREE, &PRBS_TAPS, state)
    }

    pub fn with_taps(degree: u32, taps: &[u32], state: u32) -> Result<Self> {
        if !(2..=31).contains(&degree) {
            return Err(Error::InvalidConfig(format!("unsupported LFSR degree {degree}")));
        }
        if taps.iter().any(|&t| t == 0 || t > degree) || !taps.contains(&degree) {
            return Err(Error::InvalidConfig(format!(
                "taps {taps:?} invalid for degree {degree}"
            )));
        }
        let mask = (1u32 << degree) - 1;
        if state & mask == 0 {
            return Err(Error::InvalidConfig("LFSR state must be nonzero".into()));
        }
        Ok(Self {
            degree,
            tap_mask: taps_to_mask(taps),
            state: state & mask,
        })
    }

    pub fn from_descriptor(d: &PrbsDescriptor) -> Result<Self> {
        let mask = (1u32 << d.degree) - 1;
        if d.state & mask == 0 {
            return Err(Error::InvalidConfig("LFSR state must be nonzero".into()));
        }
        Ok(Self {
            degree: d.degree,
            tap_mask: d.tap_mask,
            state: d.state & mask,
        })
    }

    pub fn descriptor(&self) -> PrbsDescriptor {
        PrbsDescriptor {
            degree: self.degree,
            tap_mask: self.tap_mask,
            state: self.state,
        }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let fb = (self.state & self.tap_mask).count_ones() & 1;
        self.state = ((self.state << 1) | fb) & ((1u32 << self.degree) - 1);
        fb as u8
    }

    pub fn bits(&mut self, n: usize) -> Result<Vec<u8>> {
        if n == 0 {
            return Err(Error::InvalidConfig("bit count must be at least 1".into()));
        }
        Ok((0..n).map(|_| self.next_bit()).collect())
    }

    pub fn advance(&mut self, n: usize) {
        for _ in 0..n {
            self.next_bit();
        }
    }

    /// Number of steps until the register returns to its current state.
    pub fn period(&self) -> usize {
        let mut g = self.clone();
        let start = g.state;
        let mut n = 0usize;
        loop {
            g.next_bit();
            n += 1;
            if g.state == start || n > (1usize << self.degree) {
                return n;
            }
        }
    }

    /// One full period of output bits starting at the current state.
    pub fn one_period(&self) -> Vec<u8> {
        let mut g = self.clone();
        (0..self.period()).map(|_| g.next_bit()).collect()
    }
}
