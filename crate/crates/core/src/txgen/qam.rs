use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BITS_PER_SYMBOL: usize = 3;

/// Gray code for the quadrant index, counterclockwise from the ring's first angle.
const QUADRANT_GRAY: [u8; 4] = [0b00, 0b01, 0b11, 0b10];

fn quadrant_of_gray(g: u8) -> usize {
    QUADRANT_GRAY.iter().position(|&q| q == g & 0b11).unwrap()
}

/// Two-ring star 8QAM.
///
/// Label bit b2 selects the ring (0 = inner), b1b0 Gray-code the quadrant.
/// Inner points sit at 45 + 90k degrees, outer points at 90k degrees. The
/// point set is scaled to unit average power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QamSymbolMap {
    /// Scaled points indexed by 3-bit label.
    pub points: [Complex64; 8],
    pub norm_factor: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for QamSymbolMap {
    fn default() -> Self {
        Self::star_8qam()
    }
}

impl QamSymbolMap {
    /// Inner radius 1, outer radius 1 + sqrt(3) (before scaling).
    pub fn star_8qam() -> Self {
        Self::star(1.0, 1.0 + 3f64.sqrt()).expect("valid radii")
    }

    /// Star constellation with arbitrary (unscaled) ring radii.
    pub fn star(inner_radius: f64, outer_radius: f64) -> Result<Self> {
        if !(inner_radius > 0.0 && outer_radius > inner_radius && outer_radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ring radii must satisfy 0 < inner < outer, got {inner_radius}, {outer_radius}"
            )));
        }
        let mean_power = 0.5 * (inner_radius * inner_radius + outer_radius * outer_radius);
        let norm_factor = 1.0 / mean_power.sqrt();
        let mut points = [Complex64::new(0.0, 0.0); 8];
        for (q, &g) in QUADRANT_GRAY.iter().enumerate() {
            let phase = q as f64 * FRAC_PI_2;
            points[g as usize] = Complex64::from_polar(inner_radius * norm_factor, phase + FRAC_PI_4);
            points[4 | g as usize] = Complex64::from_polar(outer_radius * norm_factor, phase);
        }
        Ok(Self {
            points,
            norm_factor,
            inner_radius,
            outer_radius,
        })
    }

    /// Ring radii after scaling, inner first.
    pub fn ring_radii(&self) -> [f64; 2] {
        [
            self.inner_radius * self.norm_factor,
            self.outer_radius * self.norm_factor,
        ]
    }

    /// Godard modulus R^2 = E|a|^4 / E|a|^2.
    pub fn cma_modulus_sq(&self) -> f64 {
        let m2: f64 = self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 8.0;
        let m4: f64 = self.points.iter().map(|p| p.norm_sqr().powi(2)).sum::<f64>() / 8.0;
        m4 / m2
    }

    /// E[(|a|^2 - R^2)^2] of the alphabet itself: the CMA cost floor.
    pub fn cma_dispersion_floor(&self) -> f64 {
        let r2 = self.cma_modulus_sq();
        self.points
            .iter()
            .map(|p| (p.norm_sqr() - r2).powi(2))
            .sum::<f64>()
            / 8.0
    }

    /// CMA cost of a unit-power circular Gaussian, i.e. of an output that
    /// still carries a full mixture of independent sources.
    pub fn cma_dispersion_gaussian(&self) -> f64 {
        let r2 = self.cma_modulus_sq();
        r2 * r2 - 2.0 * r2 + 2.0
    }

    /// Label of the point obtained by rotating `label`'s point by k x 90 degrees.
    pub fn rotate_label(label: u8, k: usize) -> u8 {
        let ring = label & 0b100;
        let q = (quadrant_of_gray(label) + k) % 4;
        ring | QUADRANT_GRAY[q]
    }

    /// Minimum-distance decision; exact ties resolve to the lowest label.
    pub fn decide(&self, y: Complex64) -> u8 {
        let mut best = 0u8;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            // Relative slack absorbs rounding in the trigonometric point table.
            if d < best_d * (1.0 - 1e-12) - 1e-300 {
                best_d = d;
                best = label as u8;
            }
        }
        best
    }

    pub fn point(&self, label: u8) -> Complex64 {
        self.points[(label & 0b111) as usize]
    }
}

/// Maps bits (MSB first, three per symbol) onto the constellation.
pub fn map_8qam(bits: &[u8], map: &QamSymbolMap) -> Result<Vec<Complex64>> {
    if bits.len() % BITS_PER_SYMBOL != 0 {
        return Err(Error::Framing(format!(
            "{} bits is not a multiple of {BITS_PER_SYMBOL}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(BITS_PER_SYMBOL)
        .map(|c| map.point((c[0] & 1) << 2 | (c[1] & 1) << 1 | (c[2] & 1)))
        .collect())
}

/// Splits labels back into bits, MSB first.
pub fn labels_to_bits(labels: &[u8]) -> Vec<u8> {
    labels
        .iter()
        .flat_map(|&l| [(l >> 2) & 1, (l >> 1) & 1, l & 1])
        .collect()
}
