use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fft, ifft};
use crate::txgen::{labels_to_bits, PrbsDescriptor, PrbsGenerator, QamSymbolMap, BITS_PER_SYMBOL};

pub const MIN_BER_BITS: usize = 100_000;
const ROTATIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct BerConfig {
    /// Floor on the correlation-peak significance.
    pub threshold_sigma: f64,
    /// Target probability of locking onto noise, over all hypotheses.
    pub false_lock_probability: f64,
    /// Leading bits excluded from both correlation and counting.
    pub skip_bits: usize,
    /// Two hypotheses whose BERs are within this fraction are ambiguous.
    pub ambiguity_fraction: f64,
}

impl Default for BerConfig {
    fn default() -> Self {
        Self {
            threshold_sigma: 6.0,
            false_lock_probability: 1e-6,
            skip_bits: 0,
            ambiguity_fraction: 0.1,
        }
    }
}

impl BerConfig {
    /// Lock threshold in sigmas for `hypotheses` simultaneous tests. Uses the
    /// Chernoff bound Q(z) <= exp(-z^2/2)/2, so the false-lock target holds
    /// without evaluating the normal tail.
    pub fn lock_threshold(&self, hypotheses: usize) -> f64 {
        let z = (2.0 * (hypotheses as f64 / (2.0 * self.false_lock_probability)).ln()).sqrt();
        z.max(self.threshold_sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedBer {
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Quarter turns applied to the received labels before comparison.
    pub rotation: usize,
    /// `rx[i] == ref[(i - delay_bits) mod P]`.
    pub delay_bits: usize,
    pub peak_sigma: f64,
    pub threshold_sigma: f64,
    pub ambiguous: bool,
    pub runner_up_ber: f64,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let d = 1.0 + z * z / n_f;
    let c = (p + z * z / (2.0 * n_f)) / d;
    let h = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / d;
    let lo = if k == 0 { 0.0 } else { (c - h).max(0.0) };
    let hi = if k == n { 1.0 } else { (c + h).min(1.0) };
    (lo, hi)
}

/// Received bits re-demapped as if the constellation were turned by `k`
/// quarter turns. Trailing bits that do not fill a symbol are kept.
fn rotated_bits(rx: &[u8], k: usize) -> Vec<u8> {
    if k == 0 {
        return rx.to_vec();
    }
    let whole = rx.len() / BITS_PER_SYMBOL * BITS_PER_SYMBOL;
    let labels: Vec<u8> = rx[..whole]
        .chunks_exact(BITS_PER_SYMBOL)
        .map(|c| QamSymbolMap::rotate_label(c.iter().fold(0u8, |a, b| a << 1 | b), k))
        .collect();
    let mut out = labels_to_bits(&labels);
    out.extend_from_slice(&rx[whole..]);
    out
}

fn bipolar(b: u8) -> f64 {
    if b & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Hypothesis {
    delay: usize,
    sigma: f64,
    errors: u64,
}

fn correlate(bits: &[u8], skip: usize, ref_spec_conj: &[Complex64], reference: &[u8]) -> Hypothesis {
    let p = reference.len();
    let mut folded = vec![Complex64::new(0.0, 0.0); p];
    for (i, &b) in bits.iter().enumerate().skip(skip) {
        folded[i % p].re += bipolar(b);
    }
    fft(&mut folded);
    for (x, r) in folded.iter_mut().zip(ref_spec_conj) {
        *x *= r;
    }
    ifft(&mut folded);
    let (delay, peak) = folded
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (d, c)| if c.re > acc.1 { (d, c.re) } else { acc });
    let n = (bits.len() - skip) as f64;
    let errors = bits
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(i, &b)| b != reference[(i + p - delay % p) % p])
        .count() as u64;
    Hypothesis {
        delay,
        sigma: peak / n.sqrt(),
        errors,
    }
}

/// BER of `rx_bits` against the PRBS whose stream starts at `reference`,
/// after resolving quarter-turn label rotation and bit delay blindly.
pub fn align_and_ber(rx_bits: &[u8], reference: &PrbsDescriptor, cfg: &BerConfig) -> Result<AlignedBer> {
    let gen = PrbsGenerator::from_descriptor(reference)?;
    let reference = gen.one_period();
    let counted = rx_bits.len().saturating_sub(cfg.skip_bits);
    if counted < MIN_BER_BITS {
        return Err(Error::InsufficientLength {
            needed: MIN_BER_BITS + cfg.skip_bits,
            got: rx_bits.len(),
        });
    }
    let mut spec: Vec<Complex64> = reference.iter().map(|&b| Complex64::new(bipolar(b), 0.0)).collect();
    fft(&mut spec);
    spec.iter_mut().for_each(|x| *x = x.conj());

    let threshold = cfg.lock_threshold(ROTATIONS * reference.len());
    let hyps: Vec<Hypothesis> = (0..ROTATIONS)
        .map(|k| correlate(&rotated_bits(rx_bits, k), cfg.skip_bits, &spec, &reference))
        .collect();

    let best = hyps
        .iter()
        .enumerate()
        .filter(|(_, h)| h.sigma >= threshold)
        .min_by_key(|(_, h)| h.errors);
    let Some((k, h)) = best else {
        let peak = hyps.iter().map(|h| h.sigma).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoLock {
            peak_sigma: peak,
            threshold_sigma: threshold,
        });
    };
    let n = counted as u64;
    let runner_up = hyps
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, h)| h.errors)
        .min()
        .unwrap_or(n);
    let (ci_low, ci_high) = wilson_interval(h.errors, n);
    Ok(AlignedBer {
        ber: h.errors as f64 / n as f64,
        errors: h.errors,
        bits: n,
        ci_low,
        ci_high,
        rotation: k,
        delay_bits: h.delay,
        peak_sigma: h.sigma,
        threshold_sigma: threshold,
        ambiguous: runner_up as f64 <= (1.0 + cfg.ambiguity_fraction) * h.errors as f64,
        runner_up_ber: runner_up as f64 / n as f64,
    })
}

/// Offset `s` such that the stream from `other` equals the stream from
/// `base` advanced by `s` bits, when both come from the same register.
/// Per-bit error flags of `rx_bits` under an alignment found by
/// [`align_and_ber`] (its rotation and delay), skip prefix included.
pub fn error_flags(rx_bits: &[u8], reference: &PrbsDescriptor, aligned: &AlignedBer) -> Result<Vec<bool>> {
    let reference = PrbsGenerator::from_descriptor(reference)?.one_period();
    let p = reference.len();
    let d = aligned.delay_bits % p;
    Ok(rotated_bits(rx_bits, aligned.rotation)
        .iter()
        .enumerate()
        .map(|(i, &b)| b != reference[(i + p - d) % p])
        .collect())
}

/// BER of consecutive windows of `window` bits; a trailing partial window
/// is dropped.
pub fn windowed_ber(flags: &[bool], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    flags
        .chunks_exact(window)
        .map(|c| c.iter().filter(|&&e| e).count() as f64 / window as f64)
        .collect()
}

fn stream_offset(base: &PrbsDescriptor, other: &PrbsDescriptor) -> Option<usize> {
    if base.degree != other.degree || base.tap_mask != other.tap_mask {
        return None;
    }
    let mut g = PrbsGenerator::from_descriptor(base).ok()?;
    let period = g.period();
    for s in 0..period {
        if g.state() == other.state {
            return Some(s);
        }
        g.next_bit();
    }
    None
}

fn signed_distance(d: usize, p: usize) -> usize {
    d.min(p - d)
}

/// Aligns every received output of a group against the group's references
/// and resolves which reference each output carries. Outputs that cannot
/// lock are returned as errors in place. When the references are shifts of
/// one sequence, every output locks against all of them; the assignment then
/// picks the reference that needs the shortest delay.
pub fn align_group(
    rx: &[Vec<u8>],
    refs: &[PrbsDescriptor],
    cfg: &BerConfig,
) -> Result<Vec<Result<(usize, AlignedBer)>>> {
    if refs.is_empty() {
        return Err(Error::InvalidConfig("no reference streams".into()));
    }
    let offsets: Option<Vec<usize>> = refs.iter().map(|r| stream_offset(&refs[0], r)).collect();
    let period = PrbsGenerator::from_descriptor(&refs[0])?.period();
    Ok(rx
        .iter()
        .map(|bits| -> Result<(usize, AlignedBer)> {
            match &offsets {
                Some(offs) => {
                    let a0 = align_and_ber(bits, &refs[0], cfg)?;
                    let (j, d) = offs
                        .iter()
                        .enumerate()
                        .map(|(j, s)| (j, (a0.delay_bits + s) % period))
                        .min_by_key(|&(_, d)| signed_distance(d, period))
                        .expect("refs not empty");
                    Ok((j, AlignedBer { delay_bits: d, ..a0 }))
                }
                None => {
                    let mut best: Option<(usize, AlignedBer)> = None;
                    let mut last_err = None;
                    for (j, r) in refs.iter().enumerate() {
                        match align_and_ber(bits, r, cfg) {
                            Ok(a) if best.as_ref().is_none_or(|(_, b)| a.errors < b.errors) => best = Some((j, a)),
                            Ok(_) => {}
                            Err(e) => last_err = Some(e),
                        }
                    }
                    best.ok_or_else(|| last_err.expect("at least one reference"))
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 300_000);
        assert!(lo < 1e-4 && hi > 1e-4);
        assert_eq!(wilson_interval(0, 1000).0, 0.0);
    }

    #[test]
    fn threshold_is_at_least_floor() {
        let cfg = BerConfig::default();
        let z = cfg.lock_threshold(4 * 262_143);
        assert!(z > 7.0 && z < 7.5, "{z}");
        assert_eq!(cfg.lock_threshold(1).max(6.0), cfg.lock_threshold(1));
    }

    #[test]
    fn rotation_zero_is_identity() {
        let bits = vec![1, 0, 1, 1, 1, 0, 0];
        assert_eq!(rotated_bits(&bits, 0), bits);
        assert_eq!(rotated_bits(&bits, 4 % 4), bits);
        assert_eq!(rotated_bits(&bits, 1).len(), bits.len());
    }
}
