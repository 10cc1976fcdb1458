//! FFT-based helpers: linear convolution, band-limited delays and
//! spectrum bookkeeping.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// Unnormalized forward DFT in place.
pub fn fft(buf: &mut [Complex64]) {
    if !buf.is_empty() {
        plan(buf.len(), true).process(buf);
    }
}

/// Inverse DFT in place, scaled by 1/N.
pub fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), false).process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Smallest 2^a 3^b 5^c not below `n`.
pub fn fast_len(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Signed frequency of DFT bin `k` for a length-`n` transform, in cycles/sample.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 && !(n % 2 == 0 && k == n / 2) {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// Full linear convolution of a complex sequence with real taps.
pub fn convolve_real(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    if x.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + taps.len() - 1;
    if taps.len() <= 32 {
        let mut out = vec![Complex64::new(0.0, 0.0); out_len];
        for (i, xi) in x.iter().enumerate() {
            for (k, h) in taps.iter().enumerate() {
                out[i + k] += xi * h;
            }
        }
        return out;
    }
    let n = fast_len(out_len);
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    for (bi, h) in b.iter_mut().zip(taps) {
        *bi = Complex64::new(*h, 0.0);
    }
    fft(&mut a);
    fft(&mut b);
    a.iter_mut().zip(&b).for_each(|(u, v)| *u *= v);
    ifft(&mut a);
    a.truncate(out_len);
    a
}

/// Multiplies a spectrum (natural DFT order) by exp(-i 2 pi f delay), i.e. delays
/// the underlying sequence by `delay_samples` (circularly).
pub fn apply_delay_to_spectrum(spec: &mut [Complex64], delay_samples: f64) {
    if delay_samples == 0.0 {
        return;
    }
    let n = spec.len();
    for (k, v) in spec.iter_mut().enumerate() {
        if n % 2 == 0 && k == n / 2 {
            // Nyquist bin: average of the +/- half-rate phasors.
            *v *= (PI * delay_samples).cos();
        } else {
            *v *= Complex64::from_polar(1.0, -2.0 * PI * bin_frequency(k, n) * delay_samples);
        }
    }
}

/// Circular band-limited delay of a sequence by a (fractional) number of samples.
pub fn delay_circular(x: &[Complex64], delay_samples: f64) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft(&mut buf);
    apply_delay_to_spectrum(&mut buf, delay_samples);
    ifft(&mut buf);
    buf
}

/// Power spectrum |X(f)|^2 of a real tap vector, evaluated on `n` bins.
pub fn power_spectrum_real(taps: &[f64], n: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n.max(taps.len())];
    for (b, t) in buf.iter_mut().zip(taps) {
        b.re = *t;
    }
    fft(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}
