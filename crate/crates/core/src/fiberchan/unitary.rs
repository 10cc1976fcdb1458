//! Random 4x4 matrices for mode mixing and crosstalk.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat4 = Matrix4<Complex64>;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    Mat4::from_fn(|_, _| gaussian(rng))
}

/// Q factor with the phases of R's diagonal folded back in, so the result
/// is the unitary closest in spirit to `m` and Haar-distributed for Gaussian `m`.
pub fn unitary_part(m: &Mat4) -> Mat4 {
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..4 {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..4 {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    unitary_part(&gaussian_matrix(rng))
}

/// Random Hermitian matrix with unit Frobenius norm.
pub fn unit_hermitian<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let a = gaussian_matrix(rng);
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let n = h.norm();
    h / Complex64::new(n, 0.0)
}

/// max |(U U^H - I)_ij|
pub fn unitarity_error(u: &Mat4) -> f64 {
    (u * u.adjoint() - Mat4::identity())
        .iter()
        .fold(0.0, |m, v| m.max(v.norm()))
}

/// Gaussian block rescaled to an exact squared Frobenius norm.
pub fn block_with_energy<R: Rng + ?Sized>(rng: &mut R, frob_sq: f64) -> Mat4 {
    let g = gaussian_matrix(rng);
    let n2 = g.norm_squared();
    g * Complex64::new((frob_sq / n2).sqrt(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn haar_draws_are_unitary() {
        let mut r = rng::stream(3, &[]);
        for _ in 0..50 {
            assert!(unitarity_error(&haar_unitary(&mut r)) < 1e-13);
        }
    }

    #[test]
    fn hermitian_generator_exponentiates_to_unitary() {
        let mut r = rng::stream(4, &[]);
        let h = unit_hermitian(&mut r);
        assert!((h.norm() - 1.0).abs() < 1e-14);
        assert!((h - h.adjoint()).norm() < 1e-15);
        let step = (h * Complex64::new(0.0, 0.3)).exp();
        assert!(unitarity_error(&step) < 1e-13);
    }

    #[test]
    fn block_energy_is_exact() {
        let mut r = rng::stream(5, &[]);
        let b = block_with_energy(&mut r, 0.123);
        assert!((b.norm_squared() - 0.123).abs() < 1e-15);
    }

    #[test]
    fn unitary_part_fixes_nearly_unitary_input() {
        let mut r = rng::stream(6, &[]);
        let u = haar_unitary(&mut r);
        let noisy = u + gaussian_matrix(&mut r) * Complex64::new(1e-9, 0.0);
        let fixed = unitary_part(&noisy);
        assert!(unitarity_error(&fixed) < 1e-14);
        assert!((fixed - u).norm() < 1e-8);
    }
}
