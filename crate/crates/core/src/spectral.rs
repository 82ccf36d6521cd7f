//! Eigen-decomposition of small Hermitian matrices, the exponential
//! `exp(-i t H)` built from it, and its Fréchet derivative.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64 as C64;

pub(crate) type Op<const D: usize> = SMatrix<C64, D, D>;
pub(crate) type Ket<const D: usize> = SVector<C64, D>;

#[cfg(test)]
const I: C64 = C64::new(0.0, 1.0);

/// `H = V diag(values) V†`, eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub(crate) struct Spectral<const D: usize> {
    pub values: [f64; D],
    pub vectors: Op<D>,
}

/// Eigen-decomposition of a Hermitian matrix. Closed form for 2×2, the
/// nalgebra Hermitian eigensolver for larger dimensions.
pub(crate) fn eigh<const D: usize>(h: &Op<D>) -> Spectral<D> {
    if D == 2 {
        eigh2(h)
    } else {
        let dense = DMatrix::from_fn(D, D, |i, j| h[(i, j)]);
        let eig = dense.symmetric_eigen();
        let mut values = [0.0; D];
        values.copy_from_slice(eig.eigenvalues.as_slice());
        Spectral {
            values,
            vectors: Op::<D>::from_fn(|i, j| eig.eigenvectors[(i, j)]),
        }
    }
}

fn eigh2<const D: usize>(h: &Op<D>) -> Spectral<D> {
    let p = h[(0, 0)].re;
    let q = h[(1, 1)].re;
    let c = h[(0, 1)];
    let mean = 0.5 * (p + q);
    let half_gap = 0.5 * (p - q);
    let radius = half_gap.hypot(c.norm());

    let mut values = [0.0; D];
    let mut vectors = Op::<D>::identity();
    if radius == 0.0 {
        values[0] = mean;
        values[1] = mean;
        return Spectral { values, vectors };
    }
    // eigenvector of mean + radius, from whichever row of (H - λ) is better conditioned
    let (a, b) = if half_gap >= 0.0 {
        (C64::from(radius + half_gap), c.conj())
    } else {
        (c, C64::from(radius - half_gap))
    };
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / norm, b / norm);
    values[0] = mean + radius;
    values[1] = mean - radius;
    vectors[(0, 0)] = a;
    vectors[(1, 0)] = b;
    vectors[(0, 1)] = -b.conj();
    vectors[(1, 1)] = a.conj();
    Spectral { values, vectors }
}

#[cfg(test)]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

impl<const D: usize> Spectral<D> {
    /// Phases `exp(-i t λ_j)`.
    pub fn phases(&self, t: f64) -> [C64; D] {
        let mut out = [C64::new(0.0, 0.0); D];
        for (o, &l) in out.iter_mut().zip(&self.values) {
            *o = C64::from_polar(1.0, -t * l);
        }
        out
    }

    /// `exp(-i t H)`.
    pub fn exp(&self, t: f64) -> Op<D> {
        let ph = self.phases(t);
        let mut scaled = self.vectors;
        for j in 0..D {
            for i in 0..D {
                scaled[(i, j)] *= ph[j];
            }
        }
        scaled * self.vectors.adjoint()
    }

    #[cfg(test)]
    /// Divided differences of `λ ↦ exp(-i t λ)` over pairs of eigenvalues,
    /// written in a form that stays exact when two eigenvalues coincide.
    pub fn divided_differences(&self, t: f64) -> Op<D> {
        Op::<D>::from_fn(|j, k| {
            let (a, b) = (self.values[j], self.values[k]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (a - b);
            -I * t * C64::from_polar(1.0, -t * mid) * sinc(t * half)
        })
    }

    #[cfg(test)]
    /// Fréchet derivative of `exp(-i t H)` in the direction `g`.
    pub fn frechet(&self, t: f64, g: &Op<D>) -> Op<D> {
        let gamma = self.divided_differences(t);
        let rotated = self.vectors.adjoint() * g * self.vectors;
        self.vectors * rotated.component_mul(&gamma) * self.vectors.adjoint()
    }

    /// Matrix of `g` in the eigenbasis, `V† g V`.
    pub fn in_eigenbasis(&self, g: &Op<D>) -> Op<D> {
        self.vectors.adjoint() * g * self.vectors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_exp<const D: usize>(h: &Op<D>, t: f64) -> Op<D> {
        // scaling and squaring on a Taylor series
        let mut x = h * C64::new(0.0, -t);
        let mut squarings = 0;
        while x.iter().map(|z| z.norm()).sum::<f64>() > 0.1 {
            x /= C64::from(2.0);
            squarings += 1;
        }
        let mut term = Op::<D>::identity();
        let mut sum = Op::<D>::identity();
        for k in 1..30 {
            term = term * x / C64::from(k as f64);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn max_abs<const D: usize>(m: &Op<D>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn sample_hermitian<const D: usize>(seed: u64) -> Op<D> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = Op::<D>::from_fn(|_, _| C64::new(next(), next()));
        (m + m.adjoint()) * C64::from(0.5)
    }

    #[test]
    fn exp_matches_series_two_and_three_levels() {
        for seed in 0..20 {
            let h2 = sample_hermitian::<2>(seed);
            assert!(max_abs(&(eigh(&h2).exp(1.3) - series_exp(&h2, 1.3))) < 1e-12);
            let h3 = sample_hermitian::<3>(seed + 100);
            assert!(max_abs(&(eigh(&h3).exp(0.7) - series_exp(&h3, 0.7))) < 1e-12);
        }
    }

    #[test]
    fn eigh2_handles_diagonal_and_zero() {
        let z = Op::<2>::zeros();
        let s = eigh(&z);
        assert_eq!(s.values, [0.0, 0.0]);
        let d = Op::<2>::from_diagonal(&Ket::<2>::new(C64::from(-0.5), C64::from(2.0)));
        let s = eigh(&d);
        assert!(max_abs(&(s.exp(0.4) - series_exp(&d, 0.4))) < 1e-14);
    }

    #[test]
    fn frechet_matches_central_differences() {
        for seed in 0..10 {
            let h = sample_hermitian::<3>(seed);
            let g = sample_hermitian::<3>(seed + 50);
            let t = 0.9;
            let step = 1e-5;
            let plus = series_exp(&(h + g * C64::from(step)), t);
            let minus = series_exp(&(h - g * C64::from(step)), t);
            let fd = (plus - minus) / C64::from(2.0 * step);
            let exact = eigh(&h).frechet(t, &g);
            let err = max_abs(&(fd - exact));
            assert!(err < 1e-8, "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn frechet_degenerate_spectrum_is_the_commuting_limit() {
        // H = c·1 commutes with everything: d exp(-itH)[G] = -i t G exp(-itH)
        let h = Op::<2>::identity() * C64::from(0.3);
        let g = sample_hermitian::<2>(9);
        let t = 2.0;
        let expected = g * C64::new(0.0, -t) * eigh(&h).exp(t);
        assert!(max_abs(&(eigh(&h).frechet(t, &g) - expected)) < 1e-14);
    }
}
