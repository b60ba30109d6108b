//! Halton points with a Cranley–Patterson rotation.

use rand::Rng;

use crate::kernel::Domain;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// `n` points of the Halton sequence in `[0,1)^dim`, skipping the origin.
/// Each coordinate is shifted modulo one by `shift[j]` when given.
pub fn halton_unit(n: usize, dim: usize, shift: Option<&[f64]>) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[j]);
                    match shift {
                        Some(s) => (u + s[j]).fract(),
                        None => u,
                    }
                })
                .collect()
        })
        .collect()
}

/// Randomly rotated Halton points mapped into `domain`.
pub fn scrambled_points<R: Rng + ?Sized>(domain: &Domain, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..domain.dim()).map(|_| rng.random::<f64>()).collect();
    halton_unit(n, domain.dim(), Some(&shift))
        .into_iter()
        .map(|u| domain.from_unit(&u))
        .collect()
}
