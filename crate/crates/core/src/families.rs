//! Reproducible generation of test families: random contractions and
//! commuting tuples built as polynomials of a single seed contraction
//! (pairwise commuting, hence commuting according to every graph).

use crate::cmatrix::{re, C64, CMatrix};
use crate::kernels::spectral_norm;
use rand::Rng;

/// Random complex matrix with entries uniform in the unit square.
pub fn random_matrix(d: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Random contraction: a random matrix rescaled just inside the unit
/// ball.
pub fn random_contraction(d: usize, rng: &mut impl Rng) -> CMatrix {
    let m = random_matrix(d, rng);
    let norm = spectral_norm(&m).max(1e-6);
    let target = rng.gen_range(0.35..0.95);
    m.scale(re(target / norm))
}

/// Random unitary via Gram-determined orthonormalization of a random
/// matrix.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    loop {
        let m = random_matrix(d, rng);
        if let Ok((piv, basis)) = crate::orthonorm::pivoted_orthonormalize_vectors(&m, 1e-9) {
            if piv.rank == d {
                return basis;
            }
        }
    }
}

/// Scaled polynomial of `seed` with random coefficients, contracted to
/// norm at most `target`.
pub fn polynomial_of(seed: &CMatrix, degree: usize, target: f64, rng: &mut impl Rng) -> CMatrix {
    let d = seed.rows();
    let mut acc = CMatrix::zeros(d, d);
    let mut power = CMatrix::identity(d);
    for _ in 0..=degree {
        let coeff = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        acc = acc.add(&power.scale(coeff)).expect("same shape");
        power = power.mul(seed).expect("square");
    }
    let norm = spectral_norm(&acc).max(1e-9);
    acc.scale(re(target / norm))
}

/// Commuting pair: two polynomials of one random contraction.
pub fn commuting_pair(d: usize, rng: &mut impl Rng) -> (CMatrix, CMatrix) {
    let seed = random_contraction(d, rng);
    let a = polynomial_of(&seed, 2, rng.gen_range(0.3..0.9), rng);
    let b = polynomial_of(&seed, 3, rng.gen_range(0.3..0.9), rng);
    (a, b)
}

/// Pairwise commuting family of `n` contractions on dimension `d`.
pub fn commuting_family(d: usize, n: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    let seed = random_contraction(d, rng);
    (0..n)
        .map(|_| polynomial_of(&seed, 2 + (n % 3), rng.gen_range(0.3..0.9), rng))
        .collect()
}
