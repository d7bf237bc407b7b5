//! Seeded random objects: Haar kets and unitaries, and the semi-direct product-basis generator.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{columns, DimensionSignature, Ket, ProductBasis, ProductKet};

pub type SeededRng = ChaCha8Rng;

/// Generator for restart or trial `stream` under a master seed.
pub fn rng_for(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

pub fn haar_ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Ket {
    loop {
        let coords: Vec<C64> = (0..d).map(|_| gaussian_complex(rng)).collect();
        if let Ok(k) = Ket::normalize(coords) {
            return k;
        }
    }
}

/// Modified Gram–Schmidt on the columns of `m`. Columns must be linearly independent.
pub fn gram_schmidt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for k in 0..j {
            let proj: C64 = q.column(k).dotc(&q.column(j));
            let ck = q.column(k).into_owned();
            let mut cj = q.column_mut(j);
            cj -= ck * proj;
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

/// Haar-distributed unitary via Gram–Schmidt of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian_complex(rng));
    gram_schmidt(&g)
}

pub fn haar_basis<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Ket> {
    columns(&haar_unitary(n, rng))
}

/// Product ket with independent Haar-random factors.
pub fn random_product_ket<R: Rng + ?Sized>(sig: &DimensionSignature, rng: &mut R) -> ProductKet {
    ProductKet::from_factors_unchecked(sig.dims().iter().map(|&d| haar_ket(d, rng)).collect())
}

/// Recursive semi-direct generator: pick a basis of one randomly chosen
/// subsystem, then for each of its vectors a basis of the remaining
/// subsystems, recursively. With probability `share_probability` a single
/// complement basis is reused for every branch of a node, which yields direct
/// product bases when it happens at every level.
pub fn semi_direct_basis<R: Rng + ?Sized>(
    sig: &DimensionSignature,
    share_probability: f64,
    rng: &mut R,
) -> ProductBasis {
    semi_direct_basis_with(sig, share_probability, rng, &mut |d, _, rng| {
        haar_basis(d, rng)
    })
}

/// Like [`semi_direct_basis`] with a caller-supplied sampler `(d_r, r, rng) -> basis of C^{d_r}`.
pub fn semi_direct_basis_with<R: Rng + ?Sized>(
    sig: &DimensionSignature,
    share_probability: f64,
    rng: &mut R,
    sampler: &mut dyn FnMut(usize, usize, &mut R) -> Vec<Ket>,
) -> ProductBasis {
    let subsystems: Vec<usize> = (0..sig.len()).collect();
    let partial = branch(sig, &subsystems, share_probability, rng, sampler);
    let vectors = partial
        .into_iter()
        .map(|slots| {
            ProductKet::from_factors_unchecked(
                slots
                    .into_iter()
                    .map(|s| s.expect("all subsystems filled"))
                    .collect(),
            )
        })
        .collect();
    ProductBasis::new(sig.clone(), vectors).expect("generator yields d vectors")
}

fn branch<R: Rng + ?Sized>(
    sig: &DimensionSignature,
    remaining: &[usize],
    share_probability: f64,
    rng: &mut R,
    sampler: &mut dyn FnMut(usize, usize, &mut R) -> Vec<Ket>,
) -> Vec<Vec<Option<Ket>>> {
    if remaining.is_empty() {
        return vec![vec![None; sig.len()]];
    }
    let pick = rng.random_range(0..remaining.len());
    let root = remaining[pick];
    let rest: Vec<usize> = remaining.iter().copied().filter(|&s| s != root).collect();
    let root_basis = sampler(sig.dims()[root], root, rng);
    let shared = if rng.random_bool(share_probability.clamp(0.0, 1.0)) {
        Some(branch(sig, &rest, share_probability, rng, sampler))
    } else {
        None
    };
    let mut out = Vec::with_capacity(sig.total());
    for k in root_basis {
        let sub = match &shared {
            Some(s) => s.clone(),
            None => branch(sig, &rest, share_probability, rng, sampler),
        };
        for mut slots in sub {
            slots[root] = Some(k.clone());
            out.push(slots);
        }
    }
    out
}

/// A product ket and a semi-direct product basis such that every factor of
/// the ket is mutually unbiased to every factor of the basis in the same
/// subsystem. The per-subsystem factor bases are drawn from the family
/// `T · D · F · E`, with `T e_0 = μ^r`, `F` the Fourier matrix and `D`, `E`
/// random diagonal phases, so that each column has overlap modulus
/// `1/√d_r` with `μ^r`.
pub fn mu_instance<R: Rng + ?Sized>(
    sig: &DimensionSignature,
    share_probability: f64,
    rng: &mut R,
) -> (ProductKet, ProductBasis) {
    let frames: Vec<DMatrix<C64>> = sig
        .dims()
        .iter()
        .map(|&d| {
            let mut g = DMatrix::from_fn(d, d, |_, _| gaussian_complex(rng));
            let mu = haar_ket(d, rng);
            for (i, c) in mu.coords().iter().enumerate() {
                g[(i, 0)] = *c;
            }
            gram_schmidt(&g)
        })
        .collect();
    let mu = ProductKet::from_factors_unchecked(
        frames
            .iter()
            .map(|t| Ket::normalize(t.column(0).iter().copied().collect()).expect("unit column"))
            .collect(),
    );
    let mut sampler = |d: usize, r: usize, rng: &mut R| {
        let left = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                random_phase(rng)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let right = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                random_phase(rng)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        columns(&(&frames[r] * left * fourier(d) * right))
    };
    let basis = semi_direct_basis_with(sig, share_probability, rng, &mut sampler);
    (mu, basis)
}

/// Draws, with equal probability, an exact MU instance from [`mu_instance`],
/// the same with one factor of the ket replaced by a Haar-random ket, or an
/// unrelated random product ket and semi-direct basis.
pub fn mixed_instance<R: Rng + ?Sized>(
    sig: &DimensionSignature,
    rng: &mut R,
) -> (ProductKet, ProductBasis) {
    match rng.random_range(0..3) {
        0 => mu_instance(sig, 0.5, rng),
        1 => {
            let (mu, basis) = mu_instance(sig, 0.5, rng);
            let mut factors = mu.factors().to_vec();
            let r = rng.random_range(0..factors.len());
            factors[r] = haar_ket(sig.dims()[r], rng);
            (ProductKet::from_factors_unchecked(factors), basis)
        }
        _ => (
            random_product_ket(sig, rng),
            semi_direct_basis(sig, 0.5, rng),
        ),
    }
}

/// Unitary discrete Fourier matrix `F_jk = ω^{jk}/√d`.
pub fn fourier(d: usize) -> DMatrix<C64> {
    let s = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, d, |j, k| {
        C64::from_polar(s, std::f64::consts::TAU * ((j * k) % d) as f64 / d as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unitarity_deviation, DEFAULT_TOL};

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = rng_for(7, 0);
        for n in 1..6 {
            assert!(unitarity_deviation(&haar_unitary(n, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: f64 = rng_for(1, 0).random();
        let b: f64 = rng_for(1, 1).random();
        let a2: f64 = rng_for(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn generator_yields_orthonormal_product_bases() {
        let mut rng = rng_for(3, 0);
        for dims in [
            vec![2, 2],
            vec![2, 3],
            vec![3, 3],
            vec![2, 2, 3],
            vec![3, 2, 2],
        ] {
            let sig = DimensionSignature::new(dims).unwrap();
            for share in [0.0, 0.5, 1.0] {
                let b = semi_direct_basis(&sig, share, &mut rng);
                assert!(b.validate(DEFAULT_TOL).pass, "{sig} share {share}");
            }
        }
    }

    #[test]
    fn mu_instance_is_factorwise_unbiased() {
        let mut rng = rng_for(11, 0);
        let sig = DimensionSignature::new(vec![2, 3, 2]).unwrap();
        let (mu, basis) = mu_instance(&sig, 0.3, &mut rng);
        assert!(basis.validate(DEFAULT_TOL).pass);
        for v in basis.vectors() {
            for (r, (f, m)) in v.factors().iter().zip(mu.factors()).enumerate() {
                let o = crate::linalg::inner(f, m).unwrap().norm_sqr();
                assert!((o - 1.0 / sig.dims()[r] as f64).abs() < 1e-12);
            }
        }
    }
}
