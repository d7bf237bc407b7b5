//! Mutual-unbiasedness predicates.
//!
//! Tolerances apply to squared overlaps: a pair passes when
//! `| |⟨a|b⟩|² − 1/d | ≤ tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, inner, Ket, MubSet, ProductBasis, ProductKet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuReport {
    pub pass: bool,
    /// `max | |⟨a|b⟩|² − 1/d |` over the checked pairs.
    pub max_deviation: f64,
    pub worst_pair: (usize, usize),
    pub tol: f64,
}

/// Per-subsystem deviations `| |⟨ψ_i^r|μ^r⟩|² − 1/d_r |`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorwiseReport {
    pub per_subsystem: Vec<Vec<f64>>,
    pub pass: bool,
    pub tol: f64,
}

impl FactorwiseReport {
    /// Subsystems whose deviations exceed the tolerance.
    pub fn failing_subsystems(&self) -> Vec<usize> {
        self.per_subsystem
            .iter()
            .enumerate()
            .filter(|(_, devs)| devs.iter().any(|&x| x > self.tol))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn max_deviation(&self) -> f64 {
        self.per_subsystem
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn overlap_deviation(a: &Ket, b: &Ket, d: usize) -> Result<f64> {
    Ok((inner(a, b)?.norm_sqr() - 1.0 / d as f64).abs())
}

pub fn is_mu_pair(a: &Ket, b: &Ket, d: usize, tol: f64) -> Result<bool> {
    if a.dim() != d || b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if a.dim() != d { a.dim() } else { b.dim() },
        });
    }
    Ok(overlap_deviation(a, b, d)? <= tol)
}

/// Checks all `d²` cross pairs of two bases.
pub fn are_bases_mu(b1: &[Ket], b2: &[Ket], tol: f64) -> Result<MuReport> {
    let d = b1.first().map_or(0, Ket::dim);
    if b1.len() != d || d == 0 {
        return Err(Error::NotABasis {
            dim: d,
            found: b1.len(),
        });
    }
    if b2.len() != d {
        return Err(Error::NotABasis {
            dim: d,
            found: b2.len(),
        });
    }
    if let Some(k) = b1.iter().chain(b2).find(|k| k.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: k.dim(),
        });
    }
    let target = 1.0 / d as f64;
    let mut max_deviation: f64 = 0.0;
    let mut worst_pair = (0, 0);
    for (i, a) in b1.iter().enumerate() {
        for (j, b) in b2.iter().enumerate() {
            let dev = (dot(a.coords(), b.coords()).norm_sqr() - target).abs();
            if dev > max_deviation {
                max_deviation = dev;
                worst_pair = (i, j);
            }
        }
    }
    Ok(MuReport {
        pass: max_deviation <= tol,
        max_deviation,
        worst_pair,
        tol,
    })
}

pub fn are_product_bases_mu(b1: &ProductBasis, b2: &ProductBasis, tol: f64) -> Result<MuReport> {
    check_same_signature(b1, b2)?;
    are_bases_mu(&b1.flat_kets(), &b2.flat_kets(), tol)
}

fn check_same_signature(b1: &ProductBasis, b2: &ProductBasis) -> Result<()> {
    if b1.signature() != b2.signature() {
        return Err(Error::SignatureMismatch {
            left: b1.signature().dims().to_vec(),
            right: b2.signature().dims().to_vec(),
        });
    }
    Ok(())
}

fn check_ket_signature(mu: &ProductKet, basis: &ProductBasis) -> Result<()> {
    if !mu.matches(basis.signature()) {
        return Err(Error::SignatureMismatch {
            left: mu.dims(),
            right: basis.signature().dims().to_vec(),
        });
    }
    Ok(())
}

/// Factor-wise criterion: the product ket is unbiased to the product basis
/// iff in every subsystem `r` its factor is unbiased to the `r`-th factor of
/// every basis vector. Each subsystem is treated as the bipartition `r | r̄`.
pub fn factorwise_mu(mu: &ProductKet, basis: &ProductBasis, tol: f64) -> Result<FactorwiseReport> {
    check_ket_signature(mu, basis)?;
    let dims = basis.signature().dims();
    let per_subsystem: Vec<Vec<f64>> = dims
        .iter()
        .enumerate()
        .map(|(r, &dr)| {
            let target = 1.0 / dr as f64;
            let m = &mu.factors()[r];
            basis
                .vectors()
                .iter()
                .map(|v| (dot(v.factors()[r].coords(), m.coords()).norm_sqr() - target).abs())
                .collect()
        })
        .collect();
    let pass = per_subsystem.iter().flatten().all(|&x| x <= tol);
    Ok(FactorwiseReport {
        per_subsystem,
        pass,
        tol,
    })
}

/// Direct check on flattened vectors, independent of the factor structure.
pub fn global_mu_oracle(mu: &ProductKet, basis: &ProductBasis, tol: f64) -> Result<bool> {
    Ok(global_deviations(mu, basis)?.into_iter().all(|x| x <= tol))
}

/// `| |⟨ψ_i|μ⟩|² − 1/d |` on flattened vectors, one per basis vector.
pub fn global_deviations(mu: &ProductKet, basis: &ProductBasis) -> Result<Vec<f64>> {
    check_ket_signature(mu, basis)?;
    let flat_mu = mu.to_ket();
    let target = 1.0 / basis.signature().total() as f64;
    Ok(basis
        .flat_kets()
        .iter()
        .map(|v| (dot(v.coords(), flat_mu.coords()).norm_sqr() - target).abs())
        .collect())
}

/// The sums `Σ_i |⟨ψ_i^1|μ^1⟩|²` and `Σ_i |⟨ψ_i^2|μ^2⟩|²` for a bipartite
/// basis. For any orthonormal product basis they equal `d_2` and `d_1`.
pub fn trace_identities(mu: &ProductKet, basis: &ProductBasis) -> Result<(f64, f64)> {
    if basis.signature().len() != 2 {
        return Err(Error::NotBipartite(basis.signature().len()));
    }
    trace_identities_regrouped(mu, basis, 0)
}

/// Trace sums for the regrouping `r | r̄` of a multipartite basis; the second
/// sum uses the tensor product of the remaining factors.
pub fn trace_identities_regrouped(
    mu: &ProductKet,
    basis: &ProductBasis,
    r: usize,
) -> Result<(f64, f64)> {
    check_ket_signature(mu, basis)?;
    basis.signature().check_subsystem(r)?;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for v in basis.vectors() {
        let mut rest = 1.0;
        for (s, (f, m)) in v.factors().iter().zip(mu.factors()).enumerate() {
            let o = dot(f.coords(), m.coords()).norm_sqr();
            if s == r {
                s1 += o;
            } else {
                rest *= o;
            }
        }
        s2 += rest;
    }
    Ok((s1, s2))
}

/// Orthonormality of every basis and unbiasedness of every pair in a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub pass: bool,
    /// Largest orthonormality deviation, with the basis it occurs in.
    pub max_orthonormality_deviation: f64,
    pub worst_basis: Option<usize>,
    /// Largest `| |⟨a|b⟩|² − 1/d |` over all pairs of bases.
    pub max_mu_deviation: f64,
    /// `(basis, basis, (vector, vector))` attaining `max_mu_deviation`.
    pub worst_pair: Option<(usize, usize, (usize, usize))>,
    pub tol: f64,
}

pub fn verify_set(set: &MubSet, tol: f64) -> SetReport {
    let mut max_ortho: f64 = 0.0;
    let mut worst_basis = None;
    for (i, b) in set.bases().iter().enumerate() {
        let rep = b.validate(tol);
        if worst_basis.is_none() || rep.max_deviation > max_ortho {
            max_ortho = rep.max_deviation;
            worst_basis = Some(i);
        }
    }
    let mut max_mu: f64 = 0.0;
    let mut worst_pair = None;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let rep = are_product_bases_mu(&set.bases()[i], &set.bases()[j], tol)
                .expect("shared signature");
            if worst_pair.is_none() || rep.max_deviation > max_mu {
                max_mu = rep.max_deviation;
                worst_pair = Some((i, j, rep.worst_pair));
            }
        }
    }
    SetReport {
        pass: max_ortho <= tol && max_mu <= tol,
        max_orthonormality_deviation: max_ortho,
        worst_basis,
        max_mu_deviation: max_mu,
        worst_pair,
        tol,
    }
}
