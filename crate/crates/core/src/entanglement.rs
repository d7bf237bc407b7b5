//! Entanglement of vectors that are unbiased to sets of product bases.
//!
//! If a subsystem carries `d_r + 1` pairwise MU factor bases, each drawn from
//! a different product basis of the set, then every vector MU to the whole
//! set has `⟨u|ρ_r|u⟩ = 1/d_r` for all their vectors `u`, and a complete set
//! of MU bases pins `ρ_r` down to `I/d_r`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, partial_trace, DensityMatrix, DimensionSignature, Ket, MubSet};
use crate::mu::are_bases_mu;
use crate::optim::{levenberg_marquardt, LmOptions, MuVectorObjective};
use crate::random::{haar_ket, rng_for};
use crate::structure::find_orthonormal_subset;

/// Returns whether `‖ρ_r − I/d_r‖_F ≤ tol`, together with the deviation.
pub fn is_maximally_entangled(
    v: &Ket,
    sig: &DimensionSignature,
    r: usize,
    tol: f64,
) -> Result<(bool, f64)> {
    let rho = partial_trace(v, sig, r)?;
    let dev = rho.mixedness_deviation();
    Ok((dev <= tol, dev))
}

/// Factor basis of subsystem `r` taken from one basis of the set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorBasis {
    /// Position of the source basis in the set.
    pub source: usize,
    /// Indices of the source basis vectors whose `r`-factors form the basis.
    pub indices: Vec<usize>,
    pub vectors: Vec<Ket>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementAudit {
    pub vector: Ket,
    pub subsystem: usize,
    pub reduced: DensityMatrix,
    /// `‖ρ_r − I/d_r‖_F`.
    pub mixedness_deviation: f64,
    pub maximally_entangled: bool,
    /// `d_r + 1` pairwise MU factor bases were found among the set's bases.
    pub hypothesis_holds: bool,
    pub factor_bases: Vec<FactorBasis>,
    /// `p[b][i] = ⟨u_i^b|ρ_r|u_i^b⟩` for every factor basis `b`.
    pub probabilities: Vec<Vec<f64>>,
    /// `max |p − 1/d_r|`; zero when the hypothesis fails.
    pub max_probability_deviation: f64,
    /// `‖Σ_b Σ_i p_i^b |u_i^b⟩⟨u_i^b| − I − ρ_r‖_F` when the hypothesis holds.
    pub reconstruction_deviation: Option<f64>,
    pub tol: f64,
}

/// `Σ_b Σ_i ⟨u_i^b|ρ|u_i^b⟩ |u_i^b⟩⟨u_i^b| − I` for a complete set of `d + 1`
/// MU bases; equals `ρ` for every density matrix `ρ` of unit trace.
pub fn reconstruct_from_complete_set(
    rho: &DensityMatrix,
    complete: &[Vec<Ket>],
) -> Result<DMatrix<C64>> {
    let d = rho.dim();
    if complete.len() != d + 1 {
        return Err(Error::Precondition(format!(
            "a complete set in dimension {d} has {} bases, got {}",
            d + 1,
            complete.len()
        )));
    }
    let mut out = -DMatrix::<C64>::identity(d, d);
    for basis in complete {
        for u in basis {
            let p = rho.expectation(u)?;
            out += DMatrix::from_fn(d, d, |i, j| u.coords()[i] * u.coords()[j].conj())
                * C64::new(p, 0.0);
        }
    }
    Ok(out)
}

/// Picks `d_r + 1` pairwise MU factor bases of subsystem `r`, at most one per basis of `set`.
fn factor_bases(set: &MubSet, r: usize, tol: f64) -> Result<Option<Vec<FactorBasis>>> {
    let dr = set.signature().dim(r)?;
    let mut candidates = Vec::new();
    for (source, b) in set.bases().iter().enumerate() {
        let factors = b.factors_of(r)?;
        if let Some(idx) = find_orthonormal_subset(&factors, dr, tol) {
            candidates.push(FactorBasis {
                source,
                vectors: idx.iter().map(|&i| factors[i].clone()).collect(),
                indices: idx,
            });
        }
    }
    let n = candidates.len();
    let mu = |a: &FactorBasis, b: &FactorBasis| {
        are_bases_mu(&a.vectors, &b.vectors, tol)
            .map(|rep| rep.pass)
            .unwrap_or(false)
    };
    // Smallest-first search for a pairwise MU selection of size d_r + 1.
    fn pick(
        cands: &[FactorBasis],
        k: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        mu: &dyn Fn(&FactorBasis, &FactorBasis) -> bool,
    ) -> bool {
        if chosen.len() == k {
            return true;
        }
        for i in start..cands.len() {
            if chosen.iter().all(|&j| mu(&cands[j], &cands[i])) {
                chosen.push(i);
                if pick(cands, k, i + 1, chosen, mu) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    if n < dr + 1 {
        return Ok(None);
    }
    let mut chosen = Vec::new();
    Ok(pick(&candidates, dr + 1, 0, &mut chosen, &mu)
        .then(|| chosen.into_iter().map(|i| candidates[i].clone()).collect()))
}

/// Checks that `v` is MU to every basis of `set`, then audits every subsystem.
pub fn audit_mu_vector(v: &Ket, set: &MubSet, tol: f64) -> Result<Vec<EntanglementAudit>> {
    let sig = set.signature();
    if v.dim() != sig.total() {
        return Err(Error::DimensionMismatch {
            expected: sig.total(),
            found: v.dim(),
        });
    }
    let target = 1.0 / sig.total() as f64;
    for (b, basis) in set.bases().iter().enumerate() {
        for (i, u) in basis.flat_kets().iter().enumerate() {
            let dev = (dot(u.coords(), v.coords()).norm_sqr() - target).abs();
            if dev > tol {
                return Err(Error::NotMutuallyUnbiased {
                    basis: b,
                    vector: i,
                    deviation: dev,
                });
            }
        }
    }
    (0..sig.len())
        .map(|r| {
            let dr = sig.dim(r)?;
            let rho = partial_trace(v, sig, r)?;
            let dev = rho.mixedness_deviation();
            let chosen = factor_bases(set, r, tol)?;
            let (probabilities, max_p, recon) = match &chosen {
                Some(fb) => {
                    let probs: Vec<Vec<f64>> = fb
                        .iter()
                        .map(|b| {
                            b.vectors
                                .iter()
                                .map(|u| rho.expectation(u))
                                .collect::<Result<_>>()
                        })
                        .collect::<Result<_>>()?;
                    let max_p = probs
                        .iter()
                        .flatten()
                        .map(|p| (p - 1.0 / dr as f64).abs())
                        .fold(0.0, f64::max);
                    let complete: Vec<Vec<Ket>> = fb.iter().map(|b| b.vectors.clone()).collect();
                    let rebuilt = reconstruct_from_complete_set(&rho, &complete)?;
                    (probs, max_p, Some((rebuilt - rho.entries()).norm()))
                }
                None => (Vec::new(), 0.0, None),
            };
            Ok(EntanglementAudit {
                vector: v.clone(),
                subsystem: r,
                mixedness_deviation: dev,
                maximally_entangled: dev <= tol,
                hypothesis_holds: chosen.is_some(),
                factor_bases: chosen.unwrap_or_default(),
                probabilities,
                max_probability_deviation: max_p,
                reconstruction_deviation: recon,
                reduced: rho,
                tol,
            })
        })
        .collect()
}

/// Outcome of a multi-start search for vectors MU to a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuVectorSearch {
    /// Distinct (up to phase) vectors with objective below `tol²` that pass the direct MU check.
    pub vectors: Vec<Ket>,
    pub best_objective: f64,
    pub median_objective: f64,
    pub worst_objective: f64,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
}

/// Minimises `F(v) = Σ_{b,i} (|⟨ψ_i^b|v⟩|² − 1/d)²` from `restarts` Haar-random
/// starts. Restart `k` draws from stream `k` of `seed`, so results do not
/// depend on thread scheduling.
pub fn find_mu_vectors(
    set: &MubSet,
    restarts: usize,
    seed: u64,
    tol: f64,
) -> Result<MuVectorSearch> {
    let objective = MuVectorObjective::for_bases(set.bases())?;
    let d = objective.dim();
    let opts = LmOptions::default();
    let runs: Vec<(f64, Ket)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, k as u64);
            let start = objective.point_of(&haar_ket(d, &mut rng));
            let out = levenberg_marquardt(&objective, start, &opts);
            (out.objective, objective.ket(&out.point))
        })
        .collect();
    let mut objectives: Vec<f64> = runs.iter().map(|(f, _)| *f).collect();
    objectives.sort_by(f64::total_cmp);
    let pick = |q: f64| {
        objectives
            .get(((objectives.len() as f64 - 1.0) * q).round() as usize)
            .copied()
    };

    let all_flat: Vec<Vec<Ket>> = set.bases().iter().map(|b| b.flat_kets()).collect();
    let target = 1.0 / d as f64;
    let mut vectors: Vec<Ket> = Vec::new();
    for (f, v) in runs {
        if f >= tol * tol {
            continue;
        }
        let passes = all_flat
            .iter()
            .flatten()
            .all(|u| (dot(u.coords(), v.coords()).norm_sqr() - target).abs() <= tol);
        let fresh = vectors
            .iter()
            .all(|w| dot(w.coords(), v.coords()).norm() < 1.0 - 1e-6);
        if passes && fresh {
            vectors.push(v.with_canonical_phase());
        }
    }
    Ok(MuVectorSearch {
        vectors,
        best_objective: pick(0.0).unwrap_or(f64::INFINITY),
        median_objective: pick(0.5).unwrap_or(f64::INFINITY),
        worst_objective: pick(1.0).unwrap_or(f64::INFINITY),
        restarts,
        seed,
        tol,
    })
}
