//! Equivalence of sets of product bases.
//!
//! Two sets are equivalent when one maps onto the other by local unitaries,
//! local complex conjugations, phases of single vectors, permutations inside
//! a basis and reordering of the bases. [`fingerprint`] gives invariants that
//! certify inequivalence; [`equivalent`] searches for an explicit witness.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, unitarity_deviation, Ket, MubSet, ProductBasis, ProductKet};
use crate::random::{haar_unitary, random_phase};
use crate::structure::{distinct_rays, find_orthonormal_subset};

/// Grid used to quantise squared overlaps in fingerprints.
pub const FINGERPRINT_QUANTUM: f64 = 1e-6;
/// Two unit vectors match as rays when `1 − |⟨a|b⟩| ≤ MATCH_TOL`.
pub const MATCH_TOL: f64 = 1e-6;

/// Dense complex matrix stored as rows, for serialisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix(pub Vec<Vec<C64>>);

impl ComplexMatrix {
    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let n = self.0.len();
        if self.0.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "matrix rows must form a square".into(),
            ));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| self.0[i][j]))
    }
}

impl From<&DMatrix<C64>> for ComplexMatrix {
    fn from(m: &DMatrix<C64>) -> Self {
        Self(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EquivalenceMove {
    /// `U_r` applied to the `r`-th factor of every vector of every basis.
    LocalUnitary { unitaries: Vec<ComplexMatrix> },
    /// Vector `i` of `basis` is multiplied by `e^{i·phases[i]}` (absorbed into its first factor).
    PerVectorPhase { basis: usize, phases: Vec<f64> },
    /// New vector `i` of `basis` is old vector `permutation[i]`.
    PermuteWithinBasis {
        basis: usize,
        permutation: Vec<usize>,
    },
    /// Complex conjugation of the `subsystem` factor of every vector.
    LocalConjugate { subsystem: usize },
    /// New basis `i` is old basis `order[i]`.
    ReorderBases { order: Vec<usize> },
}

fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if p.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation of length {} for {n} items",
            p.len()
        )));
    }
    for &i in p {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!(
                "{p:?} is not a permutation of 0..{n}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

fn map_factors(set: &MubSet, f: impl Fn(usize, &Ket) -> Result<Ket>) -> Result<Vec<ProductBasis>> {
    set.bases()
        .iter()
        .map(|b| {
            let vectors = b
                .vectors()
                .iter()
                .map(|v| {
                    let factors = v
                        .factors()
                        .iter()
                        .enumerate()
                        .map(|(r, k)| f(r, k))
                        .collect::<Result<Vec<_>>>()?;
                    ProductKet::new(factors)
                })
                .collect::<Result<Vec<_>>>()?;
            ProductBasis::new(b.signature().clone(), vectors)
        })
        .collect()
}

fn check_basis_index(set: &MubSet, basis: usize) -> Result<()> {
    if basis >= set.len() {
        return Err(Error::InvalidIndex {
            index: basis,
            len: set.len(),
        });
    }
    Ok(())
}

/// Applies one move. Unitaries must be unitary to within `1e-9` (entrywise).
pub fn apply_move(set: &MubSet, m: &EquivalenceMove) -> Result<MubSet> {
    let sig = set.signature();
    let rebuild = |bases: Vec<ProductBasis>, names: Vec<String>| {
        MubSet::with_names(bases, names, set.provenance.clone(), set.tol)
    };
    match m {
        EquivalenceMove::LocalUnitary { unitaries } => {
            if unitaries.len() != sig.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} unitaries for {} subsystems",
                    unitaries.len(),
                    sig.len()
                )));
            }
            let us = unitaries
                .iter()
                .map(ComplexMatrix::to_matrix)
                .collect::<Result<Vec<_>>>()?;
            for (r, u) in us.iter().enumerate() {
                if u.nrows() != sig.dims()[r] {
                    return Err(Error::DimensionMismatch {
                        expected: sig.dims()[r],
                        found: u.nrows(),
                    });
                }
                let dev = unitarity_deviation(u);
                if dev > 1e-9 {
                    return Err(Error::NonUnitary(dev));
                }
            }
            rebuild(
                map_factors(set, |r, k| k.apply(&us[r]))?,
                set.names().to_vec(),
            )
        }
        EquivalenceMove::LocalConjugate { subsystem } => {
            sig.check_subsystem(*subsystem)?;
            rebuild(
                map_factors(set, |r, k| {
                    Ok(if r == *subsystem { k.conj() } else { k.clone() })
                })?,
                set.names().to_vec(),
            )
        }
        EquivalenceMove::PerVectorPhase { basis, phases } => {
            check_basis_index(set, *basis)?;
            if phases.len() != sig.total() {
                return Err(Error::InvalidArgument(format!(
                    "{} phases for {} vectors",
                    phases.len(),
                    sig.total()
                )));
            }
            let mut bases = set.bases().to_vec();
            let vectors = bases[*basis]
                .vectors()
                .iter()
                .zip(phases)
                .map(|(v, &phi)| {
                    let mut factors = v.factors().to_vec();
                    factors[0] = factors[0].scaled(C64::from_polar(1.0, phi));
                    ProductKet::new(factors)
                })
                .collect::<Result<Vec<_>>>()?;
            bases[*basis] = ProductBasis::new(sig.clone(), vectors)?;
            rebuild(bases, set.names().to_vec())
        }
        EquivalenceMove::PermuteWithinBasis { basis, permutation } => {
            check_basis_index(set, *basis)?;
            check_permutation(permutation, sig.total())?;
            let mut bases = set.bases().to_vec();
            let old = bases[*basis].vectors();
            let vectors = permutation.iter().map(|&i| old[i].clone()).collect();
            bases[*basis] = ProductBasis::new(sig.clone(), vectors)?;
            rebuild(bases, set.names().to_vec())
        }
        EquivalenceMove::ReorderBases { order } => {
            check_permutation(order, set.len())?;
            rebuild(
                order.iter().map(|&i| set.bases()[i].clone()).collect(),
                order.iter().map(|&i| set.names()[i].clone()).collect(),
            )
        }
    }
}

pub fn apply_moves(set: &MubSet, moves: &[EquivalenceMove]) -> Result<MubSet> {
    moves.iter().try_fold(set.clone(), |s, m| apply_move(&s, m))
}

/// A uniformly chosen move kind with random parameters.
pub fn random_move<R: Rng + ?Sized>(set: &MubSet, rng: &mut R) -> EquivalenceMove {
    let sig = set.signature();
    let d = sig.total();
    match rng.random_range(0..5) {
        0 => EquivalenceMove::LocalUnitary {
            unitaries: sig
                .dims()
                .iter()
                .map(|&n| ComplexMatrix::from(&haar_unitary(n, rng)))
                .collect(),
        },
        1 => EquivalenceMove::PerVectorPhase {
            basis: rng.random_range(0..set.len()),
            phases: (0..d).map(|_| random_phase(rng).arg()).collect(),
        },
        2 => {
            let mut permutation: Vec<usize> = (0..d).collect();
            permutation.shuffle(rng);
            EquivalenceMove::PermuteWithinBasis {
                basis: rng.random_range(0..set.len()),
                permutation,
            }
        }
        3 => EquivalenceMove::LocalConjugate {
            subsystem: rng.random_range(0..sig.len()),
        },
        _ => {
            let mut order: Vec<usize> = (0..set.len()).collect();
            order.shuffle(rng);
            EquivalenceMove::ReorderBases { order }
        }
    }
}

/// Applies `n` random moves; returns the scrambled set and the moves used.
pub fn scramble<R: Rng + ?Sized>(
    set: &MubSet,
    n: usize,
    rng: &mut R,
) -> Result<(MubSet, Vec<EquivalenceMove>)> {
    let mut moves = Vec::with_capacity(n);
    let mut s = set.clone();
    for _ in 0..n {
        let m = random_move(&s, rng);
        s = apply_move(&s, &m)?;
        moves.push(m);
    }
    Ok((s, moves))
}

/// Invariants of a set under every [`EquivalenceMove`], quantised to [`FINGERPRINT_QUANTUM`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub basis_count: usize,
    /// Per unordered pair of bases, the sorted squared overlaps of their vectors; pairs sorted.
    pub pair_overlaps: Vec<Vec<i64>>,
    /// Per basis, the number of distinct factor rays in each subsystem; bases sorted.
    pub factor_counts: Vec<Vec<usize>>,
    /// Per unordered pair of bases (including a basis with itself) and
    /// subsystem, the sorted squared overlaps of distinct factor rays.
    pub factor_overlaps: Vec<Vec<Vec<i64>>>,
}

/// Component in which two fingerprints differ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerprintDifference {
    pub component: String,
    pub detail: String,
}

fn quantise(x: f64) -> i64 {
    (x / FINGERPRINT_QUANTUM).round() as i64
}

pub fn fingerprint(set: &MubSet) -> Fingerprint {
    let bases = set.bases();
    let flat: Vec<Vec<Ket>> = bases.iter().map(ProductBasis::flat_kets).collect();
    let mut pair_overlaps = Vec::new();
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            let mut v: Vec<i64> = flat[i]
                .iter()
                .flat_map(|a| {
                    flat[j]
                        .iter()
                        .map(move |b| quantise(dot(a.coords(), b.coords()).norm_sqr()))
                })
                .collect();
            v.sort_unstable();
            pair_overlaps.push(v);
        }
    }
    pair_overlaps.sort();

    let n = set.signature().len();
    let rays: Vec<Vec<Vec<Ket>>> = bases
        .iter()
        .map(|b| {
            (0..n)
                .map(|r| {
                    let f = b.factors_of(r).expect("valid subsystem");
                    distinct_rays(&f, MATCH_TOL)
                        .into_iter()
                        .map(|i| f[i].clone())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut factor_counts: Vec<Vec<usize>> = rays
        .iter()
        .map(|per| per.iter().map(Vec::len).collect())
        .collect();
    factor_counts.sort();

    let mut factor_overlaps = Vec::new();
    for i in 0..bases.len() {
        for j in i..bases.len() {
            let per_sub: Vec<Vec<i64>> = (0..n)
                .map(|r| {
                    let mut v: Vec<i64> = rays[i][r]
                        .iter()
                        .flat_map(|a| {
                            rays[j][r]
                                .iter()
                                .map(move |b| quantise(dot(a.coords(), b.coords()).norm_sqr()))
                        })
                        .collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            factor_overlaps.push(per_sub);
        }
    }
    factor_overlaps.sort();

    Fingerprint {
        basis_count: bases.len(),
        pair_overlaps,
        factor_counts,
        factor_overlaps,
    }
}

impl Fingerprint {
    /// First differing component, if any.
    pub fn difference(&self, other: &Fingerprint) -> Option<FingerprintDifference> {
        if self.basis_count != other.basis_count {
            return Some(FingerprintDifference {
                component: "basis_count".into(),
                detail: format!("{} vs {}", self.basis_count, other.basis_count),
            });
        }
        if self.factor_counts != other.factor_counts {
            return Some(FingerprintDifference {
                component: "factor_counts".into(),
                detail: format!("{:?} vs {:?}", self.factor_counts, other.factor_counts),
            });
        }
        if self.pair_overlaps != other.pair_overlaps {
            return Some(FingerprintDifference {
                component: "pair_overlaps".into(),
                detail: "sorted squared overlaps between bases differ".into(),
            });
        }
        if self.factor_overlaps != other.factor_overlaps {
            return Some(FingerprintDifference {
                component: "factor_overlaps".into(),
                detail: "sorted squared overlaps between factor rays differ".into(),
            });
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    /// Replaying `witness` on the first set yields the second, vector by vector up to phase.
    Equivalent {
        witness: Vec<EquivalenceMove>,
    },
    Inequivalent {
        separation: FingerprintDifference,
    },
    /// No witness found; `candidates` global checks were made. `exhausted`
    /// means the search space was covered before the budget ran out.
    Unknown {
        candidates: usize,
        exhausted: bool,
    },
}

/// Which local complex conjugations the search may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConjugationMode {
    None,
    /// All subsystems at once or none.
    Global,
    /// Any subset of subsystems.
    PerSubsystem,
}

/// Distinct factor rays of subsystem `r` in every basis.
fn ray_table(set: &MubSet, r: usize) -> Vec<Vec<Ket>> {
    set.bases()
        .iter()
        .map(|b| {
            let f = b.factors_of(r).expect("valid subsystem");
            distinct_rays(&f, MATCH_TOL)
                .into_iter()
                .map(|i| f[i].clone())
                .collect()
        })
        .collect()
}

fn same_ray(a: &Ket, b: &Ket) -> bool {
    1.0 - dot(a.coords(), b.coords()).norm() <= MATCH_TOL
}

/// Candidate unitaries `W` with `W·rays_a[i] = rays_b[i]` as ray sets for every basis `i`.
fn local_candidates(rays_a: &[Vec<Ket>], rays_b: &[Vec<Ket>], d: usize) -> Vec<DMatrix<C64>> {
    let a0: Vec<&Ket> = rays_a[0].iter().collect();
    let Some(frame_idx) = find_orthonormal_subset(&a0, d, MATCH_TOL) else {
        return Vec::new();
    };
    let frame: Vec<&Ket> = frame_idx.iter().map(|&i| a0[i]).collect();
    // Reference ray overlapping every frame vector.
    let reference = rays_a.iter().enumerate().find_map(|(bi, rays)| {
        rays.iter()
            .find(|v| {
                frame
                    .iter()
                    .all(|a| dot(a.coords(), v.coords()).norm() > 1e-6)
            })
            .map(|v| (bi, v))
    });

    // Ordered orthonormal d-tuples among the rays of the first target basis.
    let b0 = &rays_b[0];
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn extend(b0: &[Ket], d: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if stack.len() == d {
            out.push(stack.clone());
            return;
        }
        for i in 0..b0.len() {
            if !stack.contains(&i)
                && stack
                    .iter()
                    .all(|&j| dot(b0[j].coords(), b0[i].coords()).norm() <= 1e-6)
            {
                stack.push(i);
                extend(b0, d, stack, out);
                stack.pop();
            }
        }
    }
    extend(b0, d, &mut stack, &mut tuples);

    let mut out = Vec::new();
    for t in tuples {
        let targets: Vec<&Ket> = t.iter().map(|&i| &b0[i]).collect();
        let phase_sets: Vec<Vec<f64>> = match reference {
            None => vec![vec![0.0; d]],
            Some((bi, v)) => rays_b[bi]
                .iter()
                .filter(|w| {
                    frame.iter().zip(&targets).all(|(a, b)| {
                        (dot(a.coords(), v.coords()).norm() - dot(b.coords(), w.coords()).norm())
                            .abs()
                            <= 1e-6
                    })
                })
                .map(|w| {
                    frame
                        .iter()
                        .zip(&targets)
                        .map(|(a, b)| {
                            dot(b.coords(), w.coords()).arg() - dot(a.coords(), v.coords()).arg()
                        })
                        .collect()
                })
                .collect(),
        };
        for phases in phase_sets {
            let mut w = DMatrix::<C64>::zeros(d, d);
            for ((a, b), phi) in frame.iter().zip(&targets).zip(&phases) {
                let e = C64::from_polar(1.0, *phi);
                for i in 0..d {
                    for j in 0..d {
                        w[(i, j)] += e * b.coords()[i] * a.coords()[j].conj();
                    }
                }
            }
            let maps_all = rays_a.iter().zip(rays_b).all(|(ra, rb)| {
                ra.len() == rb.len()
                    && ra.iter().all(|a| {
                        let img = a.apply(&w).expect("square");
                        rb.iter().any(|b| same_ray(&img, b))
                    })
            });
            if maps_all {
                out.push(w);
            }
        }
    }
    out
}

/// Matches the vectors of `a` (already transformed) to those of `b`:
/// returns `(permutation, phases)` with new vector `l` = old `perm[l]`.
fn match_vectors(a: &ProductBasis, b: &ProductBasis) -> Option<(Vec<usize>, Vec<f64>)> {
    let d = a.len();
    let mut used = vec![false; d];
    let mut perm = vec![0; d];
    let mut phases = vec![0.0; d];
    for (l, bv) in b.vectors().iter().enumerate() {
        let k = (0..d).find(|&k| {
            !used[k]
                && a.vectors()[k]
                    .factors()
                    .iter()
                    .zip(bv.factors())
                    .all(|(x, y)| same_ray(x, y))
        })?;
        used[k] = true;
        perm[l] = k;
        let c: C64 = a.vectors()[k]
            .factors()
            .iter()
            .zip(bv.factors())
            .map(|(x, y)| dot(x.coords(), y.coords()))
            .product();
        phases[l] = c.arg();
    }
    Some((perm, phases))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// True iff every vector of `a` equals the same-position vector of `b` up to phase.
pub fn matches_up_to_phase(a: &MubSet, b: &MubSet, tol: f64) -> bool {
    a.len() == b.len()
        && a.bases().iter().zip(b.bases()).all(|(x, y)| {
            x.flat_kets()
                .iter()
                .zip(y.flat_kets())
                .all(|(u, v)| 1.0 - dot(u.coords(), v.coords()).norm() <= tol)
        })
}

/// Decides equivalence of `a` and `b`. Fingerprint differences give
/// `Inequivalent`; otherwise orderings of the bases and patterns of local
/// conjugations are tried, local unitaries are fixed from orthonormal frames,
/// and every candidate is checked globally. At most `budget` global checks
/// are made before returning `Unknown`.
pub fn equivalent(a: &MubSet, b: &MubSet, budget: usize) -> Result<Verdict> {
    equivalent_with(a, b, budget, ConjugationMode::PerSubsystem)
}

pub fn equivalent_with(
    a: &MubSet,
    b: &MubSet,
    budget: usize,
    mode: ConjugationMode,
) -> Result<Verdict> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch {
            left: a.signature().dims().to_vec(),
            right: b.signature().dims().to_vec(),
        });
    }
    if let Some(separation) = fingerprint(a).difference(&fingerprint(b)) {
        return Ok(Verdict::Inequivalent { separation });
    }
    let sig = a.signature();
    let n = sig.len();
    let m = a.len();
    let counts =
        |s: &MubSet, i: usize| -> Vec<usize> { (0..n).map(|r| ray_table(s, r)[i].len()).collect() };
    let counts_a: Vec<Vec<usize>> = (0..m).map(|i| counts(a, i)).collect();
    let counts_b: Vec<Vec<usize>> = (0..m).map(|i| counts(b, i)).collect();
    let rays_b: Vec<Vec<Vec<Ket>>> = (0..n).map(|r| ray_table(b, r)).collect();

    let mut spent = 0usize;
    for order in permutations(m) {
        if (0..m).any(|j| counts_a[order[j]] != counts_b[j]) {
            continue;
        }
        let reorder = EquivalenceMove::ReorderBases {
            order: order.clone(),
        };
        let reordered = apply_move(a, &reorder)?;
        let full = (1usize << n) - 1;
        let masks: Vec<usize> = match mode {
            ConjugationMode::None => vec![0],
            ConjugationMode::Global => vec![0, full],
            ConjugationMode::PerSubsystem => (0..=full).collect(),
        };
        for mask in masks {
            let conj_moves: Vec<EquivalenceMove> = (0..n)
                .filter(|r| mask >> r & 1 == 1)
                .map(|subsystem| EquivalenceMove::LocalConjugate { subsystem })
                .collect();
            let prepared = apply_moves(&reordered, &conj_moves)?;
            let per_sub: Vec<Vec<DMatrix<C64>>> = (0..n)
                .map(|r| local_candidates(&ray_table(&prepared, r), &rays_b[r], sig.dims()[r]))
                .collect();
            if per_sub.iter().any(Vec::is_empty) {
                continue;
            }
            // Cartesian product of the per-subsystem candidates.
            let mut idx = vec![0usize; n];
            loop {
                if spent >= budget {
                    return Ok(Verdict::Unknown {
                        candidates: spent,
                        exhausted: false,
                    });
                }
                spent += 1;
                let unitaries: Vec<ComplexMatrix> = (0..n)
                    .map(|r| ComplexMatrix::from(&per_sub[r][idx[r]]))
                    .collect();
                let lu = EquivalenceMove::LocalUnitary { unitaries };
                let mapped = apply_move(&prepared, &lu)?;
                let mut fix = Vec::new();
                let ok = (0..m).all(|i| match match_vectors(&mapped.bases()[i], &b.bases()[i]) {
                    Some((permutation, phases)) => {
                        fix.push(EquivalenceMove::PermuteWithinBasis {
                            basis: i,
                            permutation,
                        });
                        fix.push(EquivalenceMove::PerVectorPhase { basis: i, phases });
                        true
                    }
                    None => false,
                });
                if ok {
                    let mut witness = vec![reorder.clone()];
                    witness.extend(conj_moves.iter().cloned());
                    witness.push(lu);
                    witness.extend(fix);
                    if matches_up_to_phase(&apply_moves(a, &witness)?, b, 1e-9) {
                        return Ok(Verdict::Equivalent { witness });
                    }
                }
                let mut r = 0;
                loop {
                    if r == n {
                        break;
                    }
                    idx[r] += 1;
                    if idx[r] < per_sub[r].len() {
                        break;
                    }
                    idx[r] = 0;
                    r += 1;
                }
                if r == n {
                    break;
                }
            }
        }
    }
    Ok(Verdict::Unknown {
        candidates: spent,
        exhausted: true,
    })
}
