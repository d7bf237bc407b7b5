//! Structure of orthonormal product bases.
//!
//! A product basis viewed across the bipartition `r | r̄` has vectors
//! `|a_i⟩ ⊗ |b_i⟩` with `a_i` the factor in subsystem `r` and `b_i` the
//! tensor product of the remaining factors. Two vectors whose `b` factors
//! overlap must have orthogonal `a` factors; iterating this observation from
//! an anchor vector yields an orthonormal basis of `C^{d_r}` among the `a_i`
//! whenever `d_r ∈ {2, 3}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DimensionSignature, Ket, ProductBasis, ProductKet};

/// `1 − |⟨a|b⟩| ≤ tol`: the two unit vectors define the same ray.
pub fn same_ray(a: &Ket, b: &Ket, tol: f64) -> bool {
    1.0 - dot(a.coords(), b.coords()).norm() <= tol
}

/// Indices of one representative per distinct ray, in order of first appearance.
pub fn distinct_rays(kets: &[&Ket], tol: f64) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    for (i, k) in kets.iter().enumerate() {
        if !reps.iter().any(|&j| same_ray(kets[j], k, tol)) {
            reps.push(i);
        }
    }
    reps
}

fn check_pair(v: &ProductKet, w: &ProductKet) -> Result<()> {
    if v.dims() != w.dims() {
        return Err(Error::SignatureMismatch {
            left: v.dims(),
            right: w.dims(),
        });
    }
    Ok(())
}

/// True iff the `r`-th factors are orthogonal, `|⟨v^r|w^r⟩| ≤ tol`.
pub fn r_orthogonal(v: &ProductKet, w: &ProductKet, r: usize, tol: f64) -> Result<bool> {
    check_pair(v, w)?;
    let a = v.factor(r)?;
    let b = w.factor(r)?;
    Ok(dot(a.coords(), b.coords()).norm() <= tol)
}

/// `⟨b_i|b_j⟩` for the complement of subsystem `r`.
fn complement_overlap(
    basis: &ProductBasis,
    r: usize,
    i: usize,
    j: usize,
) -> num_complex::Complex64 {
    let vi = basis.vectors()[i].factors();
    let vj = basis.vectors()[j].factors();
    vi.iter()
        .zip(vj)
        .enumerate()
        .filter(|&(s, _)| s != r)
        .map(|(_, (a, b))| dot(a.coords(), b.coords()))
        .product()
}

/// Index sets from the anchor `κ` (and optionally a second anchor `λ ∈ I_κ`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub subsystem: usize,
    pub kappa: usize,
    /// `I_κ = {i ≠ κ : ⟨b_κ|b_i⟩ ≠ 0}`; these vectors are `r`-orthogonal to `κ`.
    pub i_kappa: Vec<usize>,
    /// `I_κ̄ = {i : ⟨b_κ|b_i⟩ = 0}`.
    pub i_kappa_bar: Vec<usize>,
    pub lambda: Option<usize>,
    /// `I_κλ = {i ∉ {κ, λ} : ⟨b_κ|b_i⟩⟨b_λ|b_i⟩ ≠ 0}`, a subset of `I_κ`.
    pub i_kappa_lambda: Vec<usize>,
    pub i_kappa_lambda_bar: Vec<usize>,
}

/// Splits the basis indices around anchor `kappa` across the bipartition
/// `r | r̄`. An overlap counts as nonzero when its modulus exceeds `tol`.
///
/// Fails with [`Error::StructuralViolation`] when the cardinality bounds
/// `|I_κ| ≥ d_r − 1` or `|I_κλ| ≥ d_r − 2` do not hold, which can only happen
/// for a basis that is not orthonormal.
pub fn partition(
    basis: &ProductBasis,
    r: usize,
    kappa: usize,
    lambda: Option<usize>,
    tol: f64,
) -> Result<PartitionResult> {
    let d = basis.len();
    let dr = basis.signature().dim(r)?;
    if kappa >= d {
        return Err(Error::InvalidIndex {
            index: kappa,
            len: d,
        });
    }
    let mut i_kappa = Vec::new();
    let mut i_kappa_bar = Vec::new();
    for i in (0..d).filter(|&i| i != kappa) {
        if complement_overlap(basis, r, kappa, i).norm() > tol {
            i_kappa.push(i);
        } else {
            i_kappa_bar.push(i);
        }
    }
    if i_kappa.len() + 1 < dr {
        return Err(Error::StructuralViolation(format!(
            "|I_kappa| = {} < d_r - 1 = {} for kappa = {kappa}",
            i_kappa.len(),
            dr - 1
        )));
    }
    let mut result = PartitionResult {
        subsystem: r,
        kappa,
        i_kappa,
        i_kappa_bar,
        lambda: None,
        i_kappa_lambda: Vec::new(),
        i_kappa_lambda_bar: Vec::new(),
    };
    if let Some(lambda) = lambda {
        if lambda >= d {
            return Err(Error::InvalidIndex {
                index: lambda,
                len: d,
            });
        }
        if !result.i_kappa.contains(&lambda) {
            return Err(Error::LambdaNotInIKappa { kappa, lambda });
        }
        for i in (0..d).filter(|&i| i != kappa && i != lambda) {
            let prod =
                complement_overlap(basis, r, kappa, i) * complement_overlap(basis, r, lambda, i);
            // Both factors nonzero, tested separately to avoid underflow of the product.
            let nonzero = complement_overlap(basis, r, kappa, i).norm() > tol
                && complement_overlap(basis, r, lambda, i).norm() > tol
                && prod.norm() > 0.0;
            if nonzero {
                result.i_kappa_lambda.push(i);
            } else {
                result.i_kappa_lambda_bar.push(i);
            }
        }
        if result.i_kappa_lambda.len() + 2 < dr {
            return Err(Error::StructuralViolation(format!(
                "|I_kappa_lambda| = {} < d_r - 2 = {} for kappa = {kappa}, lambda = {lambda}",
                result.i_kappa_lambda.len(),
                dr - 2
            )));
        }
        result.lambda = Some(lambda);
    }
    Ok(result)
}

/// Indices of `d_r` basis vectors whose `r`-th factors are pairwise orthogonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthoSubset {
    pub subsystem: usize,
    pub indices: Vec<usize>,
}

impl OrthoSubset {
    pub fn factors<'a>(&self, basis: &'a ProductBasis) -> Vec<&'a Ket> {
        self.indices
            .iter()
            .map(|&i| &basis.vectors()[i].factors()[self.subsystem])
            .collect()
    }
}

fn pairwise_orthogonal(kets: &[&Ket], tol: f64) -> bool {
    kets.iter().enumerate().all(|(i, a)| {
        kets[i + 1..]
            .iter()
            .all(|b| dot(a.coords(), b.coords()).norm() <= tol)
    })
}

/// Finds `d_r` vectors, starting from anchor `kappa`, whose `r`-factors form
/// an orthonormal basis of `C^{d_r}`, using the first-stage set `I_κ` and for
/// `d_r = 3` the second-stage set `I_κλ`. Only `d_r ∈ {2, 3}` is supported.
pub fn extract_ortho_subset(
    basis: &ProductBasis,
    r: usize,
    kappa: usize,
    tol: f64,
) -> Result<OrthoSubset> {
    let dr = basis.signature().dim(r)?;
    if !(dr == 2 || dr == 3) {
        return Err(Error::UnsupportedDimension(dr));
    }
    let first = partition(basis, r, kappa, None, tol)?;
    let factor = |i: usize| &basis.vectors()[i].factors()[r];
    let candidates: Vec<Vec<usize>> = if dr == 2 {
        first.i_kappa.iter().map(|&l| vec![kappa, l]).collect()
    } else {
        let mut out = Vec::new();
        for &lambda in &first.i_kappa {
            let second = partition(basis, r, kappa, Some(lambda), tol)?;
            out.extend(
                second
                    .i_kappa_lambda
                    .iter()
                    .map(|&m| vec![kappa, lambda, m]),
            );
        }
        out
    };
    candidates
        .into_iter()
        .find(|idx| {
            let ks: Vec<&Ket> = idx.iter().map(|&i| factor(i)).collect();
            pairwise_orthogonal(&ks, tol)
        })
        .map(|indices| OrthoSubset {
            subsystem: r,
            indices,
        })
        .ok_or_else(|| {
            Error::StructuralViolation(format!(
                "no orthonormal subset of subsystem {r} found from anchor {kappa}"
            ))
        })
}

/// Backtracking search for `m` pairwise orthogonal kets among `kets`; returns their positions.
pub fn find_orthonormal_subset(kets: &[&Ket], m: usize, tol: f64) -> Option<Vec<usize>> {
    fn extend(kets: &[&Ket], m: usize, tol: f64, start: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == m {
            return true;
        }
        for i in start..kets.len() {
            if chosen
                .iter()
                .all(|&j| dot(kets[j].coords(), kets[i].coords()).norm() <= tol)
            {
                chosen.push(i);
                if extend(kets, m, tol, i + 1, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let reps = distinct_rays(kets, tol);
    let rep_kets: Vec<&Ket> = reps.iter().map(|&i| kets[i]).collect();
    let mut chosen = Vec::with_capacity(m);
    extend(&rep_kets, m, tol, 0, &mut chosen).then(|| chosen.into_iter().map(|i| reps[i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    Direct,
    Indirect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisClass {
    pub kind: BasisKind,
    /// Per subsystem, the number of orthonormal bases of `C^{d_r}` needed to
    /// hold the distinct factor rays: `⌈rays / d_r⌉`.
    pub per_subsystem_basis_count: Vec<usize>,
    pub per_subsystem_ray_count: Vec<usize>,
}

/// Direct iff every subsystem carries exactly `d_r` distinct factor rays.
/// Rays are compared up to phase (`1 − |⟨a|b⟩| ≤ tol`).
pub fn classify(basis: &ProductBasis, tol: f64) -> BasisClass {
    let sig = basis.signature();
    let mut rays = Vec::with_capacity(sig.len());
    let mut counts = Vec::with_capacity(sig.len());
    for (r, &dr) in sig.dims().iter().enumerate() {
        let factors = basis.factors_of(r).expect("valid subsystem");
        let n = distinct_rays(&factors, tol).len();
        rays.push(n);
        counts.push(n.div_ceil(dr).max(1));
    }
    BasisClass {
        kind: if counts.iter().all(|&c| c == 1) {
            BasisKind::Direct
        } else {
            BasisKind::Indirect
        },
        per_subsystem_basis_count: counts,
        per_subsystem_ray_count: rays,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundStatus {
    Proven,
    Conjectured,
}

/// How the number of MU bases of a subsystem was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MubCountSource {
    /// Prime power: the complete set of `d + 1` exists.
    Exact,
    /// `d = 6`: the conjectured maximum of three.
    ConjecturedMaximum,
    /// Other composite dimensions: tensor-product lower bound `min p^k + 1` over prime-power factors.
    LowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumedMubCount {
    pub dim: usize,
    pub count: usize,
    pub source: MubCountSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: usize,
    pub status: BoundStatus,
    /// Subsystem whose dimension limits the bound.
    pub limiting_subsystem: usize,
    pub assumed: Vec<AssumedMubCount>,
}

fn prime_power_factors(mut d: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= d {
        if d.is_multiple_of(p) {
            let mut q = 1;
            while d.is_multiple_of(p) {
                d /= p;
                q *= p;
            }
            out.push(q);
        }
        p += 1;
    }
    if d > 1 {
        out.push(d);
    }
    out
}

/// Known (or assumed) number of MU bases in dimension `d`.
pub fn known_mub_count(d: usize) -> AssumedMubCount {
    let factors = prime_power_factors(d);
    if factors.len() == 1 {
        AssumedMubCount {
            dim: d,
            count: d + 1,
            source: MubCountSource::Exact,
        }
    } else if d == 6 {
        AssumedMubCount {
            dim: d,
            count: 3,
            source: MubCountSource::ConjecturedMaximum,
        }
    } else {
        let count = factors.iter().map(|q| q + 1).min().unwrap_or(1);
        AssumedMubCount {
            dim: d,
            count,
            source: MubCountSource::LowerBound,
        }
    }
}

/// Upper bound on the number of MU product bases for a signature.
///
/// If the smallest subsystem has dimension 2 or 3 the bound `d_min + 1` is
/// proven. Otherwise the bound is the number of MU bases of the subsystem
/// with the fewest of them, and is conjectural.
pub fn mu_product_bound(sig: &DimensionSignature) -> BoundReport {
    let assumed: Vec<AssumedMubCount> = sig.dims().iter().map(|&d| known_mub_count(d)).collect();
    let (min_r, &min_d) = sig
        .dims()
        .iter()
        .enumerate()
        .min_by_key(|&(_, d)| *d)
        .expect("nonempty signature");
    if min_d <= 3 {
        return BoundReport {
            bound: min_d + 1,
            status: BoundStatus::Proven,
            limiting_subsystem: min_r,
            assumed,
        };
    }
    let (limiting, least) = assumed
        .iter()
        .enumerate()
        .min_by_key(|&(_, a)| a.count)
        .expect("nonempty signature");
    BoundReport {
        bound: least.count,
        status: BoundStatus::Conjectured,
        limiting_subsystem: limiting,
        assumed,
    }
}

/// Partitions the positions of `kets` into groups of `m` pairwise
/// orthogonal kets (exact cover by orthonormal bases), by backtracking.
pub fn group_into_bases(kets: &[&Ket], m: usize, tol: f64) -> Option<Vec<Vec<usize>>> {
    let n = kets.len();
    if m == 0 || !n.is_multiple_of(m) {
        return None;
    }
    let orth: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i != j && dot(kets[i].coords(), kets[j].coords()).norm() <= tol)
                .collect()
        })
        .collect();

    struct Search<'a> {
        orth: &'a [Vec<bool>],
        m: usize,
        used: Vec<bool>,
        groups: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn solve(&mut self) -> bool {
            let Some(e) = self.used.iter().position(|&u| !u) else {
                return true;
            };
            self.used[e] = true;
            let mut group = vec![e];
            let ok = self.complete(&mut group, e + 1);
            self.used[e] = false;
            ok
        }

        fn complete(&mut self, group: &mut Vec<usize>, start: usize) -> bool {
            if group.len() == self.m {
                self.groups.push(group.clone());
                if self.solve() {
                    return true;
                }
                self.groups.pop();
                return false;
            }
            for j in start..self.used.len() {
                if self.used[j] || !group.iter().all(|&g| self.orth[g][j]) {
                    continue;
                }
                self.used[j] = true;
                group.push(j);
                let ok = self.complete(group, j + 1);
                group.pop();
                self.used[j] = false;
                if ok {
                    return true;
                }
            }
            false
        }
    }

    let mut search = Search {
        orth: &orth,
        m,
        used: vec![false; n],
        groups: Vec::new(),
    };
    search.solve().then_some(search.groups)
}

/// Outcome of grouping the factors of a bipartite product basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupingResult {
    /// `d_2` groups of basis-vector indices whose first factors form orthonormal bases of `C^{d_1}`.
    pub first: Option<Vec<Vec<usize>>>,
    /// `d_1` groups whose second factors form orthonormal bases of `C^{d_2}`.
    pub second: Option<Vec<Vec<usize>>>,
}

impl GroupingResult {
    pub fn success(&self) -> bool {
        self.first.is_some() && self.second.is_some()
    }
}

/// Failure witness for the grouping property, kept for persistence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupingCounterexample {
    pub basis: ProductBasis,
    pub first_failed: bool,
    pub second_failed: bool,
    pub tol: f64,
}

/// Tries to group the first factors into `d_2` orthonormal bases of
/// `C^{d_1}` and the second factors into `d_1` orthonormal bases of
/// `C^{d_2}`. Signatures with more than two subsystems are treated as
/// `d_1 × (d/d_1)`.
pub fn factor_grouping(basis: &ProductBasis, tol: f64) -> GroupingResult {
    let sig = basis.signature();
    let d1 = sig.dims()[0];
    let d2 = sig.total() / d1;
    let firsts: Vec<&Ket> = basis.vectors().iter().map(|v| &v.factors()[0]).collect();
    let seconds: Vec<Ket> = basis
        .vectors()
        .iter()
        .map(|v| v.complement(0).unwrap_or_else(|_| Ket::basis_state(1, 0)))
        .collect();
    let second_refs: Vec<&Ket> = seconds.iter().collect();
    let (first, second) = if d2 == 1 {
        (
            group_into_bases(&firsts, d1, tol),
            Some((0..d1).map(|i| vec![i]).collect()),
        )
    } else {
        (
            group_into_bases(&firsts, d1, tol),
            group_into_bases(&second_refs, d2, tol),
        )
    };
    GroupingResult { first, second }
}

pub fn grouping_counterexample(
    basis: &ProductBasis,
    result: &GroupingResult,
    tol: f64,
) -> Option<GroupingCounterexample> {
    (!result.success()).then(|| GroupingCounterexample {
        basis: basis.clone(),
        first_failed: result.first.is_none(),
        second_failed: result.second.is_none(),
        tol,
    })
}
