//! Dense complex kernel for small multi-qudit spaces.
//!
//! Tensor products use a row-major index convention everywhere in the crate:
//! the first factor is the slowest-varying index, so for dims `(d1, d2, d3)`
//! the flat index of `(i1, i2, i3)` is `(i1 * d2 + i2) * d3 + i3`.
//! Subsystem indices are zero-based.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for pass/fail predicates.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Tolerance for self-consistency checks of exact constructions.
pub const CONSISTENCY_TOL: f64 = 1e-12;
/// Largest norm deviation accepted for a ket that is not explicitly renormalized.
pub const NORM_TOL: f64 = 1e-6;

/// Ordered subsystem dimensions `d_1 … d_n` with their product.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimensionSignature {
    dims: Vec<usize>,
    total: usize,
}

impl DimensionSignature {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSignature("no subsystems".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSignature(format!(
                "subsystem dimension {d} is smaller than 2"
            )));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidSignature("total dimension overflows".into()))?;
        Ok(Self { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of subsystems `n`.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self, r: usize) -> Result<usize> {
        self.dims.get(r).copied().ok_or(Error::InvalidSubsystem {
            index: r,
            count: self.dims.len(),
        })
    }

    /// `d / d_r`.
    pub fn complement_dim(&self, r: usize) -> Result<usize> {
        Ok(self.total / self.dim(r)?)
    }

    pub fn check_subsystem(&self, r: usize) -> Result<()> {
        self.dim(r).map(|_| ())
    }

    /// Splits a flat index into per-subsystem indices.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

impl TryFrom<Vec<usize>> for DimensionSignature {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<DimensionSignature> for Vec<usize> {
    fn from(sig: DimensionSignature) -> Self {
        sig.dims
    }
}

impl std::fmt::Display for DimensionSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// A vector in `C^d` with dense coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ket {
    coords: Vec<C64>,
    normalized: bool,
}

impl Ket {
    /// Builds a normalized ket, rejecting inputs whose norm is off by more than [`NORM_TOL`].
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                norm,
                limit: NORM_TOL,
            });
        }
        Ok(Self {
            coords,
            normalized: true,
        })
    }

    /// Rescales `coords` to unit norm.
    pub fn normalize(mut coords: Vec<C64>) -> Result<Self> {
        let n = norm(&coords);
        if coords.is_empty() || n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized {
                norm: n,
                limit: NORM_TOL,
            });
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self {
            coords,
            normalized: true,
        })
    }

    /// Wraps arbitrary coordinates without any norm check.
    pub fn raw(coords: Vec<C64>) -> Self {
        Self {
            coords,
            normalized: false,
        }
    }

    pub fn basis_state(d: usize, i: usize) -> Self {
        let mut coords = vec![C64::new(0.0, 0.0); d];
        coords[i] = C64::new(1.0, 0.0);
        Self {
            coords,
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<C64> {
        self.coords
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn conj(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c.conj()).collect(),
            normalized: self.normalized,
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c * factor).collect(),
            normalized: self.normalized && (factor.norm() - 1.0).abs() <= NORM_TOL,
        }
    }

    /// Applies a square matrix; the result keeps the normalized flag (callers pass unitaries).
    pub fn apply(&self, m: &DMatrix<C64>) -> Result<Self> {
        if m.ncols() != self.dim() || m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.ncols(),
            });
        }
        let coords = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * self.coords[j]).sum())
            .collect();
        Ok(Self {
            coords,
            normalized: self.normalized,
        })
    }

    /// Multiplies by a phase so that the first coordinate with modulus above `1e-12` is real positive.
    pub fn with_canonical_phase(&self) -> Self {
        match self.coords.iter().find(|c| c.norm() > 1e-12) {
            Some(c) => self.scaled(c.conj() / c.norm()),
            None => self.clone(),
        }
    }
}

fn norm(coords: &[C64]) -> f64 {
    coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩` without dimension check.
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Kronecker product of the factors, first factor slowest.
pub fn tensor(factors: &[Ket]) -> Result<Ket> {
    if factors.is_empty() {
        return Err(Error::EmptyFactors);
    }
    let mut coords = vec![C64::new(1.0, 0.0)];
    for f in factors {
        if f.dim() == 0 {
            return Err(Error::EmptyFactors);
        }
        coords = coords
            .iter()
            .flat_map(|a| f.coords.iter().map(move |b| a * b))
            .collect();
    }
    Ok(Ket {
        coords,
        normalized: factors.iter().all(|f| f.normalized),
    })
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn inner(a: &Ket, b: &Ket) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(dot(&a.coords, &b.coords))
}

/// Single-subsystem density matrix. Serialised as a list of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<C64>> = self
            .entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom(
                "density matrix rows must form a square",
            ));
        }
        Ok(Self {
            entries: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        })
    }
}

impl DensityMatrix {
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn pure(v: &Ket) -> Self {
        let n = v.dim();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| v.coords[i] * v.coords[j].conj()),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(d, d) / C64::new(d as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `⟨v|ρ|v⟩`.
    pub fn expectation(&self, v: &Ket) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += v.coords[i].conj() * self.entries[(i, j)] * v.coords[j];
            }
        }
        Ok(acc.re)
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok((&self.entries - &other.entries).norm())
    }

    /// `‖ρ − I/d‖_F`.
    pub fn mixedness_deviation(&self) -> f64 {
        (&self.entries
            - DMatrix::identity(self.dim(), self.dim()) / C64::new(self.dim() as f64, 0.0))
        .norm()
    }

    /// `‖ρ² − ρ‖_F`.
    pub fn projector_deviation(&self) -> f64 {
        (&self.entries * &self.entries - &self.entries).norm()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm()
    }

    /// Checks Hermiticity, unit trace and positivity at `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        if self.hermiticity_deviation() > tol || (self.trace() - C64::new(1.0, 0.0)).norm() > tol {
            return false;
        }
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().all(|&l| l >= -tol)
    }
}

/// Reduced state of subsystem `keep` of `|v⟩⟨v|`.
pub fn partial_trace(v: &Ket, sig: &DimensionSignature, keep: usize) -> Result<DensityMatrix> {
    if v.dim() != sig.total() {
        return Err(Error::DimensionMismatch {
            expected: sig.total(),
            found: v.dim(),
        });
    }
    let dk = sig.dim(keep)?;
    // Strides: idx = outer * (dk * inner) + a * inner + rest_inner.
    let inner_size: usize = sig.dims()[keep + 1..].iter().product();
    let outer_size: usize = sig.dims()[..keep].iter().product();
    let mut rho = DMatrix::from_element(dk, dk, C64::new(0.0, 0.0));
    for o in 0..outer_size {
        for t in 0..inner_size {
            let base = o * dk * inner_size + t;
            for a in 0..dk {
                let va = v.coords[base + a * inner_size];
                if va == C64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..dk {
                    rho[(a, b)] += va * v.coords[base + b * inner_size].conj();
                }
            }
        }
    }
    Ok(DensityMatrix { entries: rho })
}

/// Outcome of an orthonormality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    /// `max |⟨b_i|b_j⟩ − δ_ij|`.
    pub max_deviation: f64,
    pub worst_pair: (usize, usize),
    pub len: usize,
    pub dim: usize,
    pub tol: f64,
}

pub fn validate_orthonormal(basis: &[Ket], tol: f64) -> ValidationReport {
    let dim = basis.first().map_or(0, Ket::dim);
    let mut max_deviation: f64 = 0.0;
    let mut worst_pair = (0, 0);
    let mut dims_ok = true;
    for (i, a) in basis.iter().enumerate() {
        if a.dim() != dim {
            dims_ok = false;
            continue;
        }
        for (j, b) in basis.iter().enumerate().skip(i) {
            if b.dim() != dim {
                continue;
            }
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (dot(&a.coords, &b.coords) - C64::new(target, 0.0)).norm();
            if dev > max_deviation {
                max_deviation = dev;
                worst_pair = (i, j);
            }
        }
    }
    ValidationReport {
        pass: dims_ok && !basis.is_empty() && basis.len() == dim && max_deviation <= tol,
        max_deviation,
        worst_pair,
        len: basis.len(),
        dim,
        tol,
    }
}

/// A product vector `|ψ^1⟩ ⊗ … ⊗ |ψ^n⟩` stored factor-wise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductKet {
    factors: Vec<Ket>,
}

impl ProductKet {
    /// Every factor must be normalized (within [`NORM_TOL`]).
    pub fn new(factors: Vec<Ket>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyFactors);
        }
        for f in &factors {
            let n = f.norm();
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized {
                    norm: n,
                    limit: NORM_TOL,
                });
            }
        }
        Ok(Self { factors })
    }

    pub(crate) fn from_factors_unchecked(factors: Vec<Ket>) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &[Ket] {
        &self.factors
    }

    pub fn factor(&self, r: usize) -> Result<&Ket> {
        self.factors.get(r).ok_or(Error::InvalidSubsystem {
            index: r,
            count: self.factors.len(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Ket::dim).collect()
    }

    pub fn signature(&self) -> Result<DimensionSignature> {
        DimensionSignature::new(self.dims())
    }

    pub fn matches(&self, sig: &DimensionSignature) -> bool {
        self.factors.len() == sig.len()
            && self
                .factors
                .iter()
                .zip(sig.dims())
                .all(|(f, &d)| f.dim() == d)
    }

    /// Flattened ket.
    pub fn to_ket(&self) -> Ket {
        tensor(&self.factors).expect("product kets are never empty")
    }

    /// Tensor product of the factors other than `r`.
    pub fn complement(&self, r: usize) -> Result<Ket> {
        self.factor(r)?;
        let rest: Vec<Ket> = self
            .factors
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != r)
            .map(|(_, f)| f.clone())
            .collect();
        tensor(&rest)
    }
}

/// Checks that the product kets reproduce `flat` to within `tol` in every coordinate.
pub fn tensor_matches(pk: &ProductKet, flat: &Ket, tol: f64) -> bool {
    let t = pk.to_ket();
    t.dim() == flat.dim()
        && t.coords
            .iter()
            .zip(&flat.coords)
            .all(|(a, b)| (a - b).norm() <= tol)
}

/// `d` product kets over a common signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductBasis {
    signature: DimensionSignature,
    vectors: Vec<ProductKet>,
}

impl ProductBasis {
    /// Checks shape only; use [`ProductBasis::validate`] for orthonormality.
    pub fn new(signature: DimensionSignature, vectors: Vec<ProductKet>) -> Result<Self> {
        if vectors.len() != signature.total() {
            return Err(Error::NotABasis {
                dim: signature.total(),
                found: vectors.len(),
            });
        }
        if let Some(v) = vectors.iter().find(|v| !v.matches(&signature)) {
            return Err(Error::SignatureMismatch {
                left: signature.dims().to_vec(),
                right: v.dims(),
            });
        }
        Ok(Self { signature, vectors })
    }

    /// Direct product basis from one orthonormal basis per subsystem, vectors in row-major order.
    pub fn direct(factor_bases: &[Vec<Ket>]) -> Result<Self> {
        let dims: Vec<usize> = factor_bases.iter().map(|b| b.len()).collect();
        let sig = DimensionSignature::new(dims)?;
        for (b, &d) in factor_bases.iter().zip(sig.dims()) {
            if let Some(k) = b.iter().find(|k| k.dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: k.dim(),
                });
            }
        }
        let vectors = (0..sig.total())
            .map(|flat| {
                let idx = sig.multi_index(flat);
                ProductKet::new(
                    idx.iter()
                        .zip(factor_bases)
                        .map(|(&i, b)| b[i].clone())
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sig, vectors)
    }

    pub fn signature(&self) -> &DimensionSignature {
        &self.signature
    }

    pub fn vectors(&self) -> &[ProductKet] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn flat_kets(&self) -> Vec<Ket> {
        self.vectors.iter().map(ProductKet::to_ket).collect()
    }

    /// Factors in subsystem `r`, one per basis vector.
    pub fn factors_of(&self, r: usize) -> Result<Vec<&Ket>> {
        self.signature.check_subsystem(r)?;
        Ok(self.vectors.iter().map(|v| &v.factors[r]).collect())
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        validate_orthonormal(&self.flat_kets(), tol)
    }
}

/// Ordered collection of product bases, normally pairwise mutually unbiased.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MubSet {
    signature: DimensionSignature,
    bases: Vec<ProductBasis>,
    names: Vec<String>,
    pub provenance: String,
    pub tol: f64,
}

impl MubSet {
    pub fn new(bases: Vec<ProductBasis>, provenance: impl Into<String>, tol: f64) -> Result<Self> {
        let names = (0..bases.len()).map(|i| format!("B{i}")).collect();
        Self::with_names(bases, names, provenance, tol)
    }

    pub fn with_names(
        bases: Vec<ProductBasis>,
        names: Vec<String>,
        provenance: impl Into<String>,
        tol: f64,
    ) -> Result<Self> {
        let first = bases
            .first()
            .ok_or_else(|| Error::InvalidArgument("a basis set needs at least one basis".into()))?;
        let signature = first.signature().clone();
        if let Some(b) = bases.iter().find(|b| *b.signature() != signature) {
            return Err(Error::SignatureMismatch {
                left: signature.dims().to_vec(),
                right: b.signature().dims().to_vec(),
            });
        }
        if names.len() != bases.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} bases",
                names.len(),
                bases.len()
            )));
        }
        Ok(Self {
            signature,
            bases,
            names,
            provenance: provenance.into(),
            tol,
        })
    }

    pub fn signature(&self) -> &DimensionSignature {
        &self.signature
    }

    pub fn bases(&self) -> &[ProductBasis] {
        &self.bases
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

/// `max |U†U − I|` entrywise.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<C64>::identity(n, n)).camax()
}

/// Columns of a square matrix as kets (no norm check).
pub fn columns(m: &DMatrix<C64>) -> Vec<Ket> {
    (0..m.ncols())
        .map(|j| Ket::raw(m.column(j).iter().copied().collect()))
        .map(|k| Ket {
            normalized: (k.norm() - 1.0).abs() <= NORM_TOL,
            ..k
        })
        .collect()
}

/// Square matrix whose columns are the given kets.
pub fn from_columns(kets: &[Ket]) -> DMatrix<C64> {
    let n = kets.first().map_or(0, Ket::dim);
    DMatrix::from_fn(n, kets.len(), |i, j| kets[j].coords[i])
}
