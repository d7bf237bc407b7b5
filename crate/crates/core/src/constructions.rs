//! Canonical bases and the maximal MU product-basis constructions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{Error, Result};
use crate::linalg::{DimensionSignature, Ket, MubSet, ProductBasis, ProductKet, CONSISTENCY_TOL};
use crate::mu::are_product_bases_mu;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `ω^k` for a `p`-th root of unity.
pub fn root_of_unity(p: usize, k: i64) -> C64 {
    let e = k.rem_euclid(p as i64) as f64;
    C64::from_polar(1.0, TAU * e / p as f64)
}

/// Heisenberg–Weyl phase and shift operators for `p ∈ {2, 3}`.
///
/// `Z|j⟩ = ω^j|j⟩` and `X|j⟩ = |j+1⟩`, so `ZX = ω XZ`.
#[derive(Clone, Debug)]
pub struct OperatorLibrary {
    pub p: usize,
    pub omega: C64,
    pub z: DMatrix<C64>,
    pub x: DMatrix<C64>,
    pub xz: DMatrix<C64>,
    pub xz2: DMatrix<C64>,
}

impl OperatorLibrary {
    pub fn new(p: usize) -> Result<Self> {
        if !(p == 2 || p == 3) {
            return Err(Error::UnsupportedDimension(p));
        }
        let z = phase_operator(p);
        let x = shift_operator(p);
        let xz = &x * &z;
        let xz2 = &x * &z * &z;
        Ok(Self {
            p,
            omega: root_of_unity(p, 1),
            z,
            x,
            xz,
            xz2,
        })
    }

    /// Operators whose eigenbases are, in order, the members of the
    /// complete set returned by [`pauli_triple`] or [`weyl_quadruple_d3`].
    ///
    /// For `p = 2` these are `σ_z, σ_x, σ_y` (`σ_y = i·XZ`). For `p = 3` the
    /// third and fourth bases of the literal quadruple are eigenbases of
    /// `XZ²` and `XZ` respectively under the `ZX = ωXZ` convention.
    pub fn eigenbasis_operators(&self) -> Vec<DMatrix<C64>> {
        match self.p {
            2 => vec![self.z.clone(), self.x.clone(), &self.xz * c(0.0, 1.0)],
            _ => vec![
                self.z.clone(),
                self.x.clone(),
                self.xz2.clone(),
                self.xz.clone(),
            ],
        }
    }
}

pub fn phase_operator(p: usize) -> DMatrix<C64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            root_of_unity(p, i as i64)
        } else {
            c(0.0, 0.0)
        }
    })
}

pub fn shift_operator(p: usize) -> DMatrix<C64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == (j + 1) % p {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn normalized(coords: Vec<C64>) -> Ket {
    Ket::normalize(coords).expect("nonzero construction vector")
}

/// Eigenbases of `σ_z`, `σ_x`, `σ_y`: columns `(1,0),(0,1)`; `(1,1),(1,−1)`; `(1,i),(1,−i)`, normalized.
pub fn pauli_triple() -> [Vec<Ket>; 3] {
    let h = FRAC_1_SQRT_2;
    [
        vec![Ket::basis_state(2, 0), Ket::basis_state(2, 1)],
        vec![
            Ket::new(vec![c(h, 0.0), c(h, 0.0)]).unwrap(),
            Ket::new(vec![c(h, 0.0), c(-h, 0.0)]).unwrap(),
        ],
        vec![
            Ket::new(vec![c(h, 0.0), c(0.0, h)]).unwrap(),
            Ket::new(vec![c(h, 0.0), c(0.0, -h)]).unwrap(),
        ],
    ]
}

/// The complete set of four MU bases of `C³`, columns taken verbatim from
/// the standard matrices (`ω = e^{2πi/3}`):
/// identity; `[1 1 1; 1 ω ω²; 1 ω² ω]`; `[1 1 1; ω ω² 1; ω 1 ω²]`; `[1 1 1; ω² 1 ω; ω² ω 1]`.
pub fn weyl_quadruple_d3() -> [Vec<Ket>; 4] {
    const EXPONENTS: [[[i64; 3]; 3]; 3] = [
        [[0, 0, 0], [0, 1, 2], [0, 2, 1]],
        [[0, 1, 1], [0, 2, 0], [0, 0, 2]],
        [[0, 2, 2], [0, 0, 1], [0, 1, 0]],
    ];
    let from_exponents = |cols: &[[i64; 3]; 3]| -> Vec<Ket> {
        cols.iter()
            .map(|col| normalized(col.iter().map(|&e| root_of_unity(3, e)).collect()))
            .collect()
    };
    [
        (0..3).map(|i| Ket::basis_state(3, i)).collect(),
        from_exponents(&EXPONENTS[0]),
        from_exponents(&EXPONENTS[1]),
        from_exponents(&EXPONENTS[2]),
    ]
}

fn is_prime(n: usize) -> bool {
    n >= 2
        && (2..)
            .take_while(|k| k * k <= n)
            .all(|k| !n.is_multiple_of(k))
}

/// Complete set of `p + 1` MU bases in odd prime dimension `p`: the standard
/// basis followed by the eigenbases of `X Z^k`, `k = 0 … p−1`, each ordered by
/// eigenvalue `ω^0, ω^1, …`.
pub fn weyl_complete_set(p: usize) -> Result<Vec<Vec<Ket>>> {
    if !is_prime(p) || p == 2 {
        return Err(Error::UnsupportedDimension(p));
    }
    let pi = p as i64;
    let mut out = vec![(0..p).map(|i| Ket::basis_state(p, i)).collect::<Vec<_>>()];
    for k in 0..pi {
        let basis = (0..pi)
            .map(|l| {
                // v_j = ω^{k j(j−1)/2 − l j}: eigenvector of X Z^k with eigenvalue ω^l.
                normalized(
                    (0..pi)
                        .map(|j| root_of_unity(p, k * (j * (j - 1) / 2) - l * j))
                        .collect(),
                )
            })
            .collect();
        out.push(basis);
    }
    Ok(out)
}

/// Single-qudit complete set used by the qubit and qutrit constructions.
pub fn small_complete_set(p: usize) -> Result<Vec<Vec<Ket>>> {
    match p {
        2 => Ok(pauli_triple().to_vec()),
        3 => Ok(weyl_quadruple_d3().to_vec()),
        _ => Err(Error::UnsupportedDimension(p)),
    }
}

fn tensor_power_set(p: usize, n: usize, provenance: &str, names: &[&str]) -> Result<MubSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let singles = small_complete_set(p)?;
    let bases = singles
        .iter()
        .map(|b| ProductBasis::direct(&vec![b.clone(); n]))
        .collect::<Result<Vec<_>>>()?;
    MubSet::with_names(
        bases,
        names.iter().map(|s| s.to_string()).collect(),
        provenance,
        CONSISTENCY_TOL,
    )
}

/// The triple of direct product bases `z^{⊗n}, x^{⊗n}, y^{⊗n}` in `d = 2^n`.
pub fn canonical_qubit_triple(n: usize) -> Result<MubSet> {
    tensor_power_set(
        2,
        n,
        &format!("canonical qubit triple, n = {n}"),
        &["z", "x", "y"],
    )
}

/// The quadruple of direct product bases built from the four MU bases of `C³` in `d = 3^n`.
pub fn canonical_qutrit_quadruple(n: usize) -> Result<MubSet> {
    tensor_power_set(
        3,
        n,
        &format!("canonical qutrit quadruple, n = {n}"),
        &["z", "x", "y", "w"],
    )
}

/// Basis `b` of the small block `(C^p)^{⊗k}`: tensor power of the `b`-th
/// single-qudit basis, labelled `j = 0 … p^k−1` in row-major order.
pub fn small_block_basis(p: usize, k: usize, b: usize) -> Result<Vec<Vec<Ket>>> {
    let singles = small_complete_set(p)?;
    let single = singles.get(b).ok_or(Error::InvalidIndex {
        index: b,
        len: singles.len(),
    })?;
    let sig = DimensionSignature::new(vec![p; k])?;
    Ok((0..sig.total())
        .map(|flat| {
            sig.multi_index(flat)
                .into_iter()
                .map(|i| single[i].clone())
                .collect()
        })
        .collect())
}

/// Choice of complement basis `G(j_b)` for every eigenstate label `j` of every small-block basis `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisAssignment {
    p: usize,
    k: usize,
    sets: Vec<Vec<ProductBasis>>,
}

impl BasisAssignment {
    /// `sets[b][j]` is `G(j_b)`; there must be `p + 1` sets of `p^k` bases each.
    pub fn new(p: usize, k: usize, sets: Vec<Vec<ProductBasis>>) -> Result<Self> {
        if !(p == 2 || p == 3) {
            return Err(Error::UnsupportedDimension(p));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("small block needs k >= 1".into()));
        }
        let labels = p.pow(k as u32);
        if sets.len() != p + 1 {
            return Err(Error::InvalidAssignment(format!(
                "{} sets given, {} required",
                sets.len(),
                p + 1
            )));
        }
        if let Some((b, s)) = sets.iter().enumerate().find(|(_, s)| s.len() != labels) {
            return Err(Error::InvalidAssignment(format!(
                "set {b} has {} bases, {labels} required",
                s.len()
            )));
        }
        let sig = sets[0][0].signature().clone();
        if sets.iter().flatten().any(|g| *g.signature() != sig) {
            return Err(Error::InvalidAssignment(
                "complement bases disagree on signature".into(),
            ));
        }
        Ok(Self { p, k, sets })
    }

    /// The same complement basis for every label within a set.
    pub fn uniform(p: usize, k: usize, per_set: Vec<ProductBasis>) -> Result<Self> {
        let labels = p.pow(k as u32);
        Self::new(p, k, per_set.into_iter().map(|g| vec![g; labels]).collect())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sets(&self) -> &[Vec<ProductBasis>] {
        &self.sets
    }

    pub fn complement_signature(&self) -> &DimensionSignature {
        self.sets[0][0].signature()
    }

    /// Every `G(j_b)` orthonormal and every pair from different sets mutually unbiased.
    pub fn check(&self, tol: f64) -> Result<()> {
        for (b, set) in self.sets.iter().enumerate() {
            for (j, g) in set.iter().enumerate() {
                let rep = g.validate(tol);
                if !rep.pass {
                    return Err(Error::InvalidAssignment(format!(
                        "G({j}_{b}) is not orthonormal (deviation {:e})",
                        rep.max_deviation
                    )));
                }
            }
        }
        for b1 in 0..self.sets.len() {
            for b2 in b1 + 1..self.sets.len() {
                for (j1, g1) in self.sets[b1].iter().enumerate() {
                    for (j2, g2) in self.sets[b2].iter().enumerate() {
                        let rep = are_product_bases_mu(g1, g2, tol)?;
                        if !rep.pass {
                            return Err(Error::InvalidAssignment(format!(
                                "G({j1}_{b1}) and G({j2}_{b2}) are not mutually unbiased (deviation {:e})",
                                rep.max_deviation
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the `p + 1` product bases `{|j_b⟩ ⊗ G(j_b)}` on a signature whose
/// first `k` subsystems have dimension `p`. Bases inside one set of the
/// assignment need not be unbiased to each other; bases from different sets must be.
pub fn assemble_structured_set(
    sig: &DimensionSignature,
    small_block: (usize, usize),
    assignment: &BasisAssignment,
    tol: f64,
) -> Result<MubSet> {
    let (p, k) = small_block;
    if (p, k) != (assignment.p, assignment.k) {
        return Err(Error::InvalidAssignment(format!(
            "assignment is for block ({}, {}), requested ({p}, {k})",
            assignment.p, assignment.k
        )));
    }
    if k >= sig.len() || sig.dims()[..k].iter().any(|&d| d != p) {
        return Err(Error::InvalidArgument(format!(
            "signature {sig} does not start with {k} subsystems of dimension {p} followed by a complement"
        )));
    }
    let complement = DimensionSignature::new(sig.dims()[k..].to_vec())?;
    if *assignment.complement_signature() != complement {
        return Err(Error::SignatureMismatch {
            left: complement.dims().to_vec(),
            right: assignment.complement_signature().dims().to_vec(),
        });
    }
    assignment.check(tol)?;

    let names = ["z", "x", "y", "w"];
    let mut bases = Vec::with_capacity(p + 1);
    for (b, set) in assignment.sets.iter().enumerate() {
        let block = small_block_basis(p, k, b)?;
        let mut vectors = Vec::with_capacity(sig.total());
        for (j, g) in set.iter().enumerate() {
            for v in g.vectors() {
                let mut factors = block[j].clone();
                factors.extend(v.factors().iter().cloned());
                vectors.push(ProductKet::new(factors)?);
            }
        }
        let basis = ProductBasis::new(sig.clone(), vectors)?;
        let rep = basis.validate(tol);
        if !rep.pass {
            return Err(Error::NotOrthonormal {
                deviation: rep.max_deviation,
                pair: rep.worst_pair,
            });
        }
        bases.push(basis);
    }
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            let rep = are_product_bases_mu(&bases[i], &bases[j], tol)?;
            if !rep.pass {
                return Err(Error::InvalidAssignment(format!(
                    "assembled bases {i} and {j} are not mutually unbiased (deviation {:e})",
                    rep.max_deviation
                )));
            }
        }
    }
    MubSet::with_names(
        bases,
        names[..p + 1].iter().map(|s| s.to_string()).collect(),
        format!("structured set on {sig} with small block {p}^{k}"),
        tol,
    )
}

/// Wraps single-subsystem bases as product bases over a one-subsystem signature.
pub fn as_product_bases(bases: &[Vec<Ket>]) -> Result<Vec<ProductBasis>> {
    bases
        .iter()
        .map(|b| ProductBasis::direct(std::slice::from_ref(b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, validate_orthonormal, DEFAULT_TOL};
    use crate::mu::are_bases_mu;

    fn apply(m: &DMatrix<C64>, v: &Ket) -> Vec<C64> {
        v.apply(m).unwrap().into_coords()
    }

    /// `m v = λ v` for some λ.
    fn is_eigenvector(m: &DMatrix<C64>, v: &Ket) -> bool {
        let mv = Ket::raw(apply(m, v));
        let lambda = inner(v, &mv).unwrap();
        mv.coords()
            .iter()
            .zip(v.coords())
            .all(|(a, b)| (a - lambda * b).norm() < 1e-12)
    }

    #[test]
    fn operator_relations() {
        for p in [2, 3] {
            let lib = OperatorLibrary::new(p).unwrap();
            let zx = &lib.z * &lib.x;
            let xz = &lib.x * &lib.z * lib.omega;
            assert!((zx - xz).camax() < 1e-12);
            for m in [&lib.z, &lib.x] {
                assert!(crate::linalg::unitarity_deviation(m) < 1e-12);
                let mut pow = DMatrix::<C64>::identity(p, p);
                for _ in 0..p {
                    pow = &pow * m;
                }
                assert!((pow - DMatrix::<C64>::identity(p, p)).camax() < 1e-12);
            }
        }
        assert!(OperatorLibrary::new(5).is_err());
    }

    #[test]
    fn pauli_triple_values() {
        let [z, x, y] = pauli_triple();
        assert_eq!(z[0].coords(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let h = FRAC_1_SQRT_2;
        assert!((y[0].coords()[1] - c(0.0, h)).norm() < 1e-15);
        for (a, b) in [(&z, &x), (&z, &y), (&x, &y)] {
            let r = are_bases_mu(a, b, DEFAULT_TOL).unwrap();
            assert!(r.pass && r.max_deviation < 1e-15);
        }
        let lib = OperatorLibrary::new(2).unwrap();
        for (op, basis) in lib.eigenbasis_operators().iter().zip([&z, &x, &y]) {
            assert!(basis.iter().all(|v| is_eigenvector(op, v)));
        }
    }

    #[test]
    fn weyl_quadruple_values() {
        let q = weyl_quadruple_d3();
        let s = 1.0 / 3f64.sqrt();
        let w = root_of_unity(3, 1);
        let expected = [c(s, 0.0), w * s, w * w * s];
        for (a, e) in q[1][1].coords().iter().zip(expected) {
            assert!((a - e).norm() < 1e-15);
        }
        let lib = OperatorLibrary::new(3).unwrap();
        for (op, basis) in lib.eigenbasis_operators().iter().zip(q.iter()) {
            assert!(basis.iter().all(|v| is_eigenvector(op, v)));
        }
        for i in 0..4 {
            assert!(validate_orthonormal(&q[i], 1e-12).pass);
            for j in i + 1..4 {
                let r = are_bases_mu(&q[i], &q[j], DEFAULT_TOL).unwrap();
                assert!(r.max_deviation < 1e-12);
            }
        }
    }

    #[test]
    fn complete_set_d5() {
        let set = weyl_complete_set(5).unwrap();
        assert_eq!(set.len(), 6);
        let x = shift_operator(5);
        let z = phase_operator(5);
        for (k, basis) in set.iter().enumerate().skip(1) {
            let mut op = x.clone();
            for _ in 0..k - 1 {
                op = &op * &z;
            }
            for (l, v) in basis.iter().enumerate() {
                let mv = apply(&op, v);
                let lambda = root_of_unity(5, l as i64);
                assert!(mv
                    .iter()
                    .zip(v.coords())
                    .all(|(a, b)| (a - lambda * b).norm() < 1e-12));
            }
        }
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(are_bases_mu(&set[i], &set[j], 1e-12).unwrap().pass);
            }
        }
        assert!(weyl_complete_set(4).is_err());
        assert!(weyl_complete_set(2).is_err());
    }

    #[test]
    fn canonical_sets() {
        assert!(canonical_qubit_triple(0).is_err());
        let t = canonical_qubit_triple(1).unwrap();
        assert_eq!(t.bases()[0].flat_kets(), pauli_triple()[0]);
        let t2 = canonical_qubit_triple(2).unwrap();
        assert_eq!(t2.len(), 3);
        assert_eq!(t2.signature().dims(), &[2, 2]);
        let q2 = canonical_qutrit_quadruple(2).unwrap();
        assert_eq!(q2.len(), 4);
        assert_eq!(q2.bases()[0].len(), 9);
    }

    #[test]
    fn phase_convention() {
        for basis in weyl_complete_set(5)
            .unwrap()
            .iter()
            .chain(weyl_quadruple_d3().iter())
            .chain(pauli_triple().iter())
        {
            for v in basis {
                let first = v.coords().iter().find(|x| x.norm() > 1e-12).unwrap();
                assert!(first.im.abs() < 1e-15 && first.re > 0.0);
            }
        }
    }

    fn d5_bases() -> Vec<ProductBasis> {
        as_product_bases(&weyl_complete_set(5).unwrap()).unwrap()
    }

    #[test]
    fn structured_set_2x5_direct_and_indirect() {
        let sig = DimensionSignature::new(vec![2, 5]).unwrap();
        let g = d5_bases();
        let direct =
            BasisAssignment::uniform(2, 1, vec![g[0].clone(), g[1].clone(), g[2].clone()]).unwrap();
        let set = assemble_structured_set(&sig, (2, 1), &direct, DEFAULT_TOL).unwrap();
        assert_eq!(set.len(), 3);

        let indirect = BasisAssignment::new(
            2,
            1,
            vec![
                vec![g[0].clone(), g[1].clone()],
                vec![g[2].clone(), g[3].clone()],
                vec![g[4].clone(), g[5].clone()],
            ],
        )
        .unwrap();
        let set = assemble_structured_set(&sig, (2, 1), &indirect, DEFAULT_TOL).unwrap();
        assert_eq!(set.len(), 3);
        for b in set.bases() {
            assert!(b.validate(DEFAULT_TOL).pass);
        }
    }

    #[test]
    fn structured_set_rejects_biased_cross_sets() {
        let sig = DimensionSignature::new(vec![2, 5]).unwrap();
        let g = d5_bases();
        let bad = BasisAssignment::new(
            2,
            1,
            vec![
                vec![g[0].clone(), g[1].clone()],
                vec![g[1].clone(), g[3].clone()],
                vec![g[4].clone(), g[5].clone()],
            ],
        )
        .unwrap();
        assert!(matches!(
            assemble_structured_set(&sig, (2, 1), &bad, DEFAULT_TOL),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(BasisAssignment::new(2, 1, vec![vec![g[0].clone()]; 2]).is_err());
    }

    #[test]
    fn structured_set_rejects_non_orthonormal_g() {
        let sig = DimensionSignature::new(vec![2, 2]).unwrap();
        let [z, x, y] = pauli_triple();
        let broken = ProductBasis::new(
            DimensionSignature::new(vec![2]).unwrap(),
            vec![
                ProductKet::new(vec![z[0].clone()]).unwrap(),
                ProductKet::new(vec![x[0].clone()]).unwrap(),
            ],
        )
        .unwrap();
        let ok = as_product_bases(&[x, y]).unwrap();
        let a = BasisAssignment::uniform(2, 1, vec![broken, ok[0].clone(), ok[1].clone()]).unwrap();
        assert!(matches!(
            assemble_structured_set(&sig, (2, 1), &a, DEFAULT_TOL),
            Err(Error::InvalidAssignment(_))
        ));
    }
}
