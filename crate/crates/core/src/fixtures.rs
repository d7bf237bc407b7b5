//! Curated product bases used throughout the test corpus.

use num_complex::Complex64 as C64;

use crate::constructions::{
    as_product_bases, assemble_structured_set, canonical_qubit_triple, canonical_qutrit_quadruple,
    pauli_triple, weyl_complete_set, weyl_quadruple_d3, BasisAssignment,
};
use crate::linalg::{DimensionSignature, Ket, MubSet, ProductBasis, ProductKet, DEFAULT_TOL};

fn ket(coords: &[f64]) -> Ket {
    Ket::normalize(coords.iter().map(|&x| C64::new(x, 0.0)).collect()).expect("nonzero")
}

fn basis(dims: Vec<usize>, pairs: Vec<(Ket, Ket)>) -> ProductBasis {
    let vectors = pairs
        .into_iter()
        .map(|(a, b)| ProductKet::new(vec![a, b]).expect("normalized"))
        .collect();
    ProductBasis::new(DimensionSignature::new(dims).expect("valid"), vectors).expect("shape")
}

/// `{|0,0⟩, |0,1⟩, |1,+⟩, |1,−⟩}`.
pub fn indirect_d4() -> ProductBasis {
    basis(
        vec![2, 2],
        vec![
            (ket(&[1.0, 0.0]), ket(&[1.0, 0.0])),
            (ket(&[1.0, 0.0]), ket(&[0.0, 1.0])),
            (ket(&[0.0, 1.0]), ket(&[1.0, 1.0])),
            (ket(&[0.0, 1.0]), ket(&[1.0, -1.0])),
        ],
    )
}

/// The nine-state "domino" basis of `C³ ⊗ C³`, which is not semi-direct:
/// `|0,0±1⟩, |2,1±2⟩, |1±2,0⟩, |0±1,2⟩, |1,1⟩` (index 8 is `|1,1⟩`).
pub fn domino_3x3() -> ProductBasis {
    let e = |i: usize| {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        ket(&v)
    };
    let sum = |i: usize, j: usize, s: f64| {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        v[j] = s;
        ket(&v)
    };
    basis(
        vec![3, 3],
        vec![
            (e(0), sum(0, 1, 1.0)),
            (e(0), sum(0, 1, -1.0)),
            (e(2), sum(1, 2, 1.0)),
            (e(2), sum(1, 2, -1.0)),
            (sum(1, 2, 1.0), e(0)),
            (sum(1, 2, -1.0), e(0)),
            (sum(0, 1, 1.0), e(2)),
            (sum(0, 1, -1.0), e(2)),
            (e(1), e(1)),
        ],
    )
}

/// A `2 × 3` triple of direct MU product bases: `z⊗G_0, x⊗G_1, y⊗G_2` with
/// `G_b` the first three MU bases of `C³`.
pub fn product_triple_2x3() -> MubSet {
    let q = weyl_quadruple_d3();
    let g = as_product_bases(&q[..3]).expect("valid");
    let sig = DimensionSignature::new(vec![2, 3]).expect("valid");
    let a = BasisAssignment::uniform(2, 1, g).expect("shape");
    assemble_structured_set(&sig, (2, 1), &a, DEFAULT_TOL).expect("valid construction")
}

/// `2 × 5` triple with `G(0_b) = G(1_b)`: three direct product bases.
pub fn direct_triple_2x5() -> MubSet {
    let g = as_product_bases(&weyl_complete_set(5).expect("prime")).expect("valid");
    let sig = DimensionSignature::new(vec![2, 5]).expect("valid");
    let a = BasisAssignment::uniform(2, 1, g[..3].to_vec()).expect("shape");
    assemble_structured_set(&sig, (2, 1), &a, DEFAULT_TOL).expect("valid construction")
}

/// `2 × 5` triple with six distinct complement bases: three indirect product bases.
pub fn indirect_triple_2x5() -> MubSet {
    let g = as_product_bases(&weyl_complete_set(5).expect("prime")).expect("valid");
    let sig = DimensionSignature::new(vec![2, 5]).expect("valid");
    let a = BasisAssignment::new(
        2,
        1,
        vec![
            vec![g[0].clone(), g[1].clone()],
            vec![g[2].clone(), g[3].clone()],
            vec![g[4].clone(), g[5].clone()],
        ],
    )
    .expect("shape");
    assemble_structured_set(&sig, (2, 1), &a, DEFAULT_TOL).expect("valid construction")
}

/// Every fixture product basis with a label.
pub fn corpus() -> Vec<(String, ProductBasis)> {
    let mut out = vec![
        ("indirect-d4".to_string(), indirect_d4()),
        ("domino-3x3".to_string(), domino_3x3()),
    ];
    let mut push_set = |label: &str, set: MubSet| {
        for (name, b) in set.names().iter().zip(set.bases()) {
            out.push((format!("{label}/{name}"), b.clone()));
        }
    };
    push_set("qubit-triple-1", canonical_qubit_triple(1).expect("n >= 1"));
    push_set("qubit-triple-2", canonical_qubit_triple(2).expect("n >= 1"));
    push_set("qubit-triple-3", canonical_qubit_triple(3).expect("n >= 1"));
    push_set(
        "qutrit-quadruple-1",
        canonical_qutrit_quadruple(1).expect("n >= 1"),
    );
    push_set(
        "qutrit-quadruple-2",
        canonical_qutrit_quadruple(2).expect("n >= 1"),
    );
    push_set("triple-2x3", product_triple_2x3());
    push_set("direct-2x5", direct_triple_2x5());
    push_set("indirect-2x5", indirect_triple_2x5());
    let [z, x, y] = pauli_triple();
    let q = weyl_quadruple_d3();
    out.push((
        "mixed-2x3".to_string(),
        ProductBasis::direct(&[y, q[3].clone()]).expect("valid"),
    ));
    out.push((
        "mixed-2x2x3".to_string(),
        ProductBasis::direct(&[x, z, q[2].clone()]).expect("valid"),
    ));
    out
}
