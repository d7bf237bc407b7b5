use mub_product::constructions::{
    as_product_bases, canonical_qubit_triple, canonical_qutrit_quadruple, weyl_quadruple_d3,
};
use mub_product::equivalence::{equivalent, Verdict};
use mub_product::mu::verify_set;
use mub_product::search::{
    enumerate_structured_sets, extend_set, extension_objective, find_mu_product_set, set_objective,
    SearchBudget, SearchReport,
};
use mub_product::{DimensionSignature, MubSet, ProductBasis};

const TOL: f64 = 1e-9;

fn sig(d: &[usize]) -> DimensionSignature {
    DimensionSignature::new(d.to_vec()).unwrap()
}

#[test]
fn extension_is_deterministic_and_round_trips() {
    let set = canonical_qubit_triple(2).unwrap();
    let pair = MubSet::new(set.bases()[..2].to_vec(), "pair", TOL).unwrap();
    let budget = SearchBudget::restarts(24);
    let a = extend_set(&pair, &budget, 11, TOL).unwrap();
    let b = extend_set(&pair, &budget, 11, TOL).unwrap();
    assert_eq!(a, b);
    assert!(!a.found.is_empty());

    let json = serde_json::to_string(&a).unwrap();
    let back: SearchReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
    for s in &back.found {
        assert!(verify_set(s, TOL).pass);
        // Reported objective and an independent recomputation agree.
        let candidate = s.bases().last().unwrap();
        let direct = extension_objective(candidate, pair.bases());
        assert!(direct < 1e-18, "{direct}");
    }
}

#[test]
fn joint_search_finds_qubit_triples_equivalent_to_canonical() {
    let canonical = canonical_qubit_triple(2).unwrap();
    let report =
        find_mu_product_set(&sig(&[2, 2]), 3, &SearchBudget::restarts(16), 3, TOL).unwrap();
    assert!(!report.found.is_empty());
    for s in &report.found {
        assert!(verify_set(s, TOL).pass);
        assert!(set_objective(s.bases()) < 1e-18);
        assert!(matches!(
            equivalent(&canonical, s, 1_000_000).unwrap(),
            Verdict::Equivalent { .. }
        ));
    }
}

#[test]
fn structured_qutrit_quadruples_are_all_equivalent() {
    let canonical = canonical_qutrit_quadruple(2).unwrap();
    let pool: Vec<ProductBasis> = as_product_bases(&weyl_quadruple_d3()).unwrap();
    let sets = enumerate_structured_sets(&sig(&[3, 3]), (3, 1), &pool, TOL).unwrap();
    assert_eq!(sets.len(), 24);
    for s in &sets {
        assert!(verify_set(s, TOL).pass);
        assert!(matches!(
            equivalent(&canonical, s, 1_000_000).unwrap(),
            Verdict::Equivalent { .. }
        ));
    }
}

#[test]
fn structured_qubit_triples_are_all_equivalent() {
    let canonical = canonical_qubit_triple(2).unwrap();
    let pool: Vec<ProductBasis> =
        as_product_bases(&mub_product::constructions::pauli_triple()).unwrap();
    let sets = enumerate_structured_sets(&sig(&[2, 2]), (2, 1), &pool, TOL).unwrap();
    assert!(!sets.is_empty());
    for s in &sets {
        assert!(matches!(
            equivalent(&canonical, s, 1_000_000).unwrap(),
            Verdict::Equivalent { .. }
        ));
    }
}
