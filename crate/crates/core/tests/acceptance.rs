//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use mub_product::constructions::{canonical_qubit_triple, canonical_qutrit_quadruple};
use mub_product::entanglement::find_mu_vectors;
use mub_product::equivalence::{apply_moves, equivalent, matches_up_to_phase, scramble, Verdict};
use mub_product::fixtures::{corpus, direct_triple_2x5, indirect_triple_2x5, product_triple_2x3};
use mub_product::mu::{
    are_product_bases_mu, factorwise_mu, global_mu_oracle, trace_identities_regrouped,
};
use mub_product::optim::MuVectorObjective;
use mub_product::random::{mixed_instance, random_product_ket, rng_for, semi_direct_basis};
use mub_product::search::{extend_set, SearchBudget};
use mub_product::structure::{
    factor_grouping, extract_ortho_subset, grouping_counterexample, partition,
};
use mub_product::{partial_trace, DensityMatrix, DimensionSignature, MubSet, ProductBasis};
use rand_distr::{Distribution, StandardNormal};
use std::path::PathBuf;
use std::time::{Duration, Instant};

const TOL: f64 = 1e-9;

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn sig(d: &[usize]) -> DimensionSignature {
    DimensionSignature::new(d.to_vec()).unwrap()
}

fn canonical_sets() -> Vec<(String, MubSet)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        out.push((
            format!("qubit-triple-{n}"),
            canonical_qubit_triple(n).unwrap(),
        ));
    }
    for n in 1..=2 {
        out.push((
            format!("qutrit-quadruple-{n}"),
            canonical_qutrit_quadruple(n).unwrap(),
        ));
    }
    out
}

fn max_pair_deviation(set: &MubSet) -> f64 {
    let b = set.bases();
    let mut worst: f64 = 0.0;
    for i in 0..b.len() {
        for j in i + 1..b.len() {
            worst = worst.max(
                are_product_bases_mu(&b[i], &b[j], 1.0)
                    .unwrap()
                    .max_deviation,
            );
        }
    }
    worst
}

fn criterion1() -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, set) in canonical_sets() {
        worst = worst.max(max_pair_deviation(&set));
    }
    Outcome {
        pass: worst < 1e-12,
        detail: format!("max overlap deviation {worst:.2e}"),
    }
}

fn criterion2() -> Outcome {
    let mut disagreements = 0;
    let mut total = 0;
    let mut positives = 0;
    for (i, s) in [sig(&[2, 2]), sig(&[2, 3]), sig(&[3, 3]), sig(&[2, 2, 3])]
        .iter()
        .enumerate()
    {
        let mut rng = rng_for(2, i as u64);
        for _ in 0..1000 {
            let (mu, basis) = mixed_instance(s, &mut rng);
            let a = factorwise_mu(&mu, &basis, TOL).unwrap().pass;
            let b = global_mu_oracle(&mu, &basis, TOL).unwrap();
            disagreements += usize::from(a != b);
            positives += usize::from(b);
            total += 1;
        }
    }
    // Corpus bases against vectors of the other bases of their set (MU) and random product kets.
    let mut rng = rng_for(2, 100);
    let mut sets = canonical_sets();
    sets.push(("triple-2x3".into(), product_triple_2x3()));
    sets.push(("direct-2x5".into(), direct_triple_2x5()));
    sets.push(("indirect-2x5".into(), indirect_triple_2x5()));
    for (_, set) in &sets {
        for (i, basis) in set.bases().iter().enumerate() {
            for (j, other) in set.bases().iter().enumerate() {
                if i == j {
                    continue;
                }
                for mu in other.vectors() {
                    let a = factorwise_mu(mu, basis, TOL).unwrap().pass;
                    let b = global_mu_oracle(mu, basis, TOL).unwrap();
                    disagreements += usize::from(a != b);
                    positives += usize::from(b);
                    total += 1;
                }
            }
        }
    }
    for (_, basis) in corpus() {
        for _ in 0..20 {
            let mu = random_product_ket(basis.signature(), &mut rng);
            let a = factorwise_mu(&mu, &basis, TOL).unwrap().pass;
            let b = global_mu_oracle(&mu, &basis, TOL).unwrap();
            disagreements += usize::from(a != b);
            total += 1;
        }
    }
    Outcome {
        pass: disagreements == 0,
        detail: format!(
            "{disagreements} disagreements over {total} instances ({positives} unbiased)"
        ),
    }
}

fn generated_bases(
    signatures: &[DimensionSignature],
    per_signature: usize,
    stream: u64,
) -> Vec<(String, ProductBasis)> {
    let mut out = Vec::new();
    for (i, s) in signatures.iter().enumerate() {
        let mut rng = rng_for(stream, i as u64);
        for k in 0..per_signature {
            let share = [0.0, 0.3, 0.7, 1.0][k % 4];
            out.push((
                format!("generated {s} #{k}"),
                semi_direct_basis(s, share, &mut rng),
            ));
        }
    }
    out
}

fn criterion3() -> Outcome {
    let mut bases = corpus();
    bases.extend(generated_bases(
        &[sig(&[2, 2]), sig(&[2, 3]), sig(&[3, 3]), sig(&[2, 2, 3])],
        25,
        3,
    ));
    let mut worst: f64 = 0.0;
    let mut rng = rng_for(3, 1000);
    for (_, basis) in &bases {
        let s = basis.signature();
        for _ in 0..100 {
            let mu = random_product_ket(s, &mut rng);
            for r in 0..s.len() {
                let (s1, s2) = trace_identities_regrouped(&mu, basis, r).unwrap();
                let dr = s.dims()[r] as f64;
                worst = worst
                    .max((s1 - s.total() as f64 / dr).abs())
                    .max((s2 - dr).abs());
            }
        }
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!(
            "{} bases x 100 vectors, max deviation {worst:.2e}",
            bases.len()
        ),
    }
}

fn criterion4() -> Outcome {
    let mut bases = corpus();
    let sigs = [
        sig(&[2, 2]),
        sig(&[2, 3]),
        sig(&[2, 5]),
        sig(&[3, 3]),
        sig(&[3, 4]),
        sig(&[2, 2, 3]),
        sig(&[3, 2, 2]),
    ];
    bases.extend(generated_bases(&sigs, 150, 4));
    let mut failures = Vec::new();
    let mut anchors = 0;
    for (name, basis) in &bases {
        let d1 = basis.signature().dims()[0];
        for kappa in 0..basis.len() {
            anchors += 1;
            let ok = (|| -> mub_product::Result<bool> {
                let p = partition(basis, 0, kappa, None, TOL)?;
                if p.i_kappa.len() + 1 < d1 {
                    return Ok(false);
                }
                for &lambda in &p.i_kappa {
                    if partition(basis, 0, kappa, Some(lambda), TOL)?
                        .i_kappa_lambda
                        .len()
                        + 2
                        < d1
                    {
                        return Ok(false);
                    }
                }
                let sub = extract_ortho_subset(basis, 0, kappa, TOL)?;
                Ok(sub.indices.len() == d1 && sub.indices[0] == kappa)
            })();
            if !matches!(ok, Ok(true)) {
                failures.push(format!("{name} anchor {kappa}: {ok:?}"));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} bases, {anchors} anchors, {} failures{}",
            bases.len(),
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default()
        ),
    }
}

fn criterion5() -> Outcome {
    let set = canonical_qubit_triple(2).unwrap();
    let budget = SearchBudget::restarts(200);
    let fourth = extend_set(&set, &budget, 0, TOL).unwrap();
    let pair = MubSet::new(set.bases()[..2].to_vec(), "first two canonical bases", TOL).unwrap();
    let third = extend_set(&pair, &budget, 0, TOL).unwrap();
    let third_valid = third
        .found
        .iter()
        .all(|s| mub_product::mu::verify_set(s, TOL).pass);
    Outcome {
        pass: fourth.found.is_empty()
            && fourth.best_objective > 1e-3
            && !third.found.is_empty()
            && third_valid
            && third.best_objective < 1e-18,
        detail: format!(
            "4th basis: {} found, best {:.3e}; 3rd basis: {} found, best {:.3e}",
            fourth.found.len(),
            fourth.best_objective,
            third.found.len(),
            third.best_objective
        ),
    }
}

fn criterion6() -> Outcome {
    let set = canonical_qubit_triple(2).unwrap();
    let s = set.signature().clone();
    let found = find_mu_vectors(&set, 200, 0, TOL).unwrap();
    let mut worst: f64 = 0.0;
    for v in &found.vectors {
        for r in 0..2 {
            let rho = partial_trace(v, &s, r).unwrap();
            worst = worst.max(
                rho.frobenius_distance(&DensityMatrix::maximally_mixed(2))
                    .unwrap(),
            );
        }
    }
    let triple = find_mu_vectors(&product_triple_2x3(), 200, 0, TOL).unwrap();
    Outcome {
        pass: worst < 1e-8 && triple.vectors.is_empty() && triple.best_objective > 1e-3,
        detail: format!(
            "qubit pair: {} vectors, max |rho - I/2| {worst:.2e}; (2,3) triple: {} vectors, best {:.3e}",
            found.vectors.len(),
            triple.vectors.len(),
            triple.best_objective
        ),
    }
}

fn criterion7() -> Outcome {
    let mut sets = canonical_sets();
    sets.push(("triple-2x3".into(), product_triple_2x3()));
    sets.push(("direct-2x5".into(), direct_triple_2x5()));
    let mut rng = rng_for(7, 0);
    let mut equivalent_count = 0;
    let mut problems = Vec::new();
    for k in 0..100 {
        let (name, set) = &sets[k % sets.len()];
        let (scrambled, _) = scramble(set, 12, &mut rng).unwrap();
        match equivalent(set, &scrambled, 1_000_000).unwrap() {
            Verdict::Equivalent { witness } => {
                if matches_up_to_phase(&apply_moves(set, &witness).unwrap(), &scrambled, TOL) {
                    equivalent_count += 1;
                } else {
                    problems.push(format!("{name} #{k}: witness does not replay"));
                }
            }
            other => problems.push(format!("{name} #{k}: {other:?}")),
        }
    }
    let inequivalent = matches!(
        equivalent(&direct_triple_2x5(), &indirect_triple_2x5(), 1_000_000).unwrap(),
        Verdict::Inequivalent { .. }
    );
    if !inequivalent {
        problems.push("(2,5) direct vs all-distinct not Inequivalent".into());
    }
    Outcome {
        pass: problems.is_empty(),
        detail: format!(
            "{equivalent_count}/100 scrambles Equivalent with replay, (2,5) triples Inequivalent: {inequivalent}{}",
            problems.first().map(|p| format!(" (first problem: {p})")).unwrap_or_default()
        ),
    }
}

fn artifact_dir() -> PathBuf {
    option_env!("CARGO_TARGET_TMPDIR")
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
        .join("grouping-counterexamples")
}

fn criterion8() -> Outcome {
    let mut bases: Vec<_> = corpus()
        .into_iter()
        .filter(|(_, b)| b.signature().len() == 2)
        .collect();
    let sigs = [
        sig(&[2, 2]),
        sig(&[2, 3]),
        sig(&[3, 2]),
        sig(&[3, 3]),
        sig(&[2, 5]),
        sig(&[3, 4]),
        sig(&[4, 2]),
    ];
    bases.extend(generated_bases(&sigs, 150, 8));
    let mut failures = Vec::new();
    for (name, basis) in &bases {
        let result = factor_grouping(basis, TOL);
        if let Some(cx) = grouping_counterexample(basis, &result, TOL) {
            let dir = artifact_dir();
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join(format!("counterexample-{}.json", failures.len()));
            std::fs::write(&path, serde_json::to_string_pretty(&cx).unwrap()).unwrap();
            failures.push(format!("{name} -> {}", path.display()));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} bipartite bases, {} failures{}",
            bases.len(),
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (saved {f})"))
                .unwrap_or_default()
        ),
    }
}

fn criterion9() -> Outcome {
    let targets = [canonical_qubit_triple(2).unwrap(), product_triple_2x3()];
    let mut rng = rng_for(9, 0);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let f = MuVectorObjective::for_bases(targets[k % 2].bases()).unwrap();
        let x: Vec<f64> = (0..f.param_count())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let g = f.gradient(&x);
        let h = 1e-6;
        let mut err = 0.0;
        let mut scale = 0.0;
        for i in 0..x.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (f.value(&p) - f.value(&m)) / (2.0 * h);
            err += (g[i] - fd).powi(2);
            scale += fd * fd;
        }
        worst = worst.max(err.sqrt() / scale.sqrt().max(1e-12));
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("100 points in d = 4, 6, max relative error {worst:.2e}"),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            1,
            "canonical constructions exact",
            Duration::from_secs(1),
            criterion1,
        ),
        (
            2,
            "factor-wise criterion agrees with global oracle",
            Duration::from_secs(30),
            criterion2,
        ),
        (3, "trace identities", Duration::from_secs(10), criterion3),
        (
            4,
            "orthonormal subset extraction",
            Duration::from_secs(30),
            criterion4,
        ),
        (
            5,
            "bound tightness probe",
            Duration::from_secs(300),
            criterion5,
        ),
        (
            6,
            "MU vectors are maximally entangled",
            Duration::from_secs(300),
            criterion6,
        ),
        (
            7,
            "equivalence soundness",
            Duration::from_secs(120),
            criterion7,
        ),
        (8, "factor grouping", Duration::from_secs(30), criterion8),
        (9, "gradient check", Duration::from_secs(10), criterion9),
    ];
    let mut failed = 0;
    for (n, title, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {n}: {title}: {} [{:.2}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
