//! Numerical experiments on sets of MU product bases.
//!
//! All searches are multi-start Levenberg–Marquardt over [`UnitaryTree`]
//! parameterisations. Restart `k` draws from stream `k` of the master seed
//! and results are reduced in restart order, so a report depends only on the
//! seed and the restart budget (unless a wall-clock limit cuts restarts).

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{assemble_structured_set, BasisAssignment};
use crate::error::{Error, Result};
use crate::linalg::{dot, DimensionSignature, MubSet, ProductBasis};
use crate::mu::{are_product_bases_mu, verify_set};
use crate::optim::{
    levenberg_marquardt, LeastSquares, LmOptions, ProductBasisObjective, TreeShape, UnitaryTree,
};
use crate::random::rng_for;
use crate::structure::mu_product_bound;

/// Objective below which a candidate counts as found (before polishing).
pub const FOUND_THRESHOLD: f64 = 1e-9;
/// Best objectives above this are reported as bounded away from zero.
pub const BOUNDED_AWAY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchTarget {
    ExtendSet,
    FindSet,
    BoundProbe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub signature: DimensionSignature,
    pub target: SearchTarget,
    /// Number of bases the search tried to reach.
    pub set_size: usize,
    pub seed: u64,
    pub restarts: usize,
    pub restarts_completed: usize,
    pub best_objective: f64,
    pub found: Vec<MubSet>,
    /// A bound probe found more MU product bases than the bound allows.
    pub bound_violation: bool,
    pub tol: f64,
    pub wall_time: Duration,
}

/// Equality ignores `wall_time`.
impl PartialEq for SearchReport {
    fn eq(&self, o: &Self) -> bool {
        self.signature == o.signature
            && self.target == o.target
            && self.set_size == o.set_size
            && self.seed == o.seed
            && self.restarts == o.restarts
            && self.restarts_completed == o.restarts_completed
            && self.best_objective.to_bits() == o.best_objective.to_bits()
            && self.found == o.found
            && self.bound_violation == o.bound_violation
            && self.tol.to_bits() == o.tol.to_bits()
    }
}

impl SearchReport {
    pub fn bounded_away(&self) -> bool {
        self.found.is_empty() && self.best_objective > BOUNDED_AWAY
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBudget {
    pub restarts: usize,
    /// Alternating sweeps per restart for joint searches.
    pub sweeps: usize,
    pub wall_clock: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 200,
            sweeps: 30,
            wall_clock: None,
        }
    }
}

impl SearchBudget {
    pub fn restarts(restarts: usize) -> Self {
        Self {
            restarts,
            ..Self::default()
        }
    }
}

/// `Σ_{t,i,k} (|⟨t_i|ψ_k⟩|² − 1/d)²` plus `Σ_{k,l} (|⟨ψ_k|ψ_l⟩|² − δ_kl)²` for the candidate.
pub fn extension_objective(candidate: &ProductBasis, targets: &[ProductBasis]) -> f64 {
    let inv_d = 1.0 / candidate.len() as f64;
    let overlap = |a: &crate::linalg::ProductKet, b: &crate::linalg::ProductKet| -> f64 {
        a.factors()
            .iter()
            .zip(b.factors())
            .map(|(x, y)| dot(x.coords(), y.coords()))
            .product::<num_complex::Complex64>()
            .norm_sqr()
    };
    let mu: f64 = targets
        .iter()
        .flat_map(|t| t.vectors())
        .flat_map(|s| {
            candidate
                .vectors()
                .iter()
                .map(move |v| (overlap(s, v) - inv_d).powi(2))
        })
        .sum();
    let vs = candidate.vectors();
    let ortho: f64 = (0..vs.len())
        .flat_map(|k| (0..vs.len()).map(move |l| (k, l)))
        .map(|(k, l)| (overlap(&vs[k], &vs[l]) - if k == l { 1.0 } else { 0.0 }).powi(2))
        .sum();
    mu + ortho
}

/// Sum of [`extension_objective`] over all pairs `i < j` plus every basis's penalty.
pub fn set_objective(bases: &[ProductBasis]) -> f64 {
    (0..bases.len())
        .map(|i| extension_objective(&bases[i], &bases[i + 1..]))
        .sum()
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

/// Direct shape followed by one semi-direct shape per subsystem ordering.
pub fn search_shapes(sig: &DimensionSignature) -> Vec<TreeShape> {
    let mut shapes = vec![TreeShape::Direct];
    if sig.len() > 1 {
        shapes.extend(
            permutations(sig.len())
                .into_iter()
                .map(|order| TreeShape::SemiDirect { order }),
        );
    }
    shapes
}

fn same_basis_as_rays(a: &ProductBasis, b: &ProductBasis) -> bool {
    let fa = a.flat_kets();
    let fb = b.flat_kets();
    fa.iter().all(|u| {
        fb.iter()
            .any(|v| dot(u.coords(), v.coords()).norm() >= 1.0 - 1e-6)
    })
}

fn polish_options() -> LmOptions {
    LmOptions {
        max_iter: 200,
        stall_iters: 20,
        ..LmOptions::default()
    }
}

/// Runs `body(k)` for every restart in parallel, skipping restarts that start after the wall-clock limit.
fn run_restarts<T: Send>(
    budget: &SearchBudget,
    body: impl Fn(usize) -> T + Sync,
) -> Vec<Option<T>> {
    let start = Instant::now();
    (0..budget.restarts)
        .into_par_iter()
        .map(|k| match budget.wall_clock {
            Some(limit) if start.elapsed() > limit => None,
            _ => Some(body(k)),
        })
        .collect()
}

/// Searches for one more product basis MU to every basis of `set`.
///
/// A restart succeeds when its objective drops below [`FOUND_THRESHOLD`] and
/// the extended set passes full MU validation at `tol`; distinct successes
/// (as sets of rays) are returned as extended sets.
pub fn extend_set(
    set: &MubSet,
    budget: &SearchBudget,
    seed: u64,
    tol: f64,
) -> Result<SearchReport> {
    let clock = Instant::now();
    let pre = verify_set(set, tol);
    if !pre.pass {
        return Err(Error::Precondition(format!(
            "input set is not a valid MU set at tol {tol:e} (orthonormality {:e}, MU {:e})",
            pre.max_orthonormality_deviation, pre.max_mu_deviation
        )));
    }
    let sig = set.signature().clone();
    let shapes = search_shapes(&sig);
    let problem = ProductBasisObjective::new(set.bases().to_vec());
    let opts = LmOptions::default();
    let runs = run_restarts(budget, |k| {
        let mut rng = rng_for(seed, k as u64);
        let shape = shapes[k % shapes.len()].clone();
        let start = UnitaryTree::random(&sig, shape, &mut rng).expect("valid shape");
        let mut out = levenberg_marquardt(&problem, start, &opts);
        if out.objective < FOUND_THRESHOLD {
            out = levenberg_marquardt(&problem, out.point, &polish_options());
        }
        let basis = out.point.basis();
        (extension_objective(&basis, set.bases()), basis)
    });
    let completed: Vec<(f64, ProductBasis)> = runs.into_iter().flatten().collect();
    let best_objective = completed
        .iter()
        .map(|(f, _)| *f)
        .fold(f64::INFINITY, f64::min);
    let mut found: Vec<MubSet> = Vec::new();
    let mut found_bases: Vec<ProductBasis> = Vec::new();
    for (f, basis) in &completed {
        if *f >= FOUND_THRESHOLD || found_bases.iter().any(|b| same_basis_as_rays(b, basis)) {
            continue;
        }
        let mut bases = set.bases().to_vec();
        bases.push(basis.clone());
        let mut names = set.names().to_vec();
        names.push(format!("ext{}", found.len()));
        let extended = MubSet::with_names(
            bases,
            names,
            format!("{} extended by search (seed {seed})", set.provenance),
            tol,
        )?;
        if verify_set(&extended, tol).pass {
            found_bases.push(basis.clone());
            found.push(extended);
        }
    }
    Ok(SearchReport {
        signature: sig,
        target: SearchTarget::ExtendSet,
        set_size: set.len() + 1,
        seed,
        restarts: budget.restarts,
        restarts_completed: completed.len(),
        best_objective,
        found,
        bound_violation: false,
        tol,
        wall_time: clock.elapsed(),
    })
}

/// Block-coordinate search for `size` mutually unbiased product bases:
/// each sweep re-optimises every basis against the others.
fn joint_search(
    sig: &DimensionSignature,
    size: usize,
    budget: &SearchBudget,
    seed: u64,
) -> Vec<Option<(f64, Vec<ProductBasis>)>> {
    let shapes = search_shapes(sig);
    let inner = LmOptions {
        max_iter: 15,
        ..LmOptions::default()
    };
    run_restarts(budget, |k| {
        let mut rng = rng_for(seed, k as u64);
        let shape = shapes[k % shapes.len()].clone();
        let mut trees: Vec<UnitaryTree> = (0..size)
            .map(|_| UnitaryTree::random(sig, shape.clone(), &mut rng).expect("valid shape"))
            .collect();
        let total = |trees: &[UnitaryTree]| {
            set_objective(&trees.iter().map(UnitaryTree::basis).collect::<Vec<_>>())
        };
        let mut last = total(&trees);
        for sweep in 0..budget.sweeps {
            let opts = if last < FOUND_THRESHOLD {
                polish_options()
            } else {
                inner
            };
            for i in 0..size {
                let others: Vec<ProductBasis> = trees
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, t)| t.basis())
                    .collect();
                let problem = ProductBasisObjective::new(others);
                let start = trees[i].clone();
                trees[i] = levenberg_marquardt(&problem, start, &opts).point;
            }
            let now = total(&trees);
            let stalled = now > last * (1.0 - 1e-6) && sweep > 2;
            last = now;
            if last < 1e-28 || (stalled && last > FOUND_THRESHOLD) {
                break;
            }
        }
        (last, trees.iter().map(UnitaryTree::basis).collect())
    })
}

fn joint_report(
    sig: &DimensionSignature,
    size: usize,
    target: SearchTarget,
    budget: &SearchBudget,
    seed: u64,
    tol: f64,
) -> Result<SearchReport> {
    let clock = Instant::now();
    let completed: Vec<(f64, Vec<ProductBasis>)> = joint_search(sig, size, budget, seed)
        .into_iter()
        .flatten()
        .collect();
    let best_objective = completed
        .iter()
        .map(|(f, _)| *f)
        .fold(f64::INFINITY, f64::min);
    let mut found = Vec::new();
    for (k, (f, bases)) in completed.iter().enumerate() {
        if *f >= FOUND_THRESHOLD {
            continue;
        }
        let set = MubSet::new(
            bases.clone(),
            format!("{target:?} search on {sig}, seed {seed}, restart {k}"),
            tol,
        )?;
        if verify_set(&set, tol).pass {
            found.push(set);
        }
    }
    Ok(SearchReport {
        signature: sig.clone(),
        target,
        set_size: size,
        seed,
        restarts: budget.restarts,
        restarts_completed: completed.len(),
        best_objective,
        bound_violation: target == SearchTarget::BoundProbe && !found.is_empty(),
        found,
        tol,
        wall_time: clock.elapsed(),
    })
}

/// Searches for `size` pairwise MU product bases from scratch.
pub fn find_mu_product_set(
    sig: &DimensionSignature,
    size: usize,
    budget: &SearchBudget,
    seed: u64,
    tol: f64,
) -> Result<SearchReport> {
    if size < 2 {
        return Err(Error::InvalidArgument(
            "a set search needs at least two bases".into(),
        ));
    }
    joint_report(sig, size, SearchTarget::FindSet, budget, seed, tol)
}

/// Tries to build one more MU product basis than the conjectured bound for a
/// signature whose subsystems all have dimension at least four. Any success
/// sets `bound_violation`; see [`persist_violation`].
pub fn bound_probe(
    sig: &DimensionSignature,
    budget: &SearchBudget,
    seed: u64,
    tol: f64,
) -> Result<SearchReport> {
    let min = sig.dims().iter().copied().min().unwrap_or(0);
    if min < 4 {
        return Err(Error::Precondition(format!(
            "signature {sig} has a subsystem of dimension {min} < 4; the proven bound applies, use extend_set"
        )));
    }
    let size = mu_product_bound(sig).bound + 1;
    joint_report(sig, size, SearchTarget::BoundProbe, budget, seed, tol)
}

/// Writes the report of a bound violation to `dir` as JSON; returns the path written, if any.
pub fn persist_violation(report: &SearchReport, dir: &Path) -> std::io::Result<Option<PathBuf>> {
    if !report.bound_violation {
        return Ok(None);
    }
    std::fs::create_dir_all(dir)?;
    let dims: Vec<String> = report
        .signature
        .dims()
        .iter()
        .map(usize::to_string)
        .collect();
    let path = dir.join(format!(
        "bound-violation-{}-seed{}.json",
        dims.join("x"),
        report.seed
    ));
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(&path, json)?;
    Ok(Some(path))
}

/// Every MU set obtained from `pool` through the structured construction
/// with small block `(p, k)`. Each assignment of pool bases to slots is
/// emitted once; bases inside one set may repeat, bases of different sets
/// must be MU.
pub fn enumerate_structured_sets(
    sig: &DimensionSignature,
    small_block: (usize, usize),
    pool: &[ProductBasis],
    tol: f64,
) -> Result<Vec<MubSet>> {
    let (p, k) = small_block;
    if !(p == 2 || p == 3) {
        return Err(Error::UnsupportedDimension(p));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    for b in pool {
        let rep = b.validate(tol);
        if !rep.pass {
            return Err(Error::NotOrthonormal {
                deviation: rep.max_deviation,
                pair: rep.worst_pair,
            });
        }
    }
    let n = pool.len();
    let mut mu = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            mu[i][j] = i != j && are_product_bases_mu(&pool[i], &pool[j], tol)?.pass;
        }
    }
    let slots_per_set = p.pow(k as u32);
    let sets = p + 1;
    let mut out = Vec::new();
    let mut choice = vec![0usize; sets * slots_per_set];

    fn fill(
        slot: usize,
        choice: &mut Vec<usize>,
        slots_per_set: usize,
        n: usize,
        mu: &[Vec<bool>],
        emit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if slot == choice.len() {
            return emit(choice);
        }
        let set = slot / slots_per_set;
        for g in 0..n {
            let compatible = (0..set * slots_per_set).all(|earlier| mu[choice[earlier]][g]);
            if compatible {
                choice[slot] = g;
                fill(slot + 1, choice, slots_per_set, n, mu, emit)?;
            }
        }
        Ok(())
    }

    let mut emit = |c: &[usize]| -> Result<()> {
        let assignment = BasisAssignment::new(
            p,
            k,
            c.chunks(slots_per_set)
                .map(|set| set.iter().map(|&g| pool[g].clone()).collect())
                .collect(),
        )?;
        let mut set = assemble_structured_set(sig, (p, k), &assignment, tol)?;
        set.provenance = format!("structured set on {sig}, pool assignment {c:?}");
        out.push(set);
        Ok(())
    };
    fill(0, &mut choice, slots_per_set, n, &mu, &mut emit)?;
    Ok(out)
}

/// Objective of a set of bases evaluated through the tree model, for consistency checks.
pub fn tree_objective(tree: &UnitaryTree, targets: &[ProductBasis]) -> f64 {
    ProductBasisObjective::new(targets.to_vec())
        .residuals(tree)
        .norm_squared()
}
