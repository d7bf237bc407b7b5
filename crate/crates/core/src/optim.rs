//! Levenberg–Marquardt least squares, shared by the vector and basis searches.
//!
//! Two models are provided. [`MuVectorObjective`] measures how far a single
//! vector is from being unbiased to a set of bases, parameterised by `2d`
//! real coordinates. [`UnitaryTree`] parameterises a product basis by one
//! unitary per tree node; steps are taken in the Lie algebra and mapped back
//! with `U ← U·exp(Ω)`, so unitarity holds to rounding at every iterate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{columns, dot, DimensionSignature, Ket, ProductBasis, ProductKet};
use crate::random::{gram_schmidt, haar_unitary};

/// A least-squares problem on a manifold with a local chart at every point.
pub trait LeastSquares {
    type Point: Clone;
    fn residuals(&self, x: &Self::Point) -> DVector<f64>;
    /// Jacobian of the residuals with respect to the chart centred at `x`.
    fn jacobian(&self, x: &Self::Point) -> DMatrix<f64>;
    fn retract(&self, x: &Self::Point, step: &DVector<f64>) -> Self::Point;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once the objective drops below this value.
    pub f_tol: f64,
    /// Stop once `max |Jᵀr|` drops below this value.
    pub g_tol: f64,
    /// Stop after this many consecutive accepted steps with relative decrease below `1e-10`.
    pub stall_iters: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            f_tol: 1e-30,
            g_tol: 1e-17,
            stall_iters: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome<P> {
    pub point: P,
    /// `Σ r_k²` at `point`.
    pub objective: f64,
    pub iterations: usize,
}

pub fn levenberg_marquardt<L: LeastSquares>(
    problem: &L,
    start: L::Point,
    opts: &LmOptions,
) -> LmOutcome<L::Point> {
    let mut x = start;
    let mut r = problem.residuals(&x);
    let mut f = r.norm_squared();
    let mut damping = f64::NAN;
    let mut iterations = 0;
    let mut stalls = 0;
    while iterations < opts.max_iter && f > opts.f_tol {
        iterations += 1;
        let j = problem.jacobian(&x);
        let g = j.tr_mul(&r);
        if g.amax() <= opts.g_tol {
            break;
        }
        let a = j.tr_mul(&j);
        if damping.is_nan() {
            damping = 1e-3 * a.diagonal().max().max(1e-12);
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut lhs = a.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += damping;
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let step = -chol.solve(&g);
            let xn = problem.retract(&x, &step);
            let rn = problem.residuals(&xn);
            let fnew = rn.norm_squared();
            if fnew < f {
                stalls = if (f - fnew) < 1e-10 * f {
                    stalls + 1
                } else {
                    0
                };
                x = xn;
                r = rn;
                f = fnew;
                damping = (damping / 3.0).max(1e-24);
                accepted = true;
                break;
            }
            damping *= 4.0;
        }
        if !accepted || stalls >= opts.stall_iters {
            break;
        }
    }
    LmOutcome {
        point: x,
        objective: f,
        iterations,
    }
}

/// `F(x) = Σ_k (|⟨s_k|x⟩|²/‖x‖² − 1/d)²` over a fixed list of unit vectors `s_k`.
#[derive(Clone, Debug)]
pub struct MuVectorObjective {
    dim: usize,
    targets: Vec<Vec<C64>>,
}

impl MuVectorObjective {
    pub fn new(targets: &[Ket]) -> Result<Self> {
        let dim = targets.first().map(Ket::dim).ok_or(Error::EmptyPool)?;
        if let Some(t) = targets.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
        Ok(Self {
            dim,
            targets: targets.iter().map(|t| t.coords().to_vec()).collect(),
        })
    }

    /// Targets are all vectors of all bases, flattened.
    pub fn for_bases(bases: &[ProductBasis]) -> Result<Self> {
        let kets: Vec<Ket> = bases.iter().flat_map(ProductBasis::flat_kets).collect();
        Self::new(&kets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_count(&self) -> usize {
        2 * self.dim
    }

    fn complex(&self, x: &[f64]) -> Vec<C64> {
        x.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.residuals(&DVector::from_column_slice(x))
            .norm_squared()
    }

    /// Analytic `∇F = 2 Jᵀ r`, valid at any nonzero `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let g = self.jacobian(&x).tr_mul(&self.residuals(&x)) * 2.0;
        g.iter().copied().collect()
    }

    pub fn ket(&self, x: &DVector<f64>) -> Ket {
        Ket::normalize(self.complex(x.as_slice())).unwrap_or_else(|_| Ket::basis_state(self.dim, 0))
    }

    pub fn point_of(&self, v: &Ket) -> DVector<f64> {
        DVector::from_iterator(2 * v.dim(), v.coords().iter().flat_map(|c| [c.re, c.im]))
    }
}

impl LeastSquares for MuVectorObjective {
    type Point = DVector<f64>;

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let v = self.complex(x.as_slice());
        let n2 = x.norm_squared();
        let inv_d = 1.0 / self.dim as f64;
        DVector::from_iterator(
            self.targets.len(),
            self.targets
                .iter()
                .map(|s| dot(s, &v).norm_sqr() / n2 - inv_d),
        )
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let v = self.complex(x.as_slice());
        let n2 = x.norm_squared();
        let mut j = DMatrix::zeros(self.targets.len(), 2 * self.dim);
        for (k, s) in self.targets.iter().enumerate() {
            let c = dot(s, &v);
            let scale = 2.0 * c.norm_sqr() / (n2 * n2);
            for (i, si) in s.iter().enumerate() {
                // ∂c/∂Re v_i = conj(s_i), ∂c/∂Im v_i = i·conj(s_i).
                let w = c.conj() * si.conj();
                j[(k, 2 * i)] = 2.0 * w.re / n2 - scale * x[2 * i];
                j[(k, 2 * i + 1)] = -2.0 * w.im / n2 - scale * x[2 * i + 1];
            }
        }
        j
    }

    fn retract(&self, x: &DVector<f64>, step: &DVector<f64>) -> DVector<f64> {
        let y = x + step;
        let n = y.norm();
        if n > 0.0 {
            y / n
        } else {
            x.clone()
        }
    }
}

/// Layout of a unitary tree over a signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeShape {
    /// One unitary per subsystem: a direct product basis.
    Direct,
    /// Subsystems visited in `order`; every branch of a node carries its own
    /// unitary for the next subsystem.
    SemiDirect { order: Vec<usize> },
}

/// Generator `G_a` of `u(n)` applied to `e_j`, returned as `(row, coefficient)`.
/// With `a = p·n + q`: `p < q` gives `E_pq − E_qp`, `p > q` gives
/// `i(E_pq + E_qp)` and `p = q` gives `i E_pp`.
pub fn generator_column(n: usize, a: usize, j: usize) -> Option<(usize, C64)> {
    let (p, q) = (a / n, a % n);
    let i = C64::new(0.0, 1.0);
    match p.cmp(&q) {
        std::cmp::Ordering::Less if j == q => Some((p, C64::new(1.0, 0.0))),
        std::cmp::Ordering::Less if j == p => Some((q, C64::new(-1.0, 0.0))),
        std::cmp::Ordering::Greater if j == p => Some((q, i)),
        std::cmp::Ordering::Greater if j == q => Some((p, i)),
        std::cmp::Ordering::Equal if j == p => Some((p, i)),
        _ => None,
    }
}

/// `Ω(δ) = Σ_a δ_a G_a`, an anti-Hermitian matrix.
pub fn lie_element(n: usize, delta: &[f64]) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(n, n);
    for (a, &da) in delta.iter().enumerate() {
        for j in 0..n {
            if let Some((row, c)) = generator_column(n, a, j) {
                m[(row, j)] += c * da;
            }
        }
    }
    m
}

/// Product basis parameterised by a tree of unitaries.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryTree {
    sig: DimensionSignature,
    shape: TreeShape,
    order: Vec<usize>,
    level_offsets: Vec<usize>,
    nodes: Vec<DMatrix<C64>>,
}

/// One factor of one basis vector: `(subsystem, node, column)`.
type PathStep = (usize, usize, usize);

impl UnitaryTree {
    fn layout(
        sig: &DimensionSignature,
        shape: &TreeShape,
    ) -> Result<(Vec<usize>, Vec<usize>, usize)> {
        let n = sig.len();
        let order = match shape {
            TreeShape::Direct => (0..n).collect(),
            TreeShape::SemiDirect { order } => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..n).collect::<Vec<_>>() {
                    return Err(Error::InvalidArgument(format!(
                        "{order:?} is not an ordering of {n} subsystems"
                    )));
                }
                order.clone()
            }
        };
        let mut offsets = Vec::with_capacity(n);
        let mut count = 0;
        let mut width = 1;
        for &s in &order {
            offsets.push(count);
            count += match shape {
                TreeShape::Direct => 1,
                TreeShape::SemiDirect { .. } => width,
            };
            width *= sig.dims()[s];
        }
        Ok((order, offsets, count))
    }

    pub fn new(
        sig: &DimensionSignature,
        shape: TreeShape,
        nodes: Vec<DMatrix<C64>>,
    ) -> Result<Self> {
        let (order, level_offsets, count) = Self::layout(sig, &shape)?;
        if nodes.len() != count {
            return Err(Error::InvalidArgument(format!(
                "tree needs {count} unitaries, got {}",
                nodes.len()
            )));
        }
        let tree = Self {
            sig: sig.clone(),
            shape,
            order,
            level_offsets,
            nodes,
        };
        for (i, u) in tree.nodes.iter().enumerate() {
            let d = tree.node_dim(i);
            if u.nrows() != d || u.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: u.nrows(),
                });
            }
        }
        Ok(tree)
    }

    pub fn random<R: Rng + ?Sized>(
        sig: &DimensionSignature,
        shape: TreeShape,
        rng: &mut R,
    ) -> Result<Self> {
        let (order, offsets, count) = Self::layout(sig, &shape)?;
        let level_of = |node: usize| offsets.iter().rposition(|&o| o <= node).unwrap_or(0);
        let nodes = (0..count)
            .map(|i| haar_unitary(sig.dims()[order[level_of(i)]], rng))
            .collect();
        Self::new(sig, shape, nodes)
    }

    pub fn signature(&self) -> &DimensionSignature {
        &self.sig
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn nodes(&self) -> &[DMatrix<C64>] {
        &self.nodes
    }

    fn level_of(&self, node: usize) -> usize {
        self.level_offsets
            .iter()
            .rposition(|&o| o <= node)
            .unwrap_or(0)
    }

    fn node_dim(&self, node: usize) -> usize {
        self.sig.dims()[self.order[self.level_of(node)]]
    }

    pub fn param_count(&self) -> usize {
        (0..self.nodes.len()).map(|i| self.node_dim(i).pow(2)).sum()
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0;
        for i in 0..self.nodes.len() {
            out.push(acc);
            acc += self.node_dim(i).pow(2);
        }
        out
    }

    /// Node and column used by every factor of every vector, vectors in tree order.
    fn paths(&self) -> Vec<Vec<PathStep>> {
        let dims: Vec<usize> = self.order.iter().map(|&s| self.sig.dims()[s]).collect();
        let total = self.sig.total();
        (0..total)
            .map(|k| {
                let mut digits = vec![0; dims.len()];
                let mut rest = k;
                for t in (0..dims.len()).rev() {
                    digits[t] = rest % dims[t];
                    rest /= dims[t];
                }
                let mut prefix = 0;
                let mut out = Vec::with_capacity(dims.len());
                for t in 0..dims.len() {
                    let node = self.level_offsets[t]
                        + match self.shape {
                            TreeShape::Direct => 0,
                            TreeShape::SemiDirect { .. } => prefix,
                        };
                    out.push((self.order[t], node, digits[t]));
                    prefix = prefix * dims[t] + digits[t];
                }
                out
            })
            .collect()
    }

    pub fn basis(&self) -> ProductBasis {
        let cols: Vec<Vec<Ket>> = self.nodes.iter().map(columns).collect();
        let vectors = self
            .paths()
            .into_iter()
            .map(|path| {
                let mut factors = vec![Ket::basis_state(1, 0); self.sig.len()];
                for (s, node, j) in path {
                    factors[s] = cols[node][j].clone();
                }
                ProductKet::from_factors_unchecked(factors)
            })
            .collect();
        ProductBasis::new(self.sig.clone(), vectors).expect("tree layout matches signature")
    }

    /// `U ← U·exp(Ω(δ))` per node, followed by Gram–Schmidt to remove drift.
    pub fn retract(&self, step: &[f64]) -> Self {
        let offsets = self.param_offsets();
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let d = u.nrows();
                let omega = lie_element(d, &step[offsets[i]..offsets[i] + d * d]);
                gram_schmidt(&(u * omega.exp()))
            })
            .collect();
        Self {
            nodes,
            ..self.clone()
        }
    }
}

/// Residuals `|⟨s|ψ_k⟩|² − 1/d` of a tree-parameterised basis against fixed product bases.
#[derive(Clone, Debug)]
pub struct ProductBasisObjective {
    targets: Vec<ProductBasis>,
}

impl ProductBasisObjective {
    pub fn new(targets: Vec<ProductBasis>) -> Self {
        Self { targets }
    }

    pub fn targets(&self) -> &[ProductBasis] {
        &self.targets
    }
}

impl LeastSquares for ProductBasisObjective {
    type Point = UnitaryTree;

    fn residuals(&self, x: &UnitaryTree) -> DVector<f64> {
        let basis = x.basis();
        let d = basis.len();
        let inv_d = 1.0 / d as f64;
        let mut out = Vec::with_capacity(self.targets.len() * d * d);
        for t in &self.targets {
            for s in t.vectors() {
                for v in basis.vectors() {
                    let c: C64 = s
                        .factors()
                        .iter()
                        .zip(v.factors())
                        .map(|(a, b)| dot(a.coords(), b.coords()))
                        .product();
                    out.push(c.norm_sqr() - inv_d);
                }
            }
        }
        DVector::from_vec(out)
    }

    fn jacobian(&self, x: &UnitaryTree) -> DMatrix<f64> {
        let paths = x.paths();
        let offsets = x.param_offsets();
        let d = paths.len();
        let mut jac = DMatrix::zeros(self.targets.len() * d * d, x.param_count());
        let mut row = 0;
        for t in &self.targets {
            for s in t.vectors() {
                // w[node][m] = ⟨s^{sub(node)}|U_node e_m⟩.
                let w: Vec<Vec<C64>> = x
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let sf = s.factors()[x.order[x.level_of(i)]].coords();
                        (0..u.ncols())
                            .map(|m| {
                                sf.iter()
                                    .zip(u.column(m).iter())
                                    .map(|(a, b)| a.conj() * b)
                                    .sum()
                            })
                            .collect()
                    })
                    .collect();
                for path in &paths {
                    let f: Vec<C64> = path.iter().map(|&(_, node, j)| w[node][j]).collect();
                    let c: C64 = f.iter().product();
                    for (t_idx, &(_, node, j)) in path.iter().enumerate() {
                        let others: C64 = f
                            .iter()
                            .enumerate()
                            .filter(|&(u, _)| u != t_idx)
                            .map(|(_, z)| *z)
                            .product();
                        let n = x.nodes[node].nrows();
                        for a in 0..n * n {
                            if let Some((m, coeff)) = generator_column(n, a, j) {
                                let dc = others * coeff * w[node][m];
                                jac[(row, offsets[node] + a)] += 2.0 * (c.conj() * dc).re;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        jac
    }

    fn retract(&self, x: &UnitaryTree, step: &DVector<f64>) -> UnitaryTree {
        x.retract(step.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::canonical_qubit_triple;
    use crate::random::{haar_ket, rng_for};

    fn numeric_jacobian<L: LeastSquares>(p: &L, x: &L::Point, n: usize) -> DMatrix<f64> {
        let h = 1e-6;
        let r0 = p.residuals(x);
        let mut j = DMatrix::zeros(r0.len(), n);
        for a in 0..n {
            let mut e = DVector::zeros(n);
            e[a] = h;
            let plus = p.residuals(&p.retract(x, &e));
            e[a] = -h;
            let minus = p.residuals(&p.retract(x, &e));
            j.set_column(a, &((plus - minus) / (2.0 * h)));
        }
        j
    }

    #[test]
    fn generators_are_anti_hermitian_and_span() {
        for n in 1..5 {
            let mut flat = Vec::new();
            for a in 0..n * n {
                let mut delta = vec![0.0; n * n];
                delta[a] = 1.0;
                let g = lie_element(n, &delta);
                assert!((&g + g.adjoint()).norm() < 1e-15);
                flat.push(g.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<_>>());
            }
            let m = DMatrix::from_fn(flat.len(), 2 * n * n, |i, j| flat[i][j]);
            assert_eq!(m.rank(1e-12), n * n);
        }
    }

    #[test]
    fn tree_jacobian_matches_finite_differences() {
        let targets = canonical_qubit_triple(2).unwrap().bases()[..2].to_vec();
        let p = ProductBasisObjective::new(targets);
        let sig = DimensionSignature::new(vec![2, 2]).unwrap();
        let mut rng = rng_for(3, 0);
        for shape in [
            TreeShape::Direct,
            TreeShape::SemiDirect { order: vec![1, 0] },
        ] {
            let x = UnitaryTree::random(&sig, shape, &mut rng).unwrap();
            let a = p.jacobian(&x);
            let n = numeric_jacobian(&p, &x, x.param_count());
            assert!((a - n).amax() < 1e-7);
        }
    }

    #[test]
    fn tree_basis_is_orthonormal() {
        let sig = DimensionSignature::new(vec![2, 3, 2]).unwrap();
        let mut rng = rng_for(4, 0);
        for (order, nodes) in [(vec![0, 1, 2], 1 + 2 + 6), (vec![2, 0, 1], 1 + 2 + 4)] {
            let t = UnitaryTree::random(&sig, TreeShape::SemiDirect { order }, &mut rng).unwrap();
            assert_eq!(t.nodes().len(), nodes);
            assert!(t.basis().validate(1e-12).pass);
            let step: Vec<f64> = (0..t.param_count())
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            assert!(t.retract(&step).basis().validate(1e-12).pass);
        }
    }

    #[test]
    fn vector_jacobian_matches_finite_differences() {
        let set = canonical_qubit_triple(2).unwrap();
        let p = MuVectorObjective::for_bases(set.bases()).unwrap();
        let mut rng = rng_for(5, 0);
        let x = p.point_of(&haar_ket(4, &mut rng)) * 1.7;
        let a = p.jacobian(&x);
        // Differentiate the residuals in the ambient coordinates, without renormalising.
        let h = 1e-6;
        let mut n = DMatrix::zeros(a.nrows(), 8);
        for i in 0..8 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            n.set_column(i, &((p.residuals(&xp) - p.residuals(&xm)) / (2.0 * h)));
        }
        assert!((a - n).amax() < 1e-7);
    }

    #[test]
    fn lm_finds_mu_vector_for_two_qubit_triple() {
        let set = canonical_qubit_triple(2).unwrap();
        let p = MuVectorObjective::for_bases(set.bases()).unwrap();
        let mut rng = rng_for(6, 0);
        let best = (0..20)
            .map(|_| {
                levenberg_marquardt(
                    &p,
                    p.point_of(&haar_ket(4, &mut rng)),
                    &LmOptions::default(),
                )
                .objective
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-20, "{best}");
    }
}
