//! Polynomial ideal norms on `ℓp^d` and the maximal/minimal kernel
//! constructions, with the composition inequality as an executable check.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::atomic::Decomposition;
use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::norms::{integral_dual_with, projective_solution, Bound, RECONCILE_BAND};
use crate::optim::{maximize_abs_seeded, Maximum, OptBudget};
use crate::symtensor::SymTensor;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IdealKind {
    Sup,
    Nuclear,
    IntegralDual,
    MaxKernel { base: Box<IdealKind> },
    MinKernel { base: Box<IdealKind>, rank: usize },
}

impl IdealKind {
    pub fn bound(&self) -> Option<Bound> {
        match self {
            IdealKind::Sup | IdealKind::IntegralDual => Some(Bound::Lower),
            IdealKind::Nuclear => Some(Bound::Upper),
            IdealKind::MaxKernel { base } => base.bound(),
            IdealKind::MinKernel { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            IdealKind::Sup => "sup".into(),
            IdealKind::Nuclear => "nuclear".into(),
            IdealKind::IntegralDual => "integral_dual".into(),
            IdealKind::MaxKernel { base } => format!("max_kernel({})", base.name()),
            IdealKind::MinKernel { base, rank } => format!("min_kernel({},{rank})", base.name()),
        }
    }
}

/// An ideal norm on polynomials over `ℓp^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdealNormDescriptor {
    pub kind: IdealKind,
    pub ball: Ball,
}

impl IdealNormDescriptor {
    pub fn new(kind: IdealKind, ball: Ball) -> Self {
        Self { kind, ball }
    }

    pub fn sup(ball: Ball) -> Self {
        Self::new(IdealKind::Sup, ball)
    }

    pub fn nuclear(ball: Ball) -> Self {
        Self::new(IdealKind::Nuclear, ball)
    }
}

/// `P = Q ∘ T` with `T: R^d -> R^{d'}` stored as a `d' x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub t: DMatrix<f64>,
    pub q: SymTensor,
}

#[derive(Serialize, Deserialize)]
struct FactorizationLiteral {
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: crate::symtensor::TensorLiteral,
}

impl Factorization {
    pub fn reconstruct(&self) -> Result<SymTensor> {
        self.q.compose(&self.t)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let lit = FactorizationLiteral {
            t: self.t.row_iter().map(|r| r.iter().copied().collect()).collect(),
            q: self.q.to_literal(),
        };
        serde_json::to_value(lit).expect("factorization serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let lit: FactorizationLiteral = serde_json::from_str(s)?;
        let rows = lit.t.len();
        let cols = lit.t.first().map_or(0, Vec::len);
        if lit.t.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged matrix".into()));
        }
        let t = DMatrix::from_row_iterator(rows, cols, lit.t.into_iter().flatten());
        Ok(Self {
            t,
            q: SymTensor::from_literal(&lit.q)?,
        })
    }
}

/// `sup_{||x|| <= 1} |P(x)|`, a lower bound.
pub fn sup_norm(p: &SymTensor, ball: Ball, budget: &OptBudget) -> f64 {
    sup_norm_witness(p, ball, budget).value
}

pub fn sup_norm_witness(p: &SymTensor, ball: Ball, budget: &OptBudget) -> Maximum {
    maximize_abs_seeded(p, ball, budget, &[])
}

/// `x -> P(T x)`; `t` is `d' x d` for `P` on `R^{d'}`.
pub fn compose(p: &SymTensor, t: &DMatrix<f64>) -> Result<SymTensor> {
    p.compose(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuclearEstimate {
    pub value: f64,
    /// `P = sum lambda_k (x'_k . x)^n` with `x'_k` unit vectors of the dual norm.
    pub decomposition: Decomposition,
}

/// `inf sum |lambda_k| ||x'_k||^n` over `P = sum lambda_k (x'_k)^n`, an upper bound.
pub fn nuclear_norm(
    p: &SymTensor,
    ball: Ball,
    rank: Option<usize>,
    budget: &OptBudget,
) -> Result<NuclearEstimate> {
    let sol = projective_solution(p, ball.dual(), rank, budget, &[])?;
    Ok(NuclearEstimate {
        value: sol.decomposition.upper_bound(p.dim()),
        decomposition: sol.decomposition,
    })
}

/// `sup { |<P, w>| : εs(w) <= 1 }`, a lower bound.
pub fn integral_dual_norm(p: &SymTensor, ball: Ball, budget: &OptBudget) -> Result<f64> {
    Ok(crate::norms::integral_dual(p, ball, budget)?.value)
}

/// The three classical norms computed together, sharing the nuclear solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub sup: f64,
    pub integral_dual: f64,
    pub nuclear: f64,
}

pub fn sandwich(p: &SymTensor, ball: Ball, budget: &OptBudget) -> Result<Sandwich> {
    let nuclear = projective_solution(p, ball.dual(), None, budget, &[])?;
    let integral = integral_dual_with(p, ball, budget, Some(&nuclear.certificate), &[])?;
    Ok(Sandwich {
        sup: sup_norm(p, ball, budget),
        integral_dual: integral.value,
        nuclear: nuclear.decomposition.upper_bound(p.dim()),
    })
}

/// Nested subspaces `M_1 ⊂ ... ⊂ M_q`, each given by a `D x k_j` basis matrix.
///
/// Bases are either coordinate selections or orthonormal, so that the
/// restricted norm of `ℓp` is again `ℓp` in the new coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceChain {
    pub bases: Vec<DMatrix<f64>>,
}

impl SubspaceChain {
    /// Chain of coordinate subspaces.
    pub fn coordinates(dim: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let bases = sets
            .iter()
            .map(|s| {
                if s.iter().any(|&i| i >= dim) {
                    return Err(Error::InvalidIndex(s.clone(), "coordinate out of range"));
                }
                let mut b = DMatrix::zeros(dim, s.len());
                for (k, &i) in s.iter().enumerate() {
                    b[(i, k)] = 1.0;
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        for j in 1..sets.len() {
            if !sets[j - 1].iter().all(|i| sets[j].contains(i)) {
                return Err(Error::Domain(format!("subspace {j} does not contain subspace {}", j - 1)));
            }
        }
        Ok(Self { bases })
    }

    /// Random chain of dimensions `1, ..., dim` ending at the standard basis.
    /// Euclidean balls use nested orthonormal frames; `ℓ1`/`ℓ∞` use nested
    /// coordinate sets in random order.
    pub fn sample(dim: usize, ball: Ball, seed: u64) -> Self {
        let mut rng = OptBudget::with_seed(seed).rng();
        let mut bases = Vec::with_capacity(dim);
        match ball {
            Ball::L2 => {
                let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
                let q = g.qr().q();
                for k in 1..dim {
                    bases.push(q.columns(0, k).into_owned());
                }
            }
            Ball::L1 | Ball::LInf => {
                let mut order: Vec<usize> = (0..dim).collect();
                order.shuffle(&mut rng);
                for k in 1..dim {
                    let mut b = DMatrix::zeros(dim, k);
                    for (c, &i) in order[..k].iter().enumerate() {
                        b[(i, c)] = 1.0;
                    }
                    bases.push(b);
                }
            }
        }
        bases.push(DMatrix::identity(dim, dim));
        Self { bases }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Inclusion `M_j -> M_{j+1}` in the respective coordinates.
    fn inclusion(&self, j: usize) -> DMatrix<f64> {
        self.bases[j + 1].transpose() * &self.bases[j]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxKernelReport {
    /// Base norm of `P|_{M_j}` along the chain.
    pub values: Vec<f64>,
    /// Supremum over the chain.
    pub value: f64,
}

/// `sup_j ||P|_{M_j}||_base` along a nested chain.
///
/// Lower-bound bases carry their witness forward through the inclusions,
/// the nuclear base carries its decomposition backward by restriction, so
/// each pass never loses what the neighbouring subspace already certified.
pub fn max_kernel_norm(
    p: &SymTensor,
    base: &IdealNormDescriptor,
    chain: &SubspaceChain,
    budget: &OptBudget,
) -> Result<MaxKernelReport> {
    if chain.is_empty() {
        return Err(Error::Domain("empty subspace chain".into()));
    }
    let restricted: Vec<SymTensor> = chain
        .bases
        .iter()
        .map(|b| p.compose(b))
        .collect::<Result<_>>()?;
    let q = chain.len();
    let ball = base.ball;
    let values = match &base.kind {
        IdealKind::Sup => {
            let mut values = Vec::with_capacity(q);
            let mut seed: Option<Vec<f64>> = None;
            for j in 0..q {
                let seeds: Vec<Vec<f64>> = seed.iter().cloned().collect();
                let m = maximize_abs_seeded(&restricted[j], ball, budget, &seeds);
                values.push(m.value);
                if j + 1 < q {
                    let c = chain.inclusion(j);
                    seed = Some((c * DMatrix::from_column_slice(m.point.len(), 1, &m.point)).iter().copied().collect());
                }
            }
            values
        }
        IdealKind::IntegralDual => {
            let mut values = Vec::with_capacity(q);
            let mut carried: Vec<SymTensor> = Vec::new();
            for j in 0..q {
                let nuclear = projective_solution(&restricted[j], ball.dual(), None, budget, &[]).ok();
                let est = integral_dual_with(
                    &restricted[j],
                    ball,
                    budget,
                    nuclear.as_ref().map(|s| &s.certificate),
                    &carried,
                )?;
                values.push(est.value);
                if j + 1 < q && !est.witness.is_zero() {
                    carried = vec![est.witness.push_forward(&chain.inclusion(j))?];
                }
            }
            values
        }
        IdealKind::Nuclear => {
            let mut values = vec![0.0; q];
            let mut carried: Option<Decomposition> = None;
            for j in (0..q).rev() {
                let direct = projective_solution(&restricted[j], ball.dual(), None, budget, &[])?;
                let mut best = direct.decomposition;
                if let Some(outer) = carried.take() {
                    let restricted = restrict_decomposition(&outer, &chain.inclusion(j).transpose(), ball.dual(), &restricted[j])?;
                    if restricted.cost < best.cost {
                        best = restricted;
                    }
                }
                values[j] = best.upper_bound(restricted[j].dim());
                carried = Some(best);
            }
            values
        }
        other => restricted
            .iter()
            .map(|r| ideal_norm(r, &IdealNormDescriptor::new(other.clone(), ball), budget).map(|v| v.value))
            .collect::<Result<_>>()?,
    };
    let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxKernelReport { values, value })
}

/// Restricts `sum lambda (x' . x)^n` to a subspace via `(x' . C y)^n = (C^T x' . y)^n`.
fn restrict_decomposition(outer: &Decomposition, ct: &DMatrix<f64>, dual: Ball, target: &SymTensor) -> Result<Decomposition> {
    let n = outer.order as i32;
    let mut terms = Vec::new();
    for atom in &outer.terms {
        let x = ct * DMatrix::from_column_slice(atom.x.len(), 1, &atom.x);
        let norm = dual.norm(x.as_slice());
        if norm > 0.0 {
            terms.push(crate::atomic::Atom {
                lambda: atom.lambda * norm.powi(n),
                x: x.iter().map(|v| v / norm).collect(),
            });
        }
    }
    let cost = terms.iter().map(|t| t.lambda.abs()).sum();
    let mut out = Decomposition {
        ball: dual,
        order: outer.order,
        terms,
        cost,
        residual: 0.0,
    };
    out.residual = out.to_tensor(target.dim())?.add_scaled(-1.0, target)?.max_abs_entry();
    Ok(out)
}

/// Result of the rank-`r` factorization search.
#[derive(Clone, Debug, PartialEq)]
pub struct MinKernelOutcome {
    /// Best `||Q||_base ||T||^n` over reconstructing factorizations.
    pub value: Option<f64>,
    pub factorization: Option<Factorization>,
    /// Largest entry of `Q ∘ T - P` for the reported (or best attempted) factorization.
    pub residual: f64,
}

impl MinKernelOutcome {
    pub fn feasible(&self) -> bool {
        self.value.is_some()
    }
}

const RECONSTRUCTION_TOL: f64 = 1e-9;

/// `inf ||Q||_base ||T||^n` over factorizations `P = Q ∘ T` with `rank T <= r`.
pub fn min_kernel_norm(
    p: &SymTensor,
    base: &IdealNormDescriptor,
    r: usize,
    budget: &OptBudget,
) -> Result<MinKernelOutcome> {
    if r == 0 {
        return Err(Error::Domain("factorization rank must be positive".into()));
    }
    budget.validate()?;
    let d = p.dim();
    let n = p.order() as i32;
    let ball = base.ball;
    let scale = p.max_abs_entry().max(1.0);

    // candidate (T, T^+) pairs whose images carry P
    let mut candidates: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    if r >= d {
        candidates.push((DMatrix::identity(d, d), DMatrix::identity(d, d)));
    }
    let support = p.support();
    if !support.is_empty() && support.len() <= r && support.len() < d {
        let mut t = DMatrix::zeros(support.len(), d);
        for (k, &i) in support.iter().enumerate() {
            t[(k, i)] = 1.0;
        }
        let pinv = t.transpose();
        candidates.push((t, pinv));
    }
    let (frame, frame_rank) = column_frame(p);
    let mut best_residual = f64::INFINITY;
    if frame_rank <= r && frame_rank > 0 && frame_rank < d {
        let u = frame.columns(0, frame_rank).into_owned();
        candidates.push((u.transpose(), u));
    } else if frame_rank > r {
        let u = frame.columns(0, r).into_owned();
        let q = p.compose(&u)?;
        let back = q.compose(&u.transpose())?;
        best_residual = back.max_abs_diff(p)?;
    }

    if p.is_zero() {
        let t = DMatrix::zeros(1, d);
        return Ok(MinKernelOutcome {
            value: Some(0.0),
            factorization: Some(Factorization {
                t,
                q: SymTensor::zeros(p.order(), 1)?,
            }),
            residual: 0.0,
        });
    }

    let evaluate = |t: &DMatrix<f64>, pinv: &DMatrix<f64>, salt: u64| -> Result<Option<(f64, Factorization, f64)>> {
        let q = p.compose(pinv)?;
        let residual = q.compose(t)?.max_abs_diff(p)?;
        if residual > RECONSTRUCTION_TOL * scale {
            return Ok(None);
        }
        let q_norm = ideal_norm(&q, &IdealNormDescriptor::new(base.kind.clone(), ball), &budget.reseeded(salt))?.value;
        let value = q_norm * ball.operator_norm(t).powi(n);
        Ok(Some((value, Factorization { t: t.clone(), q }, residual)))
    };

    let mut best: Option<(f64, Factorization, f64)> = None;
    for (k, (t, pinv)) in candidates.iter().enumerate() {
        if let Some(found) = evaluate(t, pinv, k as u64)? {
            if best.as_ref().is_none_or(|b| found.0 < b.0) {
                best = Some(found);
            }
        }
    }
    let Some(mut best) = best else {
        return Ok(MinKernelOutcome {
            value: None,
            factorization: None,
            residual: best_residual,
        });
    };

    // local search: T -> G T, T^+ -> T^+ G^{-1}
    let mut rng = budget.reseeded(0xFAC7).rng();
    for round in 0..budget.restarts {
        let k = best.1.t.nrows();
        let g = DMatrix::<f64>::identity(k, k)
            + DMatrix::from_fn(k, k, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.05 * z
            });
        let Some(g_inv) = g.clone().try_inverse() else { continue };
        let t = &g * &best.1.t;
        let pinv = pseudo_inverse(&best.1.t) * g_inv;
        if let Some(found) = evaluate(&t, &pinv, 100 + round as u64)? {
            if found.0 < best.0 {
                best = found;
            }
        }
    }
    Ok(MinKernelOutcome {
        value: Some(best.0),
        residual: best.2,
        factorization: Some(best.1),
    })
}

fn pseudo_inverse(t: &DMatrix<f64>) -> DMatrix<f64> {
    t.clone()
        .pseudo_inverse(1e-13)
        .expect("pseudo-inverse with nonnegative epsilon")
}

/// Left singular vectors of the mode-1 unfolding and its numerical rank.
fn column_frame(p: &SymTensor) -> (DMatrix<f64>, usize) {
    let d = p.dim();
    if p.is_zero() {
        return (DMatrix::identity(d, d), 0);
    }
    let f = p.flattening();
    let gram = &f * f.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 1e-24 * top.max(1e-300) && eig.eigenvalues[i] > 0.0)
        .count();
    let frame = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    (frame, rank)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealValue {
    pub value: f64,
    pub bound: Option<Bound>,
}

/// Dispatches to the norm named by the descriptor. Maximal kernels use a
/// seeded random chain; minimal kernels report infeasibility as an error.
pub fn ideal_norm(p: &SymTensor, desc: &IdealNormDescriptor, budget: &OptBudget) -> Result<IdealValue> {
    let ball = desc.ball;
    let value = match &desc.kind {
        IdealKind::Sup => sup_norm(p, ball, budget),
        IdealKind::Nuclear => nuclear_norm(p, ball, None, budget)?.value,
        IdealKind::IntegralDual => integral_dual_norm(p, ball, budget)?,
        IdealKind::MaxKernel { base } => {
            let chain = SubspaceChain::sample(p.dim(), ball, budget.reseeded(0xC4A1).seed);
            max_kernel_norm(p, &IdealNormDescriptor::new((**base).clone(), ball), &chain, budget)?.value
        }
        IdealKind::MinKernel { base, rank } => {
            let out = min_kernel_norm(p, &IdealNormDescriptor::new((**base).clone(), ball), *rank, budget)?;
            match out.value {
                Some(v) => v,
                None => {
                    return Err(Error::Infeasible {
                        rank: *rank,
                        residual: out.residual,
                    })
                }
            }
        }
    };
    Ok(IdealValue {
        value,
        bound: desc.kind.bound(),
    })
}

/// Both sides of `||P ∘ T|| <= ||P|| ||T||^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub left: f64,
    pub right: f64,
    pub operator_norm: f64,
    pub holds: bool,
}

/// Checks the ideal inequality for `P` on `R^{d'}` and `T: R^d -> R^{d'}` (`d' x d`).
pub fn ideal_axiom_check(
    base: &IdealNormDescriptor,
    p: &SymTensor,
    t: &DMatrix<f64>,
    budget: &OptBudget,
) -> Result<AxiomReport> {
    let composed = p.compose(t)?;
    let operator_norm = base.ball.operator_norm(t);
    let left = ideal_norm(&composed, base, budget)?.value;
    let right = ideal_norm(p, base, budget)?.value * operator_norm.powi(p.order() as i32);
    Ok(AxiomReport {
        left,
        right,
        operator_norm,
        holds: left <= right * (1.0 + RECONCILE_BAND) + budget.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> OptBudget {
        OptBudget::with_seed(9)
    }

    fn x1x2() -> SymTensor {
        SymTensor::from_entries(2, 2, [(vec![0, 1], 0.5)]).unwrap()
    }

    #[test]
    fn sup_examples() {
        for n in 1..=4 {
            let p = SymTensor::from_entries(n, 3, [(vec![0; n], 1.0)]).unwrap();
            for ball in Ball::ALL {
                assert!((sup_norm(&p, ball, &budget()) - 1.0).abs() < 1e-12);
            }
        }
        let circle = (0..20_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 20_000.0;
                (t.cos() * t.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!((sup_norm(&x1x2(), Ball::L2, &budget()) - circle).abs() < 1e-7);
        let vertices = [(1.0f64, 1.0f64), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|(a, b)| (a * b).abs())
            .fold(0.0, f64::max);
        assert_eq!(sup_norm(&x1x2(), Ball::LInf, &budget()), vertices);
    }

    #[test]
    fn compose_examples() {
        let p = SymTensor::from_entries(3, 2, [(vec![0, 0, 1], 0.3), (vec![1, 1, 1], -1.0)]).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(compose(&p, &id).unwrap(), p);
        let c = 1.7;
        let scaled = compose(&p, &(id * c)).unwrap();
        assert!(scaled.max_abs_diff(&p.scaled(c.powi(3))).unwrap() < 1e-12);
        let sq = SymTensor::from_entries(2, 2, [(vec![0, 0], 1.0)]).unwrap();
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let out = compose(&sq, &swap).unwrap();
        for x in [[0.3, -2.0], [1.0, 4.0]] {
            assert!((out.evaluate(&x).unwrap() - x[1] * x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn nuclear_examples() {
        let p = SymTensor::from_entries(3, 2, [(vec![0, 0, 0], 1.0)]).unwrap();
        assert!((nuclear_norm(&p, Ball::L2, None, &budget()).unwrap().value - 1.0).abs() < 1e-6);
        let p = SymTensor::from_entries(2, 2, [(vec![0, 0], 1.0), (vec![1, 1], 1.0)]).unwrap();
        let nuc = nuclear_norm(&p, Ball::L2, None, &budget()).unwrap();
        let sup = sup_norm(&p, Ball::L2, &budget());
        assert!(nuc.value <= 2.0 + 1e-9);
        assert!(nuc.value >= sup - 1e-9);
        let zero = SymTensor::zeros(2, 2).unwrap();
        assert_eq!(nuclear_norm(&zero, Ball::L2, None, &budget()).unwrap().value, 0.0);
    }

    #[test]
    fn sandwich_on_fixed_instance() {
        let p = SymTensor::from_entries(3, 3, [(vec![0, 1, 2], 0.8), (vec![0, 0, 0], -0.3), (vec![1, 1, 2], 0.4)]).unwrap();
        for ball in Ball::ALL {
            let s = sandwich(&p, ball, &budget()).unwrap();
            assert!(s.sup <= s.integral_dual && s.integral_dual <= s.nuclear, "{ball}: {s:?}");
        }
    }

    #[test]
    fn max_kernel_examples() {
        let sq = SymTensor::from_entries(2, 2, [(vec![0, 0], 1.0)]).unwrap();
        let chain = SubspaceChain::coordinates(2, &[vec![0], vec![0, 1]]).unwrap();
        let rep = max_kernel_norm(&sq, &IdealNormDescriptor::sup(Ball::L2), &chain, &budget()).unwrap();
        assert_eq!(rep.values, vec![1.0, 1.0]);
        let rep = max_kernel_norm(&x1x2(), &IdealNormDescriptor::sup(Ball::LInf), &chain, &budget()).unwrap();
        assert_eq!(rep.values[0], 0.0);
        assert_eq!(rep.value, sup_norm(&x1x2(), Ball::LInf, &budget()));
        let single = SubspaceChain::coordinates(2, &[vec![0, 1]]).unwrap();
        for kind in [IdealKind::Sup, IdealKind::Nuclear, IdealKind::IntegralDual] {
            let desc = IdealNormDescriptor::new(kind, Ball::L2);
            let rep = max_kernel_norm(&x1x2(), &desc, &single, &budget()).unwrap();
            let direct = ideal_norm(&x1x2(), &desc, &budget()).unwrap().value;
            assert_eq!(rep.value, direct);
        }
    }

    #[test]
    fn min_kernel_examples() {
        let sq = SymTensor::from_entries(2, 3, [(vec![0, 0], 1.0)]).unwrap();
        let out = min_kernel_norm(&sq, &IdealNormDescriptor::sup(Ball::LInf), 1, &budget()).unwrap();
        assert!((out.value.unwrap() - 1.0).abs() < 1e-12);
        let f = out.factorization.unwrap();
        assert_eq!(f.t.nrows(), 1);
        assert!(f.reconstruct().unwrap().max_abs_diff(&sq).unwrap() < 1e-12);

        let p = SymTensor::from_entries(2, 2, [(vec![0, 0], 0.4), (vec![0, 1], -0.3)]).unwrap();
        for ball in Ball::ALL {
            let base = IdealNormDescriptor::sup(ball);
            let out = min_kernel_norm(&p, &base, 2, &budget()).unwrap();
            assert!(out.value.unwrap() <= sup_norm(&p, ball, &budget()) * 1.02);
        }

        let out = min_kernel_norm(&x1x2(), &IdealNormDescriptor::sup(Ball::L2), 1, &budget()).unwrap();
        assert!(!out.feasible());
        // brute force over unit directions u: best rank-one reconstruction c (u.x)^2
        let mut oracle = f64::INFINITY;
        for k in 0..2000 {
            let t = k as f64 * std::f64::consts::PI / 2000.0;
            let u = [t.cos(), t.sin()];
            let q = x1x2().compose(&DMatrix::from_column_slice(2, 1, &u)).unwrap();
            let back = q.compose(&DMatrix::from_row_slice(1, 2, &u)).unwrap();
            oracle = oracle.min(back.max_abs_diff(&x1x2()).unwrap());
        }
        assert!(oracle > 1e-3 && out.residual > 1e-3);
    }

    #[test]
    fn axiom_examples() {
        let p = SymTensor::from_entries(2, 1, [(vec![0, 0], 1.0)]).unwrap();
        let t = DMatrix::from_element(1, 1, 2.0);
        let rep = ideal_axiom_check(&IdealNormDescriptor::sup(Ball::L2), &p, &t, &budget()).unwrap();
        assert!((rep.left - 4.0).abs() < 1e-12 && (rep.right - 4.0).abs() < 1e-12 && rep.holds);
        let zero = DMatrix::zeros(1, 1);
        let rep = ideal_axiom_check(&IdealNormDescriptor::nuclear(Ball::L2), &p, &zero, &budget()).unwrap();
        assert_eq!(rep.left, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn factorization_json_round_trip() {
        let f = Factorization {
            t: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            q: SymTensor::from_entries(2, 1, [(vec![0, 0], 1.0)]).unwrap(),
        };
        let v = f.to_json_value();
        assert_eq!(v["T"], serde_json::json!([[1.0, 0.0]]));
        let back = Factorization::from_json(&v.to_string()).unwrap();
        assert_eq!(back, f);
    }
}
