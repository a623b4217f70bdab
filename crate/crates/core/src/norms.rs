//! Symmetric tensor norms `πs` (projective) and `εs` (injective) on `ℓp^d`,
//! and the polynomial norms they induce by duality.
//!
//! `εs` is a supremum and is reported as a lower bound with its maximizing
//! functional; `πs` is an infimum over decompositions and is reported as an
//! upper bound with the decomposition that attains it.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{atomic_norm, AtomicSolution, Decomposition};
use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::optim::{maximize_abs_seeded, OptBudget};
use crate::symtensor::{sym_dim, sym_power, SymTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TensorNormKind {
    #[serde(rename = "projective_s")]
    Projective,
    #[serde(rename = "injective_s")]
    Injective,
}

impl TensorNormKind {
    pub fn name(self) -> &'static str {
        match self {
            TensorNormKind::Projective => "projective_s",
            TensorNormKind::Injective => "injective_s",
        }
    }

    /// Direction of the reported estimate.
    pub fn bound(self) -> Bound {
        match self {
            TensorNormKind::Projective => Bound::Upper,
            TensorNormKind::Injective => Bound::Lower,
        }
    }
}

impl FromStr for TensorNormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projective" | "projective_s" | "pi" => Ok(TensorNormKind::Projective),
            "injective" | "injective_s" | "eps" => Ok(TensorNormKind::Injective),
            other => Err(Error::Domain(format!("unknown tensor norm {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        })
    }
}

/// A symmetric tensor norm on `⊗^{n,s} ℓp^d`; `ball` is the unit ball of `ℓp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormDescriptor {
    pub kind: TensorNormKind,
    pub ball: Ball,
}

impl NormDescriptor {
    pub fn projective(ball: Ball) -> Self {
        Self {
            kind: TensorNormKind::Projective,
            ball,
        }
    }

    pub fn injective(ball: Ball) -> Self {
        Self {
            kind: TensorNormKind::Injective,
            ball,
        }
    }
}

/// `εs` estimate with the functional `x'` in the dual ball that attains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectiveEstimate {
    pub value: f64,
    pub functional: Vec<f64>,
}

/// `πs` estimate with its decomposition and a dual lower estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveEstimate {
    pub value: f64,
    pub decomposition: Decomposition,
    /// Dual objective of the final linear program; approaches `value` from below.
    pub dual_value: f64,
}

/// Default decomposition rank `2 * C(d + n - 1, n)`.
pub fn default_rank(order: usize, dim: usize) -> usize {
    2 * sym_dim(order, dim)
}

/// `εs(w) = sup { |<w, ⊗^n x'>| : x' in the dual ball }`, a lower bound.
///
/// The search runs on the coordinates carrying `w`; other coordinates of an
/// optimal functional can be set to zero without loss for every `ℓq` ball.
pub fn injective_snorm(w: &SymTensor, ball: Ball, budget: &OptBudget) -> InjectiveEstimate {
    injective_snorm_seeded(w, ball, budget, &[])
}

pub(crate) fn injective_snorm_seeded(
    w: &SymTensor,
    ball: Ball,
    budget: &OptBudget,
    seeds: &[Vec<f64>],
) -> InjectiveEstimate {
    let d = w.dim();
    let support = w.support();
    if support.is_empty() {
        return InjectiveEstimate {
            value: 0.0,
            functional: vec![0.0; d],
        };
    }
    let local = w
        .restrict_coords(&support)
        .expect("support coordinates are in range");
    let local_seeds: Vec<Vec<f64>> = seeds
        .iter()
        .filter(|s| s.len() == d)
        .map(|s| support.iter().map(|&i| s[i]).collect())
        .collect();
    let best = maximize_abs_seeded(&local, ball.dual(), budget, &local_seeds);
    let mut functional = vec![0.0; d];
    for (k, &i) in support.iter().enumerate() {
        functional[i] = best.point[k];
    }
    InjectiveEstimate {
        value: best.value,
        functional,
    }
}

/// `πs(w) = inf { sum |lambda_k| ||x_k||^n : w = sum lambda_k ⊗^n x_k }` over
/// decompositions of rank at most `rank` (default [`default_rank`]), an upper bound.
pub fn projective_snorm(
    w: &SymTensor,
    ball: Ball,
    rank: Option<usize>,
    budget: &OptBudget,
) -> Result<ProjectiveEstimate> {
    let sol = projective_solution(w, ball, rank, budget, &[])?;
    Ok(ProjectiveEstimate {
        value: sol.decomposition.upper_bound(w.dim()),
        dual_value: sol.dual_value,
        decomposition: sol.decomposition,
    })
}

pub(crate) fn projective_solution(
    w: &SymTensor,
    ball: Ball,
    rank: Option<usize>,
    budget: &OptBudget,
    warm: &[Vec<f64>],
) -> Result<AtomicSolution> {
    let rank = rank.unwrap_or_else(|| default_rank(w.order(), w.dim()));
    atomic_norm(w, ball, rank, budget, warm)
}

/// A number `U >= εs(w)` on `ℓp` (supremum over the dual ball), computed
/// without optimization.
pub fn injective_upper_bound(w: &SymTensor, ball: Ball) -> f64 {
    if w.is_zero() {
        return 0.0;
    }
    let bound = match ball.dual() {
        // the multilinear form peaks at basis vectors of ℓ1
        Ball::L1 => w.max_abs_entry(),
        Ball::L2 => w.flattening_spectral_norm(),
        Ball::LInf => cube_multilinear_bound(w),
    };
    bound * (1.0 + 1e-12)
}

const CUBE_ENUMERATION_LIMIT: u32 = 16;

/// Supremum of the multilinear form over `([-1, 1]^d)^n`, by enumerating the
/// first `n - 1` arguments over vertices; falls back to `sum mult * |w_a|`.
fn cube_multilinear_bound(w: &SymTensor) -> f64 {
    let n = w.order();
    let d = w.dim();
    let crude: f64 = w.entries().map(|(k, v)| k.multinomial() * v.abs()).sum();
    if n == 1 {
        return crude;
    }
    let bits = d * (n - 1);
    if bits as u32 > CUBE_ENUMERATION_LIMIT + 1 {
        return crude;
    }
    let f = w.flattening();
    let cols = f.ncols();
    let mut kron = vec![0.0; cols];
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << (bits - 1)) {
        let sign = |b: usize| if b > 0 && mask & (1 << (b - 1)) != 0 { -1.0 } else { 1.0 };
        for (c, slot) in kron.iter_mut().enumerate() {
            let mut r = c;
            let mut prod = 1.0;
            for arg in (0..n - 1).rev() {
                let i = r % d;
                r /= d;
                prod *= sign(arg * d + i);
            }
            *slot = prod;
        }
        let l1: f64 = (0..d)
            .map(|i| (0..cols).map(|c| f[(i, c)] * kron[c]).sum::<f64>().abs())
            .sum();
        best = best.max(l1);
    }
    best.min(crude)
}

/// Lower estimate of `sup { |<P, w>| : εs(w) <= 1 }` on `ℓp` together with the
/// maximizing tensor. Every candidate is divided by a certified upper bound
/// of its `εs` norm, so the value never exceeds the true supremum (up to
/// rounding).
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub witness: SymTensor,
}

pub fn integral_dual(p: &SymTensor, ball: Ball, budget: &OptBudget) -> Result<IntegralEstimate> {
    let nuclear = projective_solution(p, ball.dual(), None, budget, &[]).ok();
    integral_dual_with(p, ball, budget, nuclear.as_ref().map(|s| &s.certificate), &[])
}

/// Rounds a computed quotient down so it stays a lower bound.
fn round_down(v: f64) -> f64 {
    v * (1.0 - 16.0 * f64::EPSILON)
}

pub(crate) fn integral_dual_with(
    p: &SymTensor,
    ball: Ball,
    budget: &OptBudget,
    certificate: Option<&SymTensor>,
    extra: &[SymTensor],
) -> Result<IntegralEstimate> {
    let n = p.order();
    let d = p.dim();
    if p.is_zero() {
        return Ok(IntegralEstimate {
            value: 0.0,
            witness: SymTensor::zeros(n, d)?,
        });
    }
    let top = maximize_abs_seeded(p, ball, budget, &[]);
    let mut candidates = Vec::new();
    let norm = ball.norm(&top.point);
    if norm > 0.0 {
        let w = sym_power(&top.point, n)?;
        // a norm above one here is rounding on the boundary of the ball
        let scale = norm.powi(n as i32);
        let v = if scale < 1.0 { round_down(top.value / scale) } else { top.value };
        candidates.push((v, w));
    }
    let mut others: Vec<&SymTensor> = vec![p];
    others.extend(certificate);
    others.extend(extra.iter());
    for w in others {
        if w.dim() != d || w.order() != n {
            continue;
        }
        let u = injective_upper_bound(w, ball);
        if u > 0.0 {
            candidates.push((round_down(p.pair_tensor(w)?.abs() / u), w.clone()));
        }
    }
    let (value, witness) = candidates
        .into_iter()
        .fold(None::<(f64, SymTensor)>, |acc, (v, w)| match acc {
            Some((bv, bw)) if bv >= v => Some((bv, bw)),
            _ => Some((v, w)),
        })
        .unwrap_or((0.0, SymTensor::zeros(n, d)?));
    let scale = if witness.is_zero() {
        1.0
    } else {
        injective_upper_bound(&witness, ball).max(f64::MIN_POSITIVE)
    };
    Ok(IntegralEstimate {
        value,
        witness: witness.scaled(1.0 / scale),
    })
}

/// `sup { |<P, w>| : α(w) <= 1 }`, the norm of `P` as a functional on the
/// `α`-normed symmetric tensor product.
///
/// For `α = πs` the search runs over convex combinations of rank-one
/// tensors `sum θ_k ⊗^n φ(v_k)` with softmax weights `θ` and atoms
/// `φ(v)` in the unit ball, maximized by Adam from seeded starts. For
/// `α = εs` it is [`integral_dual`].
pub fn dual_ideal_norm(p: &SymTensor, alpha: NormDescriptor, budget: &OptBudget) -> Result<f64> {
    budget.validate()?;
    match alpha.kind {
        TensorNormKind::Injective => Ok(integral_dual(p, alpha.ball, budget)?.value),
        TensorNormKind::Projective => Ok(softmax_atoms(p, alpha.ball, budget)),
    }
}

const SOFTMAX_ATOMS: usize = 4;

fn softmax_atoms(p: &SymTensor, ball: Ball, budget: &OptBudget) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    let mono = p.monomials();
    let d = p.dim();
    let starts: Vec<(usize, f64)> = (0..budget.restarts)
        .flat_map(|s| [(s, 1.0), (s, -1.0)])
        .collect();
    let values: Vec<f64> = starts
        .par_iter()
        .map(|&(s, sigma)| {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.reseeded(s as u64).seed);
            let k = SOFTMAX_ATOMS;
            let mut params: Vec<f64> = (0..k * d + k)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let mut adam = Adam::new(params.len());
            let mut grad = vec![0.0; params.len()];
            let mut gx = vec![0.0; d];
            let mut best = f64::NEG_INFINITY;
            for _ in 0..budget.iterations {
                let (vs, logits) = params.split_at(k * d);
                let theta = softmax(logits);
                let mut values = [0.0; SOFTMAX_ATOMS];
                let mut f = 0.0;
                grad.iter_mut().for_each(|g| *g = 0.0);
                for j in 0..k {
                    let v = &vs[j * d..(j + 1) * d];
                    let x = atom(ball, v);
                    values[j] = mono.eval_grad(&x, &mut gx);
                    f += theta[j] * values[j];
                    let back = atom_pullback(ball, v, &x, &gx);
                    for i in 0..d {
                        grad[j * d + i] = sigma * theta[j] * back[i];
                    }
                }
                for j in 0..k {
                    grad[k * d + j] = sigma * theta[j] * (values[j] - f);
                }
                best = best.max(sigma * f);
                adam.ascend(&mut params, &grad, 0.05);
            }
            let (vs, logits) = params.split_at(k * d);
            let theta = softmax(logits);
            let f: f64 = (0..k)
                .map(|j| theta[j] * mono.eval(&atom(ball, &vs[j * d..(j + 1) * d])))
                .sum();
            best.max(sigma * f)
        })
        .collect();
    values.into_iter().fold(0.0, f64::max)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn atom(ball: Ball, v: &[f64]) -> Vec<f64> {
    match ball {
        Ball::LInf => v.iter().map(|t| t.tanh()).collect(),
        _ => ball.normalize(v).unwrap_or_else(|| vec![0.0; v.len()]),
    }
}

/// `J_φ(v)^T g` for the atom map.
fn atom_pullback(ball: Ball, v: &[f64], x: &[f64], g: &[f64]) -> Vec<f64> {
    match ball {
        Ball::LInf => x.iter().zip(g).map(|(xi, gi)| (1.0 - xi * xi) * gi).collect(),
        Ball::L2 => {
            let r = Ball::L2.norm(v).max(1e-300);
            let xg: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
            x.iter().zip(g).map(|(xi, gi)| (gi - xi * xg) / r).collect()
        }
        Ball::L1 => {
            let s = Ball::L1.norm(v).max(1e-300);
            let vg: f64 = v.iter().zip(g).map(|(a, b)| a * b).sum();
            v.iter()
                .zip(g)
                .map(|(vi, gi)| gi / s - vi.signum() * vg / (s * s))
                .collect()
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-12);
        }
    }
}

/// Value of `α(w)` in the direction given by [`TensorNormKind::bound`].
pub fn tensor_norm(w: &SymTensor, alpha: NormDescriptor, budget: &OptBudget) -> Result<f64> {
    match alpha.kind {
        TensorNormKind::Injective => Ok(injective_snorm(w, alpha.ball, budget).value),
        TensorNormKind::Projective => Ok(projective_snorm(w, alpha.ball, None, budget)?.value),
    }
}

/// Both sides of `α((⊗^n R) w) <= ||R||^n α(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricMappingReport {
    pub left: f64,
    pub right: f64,
    pub operator_norm: f64,
    pub holds: bool,
}

/// Relative band used when comparing an upper and a lower estimate.
pub const RECONCILE_BAND: f64 = 0.02;

/// Checks the metric mapping inequality for `R: ℓp^d -> ℓp^m` (an `m x d` matrix).
pub fn check_metric_mapping(
    alpha: NormDescriptor,
    r: &DMatrix<f64>,
    w: &SymTensor,
    budget: &OptBudget,
) -> Result<MetricMappingReport> {
    let image = w.push_forward(r)?;
    let operator_norm = alpha.ball.operator_norm(r);
    let left = tensor_norm(&image, alpha, budget)?;
    let right = operator_norm.powi(w.order() as i32) * tensor_norm(w, alpha, budget)?;
    Ok(MetricMappingReport {
        left,
        right,
        operator_norm,
        holds: left <= right * (1.0 + RECONCILE_BAND) + budget.tolerance,
    })
}

/// `α(w)` computed inside each coordinate subspace of a nested chain.
///
/// `chain[j]` lists the coordinates spanning `M_j`; each must contain the
/// support of `w`, which lives in the ambient space.
pub fn finitely_generated_gap(
    alpha: NormDescriptor,
    w: &SymTensor,
    chain: &[Vec<usize>],
    budget: &OptBudget,
) -> Result<Vec<f64>> {
    let support = w.support();
    for (j, coords) in chain.iter().enumerate() {
        if let Some(missing) = support.iter().find(|i| !coords.contains(i)) {
            return Err(Error::Domain(format!(
                "subspace {j} misses coordinate {missing} of the support"
            )));
        }
        if j > 0 && !chain[j - 1].iter().all(|i| coords.contains(i)) {
            return Err(Error::Domain(format!("subspace {j} does not contain subspace {}", j - 1)));
        }
    }
    chain
        .iter()
        .map(|coords| tensor_norm(&w.restrict_coords(coords)?, alpha, budget))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> OptBudget {
        OptBudget::with_seed(5)
    }

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn injective_examples() {
        let w = sym_power(&e(2, 0), 2).unwrap();
        assert!((injective_snorm(&w, Ball::L2, &budget()).value - 1.0).abs() < 1e-12);
        let w = sym_power(&[1.0, 1.0], 2).unwrap();
        // brute force over the vertices of the dual cube
        let mut oracle = 0.0f64;
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                oracle = oracle.max(((a + b) as f64).powi(2));
            }
        }
        assert!((injective_snorm(&w, Ball::L1, &budget()).value - oracle).abs() < 1e-12);
        let zero = SymTensor::zeros(3, 3).unwrap();
        assert_eq!(injective_snorm(&zero, Ball::L2, &budget()).value, 0.0);
    }

    #[test]
    fn projective_examples() {
        let x = [0.6, 0.8];
        let w = sym_power(&x, 2).unwrap();
        let v = projective_snorm(&w, Ball::L2, None, &budget()).unwrap().value;
        assert!((v - 1.0).abs() < 1e-6);

        let w = sym_power(&e(2, 0), 2)
            .unwrap()
            .add_scaled(-1.0, &sym_power(&e(2, 1), 2).unwrap())
            .unwrap();
        let pi = projective_snorm(&w, Ball::L2, None, &budget()).unwrap();
        let eps = injective_snorm(&w, Ball::L2, &budget()).value;
        assert!(pi.value <= 2.0 + 1e-9);
        assert!(eps <= pi.value);
        let back = pi.decomposition.to_tensor(2).unwrap();
        assert!(back.max_abs_diff(&w).unwrap() < 1e-9);

        let zero = SymTensor::zeros(2, 3).unwrap();
        assert_eq!(projective_snorm(&zero, Ball::L1, None, &budget()).unwrap().value, 0.0);
    }

    #[test]
    fn dual_ideal_examples() {
        let p = SymTensor::from_entries(3, 2, [(vec![0, 0, 0], 1.0)]).unwrap();
        let v = dual_ideal_norm(&p, NormDescriptor::projective(Ball::LInf), &budget()).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let p = SymTensor::from_entries(2, 2, [(vec![0, 1], 0.5)]).unwrap();
        let v = dual_ideal_norm(&p, NormDescriptor::projective(Ball::LInf), &budget()).unwrap();
        let oracle = [(1.0, 1.0), (1.0, -1.0)]
            .iter()
            .map(|(a, b): &(f64, f64)| (a * b).abs())
            .fold(0.0, f64::max);
        assert!((v - oracle).abs() < 1e-3, "{v}");
        let zero = SymTensor::zeros(2, 2).unwrap();
        assert_eq!(dual_ideal_norm(&zero, NormDescriptor::projective(Ball::L2), &budget()).unwrap(), 0.0);
    }

    #[test]
    fn injective_upper_bound_dominates() {
        let w = SymTensor::from_entries(3, 3, [(vec![0, 1, 2], 1.0), (vec![0, 0, 1], -0.5)]).unwrap();
        for ball in Ball::ALL {
            let lower = injective_snorm(&w, ball, &budget()).value;
            let upper = injective_upper_bound(&w, ball);
            assert!(lower <= upper, "{ball}: {lower} > {upper}");
        }
    }

    #[test]
    fn integral_examples() {
        for n in 1..=3 {
            let p = SymTensor::from_entries(n, 2, [(vec![0; n], 1.0)]).unwrap();
            // rank-one pairing oracle: <x1^n, ⊗^n e1> = 1 with εs(⊗^n e1) = 1
            let oracle = p.pair_tensor(&sym_power(&e(2, 0), n).unwrap()).unwrap();
            let v = integral_dual(&p, Ball::L2, &budget()).unwrap().value;
            assert!((v - oracle).abs() < 1e-9, "n={n}: {v}");
        }
        let p = SymTensor::from_entries(2, 1, [(vec![0, 0], 1.0)]).unwrap();
        let base = integral_dual(&p, Ball::L1, &budget()).unwrap().value;
        let scaled = integral_dual(&p.scaled(3.5), Ball::L1, &budget()).unwrap().value;
        assert!((scaled - 3.5 * base).abs() < 1e-12);
        let zero = SymTensor::zeros(2, 2).unwrap();
        assert_eq!(integral_dual(&zero, Ball::L2, &budget()).unwrap().value, 0.0);
    }

    #[test]
    fn metric_mapping_examples() {
        let x = [0.3, -0.7, 0.2];
        let w = sym_power(&x, 2).unwrap();
        for kind in [TensorNormKind::Projective, TensorNormKind::Injective] {
            let alpha = NormDescriptor { kind, ball: Ball::L2 };
            let id = DMatrix::<f64>::identity(3, 3);
            let rep = check_metric_mapping(alpha, &id, &w, &budget()).unwrap();
            assert!((rep.left - rep.right).abs() < 1e-6 * rep.right);
            let half = id * 0.5;
            let rep = check_metric_mapping(alpha, &half, &w, &budget()).unwrap();
            assert!(rep.holds);
            let full = tensor_norm(&w, alpha, &budget()).unwrap();
            assert!((rep.left - 0.25 * full).abs() < 1e-6 * full);
        }
        let w = sym_power(&e(2, 0), 2).unwrap();
        let proj = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let rep = check_metric_mapping(NormDescriptor::projective(Ball::L2), &proj, &w, &budget()).unwrap();
        assert_eq!(rep.left, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn finitely_generated_examples() {
        let w = sym_power(&e(3, 0), 2).unwrap();
        let chain = vec![vec![0], vec![0, 1], vec![0, 1, 2]];
        for kind in [TensorNormKind::Projective, TensorNormKind::Injective] {
            let vals = finitely_generated_gap(NormDescriptor { kind, ball: Ball::L2 }, &w, &chain, &budget()).unwrap();
            assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-6), "{vals:?}");
        }
        let w = sym_power(&e(4, 0), 2)
            .unwrap()
            .add_scaled(-1.0, &sym_power(&e(4, 1), 2).unwrap())
            .unwrap();
        let chain = vec![vec![0, 1], vec![0, 1, 2], vec![0, 1, 2, 3]];
        let vals = finitely_generated_gap(NormDescriptor::projective(Ball::L2), &w, &chain, &budget()).unwrap();
        for v in &vals {
            assert!((v - vals[0]).abs() <= 0.02 * vals[0]);
        }
        let single = finitely_generated_gap(NormDescriptor::projective(Ball::L2), &w, &chain[2..], &budget()).unwrap();
        let direct = projective_snorm(&w, Ball::L2, None, &budget()).unwrap().value;
        assert!((single[0] - direct).abs() < 1e-9);
        assert!(finitely_generated_gap(NormDescriptor::projective(Ball::L2), &w, &[vec![0]], &budget()).is_err());
    }
}
