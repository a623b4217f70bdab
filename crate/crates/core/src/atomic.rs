//! Atomic-norm minimization `inf { sum |lambda_k| : w = sum lambda_k ⊗^n x_k, ||x_k|| = 1 }`
//! by column generation.
//!
//! The master problem is a linear program over a finite atom pool, solved by a
//! revised simplex that keeps its basis as columns are appended. Pricing
//! maximizes `|Y(x)|` over the unit ball, where `Y` is the polynomial built
//! from a smoothed dual vector. The pool starts from the lattice points
//! `{v in N^d : |v|_1 = n}`, whose `n`-th powers span the symmetric power, so
//! the master problem is always feasible.
//!
//! Before solving, `w` is pushed onto its essential subspace: the column space
//! of its flattening on `l2`, its coordinate support on `l1` and `l_inf`. The
//! projection onto that subspace has norm one, so it maps any decomposition to
//! one of no larger cost and the two problems have the same value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::lmfit::fit_rank;
use crate::optim::{local_maxima, OptBudget};
use crate::simplex::ColumnSimplex;
use crate::symtensor::{multi_indices, sym_power, MultiIndex, SymTensor};

/// Largest number of coefficients handled by the master problem.
pub const MAX_LP_ROWS: usize = 700;

const MAX_ROUNDS: usize = 200;
const PRICE_TOL: f64 = 1e-7;
const NEW_ATOMS_PER_ROUND: usize = 48;
/// Relative gap between the master value and the best dual bound.
const GAP_TOL: f64 = 1e-6;
const SMOOTHING: f64 = 0.5;
const MAX_SEEDS: usize = 32;
const PRUNE_FACTOR: usize = 2;
const PRUNE_LEVEL: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: f64,
    /// Unit vector in the ball's norm.
    pub x: Vec<f64>,
}

/// A witness `w = sum lambda_k ⊗^n x_k` with cost `sum |lambda_k| ||x_k||^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub ball: Ball,
    pub order: usize,
    pub terms: Vec<Atom>,
    pub cost: f64,
    /// Largest absolute entry of `sum lambda_k ⊗^n x_k - w`.
    pub residual: f64,
}

impl Decomposition {
    pub fn empty(ball: Ball, order: usize) -> Self {
        Self {
            ball,
            order,
            terms: Vec::new(),
            cost: 0.0,
            residual: 0.0,
        }
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn to_tensor(&self, dim: usize) -> Result<SymTensor> {
        let mut acc = SymTensor::zeros(self.order, dim)?;
        for t in &self.terms {
            acc = acc.add_scaled(t.lambda, &sym_power(&t.x, self.order)?)?;
        }
        Ok(acc)
    }

    /// The cost widened by the residual and rounded up, so that it bounds the
    /// norm of the target tensor and not only that of the sum of terms.
    ///
    /// A residual tensor with entries at most `r` in absolute value has
    /// projective norm at most `n^n/n! * d^n * r` for any unit-ball norm in
    /// which the coordinate vectors have norm one.
    pub fn upper_bound(&self, dim: usize) -> f64 {
        let n = self.order as i32;
        let polar = (1..=self.order).fold(1.0, |acc, k| acc * self.order as f64 / k as f64);
        let slack = polar * (dim as f64).powi(n) * self.residual;
        (self.cost + slack) * (1.0 + 16.0 * f64::EPSILON)
    }

    /// Cost recomputed from the terms.
    pub fn term_cost(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.lambda.abs() * self.ball.norm(&t.x).powi(self.order as i32))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct AtomicSolution {
    pub decomposition: Decomposition,
    /// Dual tensor `c` with `|<c, ⊗^n x>| <= 1` (up to optimizer accuracy) on the ball.
    pub certificate: SymTensor,
    /// `<certificate, w>`, the dual objective.
    pub dual_value: f64,
}

struct Pool {
    alphas: Vec<MultiIndex>,
    atoms: Vec<Vec<f64>>,
    columns: Vec<Vec<f64>>,
}

impl Pool {
    fn column(&self, x: &[f64]) -> Vec<f64> {
        self.alphas
            .iter()
            .map(|a| a.as_slice().iter().map(|&i| x[i]).product())
            .collect()
    }

    /// Normalized atom and its column, unless it is degenerate or already pooled up to sign.
    fn candidate(&self, ball: Ball, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let u = ball.normalize(x)?;
        if !u.iter().all(|v| v.is_finite()) {
            return None;
        }
        let dup = self.atoms.iter().any(|a| {
            a.iter().zip(&u).all(|(p, q)| (p - q).abs() < 1e-12)
                || a.iter().zip(&u).all(|(p, q)| (p + q).abs() < 1e-12)
        });
        if dup {
            return None;
        }
        let col = self.column(&u);
        Some((u, col))
    }

    fn insert(&mut self, atom: Vec<f64>, col: Vec<f64>) {
        self.atoms.push(atom);
        self.columns.push(col);
    }

    fn push(&mut self, ball: Ball, x: &[f64]) {
        if let Some((u, col)) = self.candidate(ball, x) {
            self.insert(u, col);
        }
    }
}

fn lattice_points(n: usize, d: usize) -> Vec<Vec<f64>> {
    multi_indices(n, d)
        .map(|a| {
            let mut v = vec![0.0; d];
            for &i in a.as_slice() {
                v[i] += 1.0;
            }
            v
        })
        .collect()
}

/// Least-squares correction of the coefficients on a fixed support.
fn refine(pool: &Pool, support: &[usize], lambda: &mut [f64], target: &[f64]) -> f64 {
    let rows = target.len();
    let a = DMatrix::from_fn(rows, support.len(), |r, k| pool.columns[support[k]][r]);
    let residual = |lambda: &[f64]| -> DVector<f64> {
        &a * DVector::from_column_slice(lambda) - DVector::from_column_slice(target)
    };
    for _ in 0..2 {
        let r = residual(lambda);
        let svd = a.clone().svd(true, true);
        if let Ok(delta) = svd.solve(&r, 1e-13) {
            for (l, dl) in lambda.iter_mut().zip(delta.iter()) {
                *l -= dl;
            }
        }
    }
    residual(lambda).amax()
}

fn dual_tensor(alphas: &[MultiIndex], y: &[f64], n: usize, d: usize) -> Result<SymTensor> {
    SymTensor::from_entries(
        n,
        d,
        alphas
            .iter()
            .zip(y)
            .map(|(a, v)| (a.as_slice().to_vec(), v / a.multinomial())),
    )
}

/// Isometric frame `U` (`d x k`, `k < d`) whose range carries `w`, if there is a proper one.
fn essential_frame(w: &SymTensor, ball: Ball) -> Option<DMatrix<f64>> {
    let d = w.dim();
    match ball {
        Ball::L2 => {
            let svd = w.flattening().svd(true, false);
            let u = svd.u.as_ref()?;
            let top = svd.singular_values.amax();
            let mut keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > 1e-10 * top)
                .collect();
            keep.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
            (keep.len() < d).then(|| DMatrix::from_fn(d, keep.len(), |r, c| u[(r, keep[c])]))
        }
        Ball::L1 | Ball::LInf => {
            let support = w.support();
            (support.len() < d).then(|| DMatrix::from_fn(d, support.len(), |r, c| (r == support[c]) as u8 as f64))
        }
    }
}

/// Column-generation solve; `warm` adds candidate atoms to the initial pool.
pub(crate) fn atomic_norm(
    w: &SymTensor,
    ball: Ball,
    rank: usize,
    budget: &OptBudget,
    warm: &[Vec<f64>],
) -> Result<AtomicSolution> {
    budget.validate()?;
    let n = w.order();
    let d = w.dim();
    if w.is_zero() {
        return Ok(AtomicSolution {
            decomposition: Decomposition::empty(ball, n),
            certificate: SymTensor::zeros(n, d)?,
            dual_value: 0.0,
        });
    }
    if rank == 0 {
        return Err(Error::Infeasible {
            rank,
            residual: w.max_abs_entry(),
        });
    }
    let Some(frame) = essential_frame(w, ball) else {
        return solve(w, ball, rank, budget, warm);
    };
    let down = frame.transpose();
    let reduced = w.push_forward(&down)?;
    let warm_reduced: Vec<Vec<f64>> = warm
        .iter()
        .filter(|x| x.len() == d)
        .map(|x| (&down * DVector::from_column_slice(x)).iter().copied().collect())
        .collect();
    let sol = solve(&reduced, ball, rank, budget, &warm_reduced)?;
    let terms: Vec<Atom> = sol
        .decomposition
        .terms
        .iter()
        .map(|t| Atom {
            lambda: t.lambda,
            x: (&frame * DVector::from_column_slice(&t.x)).iter().copied().collect(),
        })
        .collect();
    let mut decomposition = Decomposition {
        terms,
        ..sol.decomposition
    };
    decomposition.residual = decomposition.to_tensor(d)?.max_abs_diff(w)?;
    Ok(AtomicSolution {
        decomposition,
        certificate: sol.certificate.push_forward(&frame)?,
        dual_value: sol.dual_value,
    })
}

fn solve(w: &SymTensor, ball: Ball, rank: usize, budget: &OptBudget, warm: &[Vec<f64>]) -> Result<AtomicSolution> {
    let n = w.order();
    let d = w.dim();
    let alphas: Vec<MultiIndex> = multi_indices(n, d).collect();
    if alphas.len() > MAX_LP_ROWS {
        return Err(Error::Domain(format!(
            "{} coefficients exceed the linear-program limit {MAX_LP_ROWS}",
            alphas.len()
        )));
    }
    let target: Vec<f64> = alphas.iter().map(|a| w.get(a.as_slice())).collect();
    let mut pool = Pool {
        alphas: alphas.clone(),
        atoms: Vec::new(),
        columns: Vec::new(),
    };
    for v in lattice_points(n, d) {
        pool.push(ball, &v);
    }
    let lattice: Vec<usize> = (0..pool.atoms.len()).collect();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        pool.push(ball, &e);
        for j in i + 1..d {
            for s in [1.0, -1.0] {
                let mut v = e.clone();
                v[j] = s;
                pool.push(ball, &v);
            }
        }
    }
    for r in 1..=2usize.min(rank) {
        let fit = fit_rank(w, r, &budget.reseeded(r as u64));
        for (_, u) in &fit.terms {
            pool.push(ball, u);
        }
    }
    for x in warm.iter().filter(|x| x.len() == d) {
        pool.push(ball, x);
    }

    let keep = pool.atoms.len();
    let mut prune_at = keep + PRUNE_FACTOR * alphas.len();
    let mut lp = ColumnSimplex::new(&pool.columns, &lattice, &target)?;
    lp.solve()?;
    // Wentges smoothing: price at a mix of the stability center and the
    // master dual, and keep the best scaled dual point as the lower bound.
    let mut center: Option<Vec<f64>> = None;
    let mut lower = 0.0f64;
    let mut best_dual: Option<(Vec<f64>, f64)> = None;
    let mut mix = SMOOTHING;
    for round in 0..MAX_ROUNDS {
        let y_master: Vec<f64> = lp.dual().iter().copied().collect();
        let upper = lp.objective();
        let y_price: Vec<f64> = match &center {
            Some(c) if mix > 0.0 => c.iter().zip(&y_master).map(|(a, b)| mix * a + (1.0 - mix) * b).collect(),
            _ => y_master.clone(),
        };
        let mut ranked: Vec<(f64, usize)> = pool
            .columns
            .iter()
            .enumerate()
            .map(|(k, c)| (dot(c, &y_master).abs(), k))
            .filter(|(v, _)| *v > 1.0 - 1e-6)
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        let seeds: Vec<Vec<f64>> = ranked
            .iter()
            .take(MAX_SEEDS)
            .map(|&(_, k)| pool.atoms[k].clone())
            .collect();
        let ytensor = dual_tensor(&alphas, &y_price, n, d)?;
        let maxima = local_maxima(&ytensor, ball, &budget.reseeded(1000 + round as u64), &seeds);
        let price = maxima.first().map_or(0.0, |m| m.value);
        if price > 0.0 {
            let bound = dot(&y_price, &target) / price;
            if bound > lower {
                lower = bound;
                best_dual = Some((y_price.clone(), price));
                center = Some(y_price);
            }
        }
        if upper - lower <= GAP_TOL * upper.abs().max(1e-300) {
            break;
        }
        let before = pool.atoms.len();
        for m in maxima.iter().take(NEW_ATOMS_PER_ROUND) {
            if let Some((u, col)) = pool.candidate(ball, &m.point) {
                if dot(&col, &y_master).abs() > 1.0 + PRICE_TOL {
                    lp.push_column(&col);
                    pool.insert(u, col);
                }
            }
        }
        if pool.atoms.len() == before {
            if mix == 0.0 {
                break;
            }
            // the smoothed point cut nothing off: move toward the master dual
            mix = if mix < 0.1 { 0.0 } else { mix * 0.5 };
            continue;
        }
        mix = SMOOTHING;
        if pool.atoms.len() > prune_at {
            let mask: Vec<bool> = pool
                .columns
                .iter()
                .enumerate()
                .map(|(k, c)| k < keep || dot(c, &y_master).abs() > PRUNE_LEVEL)
                .collect();
            let survivors = lp.retain(&mask);
            pool.atoms = survivors.iter().map(|&k| pool.atoms[k].clone()).collect();
            pool.columns = survivors.iter().map(|&k| pool.columns[k].clone()).collect();
            prune_at = pool.atoms.len() + PRUNE_FACTOR * alphas.len();
        }
        lp.solve()?;
    }

    let (support, mut coef): (Vec<usize>, Vec<f64>) = lp.primal().into_iter().filter(|(_, l)| l.abs() > 1e-13).unzip();
    let residual = refine(&pool, &support, &mut coef, &target);
    let scale = w.max_abs_entry().max(1.0);
    let (certificate, dual_value) = match best_dual {
        Some((y, p)) => (dual_tensor(&alphas, &y, n, d)?.scaled(1.0 / p), lower),
        None => (SymTensor::zeros(n, d)?, 0.0),
    };

    if support.len() <= rank && residual <= budget.tolerance * scale {
        let terms: Vec<Atom> = support
            .iter()
            .zip(&coef)
            .map(|(&k, &l)| Atom {
                lambda: l,
                x: pool.atoms[k].clone(),
            })
            .collect();
        let cost = terms.iter().map(|t| t.lambda.abs()).sum();
        return Ok(AtomicSolution {
            decomposition: Decomposition {
                ball,
                order: n,
                terms,
                cost,
                residual,
            },
            certificate,
            dual_value,
        });
    }

    let fit = fit_rank(w, rank, &budget.reseeded(77));
    if fit.residual > budget.tolerance * scale {
        return Err(Error::Infeasible {
            rank,
            residual: fit.residual,
        });
    }
    let terms: Vec<Atom> = fit
        .terms
        .iter()
        .filter_map(|(l, u)| {
            let norm = ball.norm(u);
            (norm > 0.0).then(|| Atom {
                lambda: l * norm.powi(n as i32),
                x: u.iter().map(|v| v / norm).collect(),
            })
        })
        .collect();
    let cost = terms.iter().map(|t| t.lambda.abs()).sum();
    Ok(AtomicSolution {
        decomposition: Decomposition {
            ball,
            order: n,
            terms,
            cost,
            residual: fit.residual,
        },
        certificate,
        dual_value,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> OptBudget {
        OptBudget::with_seed(21)
    }

    #[test]
    fn lattice_powers_span() {
        for (n, d) in [(2, 3), (3, 3), (4, 2), (3, 4)] {
            let alphas: Vec<MultiIndex> = multi_indices(n, d).collect();
            let pool = Pool {
                alphas: alphas.clone(),
                atoms: vec![],
                columns: vec![],
            };
            let cols: Vec<Vec<f64>> = lattice_points(n, d).iter().map(|v| pool.column(v)).collect();
            let m = DMatrix::from_fn(alphas.len(), cols.len(), |r, c| cols[c][r]);
            assert_eq!(m.rank(1e-9), alphas.len());
        }
    }

    #[test]
    fn rank_one_costs_norm_power() {
        let x = [0.5, -1.0, 0.25];
        for ball in Ball::ALL {
            let w = sym_power(&x, 3).unwrap();
            let sol = atomic_norm(&w, ball, 20, &budget(), &[]).unwrap();
            let expected = ball.norm(&x).powi(3);
            assert!(
                (sol.decomposition.cost - expected).abs() < 1e-6 * expected,
                "{ball}: {} vs {expected}",
                sol.decomposition.cost
            );
            let back = sol.decomposition.to_tensor(3).unwrap();
            assert!(back.max_abs_diff(&w).unwrap() < 1e-9);
        }
    }

    #[test]
    fn difference_of_squares_l2() {
        let w = sym_power(&[1.0, 0.0], 2)
            .unwrap()
            .add_scaled(-1.0, &sym_power(&[0.0, 1.0], 2).unwrap())
            .unwrap();
        let sol = atomic_norm(&w, Ball::L2, 6, &budget(), &[]).unwrap();
        // trace norm of diag(1, -1)
        assert!((sol.decomposition.cost - 2.0).abs() < 1e-5);
        assert!((sol.dual_value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn matrix_case_matches_trace_norm() {
        // for n = 2 on l2 the atomic norm is the nuclear norm of the symmetric matrix
        let w = SymTensor::from_entries(2, 3, [(vec![0, 0], 0.7), (vec![0, 1], -0.4), (vec![1, 2], 0.9), (vec![2, 2], -0.2)]).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| w.get(&[i, j]));
        let trace_norm: f64 = m.symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum();
        let sol = atomic_norm(&w, Ball::L2, 12, &budget(), &[]).unwrap();
        // the solver stops at a relative gap of 1e-6
        assert!((sol.decomposition.cost - trace_norm).abs() < 1e-5 * trace_norm);
        assert!((sol.dual_value - trace_norm).abs() < 1e-5 * trace_norm);
    }

    #[test]
    fn rank_too_small_is_infeasible() {
        let w = SymTensor::from_entries(2, 2, [(vec![0, 1], 0.5)]).unwrap();
        match atomic_norm(&w, Ball::L2, 1, &budget(), &[]) {
            Err(Error::Infeasible { rank, residual }) => {
                assert_eq!(rank, 1);
                assert!(residual > 1e-3);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn rotated_embedding_keeps_value() {
        let w = SymTensor::from_entries(3, 2, [(vec![0, 0, 1], 0.8), (vec![1, 1, 1], -0.5), (vec![0, 0, 0], 0.3)]).unwrap();
        let small = atomic_norm(&w, Ball::L2, 20, &budget(), &[]).unwrap();
        // orthonormal columns in R^4
        let v = DMatrix::from_row_slice(4, 2, &[0.6, 0.0, 0.0, 0.5, 0.8, 0.0, 0.0, 0.75f64.sqrt()]);
        let big = w.push_forward(&v).unwrap();
        let lifted = atomic_norm(&big, Ball::L2, 40, &budget(), &[]).unwrap();
        let rel = (lifted.decomposition.cost - small.decomposition.cost).abs() / small.decomposition.cost;
        assert!(rel < 1e-5, "{} vs {}", lifted.decomposition.cost, small.decomposition.cost);
        assert!(lifted.decomposition.residual < 1e-9);
        // atoms stay unit vectors of R^4
        for t in &lifted.decomposition.terms {
            assert!((Ball::L2.norm(&t.x) - 1.0).abs() < 1e-12);
        }
    }
}
