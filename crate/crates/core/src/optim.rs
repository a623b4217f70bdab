//! Multi-start maximization of `|P(x)|` over a unit ball.
//!
//! `ℓ∞` balls are seeded by sign-vertex enumeration (up to
//! [`VERTEX_ENUMERATION_MAX_DIM`]) and refined by exact coordinate ascent
//! interleaved with projected gradient steps; `ℓ1`/`ℓ2` balls use projected
//! gradient ascent with backtracking. Every returned value is attained at a
//! feasible point, so it is a lower bound for the true supremum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::symtensor::{Monomials, SymTensor};

pub const VERTEX_ENUMERATION_MAX_DIM: usize = 10;

/// Budget shared by every stochastic routine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self {
            restarts: 12,
            iterations: 400,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

impl OptBudget {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidBudget("restarts must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidBudget("iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidBudget("tolerance must be positive"));
        }
        Ok(())
    }

    /// Same budget with a derived seed, for independent sub-problems.
    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            seed: self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03))
                .rotate_left(17),
            ..*self
        }
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// A feasible point and `|P|` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub value: f64,
    pub point: Vec<f64>,
}

/// Best value of `|P|` found on the unit ball.
pub fn maximize_abs(p: &SymTensor, ball: Ball, budget: &OptBudget) -> Maximum {
    maximize_abs_seeded(p, ball, budget, &[])
}

/// As [`maximize_abs`], additionally ascending from the given seed points.
pub fn maximize_abs_seeded(
    p: &SymTensor,
    ball: Ball,
    budget: &OptBudget,
    seeds: &[Vec<f64>],
) -> Maximum {
    local_maxima(p, ball, budget, seeds)
        .into_iter()
        .next()
        .unwrap_or_else(|| Maximum {
            value: 0.0,
            point: vec![0.0; p.dim()],
        })
}

/// Distinct local maxima of `|P|`, best first.
pub fn local_maxima(
    p: &SymTensor,
    ball: Ball,
    budget: &OptBudget,
    seeds: &[Vec<f64>],
) -> Vec<Maximum> {
    let d = p.dim();
    if p.is_zero() {
        return vec![Maximum {
            value: 0.0,
            point: vec![0.0; d],
        }];
    }
    let mono = p.monomials();
    let starts = start_points(&mono, ball, budget, seeds);
    let iterations = budget.iterations;
    let mut found: Vec<Maximum> = starts
        .par_iter()
        .map(|x0| ascend(&mono, ball, x0, iterations))
        .collect();
    // stable sort keeps start order on ties, so the result is deterministic
    found.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut distinct: Vec<Maximum> = Vec::new();
    for m in found {
        let dup = distinct.iter().any(|q| {
            let same = q.point.iter().zip(&m.point).all(|(a, b)| (a - b).abs() < 1e-6);
            let opposite = q.point.iter().zip(&m.point).all(|(a, b)| (a + b).abs() < 1e-6);
            same || opposite
        });
        if !dup {
            distinct.push(m);
        }
    }
    distinct
}

fn start_points(mono: &Monomials, ball: Ball, budget: &OptBudget, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = mono.dim;
    let mut rng = budget.rng();
    let mut starts: Vec<Vec<f64>> = seeds
        .iter()
        .filter(|s| s.len() == d)
        .map(|s| {
            let mut s = s.clone();
            ball.project(&mut s);
            s
        })
        .collect();
    match ball {
        Ball::LInf => {
            if d <= VERTEX_ENUMERATION_MAX_DIM {
                // |P(-x)| = |P(x)|: fix the first sign
                let mut vertices: Vec<(f64, Vec<f64>)> = (0u32..(1 << (d - 1)))
                    .map(|mask| {
                        let v: Vec<f64> = (0..d)
                            .map(|i| if i > 0 && mask & (1 << (i - 1)) != 0 { -1.0 } else { 1.0 })
                            .collect();
                        (mono.eval(&v).abs(), v)
                    })
                    .collect();
                vertices.sort_by(|a, b| b.0.total_cmp(&a.0));
                starts.extend(vertices.into_iter().take(budget.restarts).map(|(_, v)| v));
            } else {
                for _ in 0..budget.restarts {
                    starts.push(
                        (0..d)
                            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                            .collect(),
                    );
                }
            }
            for _ in 0..budget.restarts {
                starts.push((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect());
            }
        }
        Ball::L1 | Ball::L2 => {
            for i in 0..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                starts.push(e);
            }
            for _ in 0..budget.restarts {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                if let Some(x) = ball.normalize(&g) {
                    starts.push(x);
                }
            }
        }
    }
    starts
}

/// Local ascent of `|P|` from `x0`, returning a feasible point.
fn ascend(mono: &Monomials, ball: Ball, x0: &[f64], iterations: usize) -> Maximum {
    let v0 = mono.eval(x0);
    let signs: &[f64] = if v0 > 0.0 {
        &[1.0]
    } else if v0 < 0.0 {
        &[-1.0]
    } else {
        &[1.0, -1.0]
    };
    let mut best = Maximum {
        value: v0.abs(),
        point: x0.to_vec(),
    };
    for &sigma in signs {
        let mut x = x0.to_vec();
        match ball {
            Ball::LInf => box_ascent(mono, sigma, &mut x, iterations),
            Ball::L2 => {
                let warmup = iterations.min(NEWTON_WARMUP);
                projected_gradient(mono, ball, sigma, &mut x, warmup);
                if !sphere_newton(mono, sigma, &mut x, NEWTON_STEPS) {
                    projected_gradient(mono, ball, sigma, &mut x, iterations - warmup);
                }
            }
            Ball::L1 => {
                let warmup = iterations.min(NEWTON_WARMUP);
                projected_gradient(mono, ball, sigma, &mut x, warmup);
                face_newton(mono, ball, sigma, &mut x, NEWTON_STEPS);
                projected_gradient(mono, ball, sigma, &mut x, iterations - warmup);
            }
        }
        let v = mono.eval(&x).abs();
        if v > best.value {
            best = Maximum { value: v, point: x };
        }
    }
    best
}

const NEWTON_WARMUP: usize = 25;
const NEWTON_STEPS: usize = 12;
fn projected_gradient(mono: &Monomials, ball: Ball, sigma: f64, x: &mut Vec<f64>, iterations: usize) -> usize {
    let d = mono.dim;
    let mut g = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut f = sigma * mono.eval_grad(x, &mut g);
    let mut step = 1.0 / (g.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-300);
    let mut stalls = 0;
    for it in 0..iterations {
        g.iter_mut().for_each(|v| *v *= sigma);
        let mut accepted = false;
        let mut f_new = f;
        while step > 1e-18 {
            for i in 0..d {
                trial[i] = x[i] + step * g[i];
            }
            ball.project(&mut trial);
            let gain: f64 = (0..d).map(|i| g[i] * (trial[i] - x[i])).sum();
            f_new = sigma * mono.eval(&trial);
            if gain <= 0.0 {
                break;
            }
            if f_new >= f + 1e-4 * gain {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return it;
        }
        let moved = (0..d).fold(0.0f64, |m, i| m.max((trial[i] - x[i]).abs()));
        let improved = f_new - f;
        x.copy_from_slice(&trial);
        f = sigma * mono.eval_grad(x, &mut g);
        step = (step * 2.0).min(1e8);
        if moved < 1e-15 || improved <= 1e-15 * f.abs() {
            stalls += 1;
            if stalls >= 3 {
                return it;
            }
        } else {
            stalls = 0;
        }
    }
    iterations
}

/// Riemannian Newton iteration for `sigma * P` on the unit sphere. Returns
/// false when the Hessian is not negative definite or a step fails to ascend.
fn sphere_newton(mono: &Monomials, sigma: f64, x: &mut [f64], steps: usize) -> bool {
    let d = mono.dim;
    if d < 2 {
        return true;
    }
    let mut g = vec![0.0; d];
    for _ in 0..steps {
        let f = sigma * mono.eval_grad(x, &mut g);
        let grad = DVector::from_column_slice(&g) * sigma;
        let xv = DVector::from_column_slice(x);
        let radial = xv.dot(&grad);
        let tangent = &grad - &xv * radial;
        if tangent.norm() <= 1e-15 * (1.0 + radial.abs()) {
            return true;
        }
        let basis = tangent_basis(&xv);
        let hb = basis.transpose() * (mono.hessian(x) * sigma) * &basis
            - DMatrix::<f64>::identity(d - 1, d - 1) * radial;
        let Some(chol) = (-hb).cholesky() else {
            return false;
        };
        let step = &basis * chol.solve(&(basis.transpose() * &tangent));
        let moved = xv + &step;
        let norm = moved.norm();
        let trial: Vec<f64> = moved.iter().map(|v| v / norm).collect();
        let f_new = sigma * mono.eval(&trial);
        if f_new < f - 1e-13 * f.abs().max(1e-300) {
            return false;
        }
        x.copy_from_slice(&trial);
        if step.norm() < 1e-14 {
            return true;
        }
    }
    true
}

/// Newton steps for `sigma * P` on the face of the `l1` or `l_inf` ball
/// containing `x`, stopping at the first step that leaves the face or fails
/// to ascend.
fn face_newton(mono: &Monomials, ball: Ball, sigma: f64, x: &mut [f64], steps: usize) {
    let d = mono.dim;
    let mut g = vec![0.0; d];
    for _ in 0..steps {
        let free: Vec<usize> = match ball {
            Ball::L1 => (0..d).filter(|&i| x[i].abs() > 1e-12).collect(),
            _ => (0..d).filter(|&i| x[i].abs() < 1.0 - 1e-12).collect(),
        };
        let k = free.len();
        if k == 0 || (ball == Ball::L1 && k == 1) {
            return;
        }
        let f = sigma * mono.eval_grad(x, &mut g);
        let h = mono.hessian(x);
        let hf = DMatrix::from_fn(k, k, |a, b| sigma * h[(free[a], free[b])]);
        let gf = DVector::from_iterator(k, free.iter().map(|&i| sigma * g[i]));
        let basis = match ball {
            Ball::L1 => {
                let normal = DVector::from_iterator(k, free.iter().map(|&i| x[i].signum() / (k as f64).sqrt()));
                tangent_basis(&normal)
            }
            _ => DMatrix::identity(k, k),
        };
        let Some(chol) = (-(basis.transpose() * &hf * &basis)).cholesky() else {
            return;
        };
        let step = &basis * chol.solve(&(basis.transpose() * &gf));
        if step.amax() < 1e-15 {
            return;
        }
        let mut trial = x.to_vec();
        for (a, &i) in free.iter().enumerate() {
            trial[i] += step[a];
            let leaves = match ball {
                Ball::L1 => trial[i].signum() != x[i].signum() || trial[i] == 0.0,
                _ => trial[i].abs() > 1.0,
            };
            if leaves {
                return;
            }
        }
        if sigma * mono.eval(&trial) < f - 1e-13 * f.abs().max(1e-300) {
            return;
        }
        x.copy_from_slice(&trial);
    }
}

/// Orthonormal basis of the complement of the unit vector `x`, from a Householder reflection.
fn tangent_basis(x: &DVector<f64>) -> DMatrix<f64> {
    let d = x.len();
    let mut v = x.clone();
    v[0] += if x[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv = v.dot(&v);
    let reflect = DMatrix::<f64>::identity(d, d) - &v * v.transpose() * (2.0 / vv);
    reflect.columns(1, d - 1).into_owned()
}

fn box_ascent(mono: &Monomials, sigma: f64, x: &mut Vec<f64>, iterations: usize) {
    let d = mono.dim;
    let mut f = sigma * mono.eval(x);
    let mut rounds = 0;
    while rounds < iterations {
        for i in 0..d {
            let c = mono.univariate(x, i);
            x[i] = maximize_univariate(&c, sigma, x[i]);
        }
        let used = projected_gradient(mono, Ball::LInf, sigma, x, 25);
        face_newton(mono, Ball::LInf, sigma, x, NEWTON_STEPS);
        rounds += 1 + used;
        let f_new = sigma * mono.eval(x);
        if f_new - f <= 1e-15 * f_new.abs().max(1e-300) {
            break;
        }
        f = f_new;
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

/// Maximizer of `sigma * sum_k c_k t^k` on `[-1, 1]`; keeps `current` on ties.
fn maximize_univariate(c: &[f64], sigma: f64, current: f64) -> f64 {
    let f = |t: f64| sigma * horner(c, t);
    let deriv: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
    let df = |t: f64| horner(&deriv, t);
    let mut best_t = current;
    let mut best_f = f(current);
    let consider = |t: f64, best_t: &mut f64, best_f: &mut f64| {
        let v = f(t);
        if v > *best_f {
            *best_f = v;
            *best_t = t;
        }
    };
    consider(-1.0, &mut best_t, &mut best_f);
    consider(1.0, &mut best_t, &mut best_f);
    if deriv.iter().any(|v| *v != 0.0) {
        const CELLS: usize = 128;
        let mut lo = -1.0;
        let mut dlo = df(lo);
        for k in 1..=CELLS {
            let hi = -1.0 + 2.0 * k as f64 / CELLS as f64;
            let dhi = df(hi);
            if dlo == 0.0 {
                consider(lo, &mut best_t, &mut best_f);
            } else if dlo.signum() != dhi.signum() && dhi != 0.0 {
                let (mut a, mut b, da) = (lo, hi, dlo);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let dm = df(m);
                    if dm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if dm.signum() == da.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                consider(0.5 * (a + b), &mut best_t, &mut best_f);
            }
            lo = hi;
            dlo = dhi;
        }
    }
    best_t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> OptBudget {
        OptBudget::with_seed(11)
    }

    #[test]
    fn univariate_interior_maximum() {
        // -(t - 0.3)^2 = -t^2 + 0.6 t - 0.09
        let t = maximize_univariate(&[-0.09, 0.6, -1.0], 1.0, -1.0);
        assert!((t - 0.3).abs() < 1e-12);
        // endpoint when monotone
        assert_eq!(maximize_univariate(&[0.0, 2.0], 1.0, 0.0), 1.0);
        assert_eq!(maximize_univariate(&[0.0, 2.0], -1.0, 0.0), -1.0);
    }

    #[test]
    fn x1x2_on_all_balls() {
        let p = SymTensor::from_entries(2, 2, [(vec![0, 1], 0.5)]).unwrap();
        let linf = maximize_abs(&p, Ball::LInf, &budget());
        assert!((linf.value - 1.0).abs() < 1e-12);
        let l2 = maximize_abs(&p, Ball::L2, &budget());
        // parametrization oracle: max cos t sin t = 1/2
        let oracle = (0..10_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 10_000.0;
                (t.cos() * t.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!((l2.value - oracle).abs() < 1e-7);
        let l1 = maximize_abs(&p, Ball::L1, &budget());
        assert!((l1.value - 0.25).abs() < 1e-10);
    }

    #[test]
    fn points_are_feasible() {
        let p = SymTensor::from_entries(
            3,
            3,
            [(vec![0, 1, 2], 1.0), (vec![0, 0, 0], -0.4), (vec![1, 1, 2], 0.9)],
        )
        .unwrap();
        for ball in Ball::ALL {
            let m = maximize_abs(&p, ball, &budget());
            assert!(ball.norm(&m.point) <= 1.0 + 1e-12);
            assert!((p.evaluate(&m.point).unwrap().abs() - m.value).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_box_maximum() {
        // x1^2 - 4 x2^2 + 2 x1 x2: for x1 = 1 the best x2 is interior (1/4)
        let p = SymTensor::from_entries(2, 2, [(vec![0, 0], 1.0), (vec![1, 1], -4.0), (vec![0, 1], 1.0)]).unwrap();
        let m = maximize_abs(&p, Ball::LInf, &budget());
        // grid oracle over the square
        let mut oracle = 0.0f64;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = [-1.0 + i as f64 / 200.0, -1.0 + j as f64 / 200.0];
                oracle = oracle.max(p.evaluate(&x).unwrap().abs());
            }
        }
        assert!(m.value >= oracle - 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SymTensor::from_entries(3, 4, [(vec![0, 1, 2], 1.0), (vec![1, 2, 3], -0.7), (vec![0, 0, 3], 0.2)]).unwrap();
        let a = maximize_abs(&p, Ball::L2, &budget());
        let b = maximize_abs(&p, Ball::L2, &budget());
        assert_eq!(a, b);
    }

    #[test]
    fn budget_validation() {
        assert!(OptBudget { restarts: 0, ..OptBudget::default() }.validate().is_err());
        assert!(OptBudget { tolerance: 0.0, ..OptBudget::default() }.validate().is_err());
        assert!(OptBudget::default().validate().is_ok());
    }
}
