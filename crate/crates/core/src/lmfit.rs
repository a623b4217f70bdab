//! Levenberg-Marquardt fit of `w ≈ sum_k lambda_k ⊗^n u_k` at fixed rank.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::optim::OptBudget;
use crate::symtensor::{multi_indices, MultiIndex, SymTensor};

#[derive(Clone, Debug)]
pub(crate) struct RankFit {
    /// `(lambda_k, u_k)` with `u_k` unnormalized.
    pub terms: Vec<(f64, Vec<f64>)>,
    /// Largest absolute entry of the residual tensor.
    pub residual: f64,
}

struct Layout {
    d: usize,
    rank: usize,
    indices: Vec<Vec<(usize, u32)>>,
    target: DVector<f64>,
}

impl Layout {
    fn params(&self) -> usize {
        self.rank * (self.d + 1)
    }

    fn unpack<'a>(&self, theta: &'a [f64], k: usize) -> (f64, &'a [f64]) {
        let base = k * (self.d + 1);
        (theta[base], &theta[base + 1..base + 1 + self.d])
    }

    fn residual(&self, theta: &[f64]) -> DVector<f64> {
        let mut r = -self.target.clone();
        for k in 0..self.rank {
            let (lambda, u) = self.unpack(theta, k);
            for (row, vars) in self.indices.iter().enumerate() {
                r[row] += lambda * monomial(u, vars);
            }
        }
        r
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.indices.len(), self.params());
        for k in 0..self.rank {
            let (lambda, u) = self.unpack(theta, k);
            let base = k * (self.d + 1);
            for (row, vars) in self.indices.iter().enumerate() {
                j[(row, base)] = monomial(u, vars);
                for (a, &(i, p)) in vars.iter().enumerate() {
                    let mut g = lambda * p as f64 * u[i].powi(p as i32 - 1);
                    for (b, &(l, q)) in vars.iter().enumerate() {
                        if a != b {
                            g *= u[l].powi(q as i32);
                        }
                    }
                    j[(row, base + 1 + i)] = g;
                }
            }
        }
        j
    }
}

fn monomial(u: &[f64], vars: &[(usize, u32)]) -> f64 {
    vars.iter().map(|&(i, p)| u[i].powi(p as i32)).product()
}

fn entry_vector(w: &SymTensor, indices: &[MultiIndex]) -> DVector<f64> {
    DVector::from_iterator(indices.len(), indices.iter().map(|a| w.get(a.as_slice())))
}

/// Best rank-`rank` fit over `budget.restarts` seeded starts.
pub(crate) fn fit_rank(w: &SymTensor, rank: usize, budget: &OptBudget) -> RankFit {
    let n = w.order();
    let d = w.dim();
    let alphas: Vec<MultiIndex> = multi_indices(n, d).collect();
    let layout = Layout {
        d,
        rank,
        indices: alphas.iter().map(|a| a.multiplicities()).collect(),
        target: entry_vector(w, &alphas),
    };
    let scale = layout.target.amax().max(1e-300);
    let mut rng = budget.rng();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let starts = budget.restarts.clamp(1, 8);
    for start in 0..starts {
        let mut theta = vec![0.0; layout.params()];
        for k in 0..rank {
            let base = k * (d + 1);
            let u: Vec<f64> = if start == 0 && k == 0 {
                leading_direction(w)
            } else {
                (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            };
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            for i in 0..d {
                theta[base + 1 + i] = u[i] / norm * scale.powf(1.0 / n as f64);
            }
            theta[base] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let err = levenberg_marquardt(&layout, &mut theta, budget.iterations);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, theta));
        }
    }
    let (err, theta) = best.expect("at least one start");
    let terms = (0..rank)
        .map(|k| {
            let (lambda, u) = layout.unpack(&theta, k);
            (lambda, u.to_vec())
        })
        .collect();
    RankFit {
        terms,
        residual: err,
    }
}

fn leading_direction(w: &SymTensor) -> Vec<f64> {
    let f = w.flattening();
    let gram = &f * f.transpose();
    let eig = gram.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    eig.eigenvectors.column(k).iter().copied().collect()
}

/// Runs LM in place and returns the max-abs residual.
fn levenberg_marquardt(layout: &Layout, theta: &mut [f64], iterations: usize) -> f64 {
    let mut r = layout.residual(theta);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..iterations {
        if r.amax() < 1e-15 {
            break;
        }
        let j = layout.jacobian(theta);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t - s).collect();
            let r_trial = layout.residual(&trial);
            let c_trial = r_trial.norm_squared();
            if c_trial < cost {
                theta.copy_from_slice(&trial);
                r = r_trial;
                cost = c_trial;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    r.amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symtensor::sym_power;

    #[test]
    fn recovers_rank_one() {
        let x = [0.6, -0.3, 0.2];
        let w = sym_power(&x, 3).unwrap().scaled(-2.0);
        let fit = fit_rank(&w, 1, &OptBudget::with_seed(3));
        assert!(fit.residual < 1e-12, "residual {}", fit.residual);
    }

    #[test]
    fn recovers_rank_two_even_order() {
        let a = sym_power(&[1.0, 0.0], 2).unwrap();
        let b = sym_power(&[0.0, 1.0], 2).unwrap();
        let w = a.add_scaled(-1.0, &b).unwrap();
        let fit = fit_rank(&w, 2, &OptBudget::with_seed(5));
        assert!(fit.residual < 1e-10, "residual {}", fit.residual);
    }
}
