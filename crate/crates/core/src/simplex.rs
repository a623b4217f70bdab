//! Dense revised simplex for `min sum |lambda_k|` subject to `sum lambda_k a_k = t`,
//! with columns appended between solves.
//!
//! Each pool column enters with either sign, so any invertible set of columns
//! gives a feasible basis once the signs follow `B^{-1} t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 48;
const DEGENERATE_SWITCH: usize = 64;
const REPAIR_TOL: f64 = 1e-7;

pub(crate) struct ColumnSimplex {
    target: DVector<f64>,
    columns: Vec<DVector<f64>>,
    /// `(column, sign)` per basis position.
    basis: Vec<(usize, f64)>,
    in_basis: Vec<bool>,
    /// Squared column norms used to scale the entering rule.
    norms: Vec<f64>,
    binv: DMatrix<f64>,
    x: DVector<f64>,
    since_refactor: usize,
}

impl ColumnSimplex {
    /// `initial` names `rows` columns forming an invertible matrix.
    pub fn new(columns: &[Vec<f64>], initial: &[usize], target: &[f64]) -> Result<Self> {
        let rows = target.len();
        if initial.len() != rows {
            return Err(Error::Lp("initial basis has the wrong size".into()));
        }
        let mut s = Self {
            target: DVector::from_column_slice(target),
            columns: columns.iter().map(|c| DVector::from_column_slice(c)).collect(),
            basis: initial.iter().map(|&k| (k, 1.0)).collect(),
            in_basis: vec![false; columns.len()],
            norms: columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().max(1e-300)).collect(),
            binv: DMatrix::zeros(rows, rows),
            x: DVector::zeros(rows),
            since_refactor: 0,
        };
        for &k in initial {
            s.in_basis[k] = true;
        }
        s.refactor()?;
        s.fix_signs()?;
        Ok(s)
    }

    /// Flips signs so the basic solution is nonnegative.
    fn fix_signs(&mut self) -> Result<()> {
        for i in 0..self.x.len() {
            if self.x[i] < 0.0 {
                self.basis[i].1 = -self.basis[i].1;
            }
        }
        self.refactor()
    }

    /// Rebuilds an invertible basis after round-off made the current one
    /// singular: keeps a maximal independent subset of the basic columns and
    /// completes it from the pool in index order.
    fn repair(&mut self) -> Result<()> {
        let rows = self.target.len();
        let mut kept: Vec<(usize, f64)> = Vec::with_capacity(rows);
        let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(rows);
        let mut try_add = |k: usize, sign: f64, col: &DVector<f64>, ortho: &mut Vec<DVector<f64>>| {
            let scale = col.norm();
            if scale == 0.0 {
                return false;
            }
            let mut v = col / scale;
            for _ in 0..2 {
                for u in ortho.iter() {
                    let p = u.dot(&v);
                    v -= u * p;
                }
            }
            let left = v.norm();
            if left < REPAIR_TOL {
                return false;
            }
            ortho.push(v / left);
            kept.push((k, sign));
            true
        };
        for &(k, sign) in &self.basis {
            try_add(k, sign, &self.columns[k], &mut ortho);
        }
        for k in 0..self.columns.len() {
            if ortho.len() == rows {
                break;
            }
            if !self.basis.iter().any(|b| b.0 == k) {
                try_add(k, 1.0, &self.columns[k], &mut ortho);
            }
        }
        if kept.len() < rows {
            return Err(Error::Lp("columns do not span the target space".into()));
        }
        for b in &self.basis {
            self.in_basis[b.0] = false;
        }
        for b in &kept {
            self.in_basis[b.0] = true;
        }
        self.basis = kept;
        self.refactor()?;
        self.fix_signs()
    }

    pub fn push_column(&mut self, col: &[f64]) {
        self.columns.push(DVector::from_column_slice(col));
        self.in_basis.push(false);
        self.norms.push(col.iter().map(|v| v * v).sum::<f64>().max(1e-300));
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let rows = self.target.len();
        DMatrix::from_fn(rows, rows, |r, c| {
            let (k, s) = self.basis[c];
            s * self.columns[k][r]
        })
    }

    fn refactor(&mut self) -> Result<()> {
        self.binv = self
            .basis_matrix()
            .try_inverse()
            .ok_or_else(|| Error::Lp("singular basis".into()))?;
        self.x = &self.binv * &self.target;
        for v in self.x.iter_mut() {
            if v.abs() < FEAS_TOL {
                *v = v.abs();
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Dual vector `y` with `B^T y = 1`.
    pub fn dual(&self) -> DVector<f64> {
        self.binv.row_sum_tr()
    }

    pub fn objective(&self) -> f64 {
        self.x.iter().sum()
    }

    /// Signed coefficients of the basic columns, skipping zeros.
    pub fn primal(&self) -> Vec<(usize, f64)> {
        self.basis
            .iter()
            .zip(self.x.iter())
            .filter(|(_, v)| **v > 0.0)
            .map(|(&(k, s), v)| (k, s * v))
            .collect()
    }

    /// Pivots to optimality over the current columns.
    pub fn solve(&mut self) -> Result<()> {
        let limit = 200 * (self.target.len() + self.columns.len());
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let y = self.dual();
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut entering: Option<(usize, f64, f64)> = None;
            for (k, col) in self.columns.iter().enumerate() {
                if self.in_basis[k] {
                    continue;
                }
                let v = y.dot(col);
                let gain = v.abs() - 1.0;
                if gain <= COST_TOL {
                    continue;
                }
                let score = if bland { gain } else { gain * gain / self.norms[k] };
                if entering.is_none_or(|(_, _, g)| score > g) {
                    entering = Some((k, v.signum(), score));
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, sign, _)) = entering else {
                return Ok(());
            };
            let dir = &self.binv * (&self.columns[q] * sign);
            // Harris two-pass ratio test
            let mut bound = f64::INFINITY;
            for i in 0..dir.len() {
                if dir[i] > PIVOT_TOL {
                    bound = bound.min((self.x[i] + FEAS_TOL) / dir[i]);
                }
            }
            if !bound.is_finite() {
                return Err(Error::Lp("unbounded master problem".into()));
            }
            let mut leave: Option<usize> = None;
            for i in 0..dir.len() {
                if dir[i] > PIVOT_TOL && self.x[i] / dir[i] <= bound {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.basis[i].0 < self.basis[l].0,
                        Some(l) => dir[i] > dir[l],
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            let r = leave.expect("ratio test found a row");
            let theta = (self.x[r] / dir[r]).max(0.0);
            degenerate = if theta <= FEAS_TOL { degenerate + 1 } else { 0 };
            for i in 0..dir.len() {
                self.x[i] = (self.x[i] - theta * dir[i]).max(0.0);
            }
            self.x[r] = theta;
            let leaving = self.basis[r].0;
            self.in_basis[leaving] = false;
            self.in_basis[q] = true;
            self.basis[r] = (q, sign);
            // eta update of the inverse
            let pivot = dir[r];
            let row_r = self.binv.row(r) / pivot;
            for i in 0..dir.len() {
                if i != r && dir[i] != 0.0 {
                    let f = dir[i];
                    for c in 0..self.binv.ncols() {
                        self.binv[(i, c)] -= f * row_r[c];
                    }
                }
            }
            self.binv.set_row(r, &row_r);
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY && self.refactor().is_err() {
                self.repair()?;
                degenerate = 0;
            }
        }
        Err(Error::Lp("simplex iteration limit".into()))
    }

    /// Keeps the columns flagged in `keep` (basic columns are always kept)
    /// and returns the old index of each surviving column.
    pub fn retain(&mut self, keep: &[bool]) -> Vec<usize> {
        let survivors: Vec<usize> = (0..self.columns.len())
            .filter(|&k| keep[k] || self.in_basis[k])
            .collect();
        let mut position = vec![usize::MAX; self.columns.len()];
        for (new, &old) in survivors.iter().enumerate() {
            position[old] = new;
        }
        self.columns = survivors.iter().map(|&k| self.columns[k].clone()).collect();
        self.in_basis = survivors.iter().map(|&k| self.in_basis[k]).collect();
        self.norms = survivors.iter().map(|&k| self.norms[k]).collect();
        for b in &mut self.basis {
            b.0 = position[b.0];
        }
        survivors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_minimal_combination() {
        // t = (1, 1); columns e1, e2, (1, 1): cheapest uses (1, 1) once
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let mut s = ColumnSimplex::new(&cols, &[0, 1], &[1.0, 1.0]).unwrap();
        assert!((s.objective() - 2.0).abs() < 1e-12);
        s.solve().unwrap();
        assert!((s.objective() - 1.0).abs() < 1e-12);
        assert_eq!(s.primal(), vec![(2, 1.0)]);
    }

    #[test]
    fn signs_and_appended_columns() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut s = ColumnSimplex::new(&cols, &[0, 1], &[-2.0, 1.0]).unwrap();
        s.solve().unwrap();
        assert!((s.objective() - 3.0).abs() < 1e-12);
        s.push_column(&[-1.0, 0.5]);
        s.solve().unwrap();
        assert!((s.objective() - 2.0).abs() < 1e-12);
        let y = s.dual();
        // dual feasibility on every column
        for c in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5]] {
            assert!((y[0] * c[0] + y[1] * c[1]).abs() <= 1.0 + 1e-12);
        }
        assert!((y[0] * -2.0 + y[1] - 2.0).abs() < 1e-12);
    }
}
