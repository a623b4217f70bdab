//! Unit balls of `ℓ1`, `ℓ2` and `ℓ∞` on `R^d`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ball {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl Ball {
    pub const ALL: [Ball; 3] = [Ball::L1, Ball::L2, Ball::LInf];

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            Ball::L1 => x.iter().map(|v| v.abs()).sum(),
            Ball::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Ball::LInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// The ball of the dual norm.
    pub fn dual(self) -> Ball {
        match self {
            Ball::L1 => Ball::LInf,
            Ball::L2 => Ball::L2,
            Ball::LInf => Ball::L1,
        }
    }

    /// `x / ||x||`, or `None` for the zero vector.
    pub fn normalize(self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.norm(x);
        (n > 0.0).then(|| x.iter().map(|v| v / n).collect())
    }

    /// Euclidean projection onto the unit ball, in place.
    pub fn project(self, x: &mut [f64]) {
        match self {
            Ball::LInf => x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0)),
            Ball::L2 => {
                let n = Ball::L2.norm(x);
                if n > 1.0 {
                    x.iter_mut().for_each(|v| *v /= n);
                }
            }
            Ball::L1 => {
                if Ball::L1.norm(x) <= 1.0 {
                    return;
                }
                let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
                mags.sort_by(|a, b| b.total_cmp(a));
                let mut cumulative = 0.0;
                let mut theta = 0.0;
                for (k, m) in mags.iter().enumerate() {
                    cumulative += m;
                    let t = (cumulative - 1.0) / (k + 1) as f64;
                    if *m > t {
                        theta = t;
                    } else {
                        break;
                    }
                }
                x.iter_mut()
                    .for_each(|v| *v = v.signum() * (v.abs() - theta).max(0.0));
            }
        }
    }

    /// Operator norm of `m` as a map `(R^cols, this norm) -> (R^rows, this norm)`.
    pub fn operator_norm(self, m: &DMatrix<f64>) -> f64 {
        if m.is_empty() {
            return 0.0;
        }
        match self {
            Ball::L1 => m
                .column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Ball::LInf => m
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Ball::L2 => m
                .clone()
                .svd(false, false)
                .singular_values
                .iter()
                .fold(0.0f64, |a, b| a.max(*b)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ball::L1 => "l1",
            Ball::L2 => "l2",
            Ball::LInf => "linf",
        }
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ball {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Ball::L1),
            "l2" => Ok(Ball::L2),
            "linf" | "l_inf" | "inf" => Ok(Ball::LInf),
            other => Err(Error::Domain(format!("unknown ball {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_and_duals() {
        let x = [3.0, -4.0];
        assert_eq!(Ball::L1.norm(&x), 7.0);
        assert_eq!(Ball::L2.norm(&x), 5.0);
        assert_eq!(Ball::LInf.norm(&x), 4.0);
        for b in Ball::ALL {
            assert_eq!(b.dual().dual(), b);
        }
    }

    #[test]
    fn l1_projection_is_feasible_and_minimal() {
        let mut x = vec![0.8, -0.6, 0.1];
        Ball::L1.project(&mut x);
        assert!((Ball::L1.norm(&x) - 1.0).abs() < 1e-12);
        // soft threshold with theta = 0.2 removes the small coordinate
        assert!((x[0] - 0.6).abs() < 1e-12);
        assert!((x[1] + 0.4).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn operator_norms() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(Ball::L1.operator_norm(&m), 4.0);
        assert_eq!(Ball::LInf.operator_norm(&m), 3.5);
        let id = DMatrix::<f64>::identity(3, 3) * 0.5;
        assert!((Ball::L2.operator_norm(&id) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn parse() {
        assert_eq!("linf".parse::<Ball>().unwrap(), Ball::LInf);
        assert!("l3".parse::<Ball>().is_err());
    }
}
