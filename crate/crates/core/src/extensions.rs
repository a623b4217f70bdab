//! Eventually constant sequences as a model of `ℓ∞ = c0''`, polynomials on
//! `c0` with banded plus geometric diagonal coefficients, and their
//! extensions to the model.
//!
//! Coordinates are 0-based. A [`TailVector`] `(head, t)` is the sequence
//! `x_k = head[k]` for `k < L` and `x_k = t` afterwards; `c0` elements have
//! `t = 0`. Because the coefficients are absolutely summable, every iterated
//! limit reduces to a finite sum plus a geometric tail in closed form.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::ideals::{ideal_norm, IdealKind, IdealNormDescriptor};
use crate::optim::{maximize_abs, OptBudget};
use crate::symtensor::{MultiIndex, SymTensor, MAX_DIM, MAX_ORDER};

/// Largest diagonal tail mass accepted by [`extension_norm_gap`].
pub const TAIL_MASS_LIMIT: f64 = 1e-4;

/// Eventually constant real sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailVector {
    pub head: Vec<f64>,
    pub tail: f64,
}

impl TailVector {
    pub fn new(head: Vec<f64>, tail: f64) -> Self {
        Self { head, tail }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new(), 0.0)
    }

    /// Constant sequence `(c, c, ...)`.
    pub fn constant(c: f64) -> Self {
        Self::new(Vec::new(), c)
    }

    pub fn get(&self, k: usize) -> f64 {
        self.head.get(k).copied().unwrap_or(self.tail)
    }

    /// `sup_k |x_k|`.
    pub fn norm(&self) -> f64 {
        self.head.iter().fold(self.tail.abs(), |m, v| m.max(v.abs()))
    }

    pub fn is_c0(&self) -> bool {
        self.tail == 0.0
    }

    /// First `s` coordinates followed by zeros.
    pub fn stage(&self, s: usize) -> TailVector {
        TailVector::new((0..s).map(|k| self.get(k)).collect(), 0.0)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `h(x) = (x, 0, 0, ...)`, an isometry from `c0` into the model.
pub fn canonical_embed(x: &[f64]) -> TailVector {
    TailVector::new(x.to_vec(), 0.0)
}

/// Diagonal coefficients `a_k = c * rho^(k + offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagonal {
    pub c: f64,
    pub rho: f64,
    #[serde(default)]
    pub offset: i32,
}

impl Diagonal {
    pub fn coef(&self, k: usize) -> f64 {
        self.c * self.rho.powi(k as i32 + self.offset)
    }

    /// `sum_{k >= from} a_k`.
    pub fn tail_sum(&self, from: usize) -> f64 {
        self.coef(from) / (1.0 - self.rho)
    }

    /// `sum_{k >= from} |a_k|`.
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.coef(from).abs() / (1.0 - self.rho.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BandLiteral {
    idx: Vec<usize>,
    val: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FamilyLiteral {
    #[serde(default)]
    banded: Vec<BandLiteral>,
    #[serde(default)]
    diag: Option<Diagonal>,
    n: usize,
}

/// An `n`-homogeneous polynomial on `c0`: finitely many tensor entries plus a
/// geometric diagonal `sum_k a_k x_k^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyLiteral", into = "FamilyLiteral")]
pub struct CoefficientFamily {
    order: usize,
    banded: Vec<(MultiIndex, f64)>,
    diag: Option<Diagonal>,
}

impl TryFrom<FamilyLiteral> for CoefficientFamily {
    type Error = Error;

    fn try_from(lit: FamilyLiteral) -> Result<Self> {
        CoefficientFamily::new(
            lit.n,
            lit.banded.into_iter().map(|b| (b.idx, b.val)).collect(),
            lit.diag,
        )
    }
}

impl From<CoefficientFamily> for FamilyLiteral {
    fn from(f: CoefficientFamily) -> Self {
        FamilyLiteral {
            banded: f
                .banded
                .into_iter()
                .map(|(idx, val)| BandLiteral {
                    idx: idx.as_slice().to_vec(),
                    val,
                })
                .collect(),
            diag: f.diag,
            n: f.order,
        }
    }
}

impl CoefficientFamily {
    /// Banded entries use the tensor convention of [`SymTensor`]: sorted
    /// indices, polynomial coefficient `multinomial * val`.
    pub fn new(order: usize, banded: Vec<(Vec<usize>, f64)>, diag: Option<Diagonal>) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::OrderOutOfRange(order));
        }
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(banded.len());
        for (idx, val) in banded {
            if idx.len() != order {
                return Err(Error::InvalidIndex(idx, "length differs from the order"));
            }
            if !val.is_finite() {
                return Err(Error::Domain("banded value is not finite".into()));
            }
            let key = MultiIndex::new(idx)?;
            if !seen.insert(key.clone()) {
                return Err(Error::InvalidIndex(key.as_slice().to_vec(), "duplicate entry"));
            }
            if val != 0.0 {
                entries.push((key, val));
            }
        }
        if let Some(d) = &diag {
            if !(d.rho.abs() < 1.0) || !d.c.is_finite() {
                return Err(Error::Domain(format!(
                    "diagonal needs finite c and |rho| < 1, got c = {}, rho = {}",
                    d.c, d.rho
                )));
            }
        }
        Ok(Self {
            order,
            banded: entries,
            diag: diag.filter(|d| d.c != 0.0),
        })
    }

    pub fn zero(order: usize) -> Result<Self> {
        Self::new(order, Vec::new(), None)
    }

    /// `x_0^n`.
    pub fn monomial(order: usize, c: f64) -> Result<Self> {
        Self::new(order, vec![(vec![0; order], c)], None)
    }

    pub fn diagonal(order: usize, d: Diagonal) -> Result<Self> {
        Self::new(order, Vec::new(), Some(d))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn diag(&self) -> Option<&Diagonal> {
        self.diag.as_ref()
    }

    pub fn banded(&self) -> &[(MultiIndex, f64)] {
        &self.banded
    }

    pub fn is_zero(&self) -> bool {
        self.banded.is_empty() && self.diag.is_none()
    }

    /// Number of leading coordinates the banded part depends on.
    pub fn band_bound(&self) -> usize {
        self.banded
            .iter()
            .filter_map(|(a, _)| a.as_slice().last())
            .map(|&i| i + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn diag_tail_mass(&self, from: usize) -> f64 {
        self.diag.map_or(0.0, |d| d.tail_mass(from))
    }

    /// `P(x)` for the finitely supported sequence `(x, 0, 0, ...)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let at = |k: usize| x.get(k).copied().unwrap_or(0.0);
        let n = self.order as i32;
        let band: f64 = self
            .banded
            .iter()
            .map(|(a, v)| a.multinomial() * v * a.as_slice().iter().map(|&i| at(i)).product::<f64>())
            .sum();
        let diag = self.diag.map_or(0.0, |d| {
            x.iter().enumerate().map(|(k, v)| d.coef(k) * v.powi(n)).sum()
        });
        band + diag
    }

    /// `P̄(z)` in closed form: the banded part on the materialized sequence and
    /// the diagonal as a finite sum plus `t^n` times the tail sum.
    pub fn extend(&self, z: &TailVector) -> f64 {
        let n = self.order as i32;
        let band: f64 = self
            .banded
            .iter()
            .map(|(a, v)| a.multinomial() * v * a.as_slice().iter().map(|&i| z.get(i)).product::<f64>())
            .sum();
        let diag = self.diag.map_or(0.0, |d| {
            let head: f64 = z.head.iter().enumerate().map(|(k, v)| d.coef(k) * v.powi(n)).sum();
            head + z.tail.powi(n) * d.tail_sum(z.head.len())
        });
        band + diag
    }

    /// Iterated extension `Ā(z_1, ..., z_n)` of the associated symmetric form.
    pub fn multilinear(&self, args: &[&TailVector]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: args.len(),
            });
        }
        let mut total = 0.0;
        for (a, v) in &self.banded {
            for perm in a.permutations() {
                total += v * perm.iter().zip(args).map(|(&i, z)| z.get(i)).product::<f64>();
            }
        }
        if let Some(d) = &self.diag {
            let len = args.iter().map(|z| z.head.len()).max().unwrap_or(0);
            for k in 0..len {
                total += d.coef(k) * args.iter().map(|z| z.get(k)).product::<f64>();
            }
            let tails: f64 = args.iter().map(|z| z.tail).product();
            if tails != 0.0 {
                total += tails * d.tail_sum(len);
            }
        }
        Ok(total)
    }

    /// `P ∘ R_dim` as a tensor on `R^dim`: entries touching later coordinates are dropped.
    pub fn truncate(&self, dim: usize) -> Result<SymTensor> {
        let n = self.order;
        let mut t = SymTensor::from_entries(
            n,
            dim,
            self.banded
                .iter()
                .filter(|(a, _)| a.as_slice().iter().all(|&i| i < dim))
                .map(|(a, v)| (a.as_slice().to_vec(), *v)),
        )?;
        if let Some(d) = &self.diag {
            for k in 0..dim {
                let idx = vec![k; n];
                let v = t.get(&idx) + d.coef(k);
                t.set(&idx, v)?;
            }
        }
        Ok(t)
    }

    /// Head length covering both the requested `head_len` and the banded support.
    pub fn model_dim(&self, head_len: usize) -> usize {
        head_len.max(self.band_bound())
    }

    /// `(h, t) -> P̄(TailVector { head: h, tail: t })` as a tensor on
    /// `R^{head_len + 1}`, the last coordinate carrying the tail.
    pub fn extended_tensor(&self, head_len: usize) -> Result<SymTensor> {
        let n = self.order;
        let dim = head_len + 1;
        if dim > MAX_DIM {
            return Err(Error::InvalidDimension(format!(
                "head length {head_len} plus the tail coordinate exceeds {MAX_DIM}"
            )));
        }
        let full = self.model_dim(head_len);
        let base = self.truncate(full)?;
        // coordinates past the head all read the tail value
        let lift = DMatrix::from_fn(full, dim, |r, c| (r.min(head_len) == c) as u8 as f64);
        let mut t = base.compose(&lift)?;
        if let Some(d) = &self.diag {
            let idx = vec![head_len; n];
            let v = t.get(&idx) + d.tail_sum(full);
            t.set(&idx, v)?;
        }
        Ok(t)
    }
}

/// Closed-form evaluator of the Aron-Berner extension of a family.
#[derive(Clone, Copy, Debug)]
pub struct AbExtension<'a> {
    family: &'a CoefficientFamily,
}

impl AbExtension<'_> {
    pub fn value(&self, z: &TailVector) -> f64 {
        self.family.extend(z)
    }

    pub fn multilinear(&self, args: &[&TailVector]) -> Result<f64> {
        self.family.multilinear(args)
    }
}

pub fn ab_extend(p: &CoefficientFamily) -> AbExtension<'_> {
    AbExtension { family: p }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageValue {
    pub stage: usize,
    pub value: f64,
}

/// Values `P(R_s z)` along the stages and the limit they settle on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniteratedReport {
    pub trace: Vec<StageValue>,
    /// Value at the last stage.
    pub value: f64,
    /// Whether the last two stages agree within the tolerance.
    pub converged: bool,
}

pub(crate) fn check_stages(stages: &[usize]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::Domain("stage list is empty".into()));
    }
    if stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("stages must be strictly increasing".into()));
    }
    Ok(())
}

/// Limit of `P(R_s z)` as `s` runs through `stages`.
pub fn uniterated_extend(
    p: &CoefficientFamily,
    z: &TailVector,
    stages: &[usize],
    tol: f64,
) -> Result<UniteratedReport> {
    check_stages(stages)?;
    let trace: Vec<StageValue> = stages
        .iter()
        .map(|&s| StageValue {
            stage: s,
            value: p.evaluate(&z.stage(s).head),
        })
        .collect();
    let value = trace.last().map_or(0.0, |v| v.value);
    let converged = match trace.len() {
        1 => z.tail == 0.0 && stages[0] >= z.head.len().max(p.band_bound()),
        len => (trace[len - 1].value - trace[len - 2].value).abs() <= tol * (1.0 + value.abs()),
    };
    Ok(UniteratedReport {
        trace,
        value,
        converged,
    })
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Sup norms over the `c0` and `ℓ∞` model balls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormGap {
    pub c0: f64,
    pub extended: f64,
    pub gap: f64,
}

/// `||P||` over tail-0 vectors against `||P̄||` over the model ball, both
/// truncated to a head of length `head_len`.
pub fn extension_norm_gap(p: &CoefficientFamily, head_len: usize, budget: &OptBudget) -> Result<NormGap> {
    let mass = p.diag_tail_mass(head_len);
    if mass >= TAIL_MASS_LIMIT {
        return Err(Error::Domain(format!(
            "diagonal tail mass {mass:.3e} past head length {head_len} is not below {TAIL_MASS_LIMIT:e}"
        )));
    }
    let c0 = maximize_abs(&p.truncate(p.model_dim(head_len))?, Ball::LInf, budget).value;
    let extended = maximize_abs(&p.extended_tensor(head_len)?, Ball::LInf, budget).value;
    Ok(NormGap {
        c0,
        extended,
        gap: relative_gap(c0, extended),
    })
}

/// Ideal norm of `P` before and after extension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preservation {
    pub before: f64,
    pub after: f64,
    pub gap: f64,
}

fn check_model_ideal(ideal: &IdealNormDescriptor) -> Result<()> {
    if ideal.ball != Ball::LInf {
        return Err(Error::Domain("the sequence model uses the l_inf ball".into()));
    }
    if !matches!(ideal.kind, IdealKind::Sup | IdealKind::Nuclear) {
        return Err(Error::Domain(format!("ideal {} is not supported here", ideal.kind.name())));
    }
    Ok(())
}

/// Sup or nuclear norm of `P` on the head against the same norm of `P̄` on
/// the head plus one tail coordinate.
pub fn ideal_norm_preservation(
    p: &CoefficientFamily,
    ideal: &IdealNormDescriptor,
    head_len: usize,
    budget: &OptBudget,
) -> Result<Preservation> {
    check_model_ideal(ideal)?;
    let before = ideal_norm(&p.truncate(p.model_dim(head_len))?, ideal, budget)?.value;
    let after = ideal_norm(&p.extended_tensor(head_len)?, ideal, budget)?.value;
    Ok(Preservation {
        before,
        after,
        gap: relative_gap(before, after),
    })
}

/// Settings for [`q_radius`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRadiusConfig {
    /// Number of trailing degrees in the limsup window.
    pub window: usize,
    /// Membership requires `proxy < 1 - margin`.
    pub margin: f64,
    pub head_len: usize,
}

impl Default for QRadiusConfig {
    fn default() -> Self {
        Self {
            window: 3,
            margin: 1e-3,
            head_len: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRadiusReport {
    pub norms: Vec<f64>,
    pub proxy: f64,
    pub member: bool,
    pub extended_norms: Vec<f64>,
    pub extended_proxy: f64,
    pub extended_member: bool,
    pub agree: bool,
}

/// `max_{k in window} ||P_k||^{1/k}` for the series `P_1, P_2, ...` and for
/// its degreewise extension. `series[k - 1]` must have order `k`.
pub fn q_radius(
    series: &[CoefficientFamily],
    ideal: &IdealNormDescriptor,
    config: &QRadiusConfig,
    budget: &OptBudget,
) -> Result<QRadiusReport> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    check_model_ideal(ideal)?;
    if config.window == 0 || !(config.margin >= 0.0) {
        return Err(Error::Domain("window must be positive and margin nonnegative".into()));
    }
    for (k, p) in series.iter().enumerate() {
        if p.order() != k + 1 {
            return Err(Error::Domain(format!(
                "series term {} has order {}",
                k + 1,
                p.order()
            )));
        }
    }
    let mut norms = Vec::with_capacity(series.len());
    let mut extended_norms = Vec::with_capacity(series.len());
    for (k, p) in series.iter().enumerate() {
        let sub = budget.reseeded(k as u64);
        norms.push(ideal_norm(&p.truncate(p.model_dim(config.head_len))?, ideal, &sub)?.value);
        extended_norms.push(ideal_norm(&p.extended_tensor(config.head_len)?, ideal, &sub)?.value);
    }
    let proxy_of = |values: &[f64]| {
        let start = values.len().saturating_sub(config.window);
        values[start..]
            .iter()
            .enumerate()
            .map(|(j, v)| v.abs().powf(1.0 / (start + j + 1) as f64))
            .fold(0.0, f64::max)
    };
    let proxy = proxy_of(&norms);
    let extended_proxy = proxy_of(&extended_norms);
    let member = proxy < 1.0 - config.margin;
    let extended_member = extended_proxy < 1.0 - config.margin;
    Ok(QRadiusReport {
        norms,
        proxy,
        member,
        extended_norms,
        extended_proxy,
        extended_member,
        agree: member == extended_member,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halving(order: usize) -> CoefficientFamily {
        CoefficientFamily::diagonal(
            order,
            Diagonal {
                c: 1.0,
                rho: 0.5,
                offset: 1,
            },
        )
        .unwrap()
    }

    fn x1x2() -> CoefficientFamily {
        CoefficientFamily::new(2, vec![(vec![0, 1], 0.5)], None).unwrap()
    }

    #[test]
    fn embedding_is_isometric() {
        let z = canonical_embed(&[1.0, -2.0]);
        assert_eq!(z, TailVector::new(vec![1.0, -2.0], 0.0));
        assert_eq!(z.norm(), 2.0);
        assert_eq!(canonical_embed(&[]).norm(), 0.0);
    }

    #[test]
    fn geometric_extension_at_constant_one() {
        let p = halving(2);
        let truncated: f64 = (1..=60).map(|k| 0.5f64.powi(k)).sum();
        assert!((ab_extend(&p).value(&TailVector::constant(1.0)) - truncated).abs() < 1e-15);
        assert_eq!(ab_extend(&p).value(&TailVector::constant(1.0)), 1.0);
    }

    #[test]
    fn banded_extension_materializes_tail() {
        let z = TailVector::new(vec![1.0], 1.0);
        assert_eq!(ab_extend(&x1x2()).value(&z), 1.0);
    }

    #[test]
    fn restriction_to_c0() {
        let p = CoefficientFamily::new(
            3,
            vec![(vec![0, 1, 4], 0.7), (vec![2, 2, 2], -1.0)],
            Some(Diagonal {
                c: 0.3,
                rho: -0.6,
                offset: 0,
            }),
        )
        .unwrap();
        let x = [0.4, -1.0, 0.25, 0.0, 2.0, -0.5];
        assert_eq!(p.extend(&canonical_embed(&x)), p.evaluate(&x));
        let z = TailVector::new(x.to_vec(), -0.3);
        let via_form = p.multilinear(&[&z, &z, &z]).unwrap();
        assert!((via_form - p.extend(&z)).abs() < 1e-14);
    }

    #[test]
    fn uniterated_partial_sums() {
        let p = halving(2);
        let r = uniterated_extend(&p, &TailVector::constant(1.0), &[5, 10, 20, 40], 1e-5).unwrap();
        assert_eq!(r.trace[0].value, 0.96875);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.converged);

        let z = canonical_embed(&[0.5, 1.0, -1.0]);
        let q = x1x2();
        let r = uniterated_extend(&q, &z, &[3, 4, 8], 1e-12).unwrap();
        assert!(r.trace.iter().all(|v| v.value == q.evaluate(&z.head)));

        let zero = CoefficientFamily::zero(3).unwrap();
        let r = uniterated_extend(&zero, &TailVector::constant(1.0), &[1, 2], 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(uniterated_extend(&p, &z, &[3, 3], 1e-9).is_err());
    }

    #[test]
    fn extended_tensor_matches_closed_form() {
        let p = CoefficientFamily::new(
            2,
            vec![(vec![0, 5], 0.5), (vec![1, 1], 2.0)],
            Some(Diagonal {
                c: 1.0,
                rho: 0.5,
                offset: 1,
            }),
        )
        .unwrap();
        let t = p.extended_tensor(3).unwrap();
        assert_eq!(t.dim(), 4);
        let h = [0.3, -0.7, 0.9];
        for tail in [0.0, 1.0, -0.4] {
            let z = TailVector::new(h.to_vec(), tail);
            let mut x = h.to_vec();
            x.push(tail);
            assert!((t.evaluate(&x).unwrap() - p.extend(&z)).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_gap_examples() {
        let budget = OptBudget::with_seed(4);
        let g = extension_norm_gap(&halving(2), 14, &budget).unwrap();
        assert!((g.extended - 1.0).abs() < 1e-9, "{g:?}");
        assert!((g.c0 - (1.0 - 0.5f64.powi(14))).abs() < 1e-9, "{g:?}");
        assert!(g.gap < 1e-3);

        let g = extension_norm_gap(&x1x2(), 2, &budget).unwrap();
        assert_eq!((g.c0, g.extended), (1.0, 1.0));

        let g = extension_norm_gap(&CoefficientFamily::zero(2).unwrap(), 2, &budget).unwrap();
        assert_eq!((g.c0, g.extended, g.gap), (0.0, 0.0, 0.0));
        assert!(extension_norm_gap(&halving(2), 5, &budget).is_err());
    }

    #[test]
    fn nuclear_preservation_examples() {
        let budget = OptBudget::with_seed(4);
        let nuclear = IdealNormDescriptor::nuclear(Ball::LInf);
        for n in 1..=3 {
            let p = CoefficientFamily::monomial(n, 1.0).unwrap();
            let r = ideal_norm_preservation(&p, &nuclear, 2, &budget).unwrap();
            assert!((r.before - 1.0).abs() < 1e-6 && (r.after - 1.0).abs() < 1e-6, "{r:?}");
        }
        let r = ideal_norm_preservation(&halving(2), &nuclear, 8, &budget).unwrap();
        assert!(r.gap < 0.02, "{r:?}");
        // the tail coordinate carries the mass 2^-8
        assert!((r.after - 1.0).abs() < 1e-4, "{r:?}");
        let r = ideal_norm_preservation(&CoefficientFamily::zero(2).unwrap(), &nuclear, 3, &budget).unwrap();
        assert_eq!((r.before, r.after), (0.0, 0.0));
    }

    #[test]
    fn q_radius_examples() {
        let budget = OptBudget::with_seed(4);
        let sup = IdealNormDescriptor::sup(Ball::LInf);
        let config = QRadiusConfig::default();
        let series = |c: fn(usize) -> f64| -> Vec<CoefficientFamily> {
            (1..=5).map(|k| CoefficientFamily::monomial(k, c(k)).unwrap()).collect()
        };
        let r = q_radius(&series(|k| 0.5f64.powi(k as i32)), &sup, &config, &budget).unwrap();
        assert!((r.proxy - 0.5).abs() < 1e-12 && r.member && r.agree, "{r:?}");
        let r = q_radius(&series(|_| 1.0), &sup, &config, &budget).unwrap();
        assert!((r.proxy - 1.0).abs() < 1e-12 && !r.member && r.agree, "{r:?}");
        let r = q_radius(&series(|_| 0.0), &sup, &config, &budget).unwrap();
        assert_eq!(r.proxy, 0.0);
        assert!(r.member);
        assert!(matches!(q_radius(&[], &sup, &config, &budget), Err(Error::EmptySeries)));
    }

    #[test]
    fn family_json_round_trip() {
        let s = r#"{"banded":[{"idx":[0,1],"val":0.5}],"diag":{"c":1.0,"rho":0.5,"offset":1},"n":2}"#;
        let p: CoefficientFamily = serde_json::from_str(s).unwrap();
        assert_eq!(p.band_bound(), 2);
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<CoefficientFamily>(&back).unwrap(), p);
        assert!(serde_json::from_str::<CoefficientFamily>(r#"{"diag":{"c":1,"rho":1.5},"n":2}"#).is_err());
        assert!(serde_json::from_str::<CoefficientFamily>(r#"{"banded":[{"idx":[1,0],"val":1}],"n":2}"#).is_err());
    }
}
