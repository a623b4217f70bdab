//! Symmetric tensors on `R^d` and the homogeneous polynomials they define.
//!
//! A [`SymTensor`] of order `n` stores the entries `A[i_1..i_n]` of a
//! symmetric tensor, one per sorted multi-index. The associated polynomial is
//!
//! ```text
//! P(x) = sum_{sorted a} multinomial(a) * A[a] * x^a
//! ```
//!
//! so the rank-one tensor `x ⊗ ... ⊗ x` has entries `prod_j x[a_j]` and the
//! duality pairing `<P, ⊗^n z>` is simply `P(z)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 6;
/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Sorted tuple of coordinate indices (0-based).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Wraps an already sorted index tuple.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidIndex(indices, "indices must be nondecreasing"));
        }
        Ok(Self(indices))
    }

    /// Sorts an arbitrary index tuple.
    pub fn sorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// `(index, multiplicity)` pairs in increasing index order.
    pub fn multiplicities(&self) -> Vec<(usize, u32)> {
        let mut out: Vec<(usize, u32)> = Vec::new();
        for &i in &self.0 {
            match out.last_mut() {
                Some((j, c)) if *j == i => *c += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    /// `n! / prod(multiplicity!)`, the number of distinct orderings.
    pub fn multinomial(&self) -> f64 {
        let mut value = factorial(self.0.len());
        for (_, c) in self.multiplicities() {
            value /= factorial(c as usize);
        }
        value
    }

    /// All distinct orderings of the tuple, in lexicographic order.
    pub fn permutations(&self) -> Vec<Vec<usize>> {
        let mut current = self.0.clone();
        let mut out = vec![current.clone()];
        while next_permutation(&mut current) {
            out.push(current.clone());
        }
        out
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Number of sorted multi-indices of length `n` over `d` coordinates, `C(d+n-1, n)`.
pub fn sym_dim(n: usize, d: usize) -> usize {
    let mut num = 1u128;
    let mut den = 1u128;
    for j in 0..n {
        num *= (d + j) as u128;
        den *= (j + 1) as u128;
    }
    (num / den) as usize
}

/// Iterates over all sorted multi-indices of length `n` over `0..d`.
pub fn multi_indices(n: usize, d: usize) -> impl Iterator<Item = MultiIndex> {
    let mut current: Option<Vec<usize>> = if d == 0 && n > 0 { None } else { Some(vec![0; n]) };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        // advance
        let mut next = out.clone();
        let mut pos = n;
        loop {
            if pos == 0 {
                current = None;
                break;
            }
            pos -= 1;
            if next[pos] + 1 < d {
                let v = next[pos] + 1;
                for slot in next.iter_mut().skip(pos) {
                    *slot = v;
                }
                current = Some(next);
                break;
            }
        }
        Some(MultiIndex(out))
    })
}

fn check_shape(n: usize, d: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::OrderOutOfRange(n));
    }
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidDimension(format!(
            "dimension {d} outside supported range 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

/// Symmetric order-`n` tensor on `R^d`; also the coefficient data of an
/// `n`-homogeneous polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    order: usize,
    dim: usize,
    entries: BTreeMap<MultiIndex, f64>,
}

impl SymTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        check_shape(order, dim)?;
        Ok(Self {
            order,
            dim,
            entries: BTreeMap::new(),
        })
    }

    /// Builds a tensor from `(sorted index, entry)` pairs. Duplicates are rejected.
    pub fn from_entries<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Self::zeros(order, dim)?;
        for (idx, val) in entries {
            let key = t.check_index(idx)?;
            if t.entries.contains_key(&key) {
                return Err(Error::InvalidIndex(key.0, "duplicate entry"));
            }
            if val != 0.0 {
                t.entries.insert(key, val);
            }
        }
        Ok(t)
    }

    /// Builds the tensor of the polynomial `sum_a coef_a x^a`. Indices need not be
    /// sorted and repeated monomials accumulate.
    pub fn from_monomials<I>(order: usize, dim: usize, monomials: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Self::zeros(order, dim)?;
        for (idx, coef) in monomials {
            let key = MultiIndex::sorted(idx);
            let key = t.check_index(key.0)?;
            let entry = coef / key.multinomial();
            *t.entries.entry(key).or_insert(0.0) += entry;
        }
        t.entries.retain(|_, v| *v != 0.0);
        Ok(t)
    }

    fn check_index(&self, idx: Vec<usize>) -> Result<MultiIndex> {
        if idx.len() != self.order {
            return Err(Error::InvalidIndex(idx, "length differs from tensor order"));
        }
        if idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::InvalidIndex(idx, "coordinate out of range"));
        }
        MultiIndex::new(idx)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Entry at an arbitrary (not necessarily sorted) index tuple.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let key = MultiIndex::sorted(idx.to_vec());
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Sets an entry; the index is sorted first. A zero value removes the entry.
    pub fn set(&mut self, idx: &[usize], val: f64) -> Result<()> {
        let key = self.check_index(MultiIndex::sorted(idx.to_vec()).0)?;
        if val == 0.0 {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, val);
        }
        Ok(())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinates that occur in at least one nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        let mut coords: Vec<usize> = self
            .entries
            .keys()
            .flat_map(|k| k.0.iter().copied())
            .collect();
        coords.sort_unstable();
        coords.dedup();
        coords
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &SymTensor) -> Result<()> {
        if self.order != other.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Value of the associated polynomial at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_vector(x)?;
        Ok(self
            .entries
            .iter()
            .map(|(k, v)| k.multinomial() * v * k.0.iter().map(|&i| x[i]).product::<f64>())
            .sum())
    }

    /// Gradient of the associated polynomial at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(x)?;
        let mono = self.monomials();
        let mut g = vec![0.0; self.dim];
        mono.eval_grad(x, &mut g);
        Ok(g)
    }

    /// Full contraction `sum_{i_1..i_n} A[i] B[i]`.
    pub fn pair_tensor(&self, other: &SymTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .entries
            .iter()
            .filter_map(|(k, v)| other.entries.get(k).map(|w| k.multinomial() * v * w))
            .sum())
    }

    pub fn scaled(&self, c: f64) -> SymTensor {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= c;
        }
        out.entries.retain(|_, v| *v != 0.0);
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &SymTensor) -> Result<SymTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (k, v) in &other.entries {
            *out.entries.entry(k.clone()).or_insert(0.0) += c * v;
        }
        out.entries.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &SymTensor) -> Result<f64> {
        Ok(self.add_scaled(-1.0, other)?.max_abs_entry())
    }

    /// Direct multilinear contraction `sum_{i_1..i_n} A[i] x_1[i_1] ... x_n[i_n]`.
    pub fn contract(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: args.len(),
            });
        }
        for a in args {
            self.check_vector(a)?;
        }
        let mut total = 0.0;
        for (k, v) in &self.entries {
            let mut s = 0.0;
            for perm in k.permutations() {
                s += perm.iter().zip(args).map(|(&i, a)| a[i]).product::<f64>();
            }
            total += v * s;
        }
        Ok(total)
    }

    /// `(⊗^n R) A` for a linear map `R: R^dim -> R^rows`.
    pub fn push_forward(&self, r: &DMatrix<f64>) -> Result<SymTensor> {
        if r.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: r.ncols(),
            });
        }
        let mut out = SymTensor::zeros(self.order, r.nrows())?;
        let rows: Vec<Vec<f64>> = (0..r.nrows())
            .map(|i| r.row(i).iter().copied().collect())
            .collect();
        let perms: Vec<(f64, Vec<Vec<usize>>)> = self
            .entries
            .iter()
            .map(|(k, v)| (*v, k.permutations()))
            .collect();
        for beta in multi_indices(self.order, r.nrows()) {
            let mut total = 0.0;
            for (v, ps) in &perms {
                let mut s = 0.0;
                for p in ps {
                    s += p
                        .iter()
                        .zip(&beta.0)
                        .map(|(&i, &j)| rows[j][i])
                        .product::<f64>();
                }
                total += v * s;
            }
            if total != 0.0 {
                out.entries.insert(beta, total);
            }
        }
        Ok(out)
    }

    /// The polynomial `x -> P(T x)` for `T: R^k -> R^dim` given as a `dim x k` matrix.
    pub fn compose(&self, t: &DMatrix<f64>) -> Result<SymTensor> {
        if t.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: t.nrows(),
            });
        }
        self.push_forward(&t.transpose())
    }

    /// Re-indexes the tensor onto the coordinates `coords` (which must cover the support).
    pub fn restrict_coords(&self, coords: &[usize]) -> Result<SymTensor> {
        let mut position = vec![usize::MAX; self.dim];
        for (new, &old) in coords.iter().enumerate() {
            if old >= self.dim {
                return Err(Error::InvalidIndex(coords.to_vec(), "coordinate out of range"));
            }
            position[old] = new;
        }
        let mut out = SymTensor::zeros(self.order, coords.len())?;
        for (k, v) in &self.entries {
            let mapped: Vec<usize> = k.0.iter().map(|&i| position[i]).collect();
            if mapped.contains(&usize::MAX) {
                continue;
            }
            out.entries.insert(MultiIndex::sorted(mapped), *v);
        }
        Ok(out)
    }

    /// Places the tensor into `R^new_dim`, sending coordinate `i` to `coords[i]`.
    pub fn embed_coords(&self, coords: &[usize], new_dim: usize) -> Result<SymTensor> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: coords.len(),
            });
        }
        let mut out = SymTensor::zeros(self.order, new_dim)?;
        for (k, v) in &self.entries {
            let mapped: Vec<usize> = k.0.iter().map(|&i| coords[i]).collect();
            let key = out.check_index(MultiIndex::sorted(mapped).0)?;
            out.entries.insert(key, *v);
        }
        Ok(out)
    }

    /// Mode-1 unfolding: a `dim x dim^(n-1)` matrix.
    pub fn flattening(&self) -> DMatrix<f64> {
        let cols = self.dim.pow(self.order as u32 - 1);
        let mut m = DMatrix::zeros(self.dim, cols);
        for (k, v) in &self.entries {
            for perm in k.permutations() {
                let col = perm[1..].iter().fold(0usize, |acc, &i| acc * self.dim + i);
                m[(perm[0], col)] = *v;
            }
        }
        m
    }

    /// Largest singular value of the mode-1 unfolding, an upper bound for the
    /// Euclidean spectral norm of the tensor (exact for `n <= 2`).
    pub fn flattening_spectral_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let f = self.flattening();
        let gram = &f * f.transpose();
        let eig = gram.symmetric_eigen();
        eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v)).max(0.0).sqrt()
    }

    pub(crate) fn monomials(&self) -> Monomials {
        let terms = self
            .entries
            .iter()
            .map(|(k, v)| Term {
                coef: k.multinomial() * v,
                vars: k.multiplicities(),
            })
            .collect();
        Monomials {
            dim: self.dim,
            order: self.order,
            terms,
        }
    }

    pub fn to_literal(&self) -> TensorLiteral {
        TensorLiteral {
            n: self.order,
            d: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| EntryLiteral {
                    idx: k.0.clone(),
                    val: *v,
                })
                .collect(),
        }
    }

    pub fn from_literal(lit: &TensorLiteral) -> Result<Self> {
        Self::from_entries(
            lit.n,
            lit.d,
            lit.entries.iter().map(|e| (e.idx.clone(), e.val)),
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let lit: TensorLiteral = serde_json::from_str(s)?;
        Self::from_literal(&lit)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_literal()).expect("tensor literal serializes")
    }
}

/// JSON form `{"n":..,"d":..,"entries":[{"idx":[..],"val":..}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorLiteral {
    pub n: usize,
    pub d: usize,
    pub entries: Vec<EntryLiteral>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryLiteral {
    pub idx: Vec<usize>,
    pub val: f64,
}

/// Flattened monomial form used on hot paths.
#[derive(Clone, Debug)]
pub(crate) struct Monomials {
    pub dim: usize,
    pub order: usize,
    terms: Vec<Term>,
}

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    vars: Vec<(usize, u32)>,
}

impl Monomials {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.vars.iter().map(|&(i, p)| x[i].powi(p as i32)).product::<f64>())
            .sum()
    }

    /// Returns the value and writes the gradient into `g`.
    pub fn eval_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut value = 0.0;
        for t in &self.terms {
            let mut prod = t.coef;
            for &(i, p) in &t.vars {
                prod *= x[i].powi(p as i32);
            }
            value += prod;
            for (a, &(i, p)) in t.vars.iter().enumerate() {
                let mut d = t.coef * p as f64 * x[i].powi(p as i32 - 1);
                for (b, &(j, q)) in t.vars.iter().enumerate() {
                    if a != b {
                        d *= x[j].powi(q as i32);
                    }
                }
                g[i] += d;
            }
        }
        value
    }

    /// Hessian matrix at `x`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            // product with the exponents of vars[a] and vars[b] lowered by one each
            let lowered = |a: usize, b: usize| -> f64 {
                let mut prod = t.coef;
                for (c, &(k, q)) in t.vars.iter().enumerate() {
                    let drop = (c == a) as u32 + (c == b) as u32;
                    if drop > q {
                        return 0.0;
                    }
                    let scale: f64 = (0..drop).map(|s| (q - s) as f64).product();
                    prod *= scale * x[k].powi((q - drop) as i32);
                }
                prod
            };
            for (a, &(i, _)) in t.vars.iter().enumerate() {
                h[(i, i)] += lowered(a, a);
                for (b, &(j, _)) in t.vars.iter().enumerate().skip(a + 1) {
                    let v = lowered(a, b);
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
        h
    }

    /// Coefficients `c_0..c_n` of `tau -> P(x with x_i := tau)`.
    pub fn univariate(&self, x: &[f64], i: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.order + 1];
        for t in &self.terms {
            let mut rest = t.coef;
            let mut power = 0usize;
            for &(j, q) in &t.vars {
                if j == i {
                    power = q as usize;
                } else {
                    rest *= x[j].powi(q as i32);
                }
            }
            c[power] += rest;
        }
        c
    }
}

/// Rank-one symmetric tensor `x ⊗ ... ⊗ x` (`n` factors).
pub fn sym_power(x: &[f64], n: usize) -> Result<SymTensor> {
    if x.is_empty() {
        return Err(Error::InvalidDimension("zero-length vector".into()));
    }
    let mut t = SymTensor::zeros(n, x.len())?;
    for alpha in multi_indices(n, x.len()) {
        let v: f64 = alpha.0.iter().map(|&i| x[i]).product();
        if v != 0.0 {
            t.entries.insert(alpha, v);
        }
    }
    Ok(t)
}

/// `sum_k lambda_k * P(z_k)`, the pairing of `P` with `sum_k lambda_k ⊗^n z_k`.
pub fn pair(p: &SymTensor, w: &[(f64, Vec<f64>)]) -> Result<f64> {
    let mut total = 0.0;
    for (lambda, z) in w {
        total += lambda * p.evaluate(z)?;
    }
    Ok(total)
}

/// Symmetric `n`-linear form attached to a polynomial through polarization.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMultilinearForm {
    poly: SymTensor,
}

/// The symmetric multilinear form `A` with `A(x, ..., x) = P(x)`.
pub fn polarize(p: &SymTensor) -> SymMultilinearForm {
    SymMultilinearForm { poly: p.clone() }
}

impl SymMultilinearForm {
    pub fn order(&self) -> usize {
        self.poly.order
    }

    pub fn tensor(&self) -> &SymTensor {
        &self.poly
    }

    /// Signed-sum polarization:
    /// `A(x_1..x_n) = 1/(2^n n!) sum_{e in {±1}^n} e_1...e_n P(sum_j e_j x_j)`.
    pub fn eval(&self, args: &[&[f64]]) -> Result<f64> {
        let n = self.poly.order;
        if args.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: args.len(),
            });
        }
        for a in args {
            self.poly.check_vector(a)?;
        }
        let mono = self.poly.monomials();
        let d = self.poly.dim;
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            point.iter_mut().for_each(|v| *v = 0.0);
            let mut sign = 1.0;
            for (j, a) in args.iter().enumerate() {
                let e = if mask & (1 << j) != 0 { -1.0 } else { 1.0 };
                sign *= e;
                for (p, v) in point.iter_mut().zip(a.iter()) {
                    *p += e * v;
                }
            }
            total += sign * mono.eval(&point);
        }
        Ok(total / (2f64.powi(n as i32) * factorial(n)))
    }

    /// Direct contraction with the stored tensor entries.
    pub fn eval_direct(&self, args: &[&[f64]]) -> Result<f64> {
        self.poly.contract(args)
    }
}
