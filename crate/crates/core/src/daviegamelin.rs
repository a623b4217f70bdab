//! Stage truncations, greedy operator selection and the averaged operator
//! for polynomials on the sequence model.
//!
//! The stage operator `R_s` keeps the first `s` coordinates of a
//! [`TailVector`] and zeroes the rest, so it has norm one and `R_s z -> z`
//! coordinatewise. Extended form values only depend on which stages fill
//! which argument slots, so the selected operators are kept as
//! `(stage, count)` groups and index tuples are handled through multisets of
//! stages with their counting factors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extensions::{check_stages, CoefficientFamily, TailVector};
use crate::symtensor::factorial;

/// Truncation of a model sequence to its first `stage` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StageOperator {
    pub stage: usize,
}

impl StageOperator {
    pub fn new(stage: usize) -> Self {
        Self { stage }
    }

    pub fn apply(&self, z: &TailVector) -> TailVector {
        z.stage(self.stage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgConfig {
    pub epsilon: f64,
    pub n: usize,
    /// Number of test points.
    pub r: usize,
    /// A priori bound on the repeated-index terms, used to choose `m`.
    pub c: f64,
    pub max_stage: usize,
    pub seed: u64,
}

impl DgConfig {
    /// Config with `C` from [`term_bound`].
    pub fn for_points(p: &CoefficientFamily, points: &[TailVector], epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            n: p.order(),
            r: points.len(),
            c: term_bound(p, points),
            max_stage: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain("epsilon must be positive".into()));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::Domain("C must be finite and nonnegative".into()));
        }
        if self.r == 0 {
            return Err(Error::Domain("at least one point is needed".into()));
        }
        if self.n == 0 {
            return Err(Error::OrderOutOfRange(0));
        }
        Ok(())
    }
}

/// `2 ||A|| max_k ||z_k||^n`, where `||A||` sums the absolute values of the
/// form over all index tuples. Bounds `|Ā(z, ..., z) - A(R z, ..., R z)|`
/// for any norm-one `R`.
pub fn term_bound(p: &CoefficientFamily, points: &[TailVector]) -> f64 {
    let band: f64 = p.banded().iter().map(|(a, v)| a.multinomial() * v.abs()).sum();
    let diag = p.diag_tail_mass(0);
    let radius = points.iter().map(TailVector::norm).fold(0.0, f64::max);
    2.0 * (band + diag) * radius.powi(p.order() as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalReport {
    /// `|P̄(z) - P(R_s z)|` per stage.
    pub trace: Vec<StageError>,
    /// Errors fall below the tolerance and stay nonincreasing from there on.
    pub converged: bool,
}

/// Traces `|P̄(z) - P(R_s z)|` along increasing stages.
pub fn local_determination_check(
    z: &TailVector,
    p: &CoefficientFamily,
    stages: &[usize],
    tol: f64,
) -> Result<LocalReport> {
    check_stages(stages)?;
    let target = p.extend(z);
    let trace: Vec<StageError> = stages
        .iter()
        .map(|&s| StageError {
            stage: s,
            error: (target - p.evaluate(&z.stage(s).head)).abs(),
        })
        .collect();
    let converged = match trace.iter().position(|e| e.error <= tol) {
        Some(start) => trace[start..]
            .windows(2)
            .all(|w| w[1].error <= w[0].error.max(tol)),
        None => false,
    };
    Ok(LocalReport { trace, converged })
}

/// Selected stages as `(stage, count)` in increasing stage order.
type Groups = Vec<(usize, usize)>;

/// Multisets of group positions of total size `size`, as multiplicity vectors.
fn multisets(groups: usize, size: usize, caps: Option<&[usize]>, out: &mut Vec<Vec<usize>>) {
    fn rec(pos: usize, left: usize, caps: Option<&[usize]>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let cap = caps.map_or(left, |c| c[pos].min(left));
        for mu in 0..=cap {
            cur[pos] = mu;
            rec(pos + 1, left - mu, caps, cur, out);
        }
        cur[pos] = 0;
    }
    let mut cur = vec![0; groups];
    rec(0, size, caps, &mut cur, out);
}

fn stages_of(groups: &Groups, mu: &[usize]) -> Vec<usize> {
    groups
        .iter()
        .zip(mu)
        .flat_map(|(&(s, _), &k)| std::iter::repeat_n(s, k))
        .collect()
}

/// `Ā(R_{s_1} z, ..., R_{s_j} z, z, ..., z)` with `extra` placed after the prefix.
fn substituted(p: &CoefficientFamily, z: &TailVector, prefix: &[usize], extra: Option<usize>) -> Result<f64> {
    let mut args: Vec<TailVector> = prefix.iter().map(|&s| z.stage(s)).collect();
    if let Some(s) = extra {
        args.push(z.stage(s));
    }
    while args.len() < p.order() {
        args.push(z.clone());
    }
    let refs: Vec<&TailVector> = args.iter().collect();
    p.multilinear(&refs)
}

/// Picks `m` stages `s_1 <= ... <= s_m`, each the smallest stage at or above
/// the previous one for which substituting `R_s` into the next free slot
/// changes every partially substituted value by less than `epsilon / n`.
pub fn greedy_select(
    p: &CoefficientFamily,
    points: &[TailVector],
    epsilon: f64,
    m: usize,
    max_stage: usize,
) -> Result<Vec<StageOperator>> {
    let n = p.order();
    if m < n {
        return Err(Error::Domain(format!("m = {m} is smaller than the order {n}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let target = epsilon / n as f64;
    let mut groups: Groups = Vec::new();
    // (prefix stages, candidate stage) -> worst error over the points
    let mut cache: HashMap<(Vec<usize>, usize), (f64, usize)> = HashMap::new();
    let mut stage = 1;
    let mut picked = Vec::with_capacity(m);
    while picked.len() < m {
        let counts: Vec<usize> = groups.iter().map(|g| g.1).collect();
        let mut prefixes = Vec::new();
        for size in 0..n {
            multisets(groups.len(), size, Some(&counts), &mut prefixes);
        }
        let prefixes: Vec<Vec<usize>> = prefixes.iter().map(|mu| stages_of(&groups, mu)).collect();
        loop {
            if stage > max_stage {
                return Err(Error::StageExhausted {
                    max_stage,
                    detail: format!("operator {} of {m} has no admissible stage", picked.len() + 1),
                });
            }
            let mut worst: Option<(Vec<usize>, f64, usize)> = None;
            for prefix in &prefixes {
                let key = (prefix.clone(), stage);
                let (err, k) = match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let mut w = (0.0f64, 0usize);
                        for (k, z) in points.iter().enumerate() {
                            let err = (substituted(p, z, prefix, Some(stage))? - substituted(p, z, prefix, None)?).abs();
                            if k == 0 || err > w.0 {
                                w = (err, k);
                            }
                        }
                        cache.insert(key, w);
                        w
                    }
                };
                if !(err < target) && worst.as_ref().is_none_or(|w| err > w.1) {
                    worst = Some((prefix.clone(), err, k));
                }
            }
            match worst {
                None => break,
                Some((prefix, err, k)) if stage == max_stage => {
                    return Err(Error::StageExhausted {
                        max_stage,
                        detail: format!(
                            "operator {}: prefix stages {prefix:?}, point {k}: error {err:.3e} is not below {target:.3e}",
                            picked.len() + 1
                        ),
                    });
                }
                Some(_) => stage += 1,
            }
        }
        match groups.last_mut() {
            Some((s, c)) if *s == stage => *c += 1,
            _ => groups.push((stage, 1)),
        }
        picked.push(StageOperator::new(stage));
        // once every group can fill n - 1 slots the prefix family stops
        // changing, so every later pick lands on the same stage
        if groups.iter().all(|g| g.1 + 1 >= n) {
            picked.resize(m, StageOperator::new(stage));
        }
    }
    Ok(picked)
}

/// Pointwise mean `R = (1/m) sum R_i` of stage operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedOperator {
    groups: Groups,
    total: usize,
}

impl AveragedOperator {
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Distinct stages with their multiplicities.
    pub fn groups(&self) -> &[(usize, usize)] {
        &self.groups
    }

    pub fn apply(&self, z: &TailVector) -> TailVector {
        let longest = self.groups.last().map_or(0, |g| g.0);
        let head = (0..longest)
            .map(|k| {
                let covering: usize = self.groups.iter().filter(|g| g.0 > k).map(|g| g.1).sum();
                z.get(k) * (covering as f64 / self.total as f64)
            })
            .collect();
        TailVector::new(head, 0.0)
    }
}

pub fn average_operator(ops: &[StageOperator]) -> Result<AveragedOperator> {
    if ops.is_empty() {
        return Err(Error::Domain("cannot average an empty operator list".into()));
    }
    let mut stages: Vec<usize> = ops.iter().map(|o| o.stage).collect();
    stages.sort_unstable();
    let mut groups: Groups = Vec::new();
    for s in stages {
        match groups.last_mut() {
            Some((t, c)) if *t == s => *c += 1,
            _ => groups.push((s, 1)),
        }
    }
    Ok(AveragedOperator {
        groups,
        total: ops.len(),
    })
}

/// Index tuples in `{1..m}^n` with a repeated entry and the resulting bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedIndex {
    /// `m^n - m (m - 1) ... (m - n + 1)`.
    pub count: u128,
    /// `[1 - (1 - 1/m) ... (1 - (n-1)/m)] C`.
    pub bound: f64,
}

pub fn repeated_index_bound(n: usize, m: usize, c: f64) -> Result<RepeatedIndex> {
    if n == 0 {
        return Err(Error::OrderOutOfRange(0));
    }
    if m < n {
        return Err(Error::Domain(format!("m = {m} is smaller than n = {n}")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain("C must be nonnegative".into()));
    }
    let overflow = || Error::Domain(format!("{m}^{n} does not fit the counter"));
    let all = (m as u128).checked_pow(n as u32).ok_or_else(overflow)?;
    let distinct = (0..n as u128).try_fold(1u128, |acc, j| acc.checked_mul(m as u128 - j)).ok_or_else(overflow)?;
    // equals 1 - (1 - 1/m)...(1 - (n-1)/m) without the cancellation
    let count = all - distinct;
    Ok(RepeatedIndex {
        count,
        bound: count as f64 / all as f64 * c,
    })
}

/// Smallest `m >= n` whose repeated-index bound is below `target`.
fn choose_m(n: usize, c: f64, target: f64) -> Result<usize> {
    let ok = |m: usize| repeated_index_bound(n, m, c).map(|b| b.bound < target);
    if ok(n)? {
        return Ok(n);
    }
    let mut hi = n.max(1) * 2;
    while !ok(hi)? {
        hi = hi.checked_mul(2).ok_or_else(|| Error::Domain("m overflows".into()))?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgReport {
    pub m: usize,
    pub stages: Vec<usize>,
    pub epsilon: f64,
    /// Largest repeated-index term actually met.
    #[serde(rename = "C")]
    pub c: f64,
    pub sum_iterated: f64,
    pub sum_averaged: f64,
    /// `sum_k |Σ1^k|` over distinct-index tuples.
    pub sigma1: f64,
    /// `sum_k |Σ2^k|` over tuples with a repeat.
    pub sigma2: f64,
    /// `r` times the repeated-index bound at the measured `C`.
    pub sigma2_bound: f64,
    pub pass: bool,
}

/// Chooses `m`, selects stages at per-term accuracy `epsilon / (2 r n)`,
/// averages them and checks `|sum_k P̄(z_k) - sum_k P(R z_k)| < epsilon`
/// together with the split into distinct and repeated index tuples.
pub fn dg_verify(p: &CoefficientFamily, points: &[TailVector], config: &DgConfig) -> Result<DgReport> {
    config.validate()?;
    let n = p.order();
    if config.n != n || config.r != points.len() {
        return Err(Error::Domain(format!(
            "config is for n = {}, r = {} but got n = {n}, r = {}",
            config.n,
            config.r,
            points.len()
        )));
    }
    let eps = config.epsilon;
    let r = points.len() as f64;
    let m = choose_m(n, config.c, eps / (2.0 * r))?;
    let ops = greedy_select(p, points, eps / (2.0 * r), m, config.max_stage)?;
    let avg = average_operator(&ops)?;
    let groups = avg.groups().to_vec();
    let counts: Vec<usize> = groups.iter().map(|g| g.1).collect();
    let mut tuples = Vec::new();
    multisets(groups.len(), n, None, &mut tuples);
    let scale = (m as f64).powi(n as i32);

    let (mut sum_iterated, mut sum_averaged) = (0.0, 0.0);
    let (mut sigma1, mut sigma2, mut c_seen) = (0.0, 0.0, 0.0f64);
    let mut per_point_ok = true;
    for z in points {
        let pbar = p.extend(z);
        let averaged = p.evaluate(&avg.apply(z).head);
        let (mut s1, mut s2) = (0.0, 0.0);
        for mu in &tuples {
            let stages = stages_of(&groups, mu);
            let args: Vec<TailVector> = stages.iter().map(|&s| z.stage(s)).collect();
            let refs: Vec<&TailVector> = args.iter().collect();
            let term = pbar - p.multilinear(&refs)?;
            // ordered tuples realizing this multiset of stages
            let arrangements = mu.iter().fold(factorial(n), |acc, &k| acc / factorial(k));
            let all: f64 = mu.iter().zip(&counts).map(|(&k, &c)| (c as f64).powi(k as i32)).product();
            let distinct: f64 = mu
                .iter()
                .zip(&counts)
                .map(|(&k, &c)| (0..k).map(|j| c.saturating_sub(j) as f64).product::<f64>())
                .product();
            s1 += arrangements * distinct * term;
            let repeated = arrangements * (all - distinct);
            s2 += repeated * term;
            if repeated > 0.0 {
                c_seen = c_seen.max(term.abs());
            }
        }
        s1 /= scale;
        s2 /= scale;
        per_point_ok &= s1.abs() < eps / (2.0 * r);
        sum_iterated += pbar;
        sum_averaged += averaged;
        sigma1 += s1.abs();
        sigma2 += s2.abs();
    }
    let per_point_bound = repeated_index_bound(n, m, c_seen)?.bound;
    let sigma2_bound = r * per_point_bound;
    let error = (sum_iterated - sum_averaged).abs();
    let slack = 1e-12 * (1.0 + sigma2_bound);
    let pass = error < eps
        && per_point_ok
        && sigma1 < eps / 2.0
        && sigma2 <= sigma2_bound + slack
        && c_seen <= config.c;
    Ok(DgReport {
        m,
        stages: ops.iter().map(|o| o.stage).collect(),
        epsilon: eps,
        c: c_seen,
        sum_iterated,
        sum_averaged,
        sigma1,
        sigma2,
        sigma2_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::Diagonal;

    fn halving() -> CoefficientFamily {
        CoefficientFamily::diagonal(
            2,
            Diagonal {
                c: 1.0,
                rho: 0.5,
                offset: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn stage_operator_contracts() {
        let z = TailVector::new(vec![3.0, -1.0], 2.0);
        for s in 0..6 {
            let y = StageOperator::new(s).apply(&z);
            assert!(y.norm() <= z.norm());
            assert!(y.is_c0());
            assert_eq!(y.head.len(), s);
        }
    }

    #[test]
    fn local_determination_examples() {
        let one = TailVector::constant(1.0);
        let r = local_determination_check(&one, &halving(), &[1, 2, 5, 10, 30], 1e-8).unwrap();
        for e in &r.trace {
            assert_eq!(e.error, 0.5f64.powi(e.stage as i32));
        }
        assert!(r.converged);
        let z = TailVector::new(vec![1.0, 2.0, -1.0], 0.0);
        let r = local_determination_check(&z, &halving(), &[3, 4, 9], 1e-15).unwrap();
        assert!(r.trace.iter().all(|e| e.error == 0.0));
        let zero = CoefficientFamily::zero(2).unwrap();
        let r = local_determination_check(&one, &zero, &[1, 2], 1e-15).unwrap();
        assert!(r.trace.iter().all(|e| e.error == 0.0));
        let r = local_determination_check(&one, &halving(), &[1, 2, 3], 1e-8).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn greedy_examples() {
        let one = TailVector::constant(1.0);
        let ops = greedy_select(&halving(), std::slice::from_ref(&one), 0.1, 4, 60).unwrap();
        // 2^-s < 0.05 first holds at s = 5
        assert!(ops.iter().all(|o| o.stage == 5), "{ops:?}");

        let z = TailVector::new(vec![0.5, -1.0, 0.25], 0.0);
        let ops = greedy_select(&halving(), std::slice::from_ref(&z), 1e-12, 3, 60).unwrap();
        assert!(ops.iter().all(|o| o.stage <= 3));
        for op in &ops {
            let err = (halving().extend(&z) - halving().multilinear(&[&op.apply(&z), &z]).unwrap()).abs();
            assert!(err < 1e-12 / 2.0);
        }

        let huge = 2.0 * 2.0 * term_bound(&halving(), std::slice::from_ref(&one));
        let ops = greedy_select(&halving(), std::slice::from_ref(&one), huge, 3, 60).unwrap();
        assert!(ops.iter().all(|o| o.stage == 1));

        assert!(greedy_select(&halving(), std::slice::from_ref(&one), 0.1, 1, 60).is_err());
        assert!(matches!(
            greedy_select(&halving(), std::slice::from_ref(&one), 1e-6, 2, 8),
            Err(Error::StageExhausted { .. })
        ));
    }

    #[test]
    fn averaging_examples() {
        let one = TailVector::constant(1.0);
        let avg = average_operator(&[StageOperator::new(1), StageOperator::new(3)]).unwrap();
        assert_eq!(avg.apply(&one), TailVector::new(vec![1.0, 0.5, 0.5], 0.0));
        let same = average_operator(&[StageOperator::new(4); 3]).unwrap();
        let z = TailVector::new(vec![1.0, -2.0], 0.5);
        assert_eq!(same.apply(&z), StageOperator::new(4).apply(&z));
        assert_eq!(avg.apply(&TailVector::zero()).norm(), 0.0);
        assert!(average_operator(&[]).is_err());
    }

    fn brute_force_repeats(n: usize, m: usize) -> u128 {
        let mut count = 0;
        let mut t = vec![0usize; n];
        loop {
            let mut sorted = t.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return count;
                }
                t[i] += 1;
                if t[i] < m {
                    break;
                }
                t[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn repeated_index_examples() {
        let b = repeated_index_bound(2, 3, 6.0).unwrap();
        assert_eq!(b.count, 3);
        assert!((b.bound - 2.0).abs() < 1e-15);
        for m in 1..6 {
            let b = repeated_index_bound(1, m, 3.0).unwrap();
            assert_eq!((b.count, b.bound), (0, 0.0));
        }
        let b = repeated_index_bound(3, 4, 8.0).unwrap();
        assert_eq!(b.count, 40);
        assert!((b.bound - 5.0).abs() < 1e-15);
        assert!(repeated_index_bound(3, 2, 1.0).is_err());
        for n in 1..=4 {
            for m in n..=8 {
                assert_eq!(repeated_index_bound(n, m, 1.0).unwrap().count, brute_force_repeats(n, m));
            }
        }
    }

    #[test]
    fn dg_constant_one() {
        let one = TailVector::constant(1.0);
        let pts = [one];
        let config = DgConfig::for_points(&halving(), &pts, 1e-2, 7);
        let report = dg_verify(&halving(), &pts, &config).unwrap();
        assert!(report.pass, "{report:?}");
        assert!((report.sum_iterated - 1.0).abs() < 1e-15);
        assert!((report.sum_iterated - report.sum_averaged).abs() < 1e-2);
        assert!(config.c / (report.m as f64) < 1e-2 / 2.0);
        assert!(report.c <= config.c);
    }

    #[test]
    fn dg_split_is_exact() {
        // Σ1 + Σ2 reproduces P̄(z) - P(Rz) by multilinearity
        let p = CoefficientFamily::new(
            3,
            vec![(vec![0, 1, 2], 0.4), (vec![1, 1, 4], -0.3)],
            Some(Diagonal {
                c: 0.8,
                rho: 0.6,
                offset: 0,
            }),
        )
        .unwrap();
        let z = TailVector::new(vec![0.5, -1.0], 0.7);
        let avg = average_operator(&[2, 2, 5, 7, 7, 7].map(StageOperator::new)).unwrap();
        let groups = avg.groups().to_vec();
        let mut tuples = Vec::new();
        multisets(groups.len(), 3, None, &mut tuples);
        let pbar = p.extend(&z);
        let mut total = 0.0;
        for mu in &tuples {
            let stages = stages_of(&groups, mu);
            let args: Vec<TailVector> = stages.iter().map(|&s| z.stage(s)).collect();
            let refs: Vec<&TailVector> = args.iter().collect();
            let arrangements = mu.iter().fold(factorial(3), |acc, &k| acc / factorial(k));
            let all: f64 = mu.iter().zip(&groups).map(|(&k, g)| (g.1 as f64).powi(k as i32)).product();
            total += arrangements * all * (pbar - p.multilinear(&refs).unwrap());
        }
        let direct = pbar - p.evaluate(&avg.apply(&z).head);
        assert!((total / 216.0 - direct).abs() < 1e-12);
    }

    #[test]
    fn dg_m_grows_as_epsilon_shrinks() {
        let p = CoefficientFamily::new(
            2,
            vec![(vec![0, 1], 0.5)],
            Some(Diagonal {
                c: 0.5,
                rho: 0.5,
                offset: 1,
            }),
        )
        .unwrap();
        let pts = [TailVector::new(vec![1.0], -0.5), TailVector::new(vec![0.2, 0.4], 1.0)];
        let mut last = 0;
        for eps in [1e-1, 1e-2, 1e-3] {
            let config = DgConfig::for_points(&p, &pts, eps, 1);
            let report = dg_verify(&p, &pts, &config).unwrap();
            assert!(report.pass, "{report:?}");
            assert!(report.m >= last);
            last = report.m;
        }
    }

    #[test]
    fn dg_tail_zero_points() {
        let z = TailVector::new(vec![0.3, -0.8, 1.0], 0.0);
        let pts = [z];
        for eps in [1e-1, 1e-2] {
            let config = DgConfig::for_points(&halving(), &pts, eps, 0);
            let report = dg_verify(&halving(), &pts, &config).unwrap();
            assert!(report.pass);
            assert!(report.stages.iter().all(|&s| s == 3));
            assert_eq!(report.sum_iterated, report.sum_averaged);
        }
    }
}
