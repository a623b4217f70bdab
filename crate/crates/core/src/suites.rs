//! Verification suites. Each criterion draws its random instances from the
//! run seed and its structured instances from the fixture tree, and reports
//! the worst measured quantity against its threshold.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::daviegamelin::{dg_verify, repeated_index_bound, DgConfig, DgReport};
use crate::error::{Error, Result};
use crate::extensions::{
    ab_extend, extension_norm_gap, ideal_norm_preservation, q_radius, uniterated_extend, CoefficientFamily,
    Diagonal, QRadiusConfig, TailVector,
};
use crate::ideals::{ideal_norm, max_kernel_norm, min_kernel_norm, sandwich, IdealNormDescriptor, SubspaceChain};
use crate::norms::{dual_ideal_norm, injective_snorm, projective_snorm, NormDescriptor, RECONCILE_BAND};
use crate::optim::OptBudget;
use crate::symtensor::{multi_indices, polarize, sym_power, SymTensor};

const MAX_LISTED_FAILURES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Isometry,
    Embedding,
    Ideals,
    Dg,
    All,
}

impl Suite {
    /// Criterion numbers run by the suite.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Isometry => &[1, 2, 3, 4, 6, 10],
            Suite::Embedding => &[5, 8],
            Suite::Ideals => &[7, 11],
            Suite::Dg => &[9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isometry" => Ok(Suite::Isometry),
            "embedding" => Ok(Suite::Embedding),
            "ideals" => Ok(Suite::Ideals),
            "dg" => Ok(Suite::Dg),
            "all" => Ok(Suite::All),
            other => Err(Error::Domain(format!("unknown suite {other:?}"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Isometry => "isometry",
            Suite::Embedding => "embedding",
            Suite::Ideals => "ideals",
            Suite::Dg => "dg",
            Suite::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionFixture {
    pub name: String,
    pub family: CoefficientFamily,
    /// Head length for the sup norm comparison.
    pub head_len: usize,
    /// Head length for the nuclear comparison.
    pub ideal_head_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgFixture {
    pub name: String,
    pub family: CoefficientFamily,
    pub points: Vec<TailVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFixture {
    pub name: String,
    pub terms: Vec<CoefficientFamily>,
    pub head_len: usize,
    /// Exact limsup proxy when it is known in closed form.
    #[serde(default)]
    pub expected_proxy: Option<f64>,
}

/// Structured inputs of the suites.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixtures {
    pub extension: Vec<ExtensionFixture>,
    pub dg: Vec<DgFixture>,
    pub series: Vec<SeriesFixture>,
}

impl Fixtures {
    /// The fixture tree shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(
            include_str!("../fixtures/extension.json"),
            include_str!("../fixtures/dg.json"),
            include_str!("../fixtures/series.json"),
        )
        .expect("shipped fixtures parse")
    }

    /// Reads `extension.json`, `dg.json` and `series.json` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        Self::parse(&read("extension.json")?, &read("dg.json")?, &read("series.json")?)
    }

    fn parse(extension: &str, dg: &str, series: &str) -> Result<Self> {
        Ok(Self {
            extension: serde_json::from_str(extension)?,
            dg: serde_json::from_str(dg)?,
            series: serde_json::from_str(series)?,
        })
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Worst value of the checked quantity.
    pub measured: f64,
    pub threshold: f64,
    pub failures: Vec<String>,
}

impl CriterionResult {
    /// One line: `[PASS] 3 sandwich: 100 cases, worst 0.000e0 (limit 0.000e0)`.
    pub fn summary(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} cases, worst {:.3e} (limit {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.cases,
            self.measured,
            self.threshold
        )
    }
}

/// Accumulates per-case outcomes in case order.
struct Tally {
    id: u8,
    name: &'static str,
    threshold: f64,
    cases: usize,
    measured: f64,
    failures: Vec<String>,
    failed: usize,
}

impl Tally {
    fn new(id: u8, name: &'static str, threshold: f64) -> Self {
        Self {
            id,
            name,
            threshold,
            cases: 0,
            measured: 0.0,
            failures: Vec::new(),
            failed: 0,
        }
    }

    /// Records a case with its measured quantity and whether it passed.
    fn record(&mut self, measured: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if measured.is_nan() {
            self.measured = f64::NAN;
        } else if !self.measured.is_nan() {
            self.measured = self.measured.max(measured);
        }
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(describe());
            }
        }
    }

    fn error(&mut self, what: &str, e: &Error) {
        self.record(f64::NAN, false, || format!("{what}: {e}"));
    }

    fn finish(self) -> CriterionResult {
        CriterionResult {
            id: self.id,
            name: self.name.to_string(),
            passed: self.failed == 0 && self.cases > 0,
            cases: self.cases,
            measured: self.measured,
            threshold: self.threshold,
            failures: self.failures,
        }
    }
}

/// Deterministic per-case generator.
fn case_rng(seed: u64, criterion: u8, case: usize) -> ChaCha8Rng {
    let budget = OptBudget::with_seed(seed).reseeded(((criterion as u64) << 32) | case as u64);
    ChaCha8Rng::seed_from_u64(budget.seed)
}

fn case_budget(seed: u64, criterion: u8, case: usize) -> OptBudget {
    OptBudget::with_seed(seed).reseeded(((criterion as u64) << 32) ^ 0xB0D6E7 ^ case as u64)
}

/// Tensor with about 60% of its entries drawn from `[-1, 1]`, never zero.
pub fn random_tensor(rng: &mut impl Rng, n: usize, d: usize) -> SymTensor {
    let mut t = SymTensor::zeros(n, d).expect("shape within caps");
    for a in multi_indices(n, d) {
        if rng.random::<f64>() < 0.6 {
            t.set(a.as_slice(), rng.random_range(-1.0..1.0)).expect("index in range");
        }
    }
    if t.is_zero() {
        t.set(&vec![rng.random_range(0..d); n], 1.0).expect("index in range");
    }
    t
}

/// Isometric embedding `ℓp^d -> ℓp^{d + extra}` with a norm-one left inverse,
/// as a `(d + extra) x d` matrix.
pub fn random_isometry(rng: &mut impl Rng, ball: Ball, d: usize, extra: usize) -> DMatrix<f64> {
    let m = d + extra;
    match ball {
        Ball::L2 => DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q(),
        Ball::L1 => {
            // coordinate i < extra splits into shares t and 1 - t
            let mut v = DMatrix::zeros(m, d);
            for i in 0..d {
                if i < extra {
                    let t: f64 = rng.random_range(0.2..0.8);
                    v[(i, i)] = t;
                    v[(d + i, i)] = 1.0 - t;
                } else {
                    v[(i, i)] = 1.0;
                }
            }
            v
        }
        Ball::LInf => {
            // extra rows are averages with l1-normalized weights
            let mut v = DMatrix::zeros(m, d);
            for i in 0..d {
                v[(i, i)] = 1.0;
            }
            for r in d..m {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s: f64 = w.iter().map(|x| x.abs()).sum();
                for c in 0..d {
                    v[(r, c)] = w[c] / s;
                }
            }
            v
        }
    }
}

/// Random family: a few banded entries over the first six coordinates and
/// usually a geometric diagonal.
pub fn random_family(rng: &mut impl Rng) -> CoefficientFamily {
    let n = rng.random_range(1..=4usize);
    let mut entries = std::collections::BTreeMap::new();
    for _ in 0..rng.random_range(0..=4) {
        let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
        idx.sort_unstable();
        entries.insert(idx, rng.random_range(-1.0..1.0));
    }
    let diag = (rng.random::<f64>() < 0.8).then(|| Diagonal {
        c: rng.random_range(-1.0..1.0),
        rho: rng.random_range(-0.8..0.8),
        offset: rng.random_range(0..=2),
    });
    CoefficientFamily::new(n, entries.into_iter().collect(), diag).expect("random family is valid")
}

pub fn random_point(rng: &mut impl Rng) -> TailVector {
    let len = rng.random_range(0..=6);
    let head = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tail = if rng.random::<f64>() < 0.2 {
        0.0
    } else {
        rng.random_range(-1.0..1.0)
    };
    TailVector::new(head, tail)
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Runs `case` over `0..count` in parallel and returns the outcomes in order.
fn par_cases<T: Send>(count: usize, case: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(case).collect()
}

/// Polarization round trip on 200 random `(P, x)`, `n <= 4`, `d <= 6`.
pub fn polarization(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(1, "polarization round trip", 1e-10);
    let outcomes = par_cases(200, |c| {
        let mut rng = case_rng(seed, 1, c);
        let n = rng.random_range(1..=4usize);
        let d = rng.random_range(1..=6usize);
        let p = random_tensor(&mut rng, n, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let direct = p.evaluate(&x)?;
        let args: Vec<&[f64]> = vec![&x; n];
        let via_form = polarize(&p).eval(&args)?;
        Ok::<_, Error>(((via_form - direct).abs() / (1.0 + direct.abs()), n, d))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((err, n, d)) => tally.record(err, err <= 1e-10, || format!("case {c} (n={n}, d={d}): {err:.3e}")),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// `πs` and `εs` of `⊗^n x` against `||x||^n` on 50 instances.
pub fn tensor_norm_axiom(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(2, "norm of elementary tensors", 1e-6);
    let outcomes = par_cases(50, |c| {
        let mut rng = case_rng(seed, 2, c);
        let n = rng.random_range(1..=4usize);
        let d = rng.random_range(1..=4usize);
        let ball = Ball::ALL[c % 3];
        let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        if d > 1 && rng.random::<f64>() < 0.3 {
            x[rng.random_range(0..d)] = 0.0;
        }
        let w = sym_power(&x, n)?;
        let budget = case_budget(seed, 2, c);
        let expected = ball.norm(&x).powi(n as i32);
        let pi = projective_snorm(&w, ball, None, &budget)?.value;
        let eps = injective_snorm(&w, ball, &budget).value;
        Ok::<_, Error>((relative(pi, expected).max(relative(eps, expected)), n, d, ball, pi, eps, expected))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((err, n, d, ball, pi, eps, expected)) => tally.record(err, err <= 1e-6, || {
                format!("case {c} (n={n}, d={d}, {ball}): pi {pi:.9} eps {eps:.9} expected {expected:.9}")
            }),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// Lower bounds never exceed upper bounds: `εs <= πs` and `sup <= integral_dual <= nuclear`.
/// The measured quantity is the largest relative excess of a lower bound.
pub fn sandwich_order(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(3, "bound sandwich", 0.0);
    let outcomes = par_cases(100, |c| {
        let mut rng = case_rng(seed, 3, c);
        let n = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=5usize);
        let ball = Ball::ALL[rng.random_range(0..3)];
        let p = random_tensor(&mut rng, n, d);
        let budget = case_budget(seed, 3, c);
        let eps = injective_snorm(&p, ball, &budget).value;
        let pi = projective_snorm(&p, ball, None, &budget)?.value;
        let s = sandwich(&p, ball, &budget)?;
        let excess = [(eps, pi), (s.sup, s.integral_dual), (s.integral_dual, s.nuclear)]
            .iter()
            .map(|&(lo, hi)| ((lo - hi) / hi.abs().max(f64::MIN_POSITIVE)).max(0.0))
            .fold(0.0, f64::max);
        Ok::<_, Error>((excess, format!("n={n}, d={d}, {ball}: eps {eps} pi {pi} sup {} int {} nuc {}", s.sup, s.integral_dual, s.nuclear)))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((excess, what)) => tally.record(excess, excess <= 0.0, || format!("case {c} ({what})")),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// `dual_ideal_norm(P, πs)` against the sup norm on 50 instances.
pub fn duality(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(4, "dual of projective norm equals sup norm", RECONCILE_BAND);
    let outcomes = par_cases(50, |c| {
        let mut rng = case_rng(seed, 4, c);
        let n = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=5usize);
        let ball = Ball::ALL[rng.random_range(0..3)];
        let p = random_tensor(&mut rng, n, d);
        let budget = case_budget(seed, 4, c);
        let dual = dual_ideal_norm(&p, NormDescriptor::projective(ball), &budget)?;
        let sup = crate::ideals::sup_norm(&p, ball, &budget);
        Ok::<_, Error>((relative(dual, sup), format!("n={n}, d={d}, {ball}: dual {dual} sup {sup}")))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((err, what)) => tally.record(err, err < RECONCILE_BAND, || format!("case {c} ({what})")),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// `πs` and `εs` before and after an isometric embedding into three more
/// dimensions, on 30 instances. The measured quantity is the `πs` gap; the
/// `εs` gap must stay below `1e-8`.
pub fn embedding(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(5, "isometric embedding", RECONCILE_BAND);
    let outcomes = par_cases(30, |c| {
        let mut rng = case_rng(seed, 5, c);
        let n = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=4usize);
        let ball = Ball::ALL[c % 3];
        let w = random_tensor(&mut rng, n, d);
        let v = random_isometry(&mut rng, ball, d, 3);
        let big = w.push_forward(&v)?;
        let budget = case_budget(seed, 5, c);
        let pi = projective_snorm(&w, ball, None, &budget)?.value;
        let pi_big = projective_snorm(&big, ball, None, &budget)?.value;
        let eps = injective_snorm(&w, ball, &budget).value;
        let eps_big = injective_snorm(&big, ball, &budget).value;
        Ok::<_, Error>((
            relative(pi, pi_big),
            relative(eps, eps_big),
            format!("n={n}, d={d}, {ball}: pi {pi} -> {pi_big}, eps {eps} -> {eps_big}"),
        ))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((pi_gap, eps_gap, what)) => tally.record(pi_gap, pi_gap < RECONCILE_BAND && eps_gap <= 1e-8, || {
                format!("case {c} ({what})")
            }),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// Sup norm over the `c0` ball against the extended sup norm over the model ball.
pub fn norm_preservation(seed: u64, fixtures: &Fixtures) -> CriterionResult {
    let mut tally = Tally::new(6, "extension preserves the sup norm", 1e-3);
    let outcomes = par_cases(fixtures.extension.len(), |c| {
        let f = &fixtures.extension[c];
        extension_norm_gap(&f.family, f.head_len, &case_budget(seed, 6, c))
    });
    for (f, out) in fixtures.extension.iter().zip(outcomes) {
        match out {
            Ok(g) => tally.record(g.gap, g.gap < 1e-3, || {
                format!("{}: c0 {} extended {} gap {:.3e}", f.name, g.c0, g.extended, g.gap)
            }),
            Err(e) => tally.error(&f.name, &e),
        }
    }
    tally.finish()
}

/// Nuclear norm before and after extension on the fixtures, and the
/// minimal kernel with `r = d` against its base norm on random tensors.
pub fn minimal_ideal(seed: u64, fixtures: &Fixtures) -> CriterionResult {
    let mut tally = Tally::new(7, "minimal ideals are preserved", RECONCILE_BAND);
    let nuclear = IdealNormDescriptor::nuclear(Ball::LInf);
    let outcomes = par_cases(fixtures.extension.len(), |c| {
        let f = &fixtures.extension[c];
        ideal_norm_preservation(&f.family, &nuclear, f.ideal_head_len, &case_budget(seed, 7, c))
    });
    for (f, out) in fixtures.extension.iter().zip(outcomes) {
        match out {
            Ok(r) => tally.record(r.gap, r.gap < RECONCILE_BAND, || {
                format!("{}: nuclear {} -> {} gap {:.3e}", f.name, r.before, r.after, r.gap)
            }),
            Err(e) => tally.error(&f.name, &e),
        }
    }
    let kernel_cases = 12;
    let outcomes = par_cases(kernel_cases, |c| {
        let mut rng = case_rng(seed, 7, 1000 + c);
        let n = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=3usize);
        let ball = Ball::ALL[c % 3];
        let base = if c % 2 == 0 {
            IdealNormDescriptor::sup(ball)
        } else {
            IdealNormDescriptor::nuclear(ball)
        };
        let p = random_tensor(&mut rng, n, d);
        let budget = case_budget(seed, 7, 1000 + c);
        let direct = ideal_norm(&p, &base, &budget)?.value;
        let r = d + c % 2;
        let kernel = min_kernel_norm(&p, &base, r, &budget)?;
        Ok::<_, Error>((direct, kernel.value, format!("n={n}, d={d}, r={r}, {} on {ball}", base.kind.name())))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((direct, Some(kernel), what)) => {
                let gap = relative(direct, kernel);
                tally.record(gap, gap < RECONCILE_BAND, || format!("kernel case {c} ({what}): {kernel} vs {direct}"));
            }
            Ok((_, None, what)) => tally.record(f64::NAN, false, || format!("kernel case {c} ({what}): infeasible")),
            Err(e) => tally.error(&format!("kernel case {c}"), &e),
        }
    }
    tally.finish()
}

/// Maximal kernel along 50 nested chains: nondecreasing and equal to the
/// full-space value. The measured quantity is the largest violation.
pub fn maximal_kernel(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(8, "maximal kernel along chains", 1e-9);
    let outcomes = par_cases(50, |c| {
        let mut rng = case_rng(seed, 8, c);
        let n = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=5usize);
        let ball = Ball::ALL[c % 3];
        let p = random_tensor(&mut rng, n, d);
        let budget = case_budget(seed, 8, c);
        let chain = SubspaceChain::sample(d, ball, budget.reseeded(1).seed);
        let base = IdealNormDescriptor::sup(ball);
        let report = max_kernel_norm(&p, &base, &chain, &budget)?;
        let drop = report
            .values
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max);
        let full = *report.values.last().expect("chain is nonempty");
        let violation = drop.max((report.value - full).abs());
        Ok::<_, Error>((violation, format!("n={n}, d={d}, {ball}: chain {:?}", report.values)))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((v, what)) => tally.record(v, v <= 1e-9, || format!("chain {c} ({what})")),
            Err(e) => tally.error(&format!("chain {c}"), &e),
        }
    }
    tally.finish()
}

/// The three accuracies used by the averaging criterion.
pub const DG_EPSILONS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Averaging harness on every fixture and accuracy, plus the repeated-index
/// count against enumeration for `n <= 4`, `m <= 8`. The measured quantity is
/// the largest `|sum P̄(z_k) - sum P(R z_k)| / epsilon`.
pub fn averaging(fixtures: &Fixtures, epsilons: &[f64], seed: u64) -> (CriterionResult, Vec<(String, DgReport)>) {
    let mut tally = Tally::new(9, "averaged operators", 1.0);
    let mut reports = Vec::new();
    for f in &fixtures.dg {
        let mut last_m: Option<(f64, usize)> = None;
        let mut sorted = epsilons.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for &eps in &sorted {
            let config = DgConfig::for_points(&f.family, &f.points, eps, seed);
            match dg_verify(&f.family, &f.points, &config) {
                Ok(r) => {
                    let ratio = (r.sum_iterated - r.sum_averaged).abs() / eps;
                    let monotone = last_m.is_none_or(|(_, m)| r.m >= m);
                    tally.record(ratio, r.pass && monotone, || {
                        format!(
                            "{} at {eps:e}: m {} pass {} sigma1 {:.3e} sigma2 {:.3e} <= {:.3e}, previous m {:?}",
                            f.name, r.m, r.pass, r.sigma1, r.sigma2, r.sigma2_bound, last_m
                        )
                    });
                    last_m = Some((eps, r.m));
                    reports.push((f.name.clone(), r));
                }
                Err(e) => tally.error(&format!("{} at {eps:e}", f.name), &e),
            }
        }
    }
    for n in 1..=4usize {
        for m in n..=8usize {
            let counted = brute_force_repeats(n, m);
            match repeated_index_bound(n, m, 1.0) {
                Ok(b) => tally.record(0.0, b.count == counted, || {
                    format!("n={n}, m={m}: formula {} enumeration {counted}", b.count)
                }),
                Err(e) => tally.error(&format!("n={n}, m={m}"), &e),
            }
        }
    }
    (tally.finish(), reports)
}

/// Tuples in `{0..m}^n` with a repeated entry, by enumeration.
fn brute_force_repeats(n: usize, m: usize) -> u128 {
    let total = m.pow(n as u32);
    (0..total)
        .filter(|&code| {
            let mut seen = 0u64;
            let mut c = code;
            for _ in 0..n {
                let digit = c % m;
                c /= m;
                if seen & (1 << digit) != 0 {
                    return true;
                }
                seen |= 1 << digit;
            }
            false
        })
        .count() as u128
}

/// Stages used for the uniterated limits of the random cases.
pub const UNITERATED_STAGES: [usize; 6] = [8, 16, 32, 64, 128, 256];

/// Closed-form extension against the stabilized uniterated limit on 100 random `(P, z)`.
pub fn iterated_uniterated(seed: u64) -> CriterionResult {
    let mut tally = Tally::new(10, "iterated and uniterated extensions agree", 1e-8);
    let outcomes = par_cases(100, |c| {
        let mut rng = case_rng(seed, 10, c);
        let p = random_family(&mut rng);
        let z = random_point(&mut rng);
        let closed = ab_extend(&p).value(&z);
        let limit = uniterated_extend(&p, &z, &UNITERATED_STAGES, 1e-12)?;
        let err = (closed - limit.value).abs() / closed.abs().max(1.0);
        Ok::<_, Error>((err, limit.converged, format!("n={}: closed {closed} limit {}", p.order(), limit.value)))
    });
    for (c, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((err, converged, what)) => tally.record(err, err <= 1e-8 && converged, || {
                format!("case {c} ({what}, converged {converged})")
            }),
            Err(e) => tally.error(&format!("case {c}"), &e),
        }
    }
    tally.finish()
}

/// Membership verdict of the sup-norm radius before and after extension on
/// the series fixtures; closed-form proxies are checked to `1e-9`.
pub fn q_radius_invariance(seed: u64, fixtures: &Fixtures) -> CriterionResult {
    let mut tally = Tally::new(11, "radius verdict survives extension", 1e-9);
    let sup = IdealNormDescriptor::sup(Ball::LInf);
    let outcomes = par_cases(fixtures.series.len(), |c| {
        let f = &fixtures.series[c];
        let config = QRadiusConfig {
            head_len: f.head_len,
            ..QRadiusConfig::default()
        };
        q_radius(&f.terms, &sup, &config, &case_budget(seed, 11, c))
    });
    for (f, out) in fixtures.series.iter().zip(outcomes) {
        match out {
            Ok(r) => {
                let proxy_err = f.expected_proxy.map_or(0.0, |e| {
                    (r.proxy - e).abs().max((r.extended_proxy - e).abs())
                });
                tally.record(proxy_err, r.agree && proxy_err <= 1e-9, || {
                    format!(
                        "{}: proxy {} ({}) extended {} ({}), expected {:?}",
                        f.name, r.proxy, r.member, r.extended_proxy, r.extended_member, f.expected_proxy
                    )
                });
            }
            Err(e) => tally.error(&f.name, &e),
        }
    }
    tally.finish()
}

/// Runs one criterion by number.
pub fn run_criterion(id: u8, seed: u64, fixtures: &Fixtures, epsilons: &[f64]) -> CriterionResult {
    match id {
        1 => polarization(seed),
        2 => tensor_norm_axiom(seed),
        3 => sandwich_order(seed),
        4 => duality(seed),
        5 => embedding(seed),
        6 => norm_preservation(seed, fixtures),
        7 => minimal_ideal(seed, fixtures),
        8 => maximal_kernel(seed),
        9 => averaging(fixtures, epsilons, seed).0,
        10 => iterated_uniterated(seed),
        11 => q_radius_invariance(seed, fixtures),
        other => panic!("no criterion {other}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    /// Per-fixture averaging reports, present when criterion 9 ran.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dg: Vec<NamedDgReport>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedDgReport {
    pub fixture: String,
    #[serde(flatten)]
    pub report: DgReport,
}

pub fn run_suite(suite: Suite, seed: u64, fixtures: &Fixtures, epsilons: &[f64]) -> SuiteReport {
    let mut dg = Vec::new();
    let criteria: Vec<CriterionResult> = suite
        .criteria()
        .iter()
        .map(|&id| {
            if id != 9 {
                return run_criterion(id, seed, fixtures, epsilons);
            }
            let (result, reports) = averaging(fixtures, epsilons, seed);
            dg = reports
                .into_iter()
                .map(|(fixture, report)| NamedDgReport { fixture, report })
                .collect();
            result
        })
        .collect();
    let pass = criteria.iter().all(|c| c.passed);
    SuiteReport {
        suite,
        seed,
        criteria,
        dg,
        pass,
    }
}
