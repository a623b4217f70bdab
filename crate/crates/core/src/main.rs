//! `polyext`: norms of symmetric tensors and polynomials, extensions of
//! coefficient families, and the verification suites.
//!
//! Exit codes: 0 success, 1 failed verification or runtime failure,
//! 2 bad input or usage, 3 infeasible rank.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use polyext::extensions::{ab_extend, uniterated_extend, CoefficientFamily, TailVector, UniteratedReport};
use polyext::ideals::{
    max_kernel_norm, min_kernel_norm, nuclear_norm, sup_norm_witness, IdealKind,
    IdealNormDescriptor, SubspaceChain,
};
use polyext::norms::{injective_snorm, integral_dual, projective_snorm, Bound};
use polyext::suites::{run_suite, Fixtures, Suite, UNITERATED_STAGES, DG_EPSILONS};
use polyext::{Ball, Error, OptBudget, SymTensor};

#[derive(Parser)]
#[command(name = "polyext", version, about = "Symmetric tensor norms, ideal norms and polynomial extensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norm of a tensor literal, read as a tensor or as a polynomial.
    Norm(NormArgs),
    /// Closed-form and stagewise extensions of a coefficient family.
    Extend(ExtendArgs),
    /// Runs a verification suite: isometry, embedding, ideals, dg or all.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    restarts: usize,
    #[arg(long, default_value_t = 400)]
    iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl BudgetArgs {
    fn budget(&self) -> Result<OptBudget, Failure> {
        let b = OptBudget {
            restarts: self.restarts,
            iterations: self.iters,
            seed: self.seed,
            tolerance: self.tol,
        };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Report path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct NormArgs {
    /// Tensor literal `{"n", "d", "entries": [{"idx", "val"}]}`.
    #[arg(long)]
    input: PathBuf,
    /// projective, injective, sup, nuclear, integral_dual, max_kernel[:base]
    /// or min_kernel[:base]; kernel bases default to sup.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value = "l2")]
    ball: String,
    /// Decomposition rank, or the factorization rank for min_kernel.
    #[arg(long)]
    rank: Option<usize>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ExtendArgs {
    /// `{"family": <coefficient family>, "points": [<tail vector>, ...]}`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = UNITERATED_STAGES)]
    stages: Vec<usize>,
    /// Relative change between the last two stages accepted as converged.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Averaging tolerance for the dg criterion; all of 1e-1, 1e-2, 1e-3 when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixture directory holding extension.json, dg.json and series.json.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(msg),
            Error::Lp(_) | Error::StageExhausted { .. } => Failure::Runtime(msg),
            _ => Failure::Usage(msg),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Writes next to the destination and renames, so a failed run leaves no partial file.
fn emit(out: &OutputArgs, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("cannot write report: {e}"));
    match &out.output {
        None => std::io::stdout().write_all(bytes).map_err(io),
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.persist(path).map_err(|e| io(e.error))?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

fn to_csv<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

fn parse_ideal_kind(name: &str, rank: Option<usize>, dim: usize) -> Result<IdealKind, Failure> {
    let (head, base) = match name.split_once(':') {
        Some((h, b)) => (h, Some(b)),
        None => (name, None),
    };
    let simple = |s: &str| match s {
        "sup" => Ok(IdealKind::Sup),
        "nuclear" => Ok(IdealKind::Nuclear),
        "integral_dual" => Ok(IdealKind::IntegralDual),
        other => Err(Failure::Usage(format!("unknown norm kind {other:?}"))),
    };
    let kernel_base = || -> Result<Box<IdealKind>, Failure> { Ok(Box::new(base.map_or(Ok(IdealKind::Sup), simple)?)) };
    match head {
        "max_kernel" => Ok(IdealKind::MaxKernel { base: kernel_base()? }),
        "min_kernel" => Ok(IdealKind::MinKernel {
            base: kernel_base()?,
            rank: rank.unwrap_or(dim),
        }),
        _ if base.is_some() => Err(Failure::Usage(format!("norm kind {name:?} takes no base"))),
        other => simple(other),
    }
}

#[derive(Serialize)]
struct NormReport {
    norm: String,
    /// Direction of the estimate: `lower`, `upper` or `estimate`.
    kind: String,
    ball: Ball,
    value: f64,
    witness: Value,
    budget: OptBudget,
    seed: u64,
}

#[derive(Serialize)]
struct NormRow<'a> {
    norm: &'a str,
    kind: &'a str,
    ball: Ball,
    value: f64,
    seed: u64,
}

fn cmd_norm(args: &NormArgs) -> Result<(), Failure> {
    let budget = args.budget.budget()?;
    let ball: Ball = args.ball.parse()?;
    let p = SymTensor::from_json(&read_input(&args.input)?)?;
    let (norm, bound, value, witness) = match args.kind.as_str() {
        "projective" => {
            let est = projective_snorm(&p, ball, args.rank, &budget)?;
            ("projective_s".to_string(), Some(Bound::Upper), est.value, json!(est.decomposition))
        }
        "injective" => {
            let est = injective_snorm(&p, ball, &budget);
            ("injective_s".to_string(), Some(Bound::Lower), est.value, json!({ "functional": est.functional }))
        }
        name => {
            let kind = parse_ideal_kind(name, args.rank, p.dim())?;
            let bound = kind.bound();
            let (value, witness) = match &kind {
                IdealKind::Sup => {
                    let m = sup_norm_witness(&p, ball, &budget);
                    (m.value, json!({ "point": m.point }))
                }
                IdealKind::Nuclear => {
                    let est = nuclear_norm(&p, ball, args.rank, &budget)?;
                    (est.value, json!(est.decomposition))
                }
                IdealKind::IntegralDual => {
                    let est = integral_dual(&p, ball, &budget)?;
                    (est.value, json!({ "tensor": est.witness.to_literal() }))
                }
                IdealKind::MaxKernel { base } => {
                    let chain = SubspaceChain::sample(p.dim(), ball, budget.reseeded(0xC4A1).seed);
                    let desc = IdealNormDescriptor::new((**base).clone(), ball);
                    let rep = max_kernel_norm(&p, &desc, &chain, &budget)?;
                    let dims: Vec<usize> = chain.bases.iter().map(|b| b.ncols()).collect();
                    (rep.value, json!({ "chain_dims": dims, "values": rep.values }))
                }
                IdealKind::MinKernel { base, rank } => {
                    let desc = IdealNormDescriptor::new((**base).clone(), ball);
                    let out = min_kernel_norm(&p, &desc, *rank, &budget)?;
                    match (out.value, out.factorization) {
                        (Some(v), Some(f)) => (v, f.to_json_value()),
                        _ => {
                            return Err(Error::Infeasible {
                                rank: *rank,
                                residual: out.residual,
                            }
                            .into())
                        }
                    }
                }
            };
            (kind.name(), bound, value, witness)
        }
    };
    let kind = bound.map_or("estimate".to_string(), |b| b.to_string());
    let bytes = match args.out.format {
        Format::Json => to_json(&NormReport {
            norm,
            kind,
            ball,
            value,
            witness,
            budget,
            seed: budget.seed,
        }),
        Format::Csv => to_csv(&[NormRow {
            norm: &norm,
            kind: &kind,
            ball,
            value,
            seed: budget.seed,
        }])?,
    };
    emit(&args.out, &bytes)
}

#[derive(Deserialize)]
struct ExtendInput {
    family: CoefficientFamily,
    #[serde(default)]
    points: Vec<TailVector>,
}

#[derive(Serialize)]
struct ExtendReport {
    order: usize,
    stages: Vec<usize>,
    tol: f64,
    points: Vec<ExtendPoint>,
}

#[derive(Serialize)]
struct ExtendPoint {
    point: TailVector,
    /// Closed-form value of the extension.
    value: f64,
    uniterated: UniteratedReport,
}

#[derive(Serialize)]
struct ExtendRow {
    point: usize,
    /// Stage of the trace, or `limit` for the closed-form value.
    stage: String,
    value: f64,
    converged: bool,
}

fn cmd_extend(args: &ExtendArgs) -> Result<(), Failure> {
    if !(args.tol > 0.0) {
        return Err(Failure::Usage("tolerance must be positive".into()));
    }
    let input: ExtendInput = serde_json::from_str(&read_input(&args.input)?).map_err(Error::from)?;
    let ext = ab_extend(&input.family);
    let points = input
        .points
        .into_iter()
        .map(|z| {
            let uniterated = uniterated_extend(&input.family, &z, &args.stages, args.tol)?;
            Ok(ExtendPoint {
                value: ext.value(&z),
                point: z,
                uniterated,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let report = ExtendReport {
        order: input.family.order(),
        stages: args.stages.clone(),
        tol: args.tol,
        points,
    };
    let bytes = match args.out.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut rows = Vec::new();
            for (i, p) in report.points.iter().enumerate() {
                let converged = p.uniterated.converged;
                rows.extend(p.uniterated.trace.iter().map(|s| ExtendRow {
                    point: i,
                    stage: s.stage.to_string(),
                    value: s.value,
                    converged,
                }));
                rows.push(ExtendRow {
                    point: i,
                    stage: "limit".into(),
                    value: p.value,
                    converged,
                });
            }
            to_csv(&rows)?
        }
    };
    emit(&args.out, &bytes)
}

#[derive(Serialize)]
struct CriterionRow<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    cases: usize,
    measured: f64,
    threshold: f64,
}

/// Returns whether every criterion passed.
fn cmd_verify(args: &VerifyArgs) -> Result<bool, Failure> {
    let suite: Suite = args.suite.parse()?;
    let fixtures = match &args.input {
        Some(dir) => Fixtures::from_dir(dir)?,
        None => Fixtures::builtin(),
    };
    let epsilons: Vec<f64> = match args.epsilon {
        Some(e) if e > 0.0 && e.is_finite() => vec![e],
        Some(e) => return Err(Failure::Usage(format!("epsilon must be positive, got {e}"))),
        None => DG_EPSILONS.to_vec(),
    };
    let report = run_suite(suite, args.seed, &fixtures, &epsilons);
    let bytes = match args.out.format {
        Format::Json => to_json(&report),
        Format::Csv => to_csv(
            &report
                .criteria
                .iter()
                .map(|c| CriterionRow {
                    id: c.id,
                    name: &c.name,
                    passed: c.passed,
                    cases: c.cases,
                    measured: c.measured,
                    threshold: c.threshold,
                })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(&args.out, &bytes)?;
    Ok(report.pass)
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SYMT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("SYMT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    init_threads()?;
    match &cli.command {
        Command::Norm(a) => cmd_norm(a).map(|_| true),
        Command::Extend(a) => cmd_extend(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
