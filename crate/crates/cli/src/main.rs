//! `nonlocal`: evaluate operators, solve Dirichlet problems, measure Hölder
//! seminorms, check Liouville hypotheses and run the counterexample sweeps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 no convergence,
//! 3 no contraction, 4 divergent tail.

mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use nonlocal_core::counterexamples::{blowup_sweep, CounterexampleConfig, Kind};
use nonlocal_core::holder::{seminorm_report, Region, SeminormQuery};
use nonlocal_core::kernels::{KernelSpec, MollifierSpec};
use nonlocal_core::liouville::{
    check_comparability, check_hypotheses, polynomial_conclusion_residual, ComparabilityReport, HypothesesReport,
    LiouvilleInput,
};
use nonlocal_core::operators::{
    apply_many, bellman_apply, extremal_apply, linear_apply, DiscreteMeasure, OperatorFamily, QuadratureConfig, Sign,
};
use nonlocal_core::solver::{solve_contraction, solve_dirichlet, DirichletProblem, SmallBall};
use nonlocal_core::{EllipticityParams, Error, GridFunction, HolderExponents, Result, TailSpec};

use output::{write_atomic, write_json};

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "Nonlocal elliptic operators with rough kernels")]
struct Cli {
    /// Worker threads for the data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled seminorm pair sets.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate L, M± or a Bellman infimum at points.
    Eval(EvalArgs),
    /// Solve a Dirichlet problem on (−1, 1).
    Solve(SolveArgs),
    /// Discrete Hölder seminorm of a grid function.
    Seminorm(SeminormArgs),
    /// Sampled check of the Liouville hypotheses and the P/N comparability.
    LiouvilleCheck(LiouvilleArgs),
    /// Blow-up sweep of the oscillating-kernel counterexample.
    Counterexample(CounterexampleArgs),
}

#[derive(Args)]
struct GridInput {
    /// Grid function, CSV with header `x,value`.
    #[arg(long)]
    u: PathBuf,
    /// Exterior data as TailSpec JSON (default: zero beyond the grid).
    #[arg(long)]
    tail: Option<PathBuf>,
}

impl GridInput {
    fn load(&self) -> Result<GridFunction> {
        let tail = self.tail.as_deref().map(read_json::<TailSpec>).transpose()?;
        GridFunction::read_csv(BufReader::new(File::open(&self.u)?), tail)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Nonlinear,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("operator").required(true).args(["kernel", "family", "extremal"])))]
struct EvalArgs {
    #[command(flatten)]
    input: GridInput,
    /// Kernel JSON for a linear operator.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// OperatorFamily JSON; adds an `argmin` column.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Extremal operator M⁺ or M⁻ (needs --sigma).
    #[arg(long, value_enum)]
    extremal: Option<SignArg>,
    #[arg(long, requires = "extremal")]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "Lambda", default_value_t = 2.0)]
    big_lambda: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    points: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON: a DirichletProblem, optionally with `small_ball`.
    #[arg(long)]
    problem: PathBuf,
    /// Solution nodes, CSV `x,value`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SeminormArgs {
    #[command(flatten)]
    input: GridInput,
    #[arg(long)]
    beta: f64,
    /// Interval `a,b` (default: the whole grid).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    region: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LiouvilleArgs {
    #[command(flatten)]
    input: GridInput,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "Lambda", default_value_t = 2.0)]
    big_lambda: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    shifts: Vec<f64>,
    /// Evaluation points (default: -1, -0.5, 0, 0.5, 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    points: Option<Vec<f64>>,
    /// Growth radii, each at least 1 (default: 1, a quarter and half of the grid).
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// JSON list of DiscreteMeasure for the averaged-difference hypothesis.
    #[arg(long)]
    measures: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// CounterexampleConfig JSON; replaces the numeric flags below.
    #[arg(long, conflicts_with_all = ["kind", "sigma", "alpha", "m", "lambda", "big_lambda", "cells", "refine"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "Lambda")]
    big_lambda: Option<f64>,
    /// Cells on [−1, 1] (default: max(256, 16·max m)).
    #[arg(long)]
    cells: Option<usize>,
    /// Re-solve the largest m on a grid twice as fine.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Problem file of `solve`.
#[derive(Deserialize)]
struct SolveFile {
    #[serde(flatten)]
    problem: DirichletProblem,
    #[serde(default)]
    small_ball: Option<SmallBall>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MaxIterations { .. } => 2,
        Error::NoContraction { .. } => 3,
        Error::DivergentTail { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match cli.command {
        Command::Eval(a) => eval(a),
        Command::Solve(a) => solve(a),
        Command::Seminorm(a) => seminorm(a, cli.seed),
        Command::LiouvilleCheck(a) => liouville(a),
        Command::Counterexample(a) => counterexample(a),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let params = EllipticityParams::new(a.lambda, a.big_lambda)?;
    let cfg = QuadratureConfig::default();
    let kernel = a.kernel.as_deref().map(read_json::<KernelSpec>).transpose()?;
    let family = a.family.as_deref().map(read_json::<OperatorFamily>).transpose()?;
    if let Some(f) = &family {
        f.validate()?;
    }
    let sigma = match (a.extremal, a.sigma) {
        (Some(_), None) => return Err(Error::InvalidParameter("--extremal needs --sigma".into())),
        (_, s) => s,
    };
    if let Some(s) = sigma {
        KernelSpec::flat(s)?;
    }
    let u = a.input.load()?;

    let rows: Vec<(f64, Option<usize>)> = apply_many(&a.points, |x| {
        if let Some(k) = &kernel {
            Ok((linear_apply(&u, k, x, &cfg)?, None))
        } else if let Some(f) = &family {
            let (v, arg) = bellman_apply(&u, f, x, &cfg)?;
            Ok((v, Some(arg)))
        } else {
            let sign = a.extremal.expect("operator group is required").into();
            Ok((
                extremal_apply(&u, sign, &params, sigma.expect("checked"), x, &cfg)?,
                None,
            ))
        }
    })?;

    write_atomic(&a.out, |w| {
        if family.is_some() {
            writeln!(w, "x,value,argmin")?;
        } else {
            writeln!(w, "x,value")?;
        }
        for (x, (v, arg)) in a.points.iter().zip(&rows) {
            match arg {
                Some(i) => writeln!(w, "{x},{v},{i}")?,
                None => writeln!(w, "{x},{v}")?,
            }
        }
        Ok(())
    })
}

fn solve(a: SolveArgs) -> Result<()> {
    let file: SolveFile = read_json(&a.problem)?;
    let p = file.problem;
    p.validate()?;
    let rep = match file.small_ball {
        Some(ball) => {
            MollifierSpec::new(ball.mollifier.epsilon)?;
            solve_contraction(&p, &ball)?
        }
        None => solve_dirichlet(&p)?,
    };
    eprintln!("solved in {} iterations, residual {:e}", rep.iterations, rep.residual);
    write_atomic(&a.out, |w| rep.solution.write_csv(w))?;
    if let Some(path) = &a.report {
        write_json(path, &rep)?;
    }
    Ok(())
}

fn seminorm(a: SeminormArgs, seed: u64) -> Result<()> {
    let region = match a.region.as_deref() {
        Some(&[lo, hi]) => Some(Region::Interval { a: lo, b: hi }),
        Some(_) => return Err(Error::InvalidParameter("--region takes a,b".into())),
        None => None,
    };
    // Reject a bad order before reading any data.
    if (a.beta - a.beta.round()).abs() < 1e-12 {
        return Err(Error::IntegerOrder { order: a.beta });
    }
    let u = a.input.load()?;
    let x = u.halfwidth();
    let q = SeminormQuery {
        stride: a.stride,
        seed,
        ..SeminormQuery::new(a.beta, region.unwrap_or(Region::Interval { a: -x, b: x }))
    };
    let rep = seminorm_report(&u, &q)?;
    write_json(&a.out, &rep)
}

#[derive(Serialize)]
struct LiouvilleReport {
    sigma: f64,
    alpha: f64,
    c1: f64,
    hypotheses: HypothesesReport,
    comparability: ComparabilityReport,
    polynomial_residual: f64,
}

fn liouville(a: LiouvilleArgs) -> Result<()> {
    let exponents = HolderExponents::new(a.sigma, a.alpha)?;
    let params = EllipticityParams::new(a.lambda, a.big_lambda)?;
    let measures: Vec<DiscreteMeasure> = match &a.measures {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    for m in &measures {
        m.validate()?;
    }
    let u = a.input.load()?;
    let x = u.halfwidth();
    let points = a.points.unwrap_or_else(|| vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    let radii = a.radii.unwrap_or_else(|| {
        let mut r = vec![1.0, 0.25 * x, 0.5 * x];
        r.retain(|&t| t >= 1.0);
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    });
    let inp = LiouvilleInput::new(u, exponents, a.c1, params)?;
    let hypotheses = check_hypotheses(&inp, &a.shifts, &measures, &radii, &points)?;
    let comparability = check_comparability(&inp, &points)?;
    let polynomial_residual = polynomial_conclusion_residual(&inp)?;
    eprintln!(
        "hypotheses {}, comparability {}, polynomial residual {polynomial_residual:e}",
        if hypotheses.pass { "not falsified" } else { "violated" },
        if comparability.pass { "pass" } else { "fail" },
    );
    write_json(
        &a.out,
        &LiouvilleReport {
            sigma: a.sigma,
            alpha: a.alpha,
            c1: a.c1,
            hypotheses,
            comparability,
            polynomial_residual,
        },
    )
}

fn counterexample(a: CounterexampleArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => read_json::<CounterexampleConfig>(path)?,
        None => {
            let ms = a.m.unwrap_or_else(|| vec![2, 4, 8, 16, 32]);
            let m_max = ms.iter().copied().max().unwrap_or(1) as usize;
            let kind = match a.kind.unwrap_or(KindArg::Linear) {
                KindArg::Linear => Kind::Linear,
                KindArg::Nonlinear => Kind::Nonlinear,
            };
            let mut cfg = CounterexampleConfig::new(
                kind,
                a.sigma.unwrap_or(1.0),
                ms,
                a.alpha.unwrap_or(0.1),
                a.cells.unwrap_or((16 * m_max).max(256)),
            )?;
            cfg.params = EllipticityParams::new(a.lambda.unwrap_or(1.0), a.big_lambda.unwrap_or(2.0))?;
            cfg.refine = a.refine;
            cfg
        }
    };
    cfg.validate()?;
    let rep = blowup_sweep(&cfg)?;
    for e in &rep.entries {
        eprintln!(
            "m = {:>3}: sup {:.4e}, C^a {:.4e}, C^(s+a) {:.4e}",
            e.m, e.sup_norm, e.calpha_seminorm, e.csigma_alpha_seminorm
        );
    }
    if let Some(path) = &a.out {
        write_json(path, &rep)?;
    }
    if let Some(path) = &a.csv {
        write_atomic(path, |w| rep.write_csv(w))?;
    }
    Ok(())
}
