//! `rek`: generate problems, run solvers and sweeps, check the rate bounds.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or parse failure, 3 non-convergence
//! under `solve --strict` or any failed cell in `bench`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rek_core::harness::{self, BenchSpec, HarnessError, ProblemSpec, ResultRow};
use rek_core::linalg::build_norm_cache;
use rek_core::problem::{self, load_bundle, save_bundle, BundleMeta, ProblemError};
use rek_core::theory::{self, TheoryError, Thm8Inputs, VerifyOptions};
use rek_core::{Execution, SolverConfig, SolverError, SolverKind};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rek", version, about = "Randomized extended Kaczmarz solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a problem bundle to disk.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve one problem and print the result row as JSON.
    Solve(SolveArgs),
    /// Run a benchmark sweep described by a TOML file.
    Bench(BenchArgs),
    /// Compare measured contraction against the rate bounds.
    Verify(VerifyArgs),
    /// Print coherence constants and rate bounds for a problem.
    Constants(ConstantsArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// i.i.d. standard normal matrix.
    Gaussian {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Add a component of b orthogonal to the range of A.
        #[arg(long)]
        inconsistent: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parallel-beam tomography of the Shepp-Logan phantom.
    Tomo {
        #[arg(long)]
        side: usize,
        #[arg(long)]
        angles: usize,
        #[arg(long)]
        detectors: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matrix Market file with a generated inconsistent right-hand side.
    FromMtx {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    method: SolverKind,
    /// Problem bundle directory.
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling fraction (TREKS, TSREKS, TRKS, TSRKS only).
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    check_every: Option<usize>,
    /// Write the residual history to this CSV file.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the final iterate, one value per line.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Exit with status 3 when the run does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML bench spec.
    #[arg(long)]
    spec: PathBuf,
    /// Concurrent cells.
    #[arg(long)]
    jobs: Option<usize>,
    /// Row CSV (overrides the spec; stdout when neither is set).
    #[arg(long)]
    rows: Option<PathBuf>,
    /// Summary CSV (overrides the spec; stderr when neither is set).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the Monte Carlo runs.
    #[arg(long)]
    rate_only: bool,
    /// Pairs per axis for the sampled coherence estimate on large matrices.
    #[arg(long, default_value_t = 1_000_000)]
    sampled_pairs: usize,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstantsArgs {
    /// Problem bundle directory.
    #[arg(long, conflicts_with = "mtx", required_unless_present = "mtx")]
    problem: Option<PathBuf>,
    /// Matrix Market file.
    #[arg(long)]
    mtx: Option<PathBuf>,
    /// Estimate coherences from this many sampled pairs instead of a full scan.
    #[arg(long)]
    sampled_pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Top-two bound inputs as `c,omega,c_t,omega_t`.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pair_inputs: Option<Vec<f64>>,
}

enum Failure {
    Usage(String),
    Io(String),
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::NotConverged(m) => m,
        }
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Problem(p) => p.into(),
            HarnessError::Solver(s) => s.into(),
            HarnessError::Spec(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<TheoryError> for Failure {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::Problem(p) => p.into(),
            TheoryError::Solver(s) => s.into(),
            TheoryError::TooLarge { .. } | TheoryError::InvalidInput(_) => Failure::Usage(e.to_string()),
            TheoryError::Linalg(_) => Failure::Io(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(io_failure(path))
}

fn exec_mode(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn gen(cmd: GenCommand) -> Result<(), Failure> {
    let (spec, out, params) = match cmd {
        GenCommand::Gaussian {
            m,
            n,
            seed,
            inconsistent,
            out,
        } => (
            ProblemSpec::Gaussian { m, n, seed, inconsistent },
            out,
            json!({ "m": m, "n": n, "inconsistent": inconsistent }),
        ),
        GenCommand::Tomo {
            side,
            angles,
            detectors,
            seed,
            out,
        } => (
            ProblemSpec::Tomo { side, angles, detectors, seed },
            out,
            json!({ "side": side, "angles": angles, "detectors": detectors }),
        ),
        GenCommand::FromMtx { path, seed, out } => {
            let params = json!({ "path": path.display().to_string() });
            (ProblemSpec::FromMtx { path, seed }, out, params)
        }
    };
    if let ProblemSpec::Gaussian { m: 0, .. } | ProblemSpec::Gaussian { n: 0, .. } = spec {
        return Err(Failure::Usage("--m and --n must be positive".into()));
    }
    let problem = spec.build()?;
    let (generator, seed) = match &spec {
        ProblemSpec::Gaussian { seed, .. } => ("gaussian", *seed),
        ProblemSpec::Tomo { seed, .. } => ("tomo", *seed),
        ProblemSpec::FromMtx { seed, .. } => ("from-mtx", *seed),
        ProblemSpec::Bundle { .. } => unreachable!("gen never loads bundles"),
    };
    let meta = BundleMeta {
        label: problem.label.clone(),
        seed: Some(seed),
        generator: generator.into(),
        params: params.as_object().cloned().unwrap_or_default(),
    };
    let dir = out.unwrap_or_else(|| PathBuf::from(&problem.label));
    save_bundle(&problem, &meta, &dir)?;
    eprintln!("wrote {} ({}×{}) to {}", problem.label, problem.rows(), problem.cols(), dir.display());
    Ok(())
}

fn solve_cmd(args: SolveArgs) -> Result<(), Failure> {
    let (problem, _) = load_bundle(&args.problem)?;
    let mut config = SolverConfig::for_problem(&problem);
    config.stop.tol = args.tol;
    config.stop.track_history = args.history.is_some();
    if let Some(k) = args.max_iters {
        config.stop.max_iters = k;
    }
    if let Some(k) = args.check_every {
        config.stop.check_every = k;
    }
    match args.fraction {
        Some(f) if args.method.uses_fraction() => config.fraction = f,
        Some(_) => eprintln!("warning: --fraction has no effect on {}; ignored", args.method),
        None => {}
    }
    let record = rek_core::solve(args.method, &problem, &config, args.seed)?;
    if let Some(path) = &args.history {
        harness::write_history_csv(&record.history, create(path)?)?;
    }
    if let Some(path) = &args.solution {
        let mut w = create(path)?;
        for v in &record.solution {
            writeln!(w, "{v:.16e}").map_err(io_failure(path))?;
        }
        w.flush().map_err(io_failure(path))?;
    }
    print_json(&ResultRow::from_record(&record, &problem, 0));
    if args.strict && !record.converged {
        return Err(Failure::NotConverged(format!(
            "{} did not converge within {} steps",
            args.method, record.iters
        )));
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.spec).map_err(io_failure(&args.spec))?;
    let spec = BenchSpec::from_toml_str(&text)?;
    let outcome = harness::run_bench(&spec, args.jobs, exec_mode(args.sequential))?;
    match args.rows.or(spec.rows_csv.clone()) {
        Some(path) => harness::write_rows_csv(&outcome.rows, create(&path)?)?,
        None => harness::write_rows_csv(&outcome.rows, io::stdout().lock())?,
    }
    match args.summary.or(spec.summary_csv.clone()) {
        Some(path) => harness::write_summary_csv(&outcome.summary, create(&path)?)?,
        None => harness::write_summary_csv(&outcome.summary, io::stderr().lock())?,
    }
    if outcome.any_failed() {
        let n = outcome.rows.iter().filter(|r| r.error.is_some()).count();
        return Err(Failure::NotConverged(format!("{n} bench cells failed")));
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let (problem, _) = load_bundle(&args.problem)?;
    let opts = VerifyOptions {
        trials: args.trials,
        steps: args.steps,
        seed: args.seed,
        rate_only: args.rate_only,
        sampled_pairs: args.sampled_pairs,
    };
    let report = theory::verify_bounds(&problem, opts, exec_mode(args.sequential))?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Failure::Io(e.to_string()))?;
            w.flush().map_err(io_failure(path))?;
        }
        None => print_json(&report),
    }
    for c in &report.checks {
        let status = if c.vacuous { "vacuous" } else if c.passed { "pass" } else { "FAIL" };
        eprintln!("{:<5} {:<7} rate {:.6}  {status}", c.name, c.method, c.rate);
    }
    Ok(())
}

fn constants(args: ConstantsArgs) -> Result<(), Failure> {
    let a = match (&args.problem, &args.mtx) {
        (Some(dir), _) => load_bundle(dir)?.0.a,
        (None, Some(path)) => problem::read_matrix_market(path)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    let cache = build_norm_cache(&a).map_err(|e| Failure::Io(e.to_string()))?;
    let c = match args.sampled_pairs {
        Some(pairs) => theory::compute_constants_sampled(&a, &cache, pairs, args.seed, Execution::Parallel)?,
        None => theory::compute_constants(&a, &cache, Execution::Parallel)?,
    };
    let inputs = args.pair_inputs.map(|v| Thm8Inputs {
        c: v[0],
        omega: v[1],
        c_t: v[2],
        omega_t: v[3],
    });
    let rates = theory::rates_all(&c, inputs);
    print_json(&json!({ "constants": c, "rates": rates }));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen(cmd) => gen(cmd),
        Command::Solve(args) => solve_cmd(args),
        Command::Bench(args) => bench(args),
        Command::Verify(args) => verify(args),
        Command::Constants(args) => constants(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
