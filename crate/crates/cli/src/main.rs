//! `ttgda`: generate and inspect quadratic minimax instances, run GDA / SGDA /
//! EG trajectories and sweeps, and run the certification suites.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttgda::dynamics::{estimate_rate, fmt_f64, run, Algorithm, SolverConfig, Status, Trajectory};
use ttgda::exec::Executor;
use ttgda::harness::verify::{run_suite, Budget, Suite, Verdict, VerifyOptions};
use ttgda::harness::{
    ratio_sweep, unit_start, ExperimentSpec, HarnessError, InstanceSource, RatioChoice, StepsizeChoice,
};
use ttgda::linalg::LinalgError;
use ttgda::problems::{NoiseModel, ProblemError, QuadraticProblem, SampleOptions};
use ttgda::spectral::{spectral_report_with, SpectralError};

#[derive(Parser, Debug)]
#[command(name = "ttgda", version, about = "Two-time-scale GDA / SGDA / EG on quadratic minimax problems")]
struct Cli {
    /// Directory output files are written to.
    #[arg(long, global = true, env = "TTGDA_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for sweeps and suites (1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file and print its derived constants.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Same as --instance-seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file name (relative to the output directory).
        #[arg(short, long, default_value = "instance.json")]
        out: PathBuf,
    },
    /// Print the spectral report of GDA / EG at ratio r as JSON.
    Inspect {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        steps: StepArgs,
        /// Constant c of the bound 1 - 1/(c r kappa_x); defaults to the scheme's.
        #[arg(long)]
        bound_constant: Option<f64>,
        /// Also write the report to this file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run one trajectory and write it as CSV or JSON.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        steps: StepArgs,
        #[arg(long, value_enum, default_value = "gda")]
        algorithm: AlgArg,
        #[arg(long, default_value_t = 1_000_000)]
        max_iters: u64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Seed for the start point and, for SGDA, the noise. Required for SGDA.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-sample noise level (SGDA).
        #[arg(long)]
        sigma: Option<f64>,
        /// Minibatch size (SGDA).
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Run a ratio sweep and write one row per (ratio, seed, algorithm).
    Sweep {
        /// Experiment spec JSON; the remaining flags are ignored when given.
        #[arg(long, conflicts_with_all = ["instance", "hard_ratio", "hard_rate", "n"])]
        spec: Option<PathBuf>,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Comma-separated ratios: `12.5`, `2k` (times kappa) or `2k2` (times kappa^2).
        #[arg(long, value_delimiter = ',', default_value = "0.5k,2k,8k,2k2")]
        ratios: Vec<RatioChoice>,
        #[arg(long, value_enum, default_value = "half")]
        scheme: SchemeArg,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "gda")]
        algorithms: Vec<AlgArg>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        max_iters: u64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(short, long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Run certification suites; exits 2 when a criterion fails.
    Verify {
        #[arg(default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "full")]
        budget: Budget,
        /// Constant c of the radius bound 1 - 1/(c r kappa_x).
        #[arg(long)]
        bound_constant: Option<f64>,
        #[arg(short, long, default_value = "verify.json")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    /// Dimension of x.
    #[arg(short = 'n', long, default_value_t = 4)]
    n: usize,
    /// Dimension of y.
    #[arg(short = 'm', long, default_value_t = 4)]
    m: usize,
    #[arg(short = 'L', long = "L", default_value_t = 100.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Seed of the instance generator.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    /// Lower target for lambda_min of the Schur complement.
    #[arg(long, default_value_t = 0.0)]
    mu_x_floor: f64,
    /// Build an instance whose Schur complement is singular.
    #[arg(long)]
    mu_x_zero: bool,
    /// The one-dimensional instance on which GDA fails for r <= kappa.
    #[arg(long, conflicts_with = "hard_rate")]
    hard_ratio: bool,
    /// The one-dimensional instance attaining the rate lower bound; needs --mu-x.
    #[arg(long, requires = "mu_x")]
    hard_rate: bool,
    #[arg(long)]
    mu_x: Option<f64>,
}

impl GenArgs {
    fn source(&self) -> InstanceSource {
        if self.hard_ratio {
            InstanceSource::HardRatio { l: self.l, mu: self.mu }
        } else if self.hard_rate {
            InstanceSource::HardRate {
                l: self.l,
                mu: self.mu,
                mu_x: self.mu_x.unwrap_or(f64::NAN),
            }
        } else {
            InstanceSource::Generated {
                n: self.n,
                m: self.m,
                l: self.l,
                mu: self.mu,
                seed: self.instance_seed,
                options: SampleOptions {
                    mu_x_floor: self.mu_x_floor,
                    mu_x_zero: self.mu_x_zero,
                    ..SampleOptions::default()
                },
            }
        }
    }
}

/// An instance file, or generator parameters.
#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Instance JSON written by `generate`.
    #[arg(long, conflicts_with_all = ["hard_ratio", "hard_rate", "n", "m", "mu_x_zero"])]
    instance: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

impl InstanceArgs {
    fn load(&self) -> Result<QuadraticProblem, CliError> {
        let source = match &self.instance {
            Some(path) => InstanceSource::File { path: path.clone() },
            None => self.gen.source(),
        };
        Ok(source.load()?)
    }
}

#[derive(Args, Debug, Clone)]
struct StepArgs {
    /// Stepsize ratio eta_y / eta_x: `12.5`, `2k` or `2k2`.
    #[arg(short, long, default_value = "2k")]
    r: RatioChoice,
    #[arg(long, value_enum, default_value = "quarter")]
    scheme: SchemeArg,
    /// Fixed eta_y (eta_x = eta_y / r); overrides --scheme.
    #[arg(long)]
    eta_y: Option<f64>,
}

impl StepArgs {
    fn choice(&self) -> StepsizeChoice {
        match self.eta_y {
            Some(eta_y) => StepsizeChoice::Custom { eta_y },
            None => self.scheme.into(),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SchemeArg {
    Quarter,
    Half,
}

impl From<SchemeArg> for StepsizeChoice {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Quarter => StepsizeChoice::Quarter,
            SchemeArg::Half => StepsizeChoice::Half,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum AlgArg {
    Gda,
    Sgda,
    Eg,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Gda => Algorithm::Gda,
            AlgArg::Sgda => Algorithm::Sgda,
            AlgArg::Eg => Algorithm::Eg,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Verification(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Verification(s) | CliError::Numerical(s) => f.write_str(s),
        }
    }
}

fn linalg_is_numerical(e: &LinalgError) -> bool {
    !matches!(e, LinalgError::InvalidInput(_))
}

fn problem_is_numerical(e: &ProblemError) -> bool {
    match e {
        ProblemError::Linalg(l) => linalg_is_numerical(l),
        ProblemError::GenerationFailed { .. } => true,
        _ => false,
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let numerical = match &e {
            HarnessError::Linalg(l) => linalg_is_numerical(l),
            HarnessError::Problem(p) => problem_is_numerical(p),
            HarnessError::Dynamics(ttgda::dynamics::DynamicsError::Linalg(l)) => linalg_is_numerical(l),
            HarnessError::Dynamics(ttgda::dynamics::DynamicsError::Problem(p)) => problem_is_numerical(p),
            HarnessError::Spectral(s) => spectral_is_numerical(s),
            HarnessError::CertificateFailure { .. } => return CliError::Verification(e.to_string()),
            _ => false,
        };
        if numerical {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn spectral_is_numerical(e: &SpectralError) -> bool {
    match e {
        SpectralError::Linalg(l) => linalg_is_numerical(l),
        SpectralError::Problem(p) => problem_is_numerical(p),
        _ => false,
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        if spectral_is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        HarnessError::Problem(e).into()
    }
}

impl From<ttgda::dynamics::DynamicsError> for CliError {
    fn from(e: ttgda::dynamics::DynamicsError) -> Self {
        HarnessError::Dynamics(e).into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same directory.
fn write_atomic(dir: &Path, name: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| CliError::from(e.error))?;
    Ok(path)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "-".into())
}

fn noise_model(sigma: Option<f64>, batch: Option<usize>) -> Result<Option<NoiseModel>, CliError> {
    match (sigma, batch) {
        (None, None) => Ok(None),
        (Some(s), Some(b)) => Ok(Some(NoiseModel::new(s, b)?)),
        _ => Err(CliError::Usage("--sigma and --batch must be given together".into())),
    }
}

fn generate(cli: &Cli, gen: &GenArgs, out: &Path) -> Result<(), CliError> {
    let problem = gen.source().load()?;
    let k = problem.derive_constants()?;
    let path = write_atomic(&cli.out_dir, out, problem.to_json().as_bytes())?;
    println!("wrote {}", path.display());
    println!("mu_x {}", fmt_f64(k.mu_x));
    println!("kappa {}", fmt_f64(k.kappa));
    println!("kappa_x {}", fmt_f64(k.kappa_x));
    println!("schur_min_eig {}", fmt_f64(k.schur_min_eig));
    Ok(())
}

fn validated(instance: &InstanceArgs) -> Result<QuadraticProblem, CliError> {
    let problem = instance.load()?;
    let report = problem.validate()?;
    if !report.passed() {
        return Err(CliError::Usage(format!(
            "instance fails validation: {}",
            report.failed_clauses().join(", ")
        )));
    }
    Ok(problem)
}

fn inspect(cli: &Cli, instance: &InstanceArgs, steps: &StepArgs, c: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let problem = validated(instance)?;
    let r = steps.r.resolve(problem.kappa());
    let choice = steps.choice();
    let (eta_x, _) = choice.stepsizes(problem.l, r);
    let report = spectral_report_with(&problem, r, eta_x, c.unwrap_or(choice.bound_constant()))?;
    let json = report.to_json();
    println!("{json}");
    if let Some(out) = out {
        write_atomic(&cli.out_dir, out, json.as_bytes())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cli: &Cli,
    instance: &InstanceArgs,
    steps: &StepArgs,
    algorithm: AlgArg,
    max_iters: u64,
    eps: f64,
    seed: Option<u64>,
    noise: Option<NoiseModel>,
    format: Format,
    out: &Path,
) -> Result<(), CliError> {
    let problem = validated(instance)?;
    let alg = Algorithm::from(algorithm);
    if alg == Algorithm::Sgda && (noise.is_none() || seed.is_none()) {
        return Err(CliError::Usage("sgda needs --sigma, --batch and --seed".into()));
    }
    if alg != Algorithm::Sgda && noise.is_some() {
        return Err(CliError::Usage("--sigma/--batch only apply to sgda".into()));
    }
    let seed = seed.unwrap_or(0);
    let r = steps.r.resolve(problem.kappa());
    let (ex, ey) = steps.choice().stepsizes(problem.l, r);
    let mut config = SolverConfig::new(alg, ex, ey, max_iters, eps).with_seed(seed);
    config.noise = noise;
    let t = run(&problem, &config, &unit_start(&problem.z_star(), seed))?;
    let bytes = match format {
        Format::Csv => t.to_csv_string().into_bytes(),
        Format::Json => serde_json::to_vec_pretty(&t).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let path = write_atomic(&cli.out_dir, out, &bytes)?;
    eprintln!("wrote {}", path.display());
    println!("{}", summary(&t));
    Ok(())
}

/// `status iters final_distance measured_rate`.
fn summary(t: &Trajectory) -> String {
    let iters = match t.status {
        Status::Converged(k) | Status::Diverged(k) => k,
        Status::BudgetExhausted => t.config.max_iters,
    };
    format!(
        "{} {} {} {}",
        t.status.name(),
        iters,
        fmt_f64(t.last()),
        opt(estimate_rate(t, None).ok())
    )
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cli: &Cli,
    spec_path: Option<&Path>,
    instance: &InstanceArgs,
    ratios: &[RatioChoice],
    scheme: SchemeArg,
    algorithms: &[AlgArg],
    seeds: &[u64],
    max_iters: u64,
    eps: f64,
    noise: Option<NoiseModel>,
    format: Format,
    out: &Path,
) -> Result<(), CliError> {
    let spec = match spec_path {
        Some(p) => serde_json::from_str::<ExperimentSpec>(&std::fs::read_to_string(p)?)
            .map_err(|e| CliError::Usage(format!("malformed spec {}: {e}", p.display())))?,
        None => ExperimentSpec {
            instance: match &instance.instance {
                Some(path) => InstanceSource::File { path: path.clone() },
                None => instance.gen.source(),
            },
            ratios: ratios.to_vec(),
            stepsizes: scheme.into(),
            algorithms: algorithms.iter().map(|&a| a.into()).collect(),
            max_iters,
            eps,
            seeds: seeds.to_vec(),
            noise,
        },
    };
    let res = ratio_sweep(&spec, &Executor::with_jobs(cli.jobs))?;
    let bytes = match format {
        Format::Csv => res.to_csv_string().into_bytes(),
        Format::Json => serde_json::to_vec_pretty(&res).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let path = write_atomic(&cli.out_dir, out, &bytes)?;
    for row in &res.rows {
        println!(
            "{} {} {} {} {} {}",
            fmt_f64(row.ratio),
            row.seed,
            row.algorithm.name(),
            row.status,
            row.iters_to_eps.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            opt(row.measured_rate)
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn verify(cli: &Cli, suite: Suite, seed: u64, budget: Budget, c: Option<f64>, out: &Path) -> Result<(), CliError> {
    let mut opts = VerifyOptions::new(seed, budget);
    opts.exec = Executor::with_jobs(cli.jobs);
    if let Some(c) = c {
        if !(c > 0.0) {
            return Err(CliError::Usage("--bound-constant must be positive".into()));
        }
        opts.bound_constant = c;
    }
    let report = run_suite(suite, &opts);
    for r in &report.results {
        println!("{}", r.line());
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    let path = write_atomic(&cli.out_dir, out, json.as_bytes())?;
    eprintln!("wrote {}", path.display());
    let failed: Vec<String> = report
        .results
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| r.id.to_string())
        .collect();
    if failed.is_empty() {
        println!("verify: passed ({} inconclusive)", report.inconclusive);
        Ok(())
    } else {
        Err(CliError::Verification(format!("criteria failed: {}", failed.join(", "))))
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { gen, seed, out } => {
            let mut gen = gen.clone();
            if let Some(s) = seed {
                gen.instance_seed = *s;
            }
            generate(cli, &gen, out)
        }
        Command::Inspect {
            instance,
            steps,
            bound_constant,
            out,
        } => inspect(cli, instance, steps, *bound_constant, out.as_deref()),
        Command::Run {
            instance,
            steps,
            algorithm,
            max_iters,
            eps,
            seed,
            sigma,
            batch,
            format,
            out,
        } => run_one(
            cli,
            instance,
            steps,
            *algorithm,
            *max_iters,
            *eps,
            *seed,
            noise_model(*sigma, *batch)?,
            *format,
            out,
        ),
        Command::Sweep {
            spec,
            instance,
            ratios,
            scheme,
            algorithms,
            seeds,
            max_iters,
            eps,
            sigma,
            batch,
            format,
            out,
        } => {
            if algorithms.contains(&AlgArg::Sgda) && sigma.is_none() {
                return Err(CliError::Usage("sgda cells need --sigma and --batch".into()));
            }
            sweep(
                cli,
                spec.as_deref(),
                instance,
                ratios,
                *scheme,
                algorithms,
                seeds,
                *max_iters,
                *eps,
                noise_model(*sigma, *batch)?,
                *format,
                out,
            )
        }
        Command::Verify {
            suite,
            seed,
            budget,
            bound_constant,
            out,
        } => verify(cli, *suite, *seed, *budget, *bound_constant, out),
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
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
