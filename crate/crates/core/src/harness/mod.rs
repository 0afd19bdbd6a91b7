//! Experiment drivers: stepsize-ratio sweeps and the certificates built on
//! top of the dynamics and spectral modules.

use std::io;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    default_stepsizes, estimate_rate, run, Algorithm, DynamicsError, GradientOracle, Metric, Scheme, SolverConfig,
    Trajectory,
};
use crate::exec::Executor;
use crate::linalg::norm2;
use crate::problems::{
    hard_rate_instance, hard_ratio_instance, sample_instance, NoiseModel, ProblemError, QuadraticProblem, SampleOptions,
};
use crate::spectral::{spectral_report, SpectralError};

mod certify;
pub mod verify;

pub use certify::{
    divergence_certificate, divergence_report, log_spaced, mux_zero_run, nonquad_sweep, rate_lower_bound_check,
    sgda_floor_sweep, shrink_for_guarantee, stationary_mean_square, DivergenceCell, DivergenceReport, FloorReport,
    FloorRow, FloorStatus, MuxZeroReport, NonQuadSweep, RateLowerBoundReport,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidInput(String),
    #[error("certificate failed at {cell}")]
    CertificateFailure { cell: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where the quadratic instance of an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InstanceSource {
    Generated {
        n: usize,
        m: usize,
        #[serde(rename = "L")]
        l: f64,
        mu: f64,
        seed: u64,
        #[serde(default)]
        options: SampleOptions,
    },
    File { path: PathBuf },
    HardRatio {
        #[serde(rename = "L")]
        l: f64,
        mu: f64,
    },
    HardRate {
        #[serde(rename = "L")]
        l: f64,
        mu: f64,
        mu_x: f64,
    },
}

impl InstanceSource {
    pub fn load(&self) -> Result<QuadraticProblem, HarnessError> {
        Ok(match self {
            InstanceSource::Generated {
                n,
                m,
                l,
                mu,
                seed,
                options,
            } => sample_instance(*n, *m, *l, *mu, &mut ChaCha8Rng::seed_from_u64(*seed), options)?,
            InstanceSource::File { path } => QuadraticProblem::from_json(&std::fs::read_to_string(path)?)?,
            InstanceSource::HardRatio { l, mu } => hard_ratio_instance(*l, *mu)?,
            InstanceSource::HardRate { l, mu, mu_x } => hard_rate_instance(*l, *mu, *mu_x)?,
        })
    }
}

/// A stepsize ratio, possibly relative to the instance's `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioChoice {
    Absolute(f64),
    KappaTimes(f64),
    KappaSquaredTimes(f64),
}

impl RatioChoice {
    pub fn resolve(self, kappa: f64) -> f64 {
        match self {
            RatioChoice::Absolute(r) => r,
            RatioChoice::KappaTimes(c) => c * kappa,
            RatioChoice::KappaSquaredTimes(c) => c * kappa * kappa,
        }
    }

    /// `{kappa/2, 2 kappa, 8 kappa, 2 kappa^2}`.
    pub fn default_set() -> Vec<RatioChoice> {
        vec![
            RatioChoice::KappaTimes(0.5),
            RatioChoice::KappaTimes(2.0),
            RatioChoice::KappaTimes(8.0),
            RatioChoice::KappaSquaredTimes(2.0),
        ]
    }
}

impl std::str::FromStr for RatioChoice {
    type Err = String;

    /// `12.5`, `2k` / `2kappa`, or `2k2` / `2kappa2`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64, String> {
            if t.is_empty() {
                Ok(1.0)
            } else {
                t.parse::<f64>().map_err(|e| format!("bad ratio '{s}': {e}"))
            }
        };
        let out = if let Some(t) = s.strip_suffix("kappa2").or_else(|| s.strip_suffix("k2")) {
            RatioChoice::KappaSquaredTimes(num(t)?)
        } else if let Some(t) = s.strip_suffix("kappa").or_else(|| s.strip_suffix('k')) {
            RatioChoice::KappaTimes(num(t)?)
        } else {
            RatioChoice::Absolute(num(s)?)
        };
        match out {
            RatioChoice::Absolute(v) | RatioChoice::KappaTimes(v) | RatioChoice::KappaSquaredTimes(v) if v > 0.0 => {
                Ok(out)
            }
            _ => Err(format!("ratio '{s}' must be positive")),
        }
    }
}

/// Stepsizes as a function of the ratio `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsizeChoice {
    Quarter,
    Half,
    /// Fixed `eta_y`, with `eta_x = eta_y / r`.
    Custom { eta_y: f64 },
}

impl StepsizeChoice {
    pub fn stepsizes(self, l: f64, r: f64) -> (f64, f64) {
        match self {
            StepsizeChoice::Quarter => default_stepsizes(l, r, Scheme::Quarter),
            StepsizeChoice::Half => default_stepsizes(l, r, Scheme::Half),
            StepsizeChoice::Custom { eta_y } => (eta_y / r, eta_y),
        }
    }

    /// Constant of the proved radius bound paired with the scheme.
    pub fn bound_constant(self) -> f64 {
        match self {
            StepsizeChoice::Half => Scheme::Half.bound_constant(),
            _ => Scheme::Quarter.bound_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub ratios: Vec<RatioChoice>,
    pub stepsizes: StepsizeChoice,
    pub algorithms: Vec<Algorithm>,
    pub max_iters: u64,
    /// Target distance; initial points have unit distance to the optimum.
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub noise: Option<NoiseModel>,
}

impl ExperimentSpec {
    /// The sweep shown for randomly generated 4x4 instances: `L = 100`,
    /// `mu = 1`, the default ratio set, Half stepsizes (`eta_y = 1/(2L)`).
    pub fn quadratic_default(instance_seed: u64) -> Self {
        Self {
            instance: InstanceSource::Generated {
                n: 4,
                m: 4,
                l: 100.0,
                mu: 1.0,
                seed: instance_seed,
                options: SampleOptions::default(),
            },
            ratios: RatioChoice::default_set(),
            stepsizes: StepsizeChoice::Half,
            algorithms: vec![Algorithm::Gda],
            max_iters: 1_000_000,
            eps: 1e-6,
            seeds: vec![0],
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: &str| Err(HarnessError::InvalidInput(s.to_string()));
        if self.ratios.is_empty() {
            return bad("at least one ratio is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.algorithms.contains(&Algorithm::Sgda) && self.noise.is_none() {
            return bad("SGDA cells need a noise model");
        }
        Ok(())
    }
}

/// Unit-norm Gaussian direction added to `center`, reproducible from `seed`.
pub fn unit_start(center: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep the start independent of the noise stream of the same seed
    rng.set_stream(1);
    let d: Vec<f64> = (0..center.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = norm2(&d);
    center.iter().zip(&d).map(|(c, v)| c + v / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// `converged`, `diverged`, `budget` or `error`.
    pub status: String,
    pub measured_rate: Option<f64>,
    /// Predicted spectral radius of the cell's transition (`rho2` for EG).
    pub rho1: Option<f64>,
    pub iters_to_eps: Option<u64>,
    /// Final distance, or final gradient norm for gradient-norm sweeps.
    pub final_distance: Option<f64>,
    pub final_gap: Option<f64>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn header(&self) -> [&'static str; 9] {
        [
            "ratio",
            "seed",
            "algorithm",
            "status",
            "measured_rate",
            "rho1",
            "iters_to_eps",
            match self.metric {
                Metric::Distance => "final_distance",
                Metric::GradNorm => "final_grad_norm",
            },
            "final_gap",
        ]
    }

    /// Rows in input order; absent values are empty fields.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        use crate::dynamics::fmt_f64;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        out.write_record(self.header())?;
        for r in &self.rows {
            out.write_record([
                fmt_f64(r.ratio),
                r.seed.to_string(),
                r.algorithm.name().to_string(),
                r.status.clone(),
                opt(r.measured_rate),
                opt(r.rho1),
                r.iters_to_eps.map(|k| k.to_string()).unwrap_or_default(),
                opt(r.final_distance),
                opt(r.final_gap),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn cell(&self, ratio: f64, seed: u64, algorithm: Algorithm) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.ratio == ratio && r.seed == seed && r.algorithm == algorithm)
    }
}

pub(crate) fn row_from_trajectory(
    ratio: f64,
    seed: u64,
    rho: Option<f64>,
    result: Result<Trajectory, DynamicsError>,
) -> SweepRow {
    match result {
        Ok(t) => SweepRow {
            ratio,
            seed,
            algorithm: t.config.algorithm,
            status: t.status.name().to_string(),
            measured_rate: estimate_rate(&t, None).ok(),
            rho1: rho,
            iters_to_eps: t.iters_to_eps(),
            final_distance: Some(t.last()),
            final_gap: t.final_gap(),
            error: None,
        },
        Err(e) => SweepRow {
            ratio,
            seed,
            algorithm: Algorithm::Gda,
            status: "error".into(),
            measured_rate: None,
            rho1: rho,
            iters_to_eps: None,
            final_distance: None,
            final_gap: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every `(ratio, seed, algorithm)` cell of `spec` in that nesting
/// order. A failing cell becomes an `error` row; the sweep carries on.
pub fn ratio_sweep(spec: &ExperimentSpec, exec: &Executor) -> Result<SweepResult, HarnessError> {
    spec.validate()?;
    let problem = spec.instance.load()?;
    sweep_problem(&problem, spec, exec)
}

/// [`ratio_sweep`] on an already loaded instance.
pub fn sweep_problem(problem: &QuadraticProblem, spec: &ExperimentSpec, exec: &Executor) -> Result<SweepResult, HarnessError> {
    spec.validate()?;
    let kappa = problem.kappa();
    let mut cells = Vec::new();
    for choice in &spec.ratios {
        let r = choice.resolve(kappa);
        for &seed in &spec.seeds {
            for &alg in &spec.algorithms {
                cells.push((r, seed, alg));
            }
        }
    }
    let rows = exec.map(&cells, |&(r, seed, alg)| {
        let (ex, ey) = spec.stepsizes.stepsizes(problem.l, r);
        let rho = spectral_report(problem, r, ex)
            .ok()
            .map(|rep| if alg == Algorithm::Eg { rep.rho2 } else { rep.rho1 });
        let mut config = SolverConfig::new(alg, ex, ey, spec.max_iters, spec.eps).with_seed(seed);
        if alg != Algorithm::Gda {
            config.noise = spec.noise;
        }
        let z0 = unit_start(&problem.z_star(), seed);
        let mut row = row_from_trajectory(r, seed, rho, run(problem, &config, &z0));
        row.algorithm = alg;
        row
    });
    Ok(SweepResult {
        metric: Metric::Distance,
        rows,
    })
}

/// Distance-metric sweep over an arbitrary oracle, used for the
/// nonquadratic family. `rho` supplies the per-ratio prediction, if any.
pub(crate) fn sweep_oracle<O: GradientOracle>(
    oracle: &O,
    l: f64,
    ratios: &[f64],
    stepsizes: StepsizeChoice,
    max_iters: u64,
    eps: f64,
    seed: u64,
    rho: impl Fn(f64, f64) -> Option<f64> + Sync + Send,
    exec: &Executor,
) -> SweepResult {
    let rows = exec.map(ratios, |&r| {
        let (ex, ey) = stepsizes.stepsizes(l, r);
        let config = SolverConfig::new(Algorithm::Gda, ex, ey, max_iters, eps).with_seed(seed);
        let z0 = unit_start(&oracle.reference_point(), seed);
        row_from_trajectory(r, seed, rho(r, ex), run(oracle, &config, &z0))
    });
    let metric = if oracle.optimum_known() {
        Metric::Distance
    } else {
        Metric::GradNorm
    };
    SweepResult { metric, rows }
}
