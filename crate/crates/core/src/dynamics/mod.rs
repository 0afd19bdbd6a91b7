//! GDA, stochastic GDA and extra-gradient steppers, their linear
//! transition matrices, and trajectory execution.
//!
//! With stepsizes `eta_x` (descent on `x`) and `eta_y = r eta_x` (ascent on
//! `y`), exact GDA on a quadratic evolves as `z' - z* = (I + eta_x M)(z - z*)`
//! and exact EG as `(I + eta_x M + eta_x^2 M^2)(z - z*)`, where
//! `M = [[-C, -B], [r B^T, -r A]]`.

mod trajectory;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, LinalgError};
use crate::problems::{NoiseModel, NonQuadraticProblem, ProblemError, QuadraticProblem};

pub use trajectory::{estimate_rate, fmt_f64, run, Metric, Status, Trajectory, MAX_RECORDS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data for a rate fit: {usable} usable points, need at least 10")]
    InsufficientData { usable: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gda,
    Sgda,
    Eg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gda => "gda",
            Algorithm::Sgda => "sgda",
            Algorithm::Eg => "eg",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gda" => Ok(Algorithm::Gda),
            "sgda" => Ok(Algorithm::Sgda),
            "eg" => Ok(Algorithm::Eg),
            other => Err(format!("unknown algorithm `{other}` (expected gda, sgda or eg)")),
        }
    }
}

/// The two proved stepsize pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `eta_x = 1/(4 r L)`, `eta_y = 1/(4 L)`; spectral radius bound `1 - 1/(64 r kappa_x)`.
    Quarter,
    /// `eta_x = 1/(2 r L)`, `eta_y = 1/(2 L)`; rate bound `1 - 1/(16 r kappa_x)`.
    Half,
}

impl Scheme {
    /// Denominator constant of the proved contraction for this scheme.
    pub fn bound_constant(self) -> f64 {
        match self {
            Scheme::Quarter => 64.0,
            Scheme::Half => 16.0,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "quarter" => Ok(Scheme::Quarter),
            "half" => Ok(Scheme::Half),
            other => Err(format!("unknown scheme `{other}` (expected quarter or half)")),
        }
    }
}

/// `(eta_x, eta_y)` for ratio `r`.
pub fn default_stepsizes(l: f64, r: f64, scheme: Scheme) -> (f64, f64) {
    let k = match scheme {
        Scheme::Quarter => 4.0,
        Scheme::Half => 2.0,
    };
    (1.0 / (k * r * l), 1.0 / (k * l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub eta_x: f64,
    pub eta_y: f64,
    pub max_iters: u64,
    pub target_eps: f64,
    pub divergence_factor: f64,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, eta_x: f64, eta_y: f64, max_iters: u64, target_eps: f64) -> Self {
        Self {
            algorithm,
            eta_x,
            eta_y,
            max_iters,
            target_eps,
            divergence_factor: 1e8,
            noise: None,
            seed: 0,
        }
    }

    pub fn from_scheme(algorithm: Algorithm, l: f64, r: f64, scheme: Scheme, max_iters: u64, target_eps: f64) -> Self {
        let (ex, ey) = default_stepsizes(l, r, scheme);
        Self::new(algorithm, ex, ey, max_iters, target_eps)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `eta_y / eta_x`.
    pub fn ratio(&self) -> f64 {
        self.eta_y / self.eta_x
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |s: String| Err(DynamicsError::InvalidConfig(s));
        if !(self.eta_x > 0.0 && self.eta_y > 0.0 && self.eta_x.is_finite() && self.eta_y.is_finite()) {
            return bad(format!("stepsizes must be positive, got ({}, {})", self.eta_x, self.eta_y));
        }
        if !(self.target_eps > 0.0) {
            return bad("target_eps must be positive".into());
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor must exceed 1".into());
        }
        match (self.algorithm, &self.noise) {
            (Algorithm::Sgda, None) => bad("SGDA needs a noise model".into()),
            (Algorithm::Gda, Some(_)) => bad("GDA uses the exact oracle; use SGDA for noisy runs".into()),
            _ => Ok(()),
        }
    }
}

/// What the steppers need from an objective.
pub trait GradientOracle: Sync {
    /// Dimensions `(n, m)` of `x` and `y`.
    fn dims(&self) -> (usize, usize);

    /// Exact gradient at `z = (x, y)`. `scratch` has length `n + m`.
    fn gradient_into(&self, z: &[f64], gx: &mut [f64], gy: &mut [f64], scratch: &mut [f64]);

    /// Point distances are measured against.
    fn reference_point(&self) -> Vec<f64>;

    /// Whether `reference_point` is the true optimum; otherwise progress is
    /// measured by the gradient norm.
    fn optimum_known(&self) -> bool;

    /// Primal Hessian and minimizer when the primal gap is available.
    fn primal_gap_data(&self) -> Option<(DenseMatrix, Vec<f64>)>;
}

impl GradientOracle for QuadraticProblem {
    fn dims(&self) -> (usize, usize) {
        (self.n(), self.m())
    }

    fn gradient_into(&self, z: &[f64], gx: &mut [f64], gy: &mut [f64], scratch: &mut [f64]) {
        self.grad_into(z, gx, gy, scratch);
    }

    fn reference_point(&self) -> Vec<f64> {
        self.z_star()
    }

    fn optimum_known(&self) -> bool {
        true
    }

    fn primal_gap_data(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        let k = self.derive_constants().ok()?;
        (k.schur_min_eig >= -crate::problems::CLAUSE_TOL * self.l).then(|| (k.schur, self.x_star.clone()))
    }
}

impl GradientOracle for NonQuadraticProblem {
    fn dims(&self) -> (usize, usize) {
        (self.base.n(), self.base.m())
    }

    fn gradient_into(&self, z: &[f64], gx: &mut [f64], gy: &mut [f64], scratch: &mut [f64]) {
        self.base.grad_into(z, gx, gy, scratch);
        self.add_logistic_grad(&z[..self.base.n()], gx);
    }

    fn reference_point(&self) -> Vec<f64> {
        self.base.z_star()
    }

    fn optimum_known(&self) -> bool {
        // a = 0 is the base quadratic
        self.a == 0.0
    }

    fn primal_gap_data(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        None
    }
}

/// Reusable buffers for stepping without allocation.
pub(crate) struct Workspace {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub half: Vec<f64>,
    pub scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; m],
            half: vec![0.0; n + m],
            scratch: vec![0.0; n + m],
        }
    }
}

#[inline]
fn apply_update(src: &[f64], dst: &mut [f64], gx: &[f64], gy: &[f64], eta_x: f64, eta_y: f64) {
    let n = gx.len();
    for i in 0..n {
        dst[i] = src[i] - eta_x * gx[i];
    }
    for (j, g) in gy.iter().enumerate() {
        dst[n + j] = src[n + j] + eta_y * g;
    }
}

/// GDA update from a gradient already in `ws.gx/gy` (exact at `z`); noise is
/// added here when present.
pub(crate) fn gda_update(
    z: &mut [f64],
    ws: &mut Workspace,
    eta_x: f64,
    eta_y: f64,
    noise: Option<(&NoiseModel, &mut dyn RngCore)>,
) {
    if let Some((nm, rng)) = noise {
        nm.perturb(&mut ws.gx, &mut *rng);
        nm.perturb(&mut ws.gy, &mut *rng);
    }
    let n = ws.gx.len();
    for i in 0..n {
        z[i] -= eta_x * ws.gx[i];
    }
    for (j, g) in ws.gy.iter().enumerate() {
        z[n + j] += eta_y * g;
    }
}

/// EG update from an exact gradient at `z` in `ws.gx/gy`. Overwrites them.
pub(crate) fn eg_update<O: GradientOracle + ?Sized>(
    oracle: &O,
    z: &mut [f64],
    ws: &mut Workspace,
    eta_x: f64,
    eta_y: f64,
    mut noise: Option<(&NoiseModel, &mut dyn RngCore)>,
) {
    if let Some((nm, rng)) = noise.as_mut() {
        nm.perturb(&mut ws.gx, &mut **rng);
        nm.perturb(&mut ws.gy, &mut **rng);
    }
    let mut half = std::mem::take(&mut ws.half);
    apply_update(z, &mut half, &ws.gx, &ws.gy, eta_x, eta_y);
    oracle.gradient_into(&half, &mut ws.gx, &mut ws.gy, &mut ws.scratch);
    if let Some((nm, rng)) = noise.as_mut() {
        nm.perturb(&mut ws.gx, &mut **rng);
        nm.perturb(&mut ws.gy, &mut **rng);
    }
    let n = ws.gx.len();
    for i in 0..n {
        z[i] -= eta_x * ws.gx[i];
    }
    for (j, g) in ws.gy.iter().enumerate() {
        z[n + j] += eta_y * g;
    }
    ws.half = half;
}

fn check_point<O: GradientOracle + ?Sized>(oracle: &O, z: &[f64]) -> Result<(usize, usize), DynamicsError> {
    let (n, m) = oracle.dims();
    if z.len() != n + m {
        return Err(DynamicsError::InvalidConfig(format!("z has length {}, expected {}", z.len(), n + m)));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::InvalidConfig("z must be finite".into()));
    }
    Ok((n, m))
}

/// One (S)GDA step: `x' = x - eta_x g_x`, `y' = y + eta_y g_y`.
pub fn gda_step<O: GradientOracle + ?Sized>(
    oracle: &O,
    z: &[f64],
    eta_x: f64,
    eta_y: f64,
    noise: Option<(&NoiseModel, &mut dyn RngCore)>,
) -> Result<Vec<f64>, DynamicsError> {
    let (n, m) = check_point(oracle, z)?;
    let mut ws = Workspace::new(n, m);
    oracle.gradient_into(z, &mut ws.gx, &mut ws.gy, &mut ws.scratch);
    let mut out = z.to_vec();
    gda_update(&mut out, &mut ws, eta_x, eta_y, noise);
    Ok(out)
}

/// One (stochastic) extra-gradient step: extrapolate with the gradient at
/// `z`, then update `z` with the gradient at the extrapolated point.
pub fn eg_step<O: GradientOracle + ?Sized>(
    oracle: &O,
    z: &[f64],
    eta_x: f64,
    eta_y: f64,
    noise: Option<(&NoiseModel, &mut dyn RngCore)>,
) -> Result<Vec<f64>, DynamicsError> {
    let (n, m) = check_point(oracle, z)?;
    let mut ws = Workspace::new(n, m);
    oracle.gradient_into(z, &mut ws.gx, &mut ws.gy, &mut ws.scratch);
    let mut out = z.to_vec();
    eg_update(oracle, &mut out, &mut ws, eta_x, eta_y, noise);
    Ok(out)
}

/// `M = [[-C, -B], [r B^T, -r A]]`.
pub fn build_m(problem: &QuadraticProblem, r: f64) -> Result<DenseMatrix, DynamicsError> {
    build_m_delta(problem, r, 0.0)
}

/// `M_delta = [[-C - delta I, -B], [r B^T, -r A]]`.
pub fn build_m_delta(problem: &QuadraticProblem, r: f64, delta: f64) -> Result<DenseMatrix, DynamicsError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(DynamicsError::InvalidConfig(format!("ratio must be positive, got {r}")));
    }
    if problem.b.rows() != problem.n() || problem.b.cols() != problem.m() {
        return Err(DynamicsError::InvalidConfig("B does not match A and C".into()));
    }
    let tl = problem.c.shift_diag(delta).scale(-1.0);
    let tr = problem.b.scale(-1.0);
    let bl = problem.b.transpose().scale(r);
    let br = problem.a.scale(-r);
    Ok(DenseMatrix::block(&tl, &tr, &bl, &br))
}

/// `I + eta_x M`.
pub fn gda_transition(m: &DenseMatrix, eta_x: f64) -> DenseMatrix {
    m.scale(eta_x).shift_diag(1.0)
}

/// `I + eta_x M + eta_x^2 M^2`.
pub fn eg_transition(m: &DenseMatrix, eta_x: f64) -> DenseMatrix {
    let em = m.scale(eta_x);
    em.matmul(&em).add(&em).shift_diag(1.0)
}
