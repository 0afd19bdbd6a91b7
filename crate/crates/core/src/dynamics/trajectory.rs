use std::io;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{eg_update, gda_update, Algorithm, DynamicsError, GradientOracle, SolverConfig, Workspace};
use crate::linalg::{self, norm2};
use crate::problems::quadratic_gap;

/// Trajectories longer than this are recorded with stride `ceil(T / MAX_RECORDS)`.
pub const MAX_RECORDS: u64 = 1_000_000;

/// What the recorded `distances` measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `||z^k - z*||`.
    Distance,
    /// `||grad f(z^k)||`, used when the optimum is not known in closed form.
    GradNorm,
}

impl Metric {
    pub fn column(self) -> &'static str {
        match self {
            Metric::Distance => "distance",
            Metric::GradNorm => "grad_norm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "iter")]
pub enum Status {
    Converged(u64),
    Diverged(u64),
    BudgetExhausted,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged(_) => "converged",
            Status::Diverged(_) => "diverged",
            Status::BudgetExhausted => "budget",
        }
    }

    pub fn is_converged(self) -> bool {
        matches!(self, Status::Converged(_))
    }

    pub fn is_diverged(self) -> bool {
        matches!(self, Status::Diverged(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub metric: Metric,
    /// Iteration index of every recorded point.
    pub iters: Vec<u64>,
    /// Progress measure per recorded point (see `metric`).
    pub distances: Vec<f64>,
    /// `Phi(x^k) - Phi(x*)` when the primal function is convex and known.
    pub primal_gaps: Option<Vec<f64>>,
    pub status: Status,
    pub final_point: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
    pub config: SolverConfig,
}

impl Trajectory {
    pub fn initial(&self) -> f64 {
        self.distances[0]
    }

    pub fn last(&self) -> f64 {
        *self.distances.last().expect("trajectory has at least one point")
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.primal_gaps.as_ref().and_then(|g| g.last().copied())
    }

    /// Iterations until convergence, if it converged.
    pub fn iters_to_eps(&self) -> Option<u64> {
        match self.status {
            Status::Converged(k) => Some(k),
            _ => None,
        }
    }

    /// Writes `iter,distance,primal_gap` (or `iter,grad_norm,primal_gap`),
    /// one row per recorded point, CRLF line endings, 17 significant digits.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        out.write_record(["iter", self.metric.column(), "primal_gap"])?;
        for (i, (&k, &d)) in self.iters.iter().zip(&self.distances).enumerate() {
            let gap = self
                .primal_gaps
                .as_ref()
                .map(|g| fmt_f64(g[i]))
                .unwrap_or_default();
            out.write_record([k.to_string(), fmt_f64(d), gap])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Decimal with 17 significant digits; round-trips every finite double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Runs the configured dynamics from `z0`.
///
/// Stops at the first iterate whose progress measure is at most
/// `target_eps` (converged), at least `divergence_factor` times the initial
/// one or non-finite (diverged), or after `max_iters` steps.
pub fn run<O: GradientOracle + ?Sized>(
    oracle: &O,
    config: &SolverConfig,
    z0: &[f64],
) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    let (n, m) = oracle.dims();
    if z0.len() != n + m || z0.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::InvalidConfig(format!(
            "initial point must be finite with length {}",
            n + m
        )));
    }
    let start = Instant::now();
    let metric = if oracle.optimum_known() {
        Metric::Distance
    } else {
        Metric::GradNorm
    };
    let reference = oracle.reference_point();
    let gap_data = oracle.primal_gap_data();
    let stride = config.max_iters.div_ceil(MAX_RECORDS).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = config.noise.filter(|nm| nm.sigma > 0.0);

    let mut z = z0.to_vec();
    let mut ws = Workspace::new(n, m);
    let mut iters = Vec::new();
    let mut distances = Vec::new();
    let mut gaps = gap_data.as_ref().map(|_| Vec::new());
    let mut diff = vec![0.0; n + m];

    let mut initial = f64::NAN;
    let mut status = Status::BudgetExhausted;
    for k in 0..=config.max_iters {
        oracle.gradient_into(&z, &mut ws.gx, &mut ws.gy, &mut ws.scratch);
        let value = match metric {
            Metric::Distance => {
                for ((d, a), b) in diff.iter_mut().zip(&z).zip(&reference) {
                    *d = a - b;
                }
                norm2(&diff)
            }
            Metric::GradNorm => (linalg::dot(&ws.gx, &ws.gx) + linalg::dot(&ws.gy, &ws.gy)).sqrt(),
        };
        if k == 0 {
            initial = value;
        }
        let terminal = if !value.is_finite() {
            Some(Status::Diverged(k))
        } else if value <= config.target_eps {
            Some(Status::Converged(k))
        } else if value >= config.divergence_factor * initial {
            Some(Status::Diverged(k))
        } else if k == config.max_iters {
            Some(Status::BudgetExhausted)
        } else {
            None
        };
        if terminal.is_some() || k % stride == 0 {
            iters.push(k);
            distances.push(value);
            if let (Some(g), Some((schur, xs))) = (gaps.as_mut(), gap_data.as_ref()) {
                g.push(quadratic_gap(schur, &z[..n], xs));
            }
        }
        if let Some(s) = terminal {
            status = s;
            break;
        }
        let noise_arg = noise.as_ref().map(|nm| (nm, &mut rng as &mut dyn rand::RngCore));
        match config.algorithm {
            Algorithm::Gda | Algorithm::Sgda => gda_update(&mut z, &mut ws, config.eta_x, config.eta_y, noise_arg),
            Algorithm::Eg => eg_update(oracle, &mut z, &mut ws, config.eta_x, config.eta_y, noise_arg),
        }
    }

    Ok(Trajectory {
        metric,
        iters,
        distances,
        primal_gaps: gaps,
        status,
        final_point: z,
        wall_time: start.elapsed(),
        config: config.clone(),
    })
}

/// Geometric per-step factor fitted to the tail of a trajectory.
///
/// Points below `1e3 * eps_machine * initial` are dropped (and everything
/// after the first such point). For noisy runs the stationary noise floor is
/// cut off as well: the series is truncated at the first point within a
/// factor 10 of the median level of its last fifth.
/// The fit is a least-squares line through `(iter, ln d)` over the last
/// `window` usable points (default: the last half).
pub fn estimate_rate(trajectory: &Trajectory, window: Option<usize>) -> Result<f64, DynamicsError> {
    let floor = 1e3 * f64::EPSILON * trajectory.initial();
    let mut pts: Vec<(f64, f64)> = trajectory
        .iters
        .iter()
        .zip(&trajectory.distances)
        .take_while(|(_, &d)| d.is_finite() && d > floor && d > 0.0)
        .map(|(&k, &d)| (k as f64, d.ln()))
        .collect();

    let noisy = trajectory.config.noise.is_some_and(|nm| nm.sigma > 0.0);
    if noisy {
        let cut = noise_floor_start(&pts);
        pts.truncate(cut);
    }
    if pts.len() < 10 {
        return Err(DynamicsError::InsufficientData { usable: pts.len() });
    }
    let w = window.unwrap_or(pts.len() / 2).clamp(10, pts.len());
    let tail = &pts[pts.len() - w..];
    Ok(fit_slope(tail).exp())
}

/// Index where the noise floor begins: the first point within a factor 10
/// of the median over the last fifth of the series.
fn noise_floor_start(pts: &[(f64, f64)]) -> usize {
    if pts.len() < 10 {
        return pts.len();
    }
    let mut tail: Vec<f64> = pts[pts.len() - pts.len() / 5..].iter().map(|p| p.1).collect();
    tail.sort_by(f64::total_cmp);
    let level = tail[tail.len() / 2] + 10f64.ln();
    pts.iter().position(|p| p.1 <= level).unwrap_or(pts.len())
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
