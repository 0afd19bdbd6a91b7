use serde::{Deserialize, Serialize};

use super::{sweep_oracle, unit_start, HarnessError, StepsizeChoice, SweepResult};
use crate::dynamics::{build_m, estimate_rate, gda_transition, run, Algorithm, Scheme, SolverConfig, Status};
use crate::exec::Executor;
use crate::linalg::{norm2, DenseMatrix};
use crate::problems::{hard_rate_instance, hard_ratio_instance, NoiseModel, NonQuadraticProblem, QuadraticProblem};
use crate::spectral::{predicted_floor_sgda, spectral_report, spectral_report_with};

/// `n` points geometrically spaced over `[lo, hi]`, both ends included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Evolves `w` by the exact linear recursion `w <- (I + N) w` over
/// `1, 2, 4, ...` further steps using `(I + N)^2 = I + (2N + N^2)`, which
/// keeps the small increment `N` free of cancellation against `I`. Returns
/// the number of extra steps after which `||w|| >= threshold`, or `None`
/// after `2^max_doublings - 1` steps.
fn extend_until(n1: &DenseMatrix, mut w: Vec<f64>, threshold: f64, max_doublings: u32) -> Option<u64> {
    let mut n = n1.clone();
    let mut steps: u64 = 0;
    for k in 0..max_doublings {
        let nw = n.matvec(&w);
        for (a, b) in w.iter_mut().zip(&nw) {
            *a += b;
        }
        steps += 1u64 << k;
        let d = norm2(&w);
        if !d.is_finite() || d >= threshold {
            return Some(steps);
        }
        n = n.scale(2.0).add(&n.matmul(&n));
        if n.as_slice().iter().any(|v| !v.is_finite()) {
            return Some(steps);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCell {
    #[serde(rename = "L")]
    pub l: f64,
    pub kappa: f64,
    pub r: f64,
    pub eta_x: f64,
    /// Outcome of the stepped run.
    pub status: Status,
    pub stepped_iters: u64,
    /// `||z^T - z*|| / ||z^0 - z*||` at the end of the stepped run.
    pub growth: f64,
    /// Iteration at which the distance first reached the divergence factor,
    /// by stepping or by exact extension of the same linear recursion.
    pub certified_at: Option<u64>,
    pub extended: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCell {
    #[serde(rename = "L")]
    pub l: f64,
    pub kappa: f64,
    pub r: f64,
    pub status: Status,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub cells: Vec<DivergenceCell>,
    pub controls: Vec<ControlCell>,
    pub passed: bool,
}

impl DivergenceReport {
    pub fn first_failure(&self) -> Option<String> {
        if let Some(c) = self.cells.iter().find(|c| !c.passed) {
            return Some(format!("L={}, kappa={}, r={}, eta_x={:e}", c.l, c.kappa, c.r, c.eta_x));
        }
        self.controls
            .iter()
            .find(|c| !c.passed)
            .map(|c| format!("control L={}, kappa={}, r={}", c.l, c.kappa, c.r))
    }
}

const DIVERGENCE_START: [f64; 2] = [0.6, 0.8];

/// Runs GDA on the hard ratio instance for every `(L, kappa)` pair, both
/// `r = kappa/2` and `r = kappa`, and every `eta_x`. A cell passes when the
/// distance reaches `1e8` times its initial value, either within `steps`
/// iterations or by continuing the same exact linear recursion up to `2^62`
/// further steps, or when the distance after `steps` iterations is at least
/// the initial one. A control at `r = 2 kappa` with Quarter stepsizes must
/// reach `1e-6` within `1e6` iterations.
pub fn divergence_report(
    cases: &[(f64, f64)],
    etas: &[f64],
    steps: u64,
    exec: &Executor,
) -> Result<DivergenceReport, HarnessError> {
    let mut jobs = Vec::new();
    for &(l, kappa) in cases {
        if !(kappa >= 2.0 && l > 0.0) {
            return Err(HarnessError::InvalidInput(format!("need kappa >= 2 and L > 0, got L={l}, kappa={kappa}")));
        }
        for r in [kappa / 2.0, kappa] {
            for &eta in etas {
                jobs.push((l, kappa, r, eta));
            }
        }
    }
    let cells: Vec<Result<DivergenceCell, HarnessError>> = exec.map(&jobs, |&(l, kappa, r, eta)| {
        let p = hard_ratio_instance(l, l / kappa)?;
        let config = SolverConfig::new(Algorithm::Gda, eta, r * eta, steps, f64::MIN_POSITIVE);
        let t = run(&p, &config, &DIVERGENCE_START)?;
        let growth = t.last() / t.initial();
        let (certified_at, extended) = match t.status {
            Status::Diverged(k) => (Some(k), false),
            _ => {
                let n1 = gda_transition(&build_m(&p, r)?, eta).shift_diag(-1.0);
                let w = t.final_point.clone();
                let k = extend_until(&n1, w, config.divergence_factor * t.initial(), 62);
                (k.map(|k| k + t.iters.last().copied().unwrap_or(0)), true)
            }
        };
        Ok(DivergenceCell {
            l,
            kappa,
            r,
            eta_x: eta,
            status: t.status,
            stepped_iters: *t.iters.last().unwrap(),
            growth,
            certified_at,
            extended,
            passed: !t.status.is_converged() && (certified_at.is_some() || growth >= 1.0),
        })
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>, _>>()?;

    let controls: Vec<Result<ControlCell, HarnessError>> = exec.map(cases, |&(l, kappa)| {
        let p = hard_ratio_instance(l, l / kappa)?;
        let r = 2.0 * kappa;
        let config = SolverConfig::from_scheme(Algorithm::Gda, l, r, Scheme::Quarter, 1_000_000, 1e-6);
        let t = run(&p, &config, &DIVERGENCE_START)?;
        Ok(ControlCell {
            l,
            kappa,
            r,
            status: t.status,
            passed: t.status.is_converged(),
        })
    });
    let controls = controls.into_iter().collect::<Result<Vec<_>, _>>()?;
    let passed = cells.iter().all(|c| c.passed) && controls.iter().all(|c| c.passed);
    Ok(DivergenceReport {
        cells,
        controls,
        passed,
    })
}

/// [`divergence_report`] that fails on the first cell without a certificate.
pub fn divergence_certificate(
    cases: &[(f64, f64)],
    etas: &[f64],
    steps: u64,
    exec: &Executor,
) -> Result<DivergenceReport, HarnessError> {
    let report = divergence_report(cases, etas, steps, exec)?;
    match report.first_failure() {
        Some(cell) => Err(HarnessError::CertificateFailure { cell }),
        None => Ok(report),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLowerBoundReport {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub mu_x: f64,
    pub r: f64,
    pub eta_x: f64,
    /// Slowest real eigenvalue of `M`.
    pub lambda1: f64,
    /// `1 + eta_x lambda1`.
    pub s1: f64,
    /// `1 - 1/(r kappa_x)`.
    pub bound: f64,
    pub iters: u64,
    /// `max_k |d_{k+1}/d_k - s1|`.
    pub max_step_deviation: f64,
    pub measured_rate: f64,
    pub final_ratio: f64,
    pub predicted_final_ratio: f64,
    pub passed: bool,
}

/// GDA with Quarter stepsizes on the hard rate instance, started on the
/// eigenvector `(b, L - lambda1)` of the slowest mode.
pub fn rate_lower_bound_check(l: f64, mu: f64, mu_x: f64, r: f64, iters: u64) -> Result<RateLowerBoundReport, HarnessError> {
    let kappa = l / mu;
    if r < 2.0 * kappa {
        return Err(HarnessError::InvalidInput(format!("need r >= 2 kappa = {}, got r = {r}", 2.0 * kappa)));
    }
    let disc = (mu * r - l).powi(2) - 4.0 * r * mu * mu_x;
    if disc < 0.0 {
        return Err(HarnessError::InvalidInput(format!(
            "eigenvalues are complex: need (mu r - L)^2 >= 4 r mu mu_x, got {} < {}",
            (mu * r - l).powi(2),
            4.0 * r * mu * mu_x
        )));
    }
    let p = hard_rate_instance(l, mu, mu_x)?;
    let lambda1 = -0.5 * (mu * r - l) + 0.5 * disc.sqrt();
    let config = SolverConfig::from_scheme(Algorithm::Gda, l, r, Scheme::Quarter, iters, f64::MIN_POSITIVE);
    let s1 = 1.0 + config.eta_x * lambda1;
    let b = p.b[(0, 0)];
    let v = [b, l - lambda1];
    let nv = norm2(&v);
    let z0 = [v[0] / nv, v[1] / nv];
    let t = run(&p, &config, &z0)?;
    let max_step_deviation = t
        .distances
        .windows(2)
        .map(|w| (w[1] / w[0] - s1).abs())
        .fold(0.0, f64::max);
    let measured_rate = estimate_rate(&t, None)?;
    let bound = 1.0 - mu_x / (r * l);
    let last = *t.iters.last().unwrap();
    let predicted_final_ratio = s1.powf(last as f64);
    Ok(RateLowerBoundReport {
        l,
        mu,
        mu_x,
        r,
        eta_x: config.eta_x,
        lambda1,
        s1,
        bound,
        iters: last,
        max_step_deviation,
        measured_rate,
        final_ratio: t.last() / t.initial(),
        predicted_final_ratio,
        passed: max_step_deviation <= 1e-10 && (measured_rate - s1).abs() <= 1e-10 && s1 >= bound && s1 <= 1.0,
    })
}

/// Exact stationary `E||z - z*||^2` of SGDA with Quarter-free stepsizes
/// `(eta_x, eta_y)`: the trace of `Sigma = P Sigma P^T + Q`, summed by
/// doubling (`Sigma_{2k} = Sigma_k + P^k Sigma_k P^kT`).
pub fn stationary_mean_square(
    problem: &QuadraticProblem,
    eta_x: f64,
    eta_y: f64,
    noise: &NoiseModel,
) -> Result<f64, HarnessError> {
    let (n, m) = (problem.n(), problem.m());
    let p = gda_transition(&build_m(problem, eta_y / eta_x)?, eta_x);
    let vx = eta_x * eta_x * noise.sigma * noise.sigma / (n as f64 * noise.batch as f64);
    let vy = eta_y * eta_y * noise.sigma * noise.sigma / (m as f64 * noise.batch as f64);
    let diag: Vec<f64> = (0..n + m).map(|i| if i < n { vx } else { vy }).collect();
    let mut sigma = DenseMatrix::from_diag(&diag);
    let mut pk = p;
    for _ in 0..200 {
        let add = pk.matmul(&sigma).matmul(&pk.transpose());
        sigma = sigma.add(&add);
        pk = pk.matmul(&pk);
        if pk.max_abs() < 1e-20 {
            return Ok(sigma.trace());
        }
        if !pk.max_abs().is_finite() {
            break;
        }
    }
    Err(HarnessError::InvalidInput("SGDA transition is not stable; no stationary floor".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorStatus {
    Pass,
    Fail,
    /// The deterministic term had not decayed before the tail window.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorRow {
    pub batch: usize,
    /// Tail mean of `||z^k - z*||^2`, averaged over seeds.
    pub mean_square: f64,
    pub std_error: f64,
    /// Exact stationary value of the linear recursion.
    pub stationary: f64,
    /// `8 r kappa_x C_P^2 sigma^2 / (L^2 S)`.
    pub predicted: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorReport {
    pub r: f64,
    pub sigma: f64,
    pub seeds: usize,
    pub iters: u64,
    pub tail_start: u64,
    /// Iterations for `(C_P rho1^k)^2` to fall below 1% of the smallest floor.
    pub decay_iters: u64,
    pub rows: Vec<FloorRow>,
    /// Least-squares slope of `log(mean_square)` against `log(S)`.
    pub slope: f64,
    /// 95% interval from the per-batch standard errors.
    pub slope_ci: (f64, f64),
    pub status: FloorStatus,
}

/// SGDA (Quarter stepsizes) from unit-distance starts for every batch size
/// and seed; the floor is the mean squared distance over the last 20% of
/// iterations. Without `iters` the horizon is `decay_iters / 0.8`.
pub fn sgda_floor_sweep(
    problem: &QuadraticProblem,
    r: f64,
    sigma: f64,
    batches: &[usize],
    seeds: &[u64],
    iters: Option<u64>,
    exec: &Executor,
) -> Result<FloorReport, HarnessError> {
    if batches.len() < 2 || seeds.is_empty() {
        return Err(HarnessError::InvalidInput("need at least two batch sizes and one seed".into()));
    }
    let consts = problem.derive_constants()?;
    if !(consts.mu_x > 0.0) {
        return Err(HarnessError::InvalidInput("SGDA floor needs mu_x > 0".into()));
    }
    let (ex, ey) = StepsizeChoice::Quarter.stepsizes(problem.l, r);
    let rep = spectral_report(problem, r, ex)?;
    let c_p = rep
        .c_p
        .ok_or_else(|| HarnessError::InvalidInput("SGDA floor needs a diagonalizable M".into()))?;
    if !(rep.rho1 < 1.0) {
        return Err(HarnessError::InvalidInput(format!("GDA is not stable here (rho1 = {})", rep.rho1)));
    }
    let smallest = *batches.iter().max().unwrap();
    let floor_min = stationary_mean_square(problem, ex, ey, &NoiseModel::new(sigma, smallest)?)?;
    let decay_iters = if sigma > 0.0 {
        ((0.1 * floor_min.sqrt() / c_p).ln() / rep.rho1.ln()).ceil().max(0.0) as u64
    } else {
        0
    };
    let needed = (decay_iters as f64 / 0.8).ceil() as u64;
    let t = iters.unwrap_or(needed.max(100));
    let tail_start = (0.8 * t as f64).floor() as u64;

    let mut jobs = Vec::new();
    for &s in batches {
        for &seed in seeds {
            jobs.push((s, seed));
        }
    }
    let results: Vec<Result<f64, HarnessError>> = exec.map(&jobs, |&(s, seed)| {
        let config = SolverConfig::new(Algorithm::Sgda, ex, ey, t, f64::MIN_POSITIVE)
            .with_noise(NoiseModel::new(sigma, s)?)
            .with_seed(seed);
        let traj = run(problem, &config, &unit_start(&problem.z_star(), seed))?;
        if !matches!(traj.status, Status::BudgetExhausted) {
            return Err(HarnessError::InvalidInput(format!("SGDA run stopped early: {:?}", traj.status)));
        }
        let tail: Vec<f64> = traj
            .iters
            .iter()
            .zip(&traj.distances)
            .filter(|(&k, _)| k >= tail_start)
            .map(|(_, d)| d * d)
            .collect();
        Ok(tail.iter().sum::<f64>() / tail.len() as f64)
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (i, &s) in batches.iter().enumerate() {
        let per_seed = &results[i * seeds.len()..(i + 1) * seeds.len()];
        let k = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / k;
        let var = if per_seed.len() > 1 {
            per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let predicted = predicted_floor_sgda(r, consts.kappa_x, c_p, sigma, problem.l, s)?;
        rows.push(FloorRow {
            batch: s,
            mean_square: mean,
            std_error: (var / k).sqrt(),
            stationary: stationary_mean_square(problem, ex, ey, &NoiseModel::new(sigma, s)?)?,
            predicted,
            within_bound: mean <= predicted,
        });
    }

    let xs: Vec<f64> = rows.iter().map(|r| (r.batch as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_square.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    // delta method: var(log m) ~ (se / m)^2
    let var_slope: f64 = xs
        .iter()
        .zip(&rows)
        .map(|(x, r)| ((x - mx) / sxx).powi(2) * (r.std_error / r.mean_square).powi(2))
        .sum();
    let half = 1.96 * var_slope.sqrt();

    let status = if sigma > 0.0 && tail_start < decay_iters {
        FloorStatus::Inconclusive
    } else if rows.iter().all(|r| r.within_bound) && (slope + 1.0).abs() <= 0.15 {
        FloorStatus::Pass
    } else {
        FloorStatus::Fail
    };
    Ok(FloorReport {
        r,
        sigma,
        seeds: seeds.len(),
        iters: t,
        tail_start,
        decay_iters,
        rows,
        slope,
        slope_ci: (slope - half, slope + half),
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuxZeroReport {
    pub eps: f64,
    /// Upper bound used for `||x*||`.
    pub big_r: f64,
    /// `eps / R^2`.
    pub delta: f64,
    pub r: f64,
    /// `eps / (4 sqrt((kappa + 1) L))`, the distance to the regularized
    /// saddle point at which the run stops.
    pub stop_distance: f64,
    pub status: Status,
    pub iters: u64,
    /// `Phi(x^T) - Phi(x*)` of the unregularized problem.
    pub final_gap: f64,
    pub passed: bool,
}

/// GDA with Quarter stepsizes on `f + (delta/2)||x||^2`, `delta = eps/R^2`,
/// run until it is within `eps / (4 sqrt((kappa + 1) L))` of the regularized
/// saddle point. `R` defaults to `2 ||x0|| + 1`.
pub fn mux_zero_run(
    problem: &QuadraticProblem,
    eps: f64,
    big_r: Option<f64>,
    r: f64,
    z0: &[f64],
    max_iters: u64,
) -> Result<MuxZeroReport, HarnessError> {
    let consts = problem.derive_constants()?;
    if consts.mu_x > 1e-9 * problem.l {
        return Err(HarnessError::InvalidInput(format!("instance has mu_x = {:e} > 0", consts.mu_x)));
    }
    if z0.len() != problem.n() + problem.m() {
        return Err(HarnessError::InvalidInput("initial point has the wrong dimension".into()));
    }
    let big_r = big_r.unwrap_or_else(|| 2.0 * norm2(&z0[..problem.n()]) + 1.0);
    let delta = eps / (big_r * big_r);
    if !(eps > 0.0) || delta > problem.l {
        return Err(HarnessError::InvalidInput(format!(
            "delta = eps / R^2 = {delta:e} must lie in (0, L = {}]",
            problem.l
        )));
    }
    let reg = problem.regularize(delta)?;
    let stop_distance = eps / (4.0 * ((problem.kappa() + 1.0) * problem.l).sqrt());
    let config = SolverConfig::from_scheme(Algorithm::Gda, problem.l, r, Scheme::Quarter, max_iters, stop_distance);
    let t = run(&reg, &config, z0)?;
    let final_gap = problem.primal_gap(&t.final_point[..problem.n()])?;
    Ok(MuxZeroReport {
        eps,
        big_r,
        delta,
        r,
        stop_distance,
        status: t.status,
        iters: *t.iters.last().unwrap(),
        final_gap,
        passed: t.status.is_converged() && final_gap <= eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guarantee {
    pub ratio: f64,
    /// `Delta_r = dxx + (r + 1) dxy + r dyy`.
    pub delta_r: f64,
    /// `mu_x / (8 C_P)` of the base instance, when `M` is diagonalizable.
    pub threshold: Option<f64>,
    /// `r >= 2 kappa` and `Delta_r <= threshold`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonQuadSweep {
    pub sweep: SweepResult,
    pub guarantees: Vec<Guarantee>,
}

fn guarantee_threshold(base: &QuadraticProblem, r: f64, eta_x: f64, bound_constant: f64) -> Result<Option<f64>, HarnessError> {
    let rep = spectral_report_with(base, r, eta_x, bound_constant)?;
    Ok(rep.c_p.map(|c| rep.mu_x / (8.0 * c)))
}

/// GDA on the nonquadratic family at each ratio. Cells stop once the
/// gradient norm (or, for `a = 0`, the distance) is at most `tol`.
pub fn nonquad_sweep(
    nq: &NonQuadraticProblem,
    ratios: &[f64],
    stepsizes: StepsizeChoice,
    max_iters: u64,
    tol: f64,
    seed: u64,
    exec: &Executor,
) -> Result<NonQuadSweep, HarnessError> {
    let base = &nq.base;
    let dev = nq.hessian_deviation();
    let mut guarantees = Vec::new();
    for &r in ratios {
        let (ex, _) = stepsizes.stepsizes(base.l, r);
        let threshold = guarantee_threshold(base, r, ex, stepsizes.bound_constant())?;
        let delta_r = dev.delta_r(r);
        guarantees.push(Guarantee {
            ratio: r,
            delta_r,
            threshold,
            holds: r >= 2.0 * base.kappa() && threshold.is_some_and(|t| delta_r <= t),
        });
    }
    let rho = |r: f64, ex: f64| spectral_report(base, r, ex).ok().map(|rep| rep.rho1);
    let sweep = sweep_oracle(nq, base.l, ratios, stepsizes, max_iters, tol, seed, rho, exec);
    Ok(NonQuadSweep { sweep, guarantees })
}

/// Halves `a0` until `Delta_r(r) <= mu_x / (8 C_P)` for the base instance.
pub fn shrink_for_guarantee(base: &QuadraticProblem, r: f64, stepsizes: StepsizeChoice, a0: f64) -> Result<f64, HarnessError> {
    let (ex, _) = stepsizes.stepsizes(base.l, r);
    let threshold = guarantee_threshold(base, r, ex, stepsizes.bound_constant())?
        .ok_or_else(|| HarnessError::InvalidInput("base instance has no eigenbasis; C_P undefined".into()))?;
    if !(threshold > 0.0) {
        return Err(HarnessError::InvalidInput("guarantee needs mu_x > 0".into()));
    }
    let mut a = a0;
    for _ in 0..200 {
        let nq = NonQuadraticProblem::new(base.clone(), a, vec![0.0; base.n()])?;
        if nq.hessian_deviation().delta_r(r) <= threshold {
            return Ok(a);
        }
        a *= 0.5;
    }
    Err(HarnessError::InvalidInput("could not shrink a below the guarantee threshold".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing() {
        let g = log_spaced(1e-6, 0.5, 12);
        assert_eq!(g.len(), 12);
        assert!((g[0] - 1e-6).abs() < 1e-20);
        assert_eq!(g[11], 0.5);
        for w in g.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn extension_matches_powers() {
        // (1 + x)^(2^k - 1) for scalar x
        let n1 = DenseMatrix::from_diag(&[1e-3]);
        let steps = extend_until(&n1, vec![1.0], 100.0, 40).unwrap();
        let exact = (100f64.ln() / 1.001f64.ln()).ceil() as u64;
        assert!(steps >= exact && steps < 2 * exact + 2, "{steps} vs {exact}");
        let never = DenseMatrix::from_diag(&[-1e-3]);
        assert_eq!(extend_until(&never, vec![1.0], 2.0, 30), None);
    }

    #[test]
    fn lower_bound_example() {
        let rep = rate_lower_bound_check(2.0, 1.0, 0.1, 4.0, 1000).unwrap();
        assert!((rep.lambda1 - (-1.0 + 0.5 * 2.4f64.sqrt())).abs() < 1e-12);
        assert!((rep.s1 - 0.992956).abs() < 1e-6);
        assert!((rep.bound - 0.9875).abs() < 1e-15);
        assert!(rep.passed, "{rep:?}");
        assert!((rep.final_ratio / rep.predicted_final_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_rejects_complex_case() {
        // (mu r - L)^2 = 4 < 4 r mu mu_x = 16
        assert!(matches!(
            rate_lower_bound_check(2.0, 1.0, 1.0, 4.0, 100),
            Err(HarnessError::InvalidInput(_))
        ));
        assert!(rate_lower_bound_check(2.0, 1.0, 0.1, 3.0, 100).is_err());
    }

    #[test]
    fn stationary_scalar_recursion() {
        // 1-D decoupled: x' = (1 - eta c) x + eta xi, var = eta^2 s2 / (1 - (1 - eta c)^2)
        let p = QuadraticProblem::new(
            DenseMatrix::from_diag(&[1.0]),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::from_diag(&[1.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let noise = NoiseModel::new(1.0, 4).unwrap();
        let v = stationary_mean_square(&p, 0.1, 0.1, &noise).unwrap();
        let one = 0.01 * 0.25 / (1.0 - 0.81);
        assert!((v - 2.0 * one).abs() < 1e-14, "{v}");
    }
}
