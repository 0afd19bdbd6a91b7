//! Certification suites. Each criterion runs end to end and returns a
//! verdict with the margins it was judged on.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::certify::{
    divergence_report, log_spaced, mux_zero_run, nonquad_sweep, rate_lower_bound_check, sgda_floor_sweep,
    shrink_for_guarantee, FloorStatus,
};
use super::{unit_start, HarnessError, StepsizeChoice};
use crate::dynamics::{build_m, estimate_rate, run, Algorithm, Scheme, SolverConfig};
use crate::exec::Executor;
use crate::linalg::{general_eig, DenseMatrix};
use crate::problems::{sample_instance, NonQuadraticProblem, QuadraticProblem, SampleOptions};
use crate::spectral::{spectral_report_with, SpectralReport, QUARTER_BOUND_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Reduced corpora and horizons, for smoke runs.
    Quick,
    /// The sizes the criteria are stated for.
    Full,
}

impl std::str::FromStr for Budget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quick" => Ok(Budget::Quick),
            "full" => Ok(Budget::Full),
            _ => Err(format!("unknown budget '{s}' (quick|full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub verdict: Verdict,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub elapsed_secs: f64,
}

impl CriterionResult {
    /// `PASS [3] linear rate: ...`.
    pub fn line(&self) -> String {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        format!("{tag} [{}] {} ({:.2}s): {}", self.id, self.name, self.elapsed_secs, self.summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Spectral,
    LowerBounds,
    Rates,
    SgdaFloor,
    MuxZero,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Spectral => &[2, 8],
            Suite::LowerBounds => &[1, 4],
            Suite::Rates => &[3, 5, 9],
            Suite::SgdaFloor => &[6],
            Suite::MuxZero => &[7],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "spectral" => Suite::Spectral,
            "lower-bounds" => Suite::LowerBounds,
            "rates" => Suite::Rates,
            "sgda-floor" => Suite::SgdaFloor,
            "mux-zero" => Suite::MuxZero,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub budget: Budget,
    /// Constant `c` of the radius bound `1 - 1/(c r kappa_x)`.
    pub bound_constant: f64,
    pub exec: Executor,
}

impl VerifyOptions {
    pub fn new(seed: u64, budget: Budget) -> Self {
        Self {
            seed,
            budget,
            bound_constant: QUARTER_BOUND_CONSTANT,
            exec: Executor::Auto,
        }
    }

    fn full(&self) -> bool {
        self.budget == Budget::Full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub budget: Budget,
    pub bound_constant: f64,
    pub results: Vec<CriterionResult>,
    pub passed: bool,
    pub inconclusive: usize,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let results: Vec<CriterionResult> = suite.criteria().iter().map(|&id| criterion(id, opts)).collect();
    VerifyReport {
        suite,
        seed: opts.seed,
        budget: opts.budget,
        bound_constant: opts.bound_constant,
        passed: results.iter().all(|r| r.verdict != Verdict::Fail),
        inconclusive: results.iter().filter(|r| r.verdict == Verdict::Inconclusive).count(),
        results,
    }
}

/// Runs criterion `id` (1 to 9). Errors inside a criterion become a `Fail`.
pub fn criterion(id: u8, opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let (name, outcome) = match id {
        1 => ("ratio-threshold divergence", ratio_divergence(opts)),
        2 => ("spectral bound", spectral_bound(opts)),
        3 => ("linear rate", linear_rate(opts)),
        4 => ("tight lower bound", tight_lower_bound(opts)),
        5 => ("ratio scaling", ratio_scaling(opts)),
        6 => ("sgda floor", sgda_floor(opts)),
        7 => ("mu_x = 0 regularization", mux_zero(opts)),
        8 => ("eigensolver oracle", eigensolver(opts)),
        9 => ("nearly-quadratic guarantee", nearly_quadratic(opts)),
        _ => ("unknown", Err(HarnessError::InvalidInput(format!("no criterion {id}")))),
    };
    let (verdict, summary, metrics) = match outcome {
        Ok(o) => o,
        Err(e) => (Verdict::Fail, format!("error: {e}"), BTreeMap::new()),
    };
    CriterionResult {
        id,
        name: name.to_string(),
        verdict,
        summary,
        metrics,
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

type Outcome = Result<(Verdict, String, BTreeMap<String, f64>), HarnessError>;

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn metrics<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn instance_rng(seed: u64, tag: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i));
    rng.set_stream(tag);
    rng
}

fn convex_options(floor: f64) -> SampleOptions {
    SampleOptions {
        mu_x_floor: floor,
        ..Default::default()
    }
}

/// Random 4x4 instances with `L = 100`, `mu = 1` and `mu_x >= 1`.
pub fn spectral_corpus(seed: u64, count: usize) -> Result<Vec<QuadraticProblem>, HarnessError> {
    (0..count as u64)
        .map(|i| Ok(sample_instance(4, 4, 100.0, 1.0, &mut instance_rng(seed, 2, i), &convex_options(1.0))?))
        .collect()
}

fn corpus_size(opts: &VerifyOptions) -> usize {
    if opts.full() {
        100
    } else {
        10
    }
}

fn ratios_for(kappa: f64) -> [f64; 3] {
    [2.0 * kappa, 4.0 * kappa, 2.0 * kappa * kappa]
}

fn corpus_reports(opts: &VerifyOptions) -> Result<Vec<(usize, QuadraticProblem, SpectralReport)>, HarnessError> {
    let corpus = spectral_corpus(opts.seed, corpus_size(opts))?;
    let mut jobs = Vec::new();
    for (i, p) in corpus.into_iter().enumerate() {
        for r in ratios_for(p.kappa()) {
            jobs.push((i, p.clone(), r));
        }
    }
    let reports = opts.exec.map(&jobs, |(_, p, r)| {
        let (ex, _) = StepsizeChoice::Quarter.stepsizes(p.l, *r);
        spectral_report_with(p, *r, ex, opts.bound_constant)
    });
    jobs.into_iter()
        .zip(reports)
        .map(|((i, p, _), rep)| Ok((i, p, rep?)))
        .collect()
}

fn ratio_divergence(opts: &VerifyOptions) -> Outcome {
    let cases = [(2.0, 2.0), (8.0, 8.0), (64.0, 64.0)];
    let etas = log_spaced(1e-6, 0.5, 12);
    let steps = if opts.full() { 100_000 } else { 10_000 };
    let rep = divergence_report(&cases, &etas, steps, &opts.exec)?;
    let certified = rep.cells.iter().filter(|c| c.passed).count();
    let extended = rep.cells.iter().filter(|c| c.extended && c.passed).count();
    let controls = rep.controls.iter().filter(|c| c.passed).count();
    let mut summary = format!(
        "{certified}/{} cells diverge ({extended} certified by exact extension), {controls}/{} r=2kappa controls converge",
        rep.cells.len(),
        rep.controls.len()
    );
    if let Some(f) = rep.first_failure() {
        summary.push_str(&format!("; first failure: {f}"));
    }
    Ok((
        verdict(rep.passed),
        summary,
        metrics([
            ("cells", rep.cells.len() as f64),
            ("certified", certified as f64),
            ("controls_converged", controls as f64),
        ]),
    ))
}

fn spectral_bound(opts: &VerifyOptions) -> Outcome {
    let reports = corpus_reports(opts)?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_lemma = f64::INFINITY;
    let mut bad_bound = 0;
    let mut bad_lemma = 0;
    let mut low_mux = 0;
    for (_, _, rep) in &reports {
        if rep.mu_x <= 1e-3 {
            low_mux += 1;
            continue;
        }
        worst_excess = worst_excess.max(rep.rho1.max(rep.rho2) - rep.rho_bound);
        if !rep.within_bound(1e-9) {
            bad_bound += 1;
        }
        for c in &rep.lemma_checks {
            if let Some(m) = c.margin {
                worst_lemma = worst_lemma.min(m / rep.m_norm);
            }
        }
        if !rep.checks_passed() {
            bad_lemma += 1;
        }
    }
    let n = reports.len() - low_mux;
    Ok((
        verdict(bad_bound == 0 && bad_lemma == 0 && n > 0),
        format!(
            "{n} (instance, r) pairs: {bad_bound} exceed 1 - 1/({} r kappa_x) + 1e-9 (worst max(rho1,rho2) - bound = {worst_excess:.3e}), {bad_lemma} fail a lemma check (worst margin/||M|| = {worst_lemma:.3e})",
            opts.bound_constant
        ),
        metrics([
            ("pairs", n as f64),
            ("bound_violations", bad_bound as f64),
            ("lemma_violations", bad_lemma as f64),
            ("worst_excess", worst_excess),
            ("worst_lemma_margin", worst_lemma),
        ]),
    ))
}

fn eigensolver(opts: &VerifyOptions) -> Outcome {
    let corpus = spectral_corpus(opts.seed, corpus_size(opts))?;
    let mut worst_resid = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut worst_det = 0.0f64;
    let mut missing_vectors = 0;
    let mut matrices = 0;
    for p in &corpus {
        for r in ratios_for(p.kappa()) {
            let m = build_m(p, r)?;
            let eig = general_eig(&m)?;
            let norm = crate::linalg::spectral_norm(&m)?;
            matrices += 1;
            match &eig.vectors {
                Some(v) => {
                    for (j, &lam) in eig.values.iter().enumerate() {
                        let x = v.column(j);
                        let mx = crate::linalg::ComplexMatrix::from_real(&m).matvec(&x);
                        let res = mx
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - lam * b).norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        worst_resid = worst_resid.max(res / norm);
                    }
                }
                None => missing_vectors += 1,
            }
            let sum: Complex64 = eig.values.iter().sum();
            let abs_sum: f64 = eig.values.iter().map(|v| v.norm()).sum();
            let tr = m.trace();
            worst_trace = worst_trace.max((sum - tr).norm() / tr.abs().max(abs_sum));
            let prod: Complex64 = eig.values.iter().product();
            let abs_prod: f64 = eig.values.iter().map(|v| v.norm()).product();
            let det = m.determinant();
            worst_det = worst_det.max((prod - det).norm() / det.abs().max(abs_prod));
        }
    }

    // 2x2 closed form: tr/2 +- sqrt(tr^2/4 - det)
    let mut rng = instance_rng(opts.seed, 8, 0);
    let mut worst_2x2 = 0.0f64;
    let mut smalls: Vec<DenseMatrix> = (0..200)
        .map(|_| DenseMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    for (l, mu, mux) in [(2.0, 1.0, 0.1), (2.0, 1.0, 1.0), (10.0, 1.0, 0.5)] {
        let p = crate::problems::hard_rate_instance(l, mu, mux)?;
        for r in [1.0, 2.0, 4.0, 8.0] {
            let m = build_m(&p, r)?;
            let s = 1.0 / m.max_abs();
            smalls.push(m.scale(s));
        }
    }
    for m in &smalls {
        let tr = m.trace();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
        let closed = [tr / 2.0 + disc, tr / 2.0 - disc];
        let got = general_eig(m)?.values;
        for c in closed {
            let d = got.iter().map(|g| (g - c).norm()).fold(f64::INFINITY, f64::min);
            worst_2x2 = worst_2x2.max(d);
        }
    }
    let ok = missing_vectors == 0 && worst_resid <= 1e-8 && worst_trace <= 1e-8 && worst_det <= 1e-8 && worst_2x2 <= 1e-12;
    Ok((
        verdict(ok),
        format!(
            "{matrices} corpus matrices: max ||Mv - lambda v||/||M|| = {worst_resid:.2e}, {missing_vectors} without eigenbasis, trace rel err {worst_trace:.2e}, det rel err {worst_det:.2e}; {} 2x2 matrices: max closed-form error {worst_2x2:.2e}",
            smalls.len()
        ),
        metrics([
            ("matrices", matrices as f64),
            ("max_residual", worst_resid),
            ("max_trace_error", worst_trace),
            ("max_det_error", worst_det),
            ("max_2x2_error", worst_2x2),
            ("missing_vectors", missing_vectors as f64),
        ]),
    ))
}

/// Steps after which every subdominant mode has shrunk by `1e-3 / C_P`
/// relative to the dominant one, doubled so the fitted last half starts
/// there; at least `1e4`, at most `cap`.
pub fn rate_horizon(rep: &SpectralReport, alg: Algorithm, cap: u64) -> u64 {
    let (rho, gap) = if alg == Algorithm::Eg {
        (rep.rho2, rep.gap2)
    } else {
        (rep.rho1, rep.gap1)
    };
    let c_p = rep.c_p.unwrap_or(1.0);
    let floor = 10_000u64;
    if gap >= rho || gap <= 0.0 {
        return if gap <= 0.0 { cap } else { floor };
    }
    let per_step = (rho / (rho - gap)).ln();
    let t = 2.0 * (1e3 * c_p).ln() / per_step;
    (t.ceil() as u64).clamp(floor, cap)
}

fn linear_rate(opts: &VerifyOptions) -> Outcome {
    let reports = corpus_reports(opts)?;
    let cap = if opts.full() { 50_000_000 } else { 200_000 };
    let mut jobs = Vec::new();
    for (i, p, rep) in reports.iter().filter(|(_, _, rep)| rep.diagonalizable && rep.mu_x > 1e-3) {
        for alg in [Algorithm::Gda, Algorithm::Eg] {
            jobs.push((*i, p, rep, alg));
        }
    }
    let results = opts.exec.map(&jobs, |&(i, p, rep, alg)| -> Result<(f64, f64, f64, f64), HarnessError> {
        let iters = rate_horizon(rep, alg, cap);
        // unit start; the fit drops points below 1e3 eps, so stop a little under that
        let z0 = unit_start(&p.z_star(), opts.seed.wrapping_add(i as u64));
        let config = SolverConfig::new(alg, rep.eta_x, rep.eta_x * rep.r, iters, 1e2 * f64::EPSILON);
        let t = run(p, &config, &z0)?;
        let measured = estimate_rate(&t, None)?;
        let (rho, gap) = if alg == Algorithm::Eg {
            (rep.rho2, rep.gap2)
        } else {
            (rep.rho1, rep.gap1)
        };
        Ok((measured, rho, gap, rep.rho_bound))
    });
    let mut over_bound = 0;
    let mut matched = 0;
    let mut mismatched = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_match = 0.0f64;
    let mut errors = 0;
    for res in &results {
        match res {
            Ok((measured, rho, gap, bound)) => {
                worst_excess = worst_excess.max(measured - bound);
                if measured > bound {
                    over_bound += 1;
                }
                if *gap > 1e-3 {
                    worst_match = worst_match.max((measured - rho).abs());
                    if (measured - rho).abs() <= 1e-3 {
                        matched += 1;
                    } else {
                        mismatched += 1;
                    }
                }
            }
            Err(_) => errors += 1,
        }
    }
    Ok((
        verdict(over_bound == 0 && mismatched == 0 && errors == 0 && !results.is_empty()),
        format!(
            "{} runs (horizon cap {cap}): {over_bound} measured rates above the bound (worst measured - bound = {worst_excess:.3e}); {matched} gap-separated runs match rho within 1e-3, {mismatched} do not (worst {worst_match:.2e}); {errors} fit errors",
            results.len()
        ),
        metrics([
            ("runs", results.len() as f64),
            ("over_bound", over_bound as f64),
            ("matched", matched as f64),
            ("mismatched", mismatched as f64),
            ("worst_excess", worst_excess),
            ("worst_match_error", worst_match),
        ]),
    ))
}

fn tight_lower_bound(_opts: &VerifyOptions) -> Outcome {
    let rep = rate_lower_bound_check(2.0, 1.0, 0.1, 4.0, 1000)?;
    Ok((
        verdict(rep.passed),
        format!(
            "s1 = {:.9}, measured per-step factor deviates by at most {:.2e}, bound 1 - 1/(r kappa_x) = {}",
            rep.s1, rep.max_step_deviation, rep.bound
        ),
        metrics([
            ("s1", rep.s1),
            ("max_step_deviation", rep.max_step_deviation),
            ("measured_rate", rep.measured_rate),
            ("bound", rep.bound),
        ]),
    ))
}

fn ratio_scaling(opts: &VerifyOptions) -> Outcome {
    let count = if opts.full() { 10 } else { 2 };
    let (l, mu) = (20.0, 1.0);
    let kappa = l / mu;
    let instances: Vec<QuadraticProblem> = (0..count as u64)
        .map(|i| sample_instance(4, 4, l, mu, &mut instance_rng(opts.seed, 5, i), &convex_options(1.0)))
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for r in [2.0 * kappa, 2.0 * kappa * kappa] {
            jobs.push((i, r));
        }
    }
    let iters = opts.exec.map(&jobs, |&(i, r)| -> Result<Option<u64>, HarnessError> {
        let p = &instances[i];
        let config = SolverConfig::from_scheme(Algorithm::Gda, l, r, Scheme::Quarter, 100_000_000, 1e-6);
        let t = run(p, &config, &unit_start(&p.z_star(), opts.seed.wrapping_add(i as u64)))?;
        Ok(t.iters_to_eps())
    });
    let iters = iters.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (lo, hi) = (kappa / 3.0, 3.0 * kappa);
    let mut ratios = Vec::new();
    let mut unconverged = 0;
    for pair in iters.chunks(2) {
        match (pair[0], pair[1]) {
            (Some(a), Some(b)) if a > 0 => ratios.push(b as f64 / a as f64),
            _ => unconverged += 1,
        }
    }
    let inside = ratios.iter().filter(|&&q| q >= lo && q <= hi).count();
    let (mn, mx) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &q| (a.min(q), b.max(q)));
    Ok((
        verdict(unconverged == 0 && inside == ratios.len()),
        format!(
            "{inside}/{count} instances with iters(2kappa^2)/iters(2kappa) in [{lo:.2}, {hi}] (observed {mn:.2} to {mx:.2}); {unconverged} runs did not reach 1e-6"
        ),
        metrics([("min_ratio", mn), ("max_ratio", mx), ("unconverged", unconverged as f64)]),
    ))
}

/// Fixed 4x4 instance with `L = 10`, `mu = 1`, `mu_x >= 1` and an eigenbasis.
fn floor_instance(seed: u64) -> Result<QuadraticProblem, HarnessError> {
    for i in 0..100 {
        let p = sample_instance(4, 4, 10.0, 1.0, &mut instance_rng(seed, 6, i), &convex_options(1.0))?;
        let r = 2.0 * p.kappa();
        let (ex, _) = StepsizeChoice::Quarter.stepsizes(p.l, r);
        if crate::spectral::spectral_report(&p, r, ex)?.diagonalizable {
            return Ok(p);
        }
    }
    Err(HarnessError::InvalidInput("no diagonalizable instance in 100 draws".into()))
}

fn sgda_floor(opts: &VerifyOptions) -> Outcome {
    let p = floor_instance(opts.seed)?;
    let seeds: Vec<u64> = (0..if opts.full() { 32 } else { 8 }).map(|s| opts.seed * 1000 + s).collect();
    let rep = sgda_floor_sweep(&p, 2.0 * p.kappa(), 1.0, &[16, 64, 256, 1024], &seeds, None, &opts.exec)?;
    let v = match rep.status {
        FloorStatus::Pass => Verdict::Pass,
        FloorStatus::Fail => Verdict::Fail,
        FloorStatus::Inconclusive => Verdict::Inconclusive,
    };
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("S={}: {:.3e} <= {:.3e}", r.batch, r.mean_square, r.predicted))
        .collect();
    let worst = rep.rows.iter().map(|r| r.mean_square / r.predicted).fold(0.0, f64::max);
    Ok((
        v,
        format!(
            "{}; log-log slope {:.3} (95% CI [{:.3}, {:.3}]), {} iterations, tail from {}",
            rows.join(", "),
            rep.slope,
            rep.slope_ci.0,
            rep.slope_ci.1,
            rep.iters,
            rep.tail_start
        ),
        metrics([
            ("slope", rep.slope),
            ("slope_ci_low", rep.slope_ci.0),
            ("slope_ci_high", rep.slope_ci.1),
            ("worst_floor_over_bound", worst),
        ]),
    ))
}

/// 4x4 instance with `L = 10`, `mu = 1`, a singular PSD primal Hessian and
/// `||x*|| = ||y*|| = 1/2`, plus a unit-norm start.
pub fn mux_zero_instance(seed: u64) -> Result<(QuadraticProblem, Vec<f64>), HarnessError> {
    let opts = SampleOptions {
        mu_x_zero: true,
        ..Default::default()
    };
    let mut rng = instance_rng(seed, 7, 0);
    let p = sample_instance(4, 4, 10.0, 1.0, &mut rng, &opts)?;
    let half = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::linalg::norm2(&v);
        v.iter().map(|x| 0.5 * x / n).collect::<Vec<f64>>()
    };
    let (xs, ys) = (half(&mut rng), half(&mut rng));
    let p = p.with_optimum(xs, ys)?;
    let z0 = unit_start(&[0.0; 8], seed);
    Ok((p, z0))
}

fn mux_zero(opts: &VerifyOptions) -> Outcome {
    let (p, z0) = mux_zero_instance(opts.seed)?;
    let r = 2.0 * p.kappa();
    let epss = [1e-1, 1e-2];
    let reps = opts.exec.map(&epss, |&eps| mux_zero_run(&p, eps, None, r, &z0, 1_000_000_000));
    let reps = reps.into_iter().collect::<Result<Vec<_>, _>>()?;
    let growth = reps[1].iters as f64 / reps[0].iters.max(1) as f64;
    let gaps_ok = reps.iter().all(|r| r.passed);
    Ok((
        verdict(gaps_ok && (5.0..=20.0).contains(&growth)),
        format!(
            "eps=1e-1: gap {:.3e} in {} iters; eps=1e-2: gap {:.3e} in {} iters; growth {growth:.2} (want [5, 20])",
            reps[0].final_gap, reps[0].iters, reps[1].final_gap, reps[1].iters
        ),
        metrics([
            ("gap_1e-1", reps[0].final_gap),
            ("gap_1e-2", reps[1].final_gap),
            ("iters_1e-1", reps[0].iters as f64),
            ("iters_1e-2", reps[1].iters as f64),
            ("growth", growth),
        ]),
    ))
}

fn nearly_quadratic(opts: &VerifyOptions) -> Outcome {
    let base = sample_instance(4, 4, 10.0, 1.0, &mut instance_rng(opts.seed, 9, 0), &convex_options(1.0))?;
    let r = 2.0 * base.kappa();
    let a = shrink_for_guarantee(&base, r, StepsizeChoice::Half, 1.0)?;
    let mut rng = instance_rng(opts.seed, 9, 1);
    let nq = NonQuadraticProblem::with_random_offsets(base.clone(), a, &mut rng)?;
    let tol = 1e-6 * base.l;
    let res = nonquad_sweep(&nq, &[r], StepsizeChoice::Half, 100_000_000, tol, opts.seed, &opts.exec)?;
    let row = &res.sweep.rows[0];
    let g = &res.guarantees[0];
    let final_grad = row.final_distance.unwrap_or(f64::NAN);
    let ok = g.holds && row.status == "converged" && final_grad <= tol;
    Ok((
        verdict(ok),
        format!(
            "a = {a:e}: Delta_r = {:.3e} <= mu_x/(8 C_P) = {:.3e}; GDA at r = 2kappa {} after {} iters with gradient norm {final_grad:.3e} (target {tol:e})",
            g.delta_r,
            g.threshold.unwrap_or(f64::NAN),
            row.status,
            row.iters_to_eps.map(|k| k.to_string()).unwrap_or_else(|| "-".into())
        ),
        metrics([("a", a), ("delta_r", g.delta_r), ("final_grad_norm", final_grad)]),
    ))
}
