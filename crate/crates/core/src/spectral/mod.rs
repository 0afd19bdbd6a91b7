//! Spectral certificates for the linearized dynamics: eigenvalues of `M`,
//! the five structural checks on them, GDA/EG spectral radii against the
//! proved bound, the eigenbasis condition number and derived predictions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_m, DynamicsError};
use crate::linalg::{self, cond_2, general_eig, LinalgError};
use crate::problems::{ProblemError, QuadraticProblem};

/// Constant `c` in the bound `1 - 1/(c r kappa_x)` for Quarter stepsizes.
pub const QUARTER_BOUND_CONSTANT: f64 = 64.0;
/// Eigenbasis condition numbers above this are treated as non-diagonalizable.
pub const DIAGONALIZABLE_COND: f64 = 1e8;
/// `|Im lambda| <= IMAG_ZERO * ||M||` counts as a real eigenvalue.
pub const IMAG_ZERO: f64 = 1e-9;
/// Lemma checks tolerate `LEMMA_TOL * ||M||`.
pub const LEMMA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Fail,
    NotApplicable,
}

/// One structural property of the spectrum of `M`. `margin` is the slack
/// `bound - value` minimized over the eigenvalues it applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub item: u8,
    pub statement: String,
    pub outcome: CheckOutcome,
    pub margin: Option<f64>,
}

impl LemmaCheck {
    fn evaluate(item: u8, statement: &str, margin: Option<f64>, tol: f64) -> Self {
        let outcome = match margin {
            None => CheckOutcome::NotApplicable,
            Some(m) if m >= -tol => CheckOutcome::Pass,
            Some(_) => CheckOutcome::Fail,
        };
        Self {
            item,
            statement: statement.to_string(),
            outcome,
            margin,
        }
    }

    pub fn failed(&self) -> bool {
        self.outcome == CheckOutcome::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioClass {
    /// `r <= kappa`: there is an instance on which GDA fails for every stepsize.
    BelowThreshold,
    /// `kappa < r < 2 kappa`: only per-instance numerics apply.
    Gap,
    /// `r >= 2 kappa`: linear convergence is guaranteed.
    ProvedConvergent,
}

pub fn classify_ratio(r: f64, kappa: f64) -> RatioClass {
    if r <= kappa {
        RatioClass::BelowThreshold
    } else if r >= 2.0 * kappa {
        RatioClass::ProvedConvergent
    } else {
        RatioClass::Gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub r: f64,
    pub eta_x: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub mu_x: f64,
    pub kappa: f64,
    /// `null` in JSON when `mu_x = 0`.
    pub kappa_x: Option<f64>,
    /// Eigenvalues of `M` as `[re, im]`, by descending modulus.
    pub eigenvalues: Vec<Complex64>,
    pub m_norm: f64,
    /// `max |1 + eta_x lambda|`.
    pub rho1: f64,
    /// `max |1 + eta_x lambda + eta_x^2 lambda^2|`.
    pub rho2: f64,
    pub bound_constant: f64,
    /// `1 - 1/(bound_constant r kappa_x)`.
    pub rho_bound: f64,
    pub lemma_checks: Vec<LemmaCheck>,
    pub diagonalizable: bool,
    /// Condition number of the unit-column eigenvector matrix.
    pub c_p: Option<f64>,
    pub s_assumed: u32,
    /// Dominant minus next-distinct modulus of the GDA transition spectrum.
    pub gap1: f64,
    /// Same for the EG transition spectrum.
    pub gap2: f64,
    pub verdict: RatioClass,
}

impl SpectralReport {
    pub fn checks_passed(&self) -> bool {
        self.lemma_checks.iter().all(|c| !c.failed())
    }

    pub fn within_bound(&self, slack: f64) -> bool {
        self.rho1.max(self.rho2) <= self.rho_bound + slack
    }

    /// `log(eps / (C_P d0)) / log(rho1)`, the GDA iteration count implied by
    /// `||z^k - z*|| <= C_P rho1^k d0`. `None` without an eigenbasis or when
    /// `rho1 >= 1`.
    pub fn predicted_iters(&self, eps: f64, d0: f64) -> Option<f64> {
        predicted(self.rho1, self.c_p?, eps, d0)
    }

    /// As [`Self::predicted_iters`] for EG.
    pub fn predicted_iters_eg(&self, eps: f64, d0: f64) -> Option<f64> {
        predicted(self.rho2, self.c_p?, eps, d0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn predicted(rho: f64, c_p: f64, eps: f64, d0: f64) -> Option<f64> {
    if !(rho < 1.0) || rho <= 0.0 {
        return None;
    }
    Some(((eps / (c_p * d0)).ln() / rho.ln()).max(0.0))
}

/// Report with the Quarter-stepsize bound constant 64.
pub fn spectral_report(problem: &QuadraticProblem, r: f64, eta_x: f64) -> Result<SpectralReport, SpectralError> {
    spectral_report_with(problem, r, eta_x, QUARTER_BOUND_CONSTANT)
}

pub fn spectral_report_with(
    problem: &QuadraticProblem,
    r: f64,
    eta_x: f64,
    bound_constant: f64,
) -> Result<SpectralReport, SpectralError> {
    if !(r > 0.0 && r.is_finite() && eta_x > 0.0 && eta_x.is_finite()) {
        return Err(SpectralError::InvalidInput(format!("need r, eta_x > 0, got r={r}, eta_x={eta_x}")));
    }
    if !(bound_constant > 0.0) {
        return Err(SpectralError::InvalidInput("bound constant must be positive".into()));
    }
    let report = problem.validate()?;
    if !report.passed() {
        return Err(SpectralError::Problem(ProblemError::InvalidInput(format!(
            "instance violates {:?}",
            report.failed_clauses()
        ))));
    }
    let consts = problem.derive_constants()?;
    let m = build_m(problem, r)?;
    let eig = general_eig(&m)?;
    let m_norm = linalg::spectral_norm(&m)?;

    let gda: Vec<Complex64> = eig.values.iter().map(|&l| 1.0 + eta_x * l).collect();
    let eg: Vec<Complex64> = eig.values.iter().map(|&l| 1.0 + eta_x * l + eta_x * eta_x * l * l).collect();
    let (rho1, gap1) = radius_and_gap(&gda);
    let (rho2, gap2) = radius_and_gap(&eg);

    let rho_bound = if consts.mu_x > 0.0 {
        1.0 - 1.0 / (bound_constant * r * consts.kappa_x)
    } else {
        1.0
    };
    let c_p = match &eig.vectors {
        Some(v) => match cond_2(v) {
            Ok(c) if c <= DIAGONALIZABLE_COND => Some(c),
            Ok(_) | Err(LinalgError::Singular { .. }) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let lemma_checks = lemma_checks(&eig.values, m_norm, problem.l, problem.mu, consts.mu_x, r).to_vec();

    Ok(SpectralReport {
        r,
        eta_x,
        l: problem.l,
        mu: problem.mu,
        mu_x: consts.mu_x,
        kappa: consts.kappa,
        kappa_x: consts.kappa_x.is_finite().then_some(consts.kappa_x),
        eigenvalues: eig.values,
        m_norm,
        rho1,
        rho2,
        bound_constant,
        rho_bound,
        lemma_checks,
        diagonalizable: c_p.is_some(),
        c_p,
        s_assumed: 1,
        gap1,
        gap2,
        verdict: classify_ratio(r, consts.kappa),
    })
}

/// Spectral radius and its separation from the next modulus that does not
/// belong to the dominant value or its conjugate.
fn radius_and_gap(values: &[Complex64]) -> (f64, f64) {
    let (mut best, mut rho) = (values[0], 0.0);
    for &v in values {
        if v.norm() > rho {
            rho = v.norm();
            best = v;
        }
    }
    let same = |v: Complex64| {
        let tol = 1e-12 * rho.max(1.0);
        (v - best).norm() <= tol || (v - best.conj()).norm() <= tol
    };
    let next = values.iter().filter(|&&v| !same(v)).map(|v| v.norm()).fold(0.0, f64::max);
    (rho, rho - next)
}

/// The five structural properties of the eigenvalues `lambda = l0 + i l1`
/// of `M`, for ratio `r`:
///
/// 1. `|l1| <= sqrt(r) L`
/// 2. `l0 <= -mu (r - kappa) / 2` for non-real eigenvalues, when `r > kappa`
/// 3. `|lambda| <= ||M|| <= 2 r L`
/// 4. `l0 <= -mu_x` for real eigenvalues, when `r > kappa`
/// 5. `l0 < 0`, when `r > kappa` and `mu_x > 0`
pub fn check_lemma_spectral(report: &SpectralReport, l: f64, mu: f64, mu_x: f64, r: f64) -> [LemmaCheck; 5] {
    lemma_checks(&report.eigenvalues, report.m_norm, l, mu, mu_x, r)
}

fn lemma_checks(values: &[Complex64], m_norm: f64, l: f64, mu: f64, mu_x: f64, r: f64) -> [LemmaCheck; 5] {
    let tol = LEMMA_TOL * m_norm;
    let kappa = l / mu;
    let above = r > kappa;
    let is_real = |v: &Complex64| v.im.abs() <= IMAG_ZERO * m_norm;
    let min_over = |it: &mut dyn Iterator<Item = f64>| it.reduce(f64::min);

    let m1 = min_over(&mut values.iter().map(|v| r.sqrt() * l - v.im.abs()));
    let m2 = if above {
        min_over(&mut values.iter().filter(|v| !is_real(v)).map(|v| -mu * (r - kappa) / 2.0 - v.re))
    } else {
        None
    };
    let max_mod = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let m3 = Some((m_norm - max_mod).min(2.0 * r * l - m_norm));
    let m4 = if above {
        min_over(&mut values.iter().filter(|v| is_real(v)).map(|v| -mu_x - v.re))
    } else {
        None
    };
    let m5 = if above && mu_x > 0.0 {
        min_over(&mut values.iter().map(|v| -v.re))
    } else {
        None
    };
    [
        LemmaCheck::evaluate(1, "|Im(lambda)| <= sqrt(r) L", m1, tol),
        LemmaCheck::evaluate(2, "Re(lambda) <= -mu (r - kappa) / 2 for non-real lambda", m2, tol),
        LemmaCheck::evaluate(3, "|lambda| <= ||M|| <= 2 r L", m3, tol),
        LemmaCheck::evaluate(4, "Re(lambda) <= -mu_x for real lambda", m4, tol),
        LemmaCheck::evaluate(5, "Re(lambda) < 0", m5, tol),
    ]
}

/// `s C_P k^(s-1) rho^(k-s+1)`, a bound on `||P^k||` for a transition `P`
/// with spectral radius `rho`, largest Jordan block `s` and basis condition
/// number `C_P`.
pub fn power_bound(k: u64, s: u32, c_p: f64, rho: f64) -> Result<f64, SpectralError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SpectralError::InvalidInput(format!("need 0 < rho < 1, got {rho}")));
    }
    if s == 0 || !(c_p >= 1.0) {
        return Err(SpectralError::InvalidInput(format!("need s >= 1 and C_P >= 1, got s={s}, C_P={c_p}")));
    }
    if k + 1 < s as u64 {
        return Err(SpectralError::InvalidInput(format!("need k >= s - 1, got k={k}, s={s}")));
    }
    let exp = (k + 1 - s as u64) as f64;
    Ok(s as f64 * c_p * (k as f64).powi(s as i32 - 1) * rho.powf(exp))
}

/// Steady-state mean-square distance bound for SGDA,
/// `8 r kappa_x C_P^2 sigma^2 / (L^2 S)`.
pub fn predicted_floor_sgda(r: f64, kappa_x: f64, c_p: f64, sigma: f64, l: f64, batch: usize) -> Result<f64, SpectralError> {
    if !(r > 0.0 && kappa_x > 0.0 && c_p > 0.0 && sigma >= 0.0 && l > 0.0 && batch > 0) {
        return Err(SpectralError::InvalidInput(
            "floor prediction needs positive r, kappa_x, C_P, L, S and sigma >= 0".into(),
        ));
    }
    Ok(8.0 * r * kappa_x * c_p * c_p * sigma * sigma / (l * l * batch as f64))
}

/// Gradient complexity scalings (constants and logarithms dropped) for one
/// choice of stepsize ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub gda_mu_x_positive: f64,
    pub gda_mu_x_zero: f64,
    pub sgda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTable {
    /// `r = 2 kappa`.
    pub two_kappa: ComplexityRow,
    /// `r = Theta(kappa^2)`.
    pub kappa_squared: ComplexityRow,
    /// `kappa_squared / two_kappa`, column by column.
    pub ratios: ComplexityRow,
}

/// `kappa kappa_x`, `kappa / eps` and `sigma^2 kappa^2 kappa_x^2 / eps^2` at
/// `r = 2 kappa`; one extra factor `kappa` (GDA) or `kappa^2` (SGDA) at
/// `r = Theta(kappa^2)`.
pub fn complexity_table(kappa: f64, kappa_x: f64, eps: f64, sigma: f64) -> Result<ComplexityTable, SpectralError> {
    if !(kappa > 0.0 && kappa_x > 0.0 && eps > 0.0 && sigma > 0.0) {
        return Err(SpectralError::InvalidInput("complexity table needs positive inputs".into()));
    }
    let two_kappa = ComplexityRow {
        gda_mu_x_positive: kappa * kappa_x,
        gda_mu_x_zero: kappa / eps,
        sgda: sigma * sigma * kappa * kappa * kappa_x * kappa_x / (eps * eps),
    };
    let kappa_squared = ComplexityRow {
        gda_mu_x_positive: kappa * kappa * kappa_x,
        gda_mu_x_zero: kappa * kappa / eps,
        sgda: sigma * sigma * kappa.powi(4) * kappa_x * kappa_x / (eps * eps),
    };
    let ratios = ComplexityRow {
        gda_mu_x_positive: kappa_squared.gda_mu_x_positive / two_kappa.gda_mu_x_positive,
        gda_mu_x_zero: kappa_squared.gda_mu_x_zero / two_kappa.gda_mu_x_zero,
        sgda: kappa_squared.sgda / two_kappa.sgda,
    };
    Ok(ComplexityTable {
        two_kappa,
        kappa_squared,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problems::{hard_rate_instance, hard_ratio_instance};

    #[test]
    fn hard_ratio_at_threshold() {
        let p = hard_ratio_instance(2.0, 1.0).unwrap();
        let rep = spectral_report(&p, 2.0, 1.0 / 16.0).unwrap();
        for v in &rep.eigenvalues {
            assert!(v.re.abs() < 1e-12 && (v.im.abs() - 2.0).abs() < 1e-12, "{v}");
        }
        assert!((rep.rho1 - (1.0f64 + 1.0 / 64.0).sqrt()).abs() < 1e-12);
        assert!(rep.rho1 > 1.0);
        assert_eq!(rep.verdict, RatioClass::BelowThreshold);
        // item 1: |l1| = 2 <= sqrt(2) 2; item 3: 4 <= 64
        assert_eq!(rep.lemma_checks[0].outcome, CheckOutcome::Pass);
        assert!((rep.lemma_checks[0].margin.unwrap() - (2f64.sqrt() * 2.0 - 2.0)).abs() < 1e-12);
        assert_eq!(rep.lemma_checks[2].outcome, CheckOutcome::Pass);
        for i in [1, 3, 4] {
            assert_eq!(rep.lemma_checks[i].outcome, CheckOutcome::NotApplicable);
        }
    }

    #[test]
    fn hard_rate_example() {
        let p = hard_rate_instance(2.0, 1.0, 1.0).unwrap();
        let rep = spectral_report(&p, 4.0, 1.0 / 32.0).unwrap();
        for v in &rep.eigenvalues {
            assert!((v.re + 1.0).abs() < 1e-12 && (v.im.abs() - 3f64.sqrt()).abs() < 1e-12);
        }
        let expect = ((31.0f64 / 32.0).powi(2) + 3.0 / 1024.0).sqrt();
        assert!((rep.rho1 - expect).abs() < 1e-12);
        assert!((rep.rho_bound - (1.0 - 1.0 / 512.0)).abs() < 1e-15);
        assert!(rep.within_bound(0.0));
        assert!(rep.checks_passed());
        assert!(rep.diagonalizable);
        assert_eq!(rep.verdict, RatioClass::ProvedConvergent);
        // a conjugate pair alone has nothing to compete with
        assert_eq!(rep.gap1, rep.rho1);
    }

    #[test]
    fn concave_primal_is_flagged() {
        let p = QuadraticProblem::new(
            DenseMatrix::from_diag(&[1.0]),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::from_diag(&[-0.5]),
            2.0,
            1.0,
        )
        .unwrap();
        let rep = spectral_report(&p, 4.0, 0.1).unwrap();
        assert!(rep.eigenvalues.iter().any(|v| (v.re - 0.5).abs() < 1e-12));
        assert!(rep.rho1 > 1.0);
    }

    #[test]
    fn mutated_constant_fails_bound() {
        let p = hard_rate_instance(2.0, 1.0, 1.0).unwrap();
        let rep = spectral_report_with(&p, 4.0, 1.0 / 32.0, 1.0).unwrap();
        // 1 - 1/8 is well below rho1 ~ 0.970
        assert!(!rep.within_bound(1e-9));
    }

    #[test]
    fn classification() {
        assert_eq!(classify_ratio(100.0, 100.0), RatioClass::BelowThreshold);
        assert_eq!(classify_ratio(150.0, 100.0), RatioClass::Gap);
        assert_eq!(classify_ratio(200.0, 100.0), RatioClass::ProvedConvergent);
    }

    #[test]
    fn power_bound_values() {
        assert!((power_bound(10, 2, 1.0, 0.9).unwrap() - 20.0 * 0.9f64.powi(9)).abs() < 1e-12);
        assert!((power_bound(10, 2, 1.0, 0.9).unwrap() - 7.748409780).abs() < 1e-8);
        assert_eq!(power_bound(7, 1, 3.0, 0.5).unwrap(), 3.0 * 0.5f64.powi(7));
        assert!(power_bound(3, 1, 1.0, 1.0).is_err());
        assert!(power_bound(0, 2, 1.0, 0.5).is_err());
    }

    #[test]
    fn sgda_floor_arithmetic() {
        let v = predicted_floor_sgda(200.0, 2.0, 3.0, 1.0, 100.0, 256).unwrap();
        assert!((v - 0.01125).abs() < 1e-15);
        assert_eq!(predicted_floor_sgda(200.0, 2.0, 3.0, 0.0, 100.0, 256).unwrap(), 0.0);
        let half = predicted_floor_sgda(200.0, 2.0, 3.0, 1.0, 100.0, 512).unwrap();
        assert!((half - v / 2.0).abs() < 1e-16);
    }

    #[test]
    fn complexity_ratios() {
        let t = complexity_table(100.0, 50.0, 1e-3, 1.0).unwrap();
        assert!((t.ratios.gda_mu_x_positive - 100.0).abs() < 1e-9);
        assert!((t.ratios.gda_mu_x_zero - 100.0).abs() < 1e-9);
        assert!((t.ratios.sgda - 1e4).abs() < 1e-6);
        let one = complexity_table(1.0, 3.0, 0.1, 2.0).unwrap();
        assert_eq!(one.ratios.gda_mu_x_positive, 1.0);
        assert_eq!(one.ratios.sgda, 1.0);
    }

    #[test]
    fn json_has_pairs() {
        let p = hard_rate_instance(2.0, 1.0, 1.0).unwrap();
        let rep = spectral_report(&p, 4.0, 1.0 / 32.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["eigenvalues"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["lemma_checks"][0]["outcome"], "pass");
        let back: SpectralReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
