use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProblemError, QuadraticProblem};
use crate::linalg::{self, Cholesky, DenseMatrix};

const MAX_ATTEMPTS: usize = 50;

/// Knobs for [`sample_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleOptions {
    /// `||B|| = beta L`.
    pub beta: f64,
    /// `||C|| = gamma L` before any shift.
    pub gamma: f64,
    /// Shift `C` by a multiple of the identity so the Schur complement is PSD.
    pub primal_convex: bool,
    /// Target for `lambda_min(C + B A^{-1} B^T)` when shifting.
    pub mu_x_floor: f64,
    /// Build `C` so that the Schur complement has an exact zero eigenvalue.
    pub mu_x_zero: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.5,
            primal_convex: true,
            mu_x_floor: 0.0,
            mu_x_zero: false,
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DenseMatrix, ProblemError> {
    loop {
        match linalg::orthonormal_factor(&gaussian(n, n, rng)) {
            Ok(q) => return Ok(q),
            // rank-deficient Gaussian draw has probability zero; draw again
            Err(linalg::LinalgError::Singular { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

fn scaled_to_norm(m: DenseMatrix, target: f64) -> Result<DenseMatrix, ProblemError> {
    if target == 0.0 {
        return Ok(DenseMatrix::zeros(m.rows(), m.cols()));
    }
    let nrm = linalg::spectral_norm(&m)?;
    Ok(m.scale(target / nrm))
}

/// Rotated diagonal `Q diag(d) Q^T`, exactly symmetric.
fn rotated(q: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    q.matmul(&DenseMatrix::from_diag(d)).matmul(&q.transpose()).symmetrize()
}

/// Random quadratic instance with `z* = 0`.
///
/// `A = Q diag(lambda) Q^T` with the spectrum containing both `mu` and `L`
/// (the rest uniform in between) and `Q` Haar-distributed. `B` is Gaussian
/// rescaled to `||B|| = beta L`. `C` is a symmetric Gaussian rescaled to
/// `||C|| = gamma L`, then shifted by `tau I` when `primal_convex` is set and
/// the Schur complement falls below `mu_x_floor`. Attempts whose shift would
/// break `||C|| <= L` are redrawn, up to 50 times.
///
/// With `mu_x_zero`, `C = W D W^T - B A^{-1} B^T` where `D` has exactly one
/// zero entry, and `beta` is halved until `||C|| <= L`.
pub fn sample_instance<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    l: f64,
    mu: f64,
    rng: &mut R,
    opts: &SampleOptions,
) -> Result<QuadraticProblem, ProblemError> {
    if n == 0 || m == 0 {
        return Err(ProblemError::InvalidInput("n and m must be at least 1".into()));
    }
    if !(l > mu && mu > 0.0 && l.is_finite()) {
        return Err(ProblemError::InvalidInput(format!("need L > mu > 0, got L={l}, mu={mu}")));
    }
    if !(0.0..=1.0).contains(&opts.beta) || !(0.0..=1.0).contains(&opts.gamma) {
        return Err(ProblemError::InvalidInput("beta and gamma must lie in [0, 1]".into()));
    }

    let mut beta = opts.beta;
    let mut last_reason = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let mut spectrum: Vec<f64> = (0..m).map(|_| rng.random_range(mu..=l)).collect();
        spectrum[0] = mu;
        if m > 1 {
            spectrum[1] = l;
        }
        let a = rotated(&haar(m, rng)?, &spectrum);
        let b = scaled_to_norm(gaussian(n, m, rng), beta * l)?;

        let c = if opts.mu_x_zero {
            let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(mu..=0.5 * l)).collect();
            d[0] = 0.0;
            let target = rotated(&haar(n, rng)?, &d);
            let ainv_bt = Cholesky::new(&a)?.solve_matrix(&b.transpose())?;
            target.sub(&b.matmul(&ainv_bt)).symmetrize()
        } else {
            let g = gaussian(n, n, rng);
            let sym = g.add(&g.transpose()).scale(0.5);
            scaled_to_norm(sym, opts.gamma * l)?
        };

        let mut p = QuadraticProblem::new(a, b, c, l, mu)?;
        if opts.mu_x_zero {
            if linalg::spectral_norm(&p.c)? > l {
                last_reason = format!("||C|| > L with beta = {beta}");
                beta *= 0.5;
                continue;
            }
        } else if opts.primal_convex {
            let lmin = linalg::sym_eig(&p.schur()?)?.min();
            if lmin < opts.mu_x_floor {
                p.c = p.c.shift_diag(opts.mu_x_floor - lmin);
                if linalg::spectral_norm(&p.c)? > l {
                    last_reason = "convexifying shift pushes ||C|| above L".into();
                    continue;
                }
            }
        }
        let report = p.validate()?;
        if report.passed() {
            return Ok(p);
        }
        last_reason = format!("clauses failed: {:?}", report.failed_clauses());
    }
    Err(ProblemError::GenerationFailed {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

/// `f(x, y) = -(mu/2) y^2 + L x y - (L/2) x^2`, the instance on which GDA
/// with `r <= kappa` fails for every stepsize.
pub fn hard_ratio_instance(l: f64, mu: f64) -> Result<QuadraticProblem, ProblemError> {
    if !(mu > 0.0 && l / mu >= 2.0) {
        return Err(ProblemError::InvalidInput(format!(
            "hard ratio instance needs kappa = L/mu >= 2, got L={l}, mu={mu}"
        )));
    }
    QuadraticProblem::new(
        DenseMatrix::from_diag(&[mu]),
        DenseMatrix::from_diag(&[l]),
        DenseMatrix::from_diag(&[-l]),
        l,
        mu,
    )
}

/// `f(x, y) = -(L/2) x^2 + b x y - (mu/2) y^2` with `b = sqrt(mu (L + mu_x))`,
/// whose primal function is exactly `mu_x x^2 / 2`.
pub fn hard_rate_instance(l: f64, mu: f64, mu_x: f64) -> Result<QuadraticProblem, ProblemError> {
    if !(mu > 0.0 && l / mu >= 2.0) {
        return Err(ProblemError::InvalidInput(format!(
            "hard rate instance needs kappa = L/mu >= 2, got L={l}, mu={mu}"
        )));
    }
    if !(mu_x > 0.0 && mu_x <= l) {
        return Err(ProblemError::InvalidInput(format!("need 0 < mu_x <= L, got mu_x={mu_x}")));
    }
    let b = (mu * (l + mu_x)).sqrt();
    QuadraticProblem::new(
        DenseMatrix::from_diag(&[mu]),
        DenseMatrix::from_diag(&[b]),
        DenseMatrix::from_diag(&[-l]),
        l,
        mu,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hard_ratio_values() {
        let p = hard_ratio_instance(2.0, 1.0).unwrap();
        assert_eq!((p.a[(0, 0)], p.b[(0, 0)], p.c[(0, 0)]), (1.0, 2.0, -2.0));
        assert!(p.validate().unwrap().passed());
        // mu_x = min{L, mu (kappa^2 - kappa)} = min{2, 2}
        assert!((p.derive_constants().unwrap().mu_x - 2.0).abs() < 1e-12);
        assert!(hard_ratio_instance(1.5, 1.0).is_err());
    }

    #[test]
    fn hard_ratio_mu_x_is_capped_at_l() {
        let p = hard_ratio_instance(8.0, 1.0).unwrap();
        assert!((p.schur().unwrap()[(0, 0)] - 56.0).abs() < 1e-12);
        assert_eq!(p.derive_constants().unwrap().mu_x, 8.0);
    }

    #[test]
    fn hard_rate_values() {
        let p = hard_rate_instance(2.0, 1.0, 1.0).unwrap();
        assert!((p.b[(0, 0)] - 3f64.sqrt()).abs() < 1e-15);
        assert!((p.schur().unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        let q = hard_rate_instance(2.0, 1.0, 2.0).unwrap();
        assert!((q.b[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(hard_rate_instance(2.0, 1.0, 0.0).is_err());
        assert!(hard_rate_instance(2.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn hard_rate_recovers_mu_x() {
        for &(l, mu, mux) in &[(2.0, 1.0, 0.1), (10.0, 1.0, 0.5), (100.0, 1.0, 100.0), (4.0, 2.0, 0.01)] {
            let p = hard_rate_instance(l, mu, mux).unwrap();
            assert!(p.validate().unwrap().passed());
            let k = p.derive_constants().unwrap();
            assert!((k.mu_x - mux).abs() <= 1e-9 * l, "{l} {mu} {mux}: {}", k.mu_x);
        }
    }

    #[test]
    fn sample_is_deterministic_and_valid() {
        let opts = SampleOptions::default();
        let p1 = sample_instance(4, 4, 100.0, 1.0, &mut ChaCha8Rng::seed_from_u64(7), &opts).unwrap();
        let p2 = sample_instance(4, 4, 100.0, 1.0, &mut ChaCha8Rng::seed_from_u64(7), &opts).unwrap();
        assert_eq!(p1.to_json(), p2.to_json());
        let r = p1.validate().unwrap();
        assert!(r.passed());
        assert!(r.primal_convex);
        let ea = linalg::sym_eig(&p1.a).unwrap();
        assert!((ea.min() - 1.0).abs() < 1e-9 * 100.0);
        assert!((ea.max() - 100.0).abs() < 1e-9 * 100.0);
    }

    #[test]
    fn zero_coupling_gives_schur_c() {
        let opts = SampleOptions {
            beta: 0.0,
            primal_convex: false,
            ..Default::default()
        };
        let p = sample_instance(3, 2, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1), &opts).unwrap();
        assert_eq!(p.schur().unwrap(), p.c.symmetrize());
    }

    #[test]
    fn mu_x_zero_construction() {
        let opts = SampleOptions {
            mu_x_zero: true,
            ..Default::default()
        };
        for seed in 0..5 {
            let p = sample_instance(4, 4, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed), &opts).unwrap();
            assert!(p.validate().unwrap().passed());
            let lmin = linalg::sym_eig(&p.schur().unwrap()).unwrap().min();
            assert!(lmin.abs() <= 1e-9 * 10.0, "seed {seed}: {lmin}");
            assert_eq!(p.derive_constants().unwrap().mu_x, 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = SampleOptions::default();
        assert!(sample_instance(0, 2, 10.0, 1.0, &mut rng, &o).is_err());
        assert!(sample_instance(2, 2, 1.0, 1.0, &mut rng, &o).is_err());
    }
}
