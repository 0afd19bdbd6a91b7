//! Quadratic nonconvex-strongly-concave instances
//!
//! ```text
//! f(x; y) = -1/2 (y - y*)^T A (y - y*) + (x - x*)^T B (y - y*) + 1/2 (x - x*)^T C (x - x*)
//! ```
//!
//! with `x` in R^n (minimized) and `y` in R^m (maximized), together with the
//! derived constants, exact and mini-batch gradient oracles, instance
//! generators and a logistic non-quadratic perturbation.

mod generate;
mod nonquad;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Cholesky, DenseMatrix, LinalgError};

pub use generate::{hard_rate_instance, hard_ratio_instance, sample_instance, SampleOptions};
pub use nonquad::{HessianDeviation, NonQuadraticProblem};

/// Relative tolerance (times `L`) for every Assumption-style clause.
pub const CLAUSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("instance generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `f(x; y)` as above. `a` is m x m, `b` is n x m, `c` is n x n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct QuadraticProblem {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub l: f64,
    pub mu: f64,
}

/// On-disk layout: `{n, m, L, mu, A, B, C, x_star, y_star}`, matrices as
/// arrays of rows.
#[derive(Serialize, Deserialize)]
struct ProblemJson {
    n: usize,
    m: usize,
    #[serde(rename = "L")]
    l: f64,
    mu: f64,
    #[serde(rename = "A")]
    a: DenseMatrix,
    #[serde(rename = "B")]
    b: DenseMatrix,
    #[serde(rename = "C")]
    c: DenseMatrix,
    x_star: Vec<f64>,
    y_star: Vec<f64>,
}

impl TryFrom<ProblemJson> for QuadraticProblem {
    type Error = ProblemError;
    fn try_from(j: ProblemJson) -> Result<Self, ProblemError> {
        let p = QuadraticProblem {
            a: j.a,
            b: j.b,
            c: j.c,
            x_star: j.x_star,
            y_star: j.y_star,
            l: j.l,
            mu: j.mu,
        };
        p.check_dims()?;
        if p.n() != j.n || p.m() != j.m {
            return Err(ProblemError::InvalidInput(format!(
                "declared n={}, m={} but matrices give n={}, m={}",
                j.n,
                j.m,
                p.n(),
                p.m()
            )));
        }
        Ok(p)
    }
}

impl From<QuadraticProblem> for ProblemJson {
    fn from(p: QuadraticProblem) -> Self {
        ProblemJson {
            n: p.n(),
            m: p.m(),
            l: p.l,
            mu: p.mu,
            a: p.a,
            b: p.b,
            c: p.c,
            x_star: p.x_star,
            y_star: p.y_star,
        }
    }
}

/// One clause of the assumption check. `margin >= -tol` passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `lambda_min(A) - mu`, `L - lambda_max(A)`, `L - ||B||`, `L - ||C||`.
    pub clauses: Vec<Clause>,
    /// Smallest eigenvalue of `C + B A^{-1} B^T`.
    pub schur_min_eig: f64,
    /// Whether the primal function is convex (Schur complement PSD to tolerance).
    pub primal_convex: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failed_clauses(&self) -> Vec<&'static str> {
        self.clauses.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// `min{L, lambda_min(schur)}`, clamped into `[0, L]`.
    pub mu_x: f64,
    pub kappa: f64,
    /// `L / mu_x`; infinite when `mu_x = 0`.
    pub kappa_x: f64,
    /// Unclamped smallest eigenvalue of the Schur complement.
    pub schur_min_eig: f64,
    #[serde(skip)]
    pub schur: DenseMatrix,
}

/// Per-sample gradient noise: root-variance `sigma` per block, batch size `batch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub batch: usize,
}

impl NoiseModel {
    pub fn new(sigma: f64, batch: usize) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0 && sigma.is_finite()) || batch == 0 {
            return Err(ProblemError::InvalidInput(format!(
                "noise needs sigma >= 0 and batch >= 1, got sigma={sigma}, batch={batch}"
            )));
        }
        Ok(Self { sigma, batch })
    }

    /// Expected squared norm of the mini-batch noise on one block.
    pub fn block_variance(&self) -> f64 {
        self.sigma * self.sigma / self.batch as f64
    }

    /// Adds mini-batch noise to `g` (one block).
    ///
    /// Each sample is isotropic Gaussian with covariance `(sigma^2 / dim) I`,
    /// so the batch mean is Gaussian with covariance `(sigma^2 / (dim S)) I`;
    /// that mean is drawn directly.
    pub fn perturb<R: Rng + ?Sized>(&self, g: &mut [f64], rng: &mut R) {
        if self.sigma == 0.0 || g.is_empty() {
            return;
        }
        let sd = (self.block_variance() / g.len() as f64).sqrt();
        for gi in g.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *gi += sd * e;
        }
    }
}

impl QuadraticProblem {
    /// Builds an instance with `z* = 0`.
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, l: f64, mu: f64) -> Result<Self, ProblemError> {
        let p = Self {
            x_star: vec![0.0; b.rows()],
            y_star: vec![0.0; b.cols()],
            a,
            b,
            c,
            l,
            mu,
        };
        p.check_dims()?;
        Ok(p)
    }

    pub fn with_optimum(mut self, x_star: Vec<f64>, y_star: Vec<f64>) -> Result<Self, ProblemError> {
        self.x_star = x_star;
        self.y_star = y_star;
        self.check_dims()?;
        Ok(self)
    }

    /// Dimension of `x`.
    pub fn n(&self) -> usize {
        self.c.rows()
    }

    /// Dimension of `y`.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn z_star(&self) -> Vec<f64> {
        [self.x_star.as_slice(), self.y_star.as_slice()].concat()
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    fn check_dims(&self) -> Result<(), ProblemError> {
        let (n, m) = (self.c.rows(), self.a.rows());
        let bad = |what: String| Err(ProblemError::InvalidInput(what));
        if !self.a.is_square() || !self.c.is_square() {
            return bad("A and C must be square".into());
        }
        if self.b.rows() != n || self.b.cols() != m {
            return bad(format!("B must be {n}x{m}, got {}x{}", self.b.rows(), self.b.cols()));
        }
        if self.x_star.len() != n || self.y_star.len() != m {
            return bad(format!(
                "optimum must have dimensions ({n}, {m}), got ({}, {})",
                self.x_star.len(),
                self.y_star.len()
            ));
        }
        if n == 0 || m == 0 {
            return bad("empty blocks".into());
        }
        if !(self.l > 0.0 && self.mu > 0.0 && self.l.is_finite()) {
            return bad(format!("need L > 0 and mu > 0, got L={}, mu={}", self.l, self.mu));
        }
        if self.x_star.iter().chain(&self.y_star).any(|v| !v.is_finite()) {
            return bad("optimum must be finite".into());
        }
        Ok(())
    }

    /// `C + B A^{-1} B^T`, the Hessian of the primal function.
    pub fn schur(&self) -> Result<DenseMatrix, ProblemError> {
        let chol = Cholesky::new(&self.a.symmetrize())?;
        let ainv_bt = chol.solve_matrix(&self.b.transpose())?;
        Ok(self.c.add(&self.b.matmul(&ainv_bt)).symmetrize())
    }

    /// Checks `mu I <= A <= L I`, `||B||, ||C|| <= L` and reports the
    /// Schur complement's smallest eigenvalue.
    pub fn validate(&self) -> Result<ValidationReport, ProblemError> {
        self.check_dims()?;
        let tol = CLAUSE_TOL * self.l;
        if self.a.asymmetry() > tol || self.c.asymmetry() > tol {
            return Err(ProblemError::InvalidInput("A and C must be symmetric".into()));
        }
        let ea = linalg::sym_eig(&self.a.symmetrize())?;
        let bn = linalg::spectral_norm(&self.b)?;
        let cn = linalg::spectral_norm(&self.c)?;
        let clause = |name, margin: f64| Clause {
            name,
            margin,
            passed: margin >= -tol,
        };
        let clauses = vec![
            clause("mu I <= A", ea.min() - self.mu),
            clause("A <= L I", self.l - ea.max()),
            clause("||B|| <= L", self.l - bn),
            clause("||C|| <= L", self.l - cn),
        ];
        let schur_min_eig = if ea.min() > 0.0 {
            linalg::sym_eig(&self.schur()?)?.min()
        } else {
            f64::NEG_INFINITY
        };
        Ok(ValidationReport {
            clauses,
            schur_min_eig,
            primal_convex: schur_min_eig >= -tol,
        })
    }

    pub fn derive_constants(&self) -> Result<DerivedConstants, ProblemError> {
        let schur = self.schur()?;
        let lmin = linalg::sym_eig(&schur)?.min();
        let mut mu_x = self.l.min(lmin);
        if mu_x.abs() <= CLAUSE_TOL * self.l || mu_x < 0.0 {
            mu_x = 0.0;
        }
        Ok(DerivedConstants {
            mu_x,
            kappa: self.l / self.mu,
            kappa_x: if mu_x > 0.0 { self.l / mu_x } else { f64::INFINITY },
            schur_min_eig: lmin,
            schur,
        })
    }

    /// Block Hessian `[[C, B], [B^T, -A]]`.
    pub fn hessian(&self) -> DenseMatrix {
        DenseMatrix::block(&self.c, &self.b, &self.b.transpose(), &self.a.scale(-1.0))
    }

    /// Exact gradient into caller buffers. `z = (x, y)`.
    pub fn grad_into(&self, z: &[f64], gx: &mut [f64], gy: &mut [f64], scratch: &mut [f64]) {
        let n = self.n();
        let (x, y) = z.split_at(n);
        let (dx, dy) = scratch.split_at_mut(n);
        for ((d, xi), s) in dx.iter_mut().zip(x).zip(&self.x_star) {
            *d = xi - s;
        }
        for ((d, yi), s) in dy.iter_mut().zip(y).zip(&self.y_star) {
            *d = yi - s;
        }
        // gx = C dx + B dy
        for (i, g) in gx.iter_mut().enumerate() {
            *g = linalg::dot(self.c.row(i), dx) + linalg::dot(self.b.row(i), dy);
        }
        // gy = B^T dx - A dy
        self.b.matvec_t_into(dx, gy);
        for (j, g) in gy.iter_mut().enumerate() {
            *g -= linalg::dot(self.a.row(j), dy);
        }
    }

    /// `(grad_x f, grad_y f)` at `z = (x, y)`.
    pub fn grad(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        if z.len() != self.n() + self.m() {
            return Err(ProblemError::InvalidInput(format!(
                "z has length {}, expected {}",
                z.len(),
                self.n() + self.m()
            )));
        }
        let mut gx = vec![0.0; self.n()];
        let mut gy = vec![0.0; self.m()];
        let mut scratch = vec![0.0; z.len()];
        self.grad_into(z, &mut gx, &mut gy, &mut scratch);
        Ok((gx, gy))
    }

    /// Exact gradient plus one independent mini-batch noise draw per block.
    pub fn stochastic_grad<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        let (mut gx, mut gy) = self.grad(z)?;
        noise.perturb(&mut gx, rng);
        noise.perturb(&mut gy, rng);
        Ok((gx, gy))
    }

    /// `Phi(x) - Phi(x*) = 1/2 (x - x*)^T (C + B A^{-1} B^T) (x - x*)`.
    pub fn primal_gap(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let consts = self.derive_constants()?;
        if consts.schur_min_eig < -CLAUSE_TOL * self.l {
            return Err(ProblemError::InvalidState(format!(
                "primal function is not convex (lambda_min = {:e})",
                consts.schur_min_eig
            )));
        }
        if x.len() != self.n() {
            return Err(ProblemError::InvalidInput("x has the wrong dimension".into()));
        }
        Ok(quadratic_gap(&consts.schur, x, &self.x_star))
    }

    /// `f_delta = f + delta/2 ||x||^2`.
    ///
    /// The returned instance has `C + delta I` and its optimum moved to the
    /// stationary point of `f_delta`. With `S` the Schur complement,
    /// `x_delta - x* = -delta (S + delta I)^{-1} x*` and
    /// `y_delta - y* = A^{-1} B^T (x_delta - x*)`.
    pub fn regularize(&self, delta: f64) -> Result<QuadraticProblem, ProblemError> {
        if !(delta > 0.0 && delta <= self.l) {
            return Err(ProblemError::InvalidInput(format!(
                "regularization needs 0 < delta <= L, got delta={delta}, L={}",
                self.l
            )));
        }
        let c = self.c.shift_diag(delta);
        if linalg::spectral_norm(&c)? > 2.0 * self.l * (1.0 + CLAUSE_TOL) {
            return Err(ProblemError::InvalidState("||C + delta I|| exceeds 2L".into()));
        }
        let shifted = self.schur()?.shift_diag(delta);
        let rhs: Vec<f64> = self.x_star.iter().map(|v| -delta * v).collect();
        let dx = Cholesky::new(&shifted)
            .map_err(|_| ProblemError::InvalidState("regularized primal Hessian is not positive definite".into()))?
            .solve(&rhs)?;
        let bt_dx = self.b.transpose().matvec(&dx);
        let dy = Cholesky::new(&self.a.symmetrize())?.solve(&bt_dx)?;
        let x_star = self.x_star.iter().zip(&dx).map(|(s, d)| s + d).collect();
        let y_star = self.y_star.iter().zip(&dy).map(|(s, d)| s + d).collect();
        Ok(QuadraticProblem {
            a: self.a.clone(),
            b: self.b.clone(),
            c,
            x_star,
            y_star,
            l: self.l,
            mu: self.mu,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// `1/2 (x - x*)^T S (x - x*)`, clamped at zero against rounding.
pub fn quadratic_gap(schur: &DenseMatrix, x: &[f64], x_star: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(x_star).map(|(a, b)| a - b).collect();
    (0.5 * linalg::dot(&d, &schur.matvec(&d))).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::from_diag(&[v])
    }

    #[test]
    fn diagonal_instance_validates() {
        let p = QuadraticProblem::new(
            DenseMatrix::from_diag(&[1.0, 2.0]),
            DenseMatrix::zeros(2, 2),
            DenseMatrix::zeros(2, 2),
            2.0,
            1.0,
        )
        .unwrap();
        let r = p.validate().unwrap();
        assert!(r.passed());
        assert_eq!(r.schur_min_eig, 0.0);
    }

    #[test]
    fn weak_a_fails_lower_clause() {
        let p = QuadraticProblem::new(
            DenseMatrix::from_diag(&[0.5, 2.0]),
            DenseMatrix::zeros(2, 2),
            DenseMatrix::zeros(2, 2),
            2.0,
            1.0,
        )
        .unwrap();
        let r = p.validate().unwrap();
        assert!(!r.passed());
        assert_eq!(r.failed_clauses(), vec!["mu I <= A"]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let e = QuadraticProblem::new(scalar(1.0), DenseMatrix::zeros(2, 2), scalar(0.0), 1.0, 1.0);
        assert!(matches!(e, Err(ProblemError::InvalidInput(_))));
    }

    #[test]
    fn scalar_constants() {
        // A = 1, B = sqrt 3, C = -2: schur = -2 + 3 = 1
        let p = QuadraticProblem::new(scalar(1.0), scalar(3f64.sqrt()), scalar(-2.0), 2.0, 1.0).unwrap();
        let k = p.derive_constants().unwrap();
        assert!((k.mu_x - 1.0).abs() < 1e-14);
        assert_eq!(k.kappa, 2.0);
        assert!((k.kappa_x - 2.0).abs() < 1e-13);
    }

    #[test]
    fn zero_coupling_schur_is_c() {
        let c = DenseMatrix::from_diag(&[0.3, 0.7]);
        let p = QuadraticProblem::new(DenseMatrix::identity(2), DenseMatrix::zeros(2, 2), c.clone(), 1.0, 1.0).unwrap();
        assert_eq!(p.schur().unwrap(), c);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(0.5), scalar(0.2), 1.0, 1.0)
            .unwrap()
            .with_optimum(vec![0.7], vec![-0.3])
            .unwrap();
        let (gx, gy) = p.grad(&p.z_star()).unwrap();
        assert_eq!(gx, vec![0.0]);
        assert_eq!(gy, vec![0.0]);
    }

    #[test]
    fn primal_gap_scalar() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(3f64.sqrt()), scalar(-2.0), 2.0, 1.0).unwrap();
        assert_eq!(p.primal_gap(&[0.0]).unwrap(), 0.0);
        assert!((p.primal_gap(&[2.0]).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn primal_gap_rejects_concave_primal() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(0.0), scalar(-1.0), 1.0, 1.0).unwrap();
        assert!(matches!(p.primal_gap(&[1.0]), Err(ProblemError::InvalidState(_))));
    }

    #[test]
    fn zero_noise_is_exact() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(0.5), scalar(0.2), 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = [0.4, -1.1];
        let noise = NoiseModel::new(0.0, 8).unwrap();
        assert_eq!(p.stochastic_grad(&z, &noise, &mut rng).unwrap(), p.grad(&z).unwrap());
    }

    #[test]
    fn noise_model_rejects_bad_parameters() {
        assert!(NoiseModel::new(-1.0, 1).is_err());
        assert!(NoiseModel::new(1.0, 0).is_err());
    }

    #[test]
    fn regularize_rejects_out_of_range_delta() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(0.5), scalar(0.2), 1.0, 1.0).unwrap();
        assert!(p.regularize(0.0).is_err());
        assert!(p.regularize(1.5).is_err());
    }

    #[test]
    fn regularized_optimum_is_stationary() {
        let p = QuadraticProblem::new(
            DenseMatrix::from_diag(&[1.0, 2.0]),
            DenseMatrix::from_rows(&[vec![0.5, 0.1], vec![-0.2, 0.3]]).unwrap(),
            DenseMatrix::from_rows(&[vec![0.1, 0.0], vec![0.0, -0.05]]).unwrap(),
            2.0,
            1.0,
        )
        .unwrap()
        .with_optimum(vec![1.0, -2.0], vec![0.5, 0.25])
        .unwrap();
        let delta = 0.1;
        let r = p.regularize(delta).unwrap();
        // grad of f + delta/2 |x|^2 at the new optimum
        let (mut gx, gy) = p.grad(&r.z_star()).unwrap();
        for (g, x) in gx.iter_mut().zip(&r.x_star) {
            *g += delta * x;
        }
        assert!(gx.iter().chain(&gy).all(|g| g.abs() < 1e-13), "{gx:?} {gy:?}");
        // and the regularized instance's own gradient vanishes there as well
        let (rx, ry) = r.grad(&r.z_star()).unwrap();
        assert!(rx.iter().chain(&ry).all(|g| g.abs() < 1e-13));
    }

    #[test]
    fn json_field_names() {
        let p = QuadraticProblem::new(scalar(1.0), scalar(0.5), scalar(0.2), 1.0, 1.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        for key in ["n", "m", "L", "mu", "A", "B", "C", "x_star", "y_star"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(QuadraticProblem::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn json_rejects_inconsistent_dimensions() {
        let s = r#"{"n":2,"m":1,"L":1.0,"mu":1.0,"A":[[1.0]],"B":[[0.0]],"C":[[0.0]],"x_star":[0.0],"y_star":[0.0]}"#;
        assert!(QuadraticProblem::from_json(s).is_err());
    }
}
