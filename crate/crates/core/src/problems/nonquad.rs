use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProblemError, QuadraticProblem};

/// Quadratic base plus a logistic term in `x` only:
///
/// ```text
/// f(x; y) = f0(x; y) + (L/n) sum_i [ log(1 + e^{u_i}) + log(1 + e^{-u_i}) ],  u_i = a (x_i - b_i)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonQuadraticProblem {
    pub base: QuadraticProblem,
    pub a: f64,
    pub b: Vec<f64>,
}

/// Bounds on how far the Hessian strays from the quadratic base, blockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianDeviation {
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl HessianDeviation {
    /// `dxx + (r + 1) dxy + r dyy`.
    pub fn delta_r(&self, r: f64) -> f64 {
        self.dxx + (r + 1.0) * self.dxy + r * self.dyy
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

impl NonQuadraticProblem {
    pub fn new(base: QuadraticProblem, a: f64, b: Vec<f64>) -> Result<Self, ProblemError> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(ProblemError::InvalidInput(format!("need a >= 0, got {a}")));
        }
        if b.len() != base.n() {
            return Err(ProblemError::InvalidInput(format!(
                "b has length {}, expected {}",
                b.len(),
                base.n()
            )));
        }
        Ok(Self { base, a, b })
    }

    /// Offsets `b_i` drawn i.i.d. standard normal.
    pub fn with_random_offsets<R: Rng + ?Sized>(base: QuadraticProblem, a: f64, rng: &mut R) -> Result<Self, ProblemError> {
        let b = (0..base.n()).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(base, a, b)
    }

    /// `L / n`.
    pub fn scale(&self) -> f64 {
        self.base.l / self.base.n() as f64
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let n = self.base.n();
        let (x, y) = z.split_at(n);
        let dx: Vec<f64> = x.iter().zip(&self.base.x_star).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y.iter().zip(&self.base.y_star).map(|(a, b)| a - b).collect();
        let quad = -0.5 * crate::linalg::dot(&dy, &self.base.a.matvec(&dy))
            + crate::linalg::dot(&dx, &self.base.b.matvec(&dy))
            + 0.5 * crate::linalg::dot(&dx, &self.base.c.matvec(&dx));
        let extra: f64 = x
            .iter()
            .zip(&self.b)
            .map(|(xi, bi)| {
                let u = self.a * (xi - bi);
                softplus(u) + softplus(-u)
            })
            .sum();
        quad + self.scale() * extra
    }

    /// Adds the logistic part of the x-gradient: `(L/n) a (2 sigma(u_i) - 1)`.
    pub fn add_logistic_grad(&self, x: &[f64], gx: &mut [f64]) {
        let s = self.scale() * self.a;
        for ((g, xi), bi) in gx.iter_mut().zip(x).zip(&self.b) {
            *g += s * (2.0 * logistic(self.a * (xi - bi)) - 1.0);
        }
    }

    pub fn grad(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        let (mut gx, gy) = self.base.grad(z)?;
        self.add_logistic_grad(&z[..self.base.n()], &mut gx);
        Ok((gx, gy))
    }

    /// Diagonal of the logistic Hessian, `(L/n) a^2 2 sigma(u)(1 - sigma(u))`.
    pub fn logistic_hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale() * self.a * self.a;
        x.iter()
            .zip(&self.b)
            .map(|(xi, bi)| {
                let p = logistic(self.a * (xi - bi));
                s * 2.0 * p * (1.0 - p)
            })
            .collect()
    }

    /// Global bound: the logistic Hessian is diagonal with entries at most
    /// `a^2 L / (2n)` (attained at `u = 0`); the coupling and y-blocks are
    /// untouched.
    pub fn hessian_deviation(&self) -> HessianDeviation {
        HessianDeviation {
            dxx: self.a * self.a * self.base.l / (2.0 * self.base.n() as f64),
            dxy: 0.0,
            dyy: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn base() -> QuadraticProblem {
        QuadraticProblem::new(
            DenseMatrix::from_diag(&[1.0, 2.0]),
            DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.1, 0.4]]).unwrap(),
            DenseMatrix::from_diag(&[0.2, -0.1]),
            2.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn logistic_gradient_vanishes_at_offsets() {
        let nq = NonQuadraticProblem::new(base(), 1.3, vec![0.4, -0.7]).unwrap();
        let mut g = vec![0.0; 2];
        nq.add_logistic_grad(&[0.4, -0.7], &mut g);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn delta_r_without_coupling_is_constant() {
        let nq = NonQuadraticProblem::new(base(), 2.0, vec![0.0, 0.0]).unwrap();
        let d = nq.hessian_deviation();
        assert_eq!(d.dxx, 4.0 * 2.0 / 4.0);
        for r in [1.0, 10.0, 1e4] {
            assert_eq!(d.delta_r(r), d.dxx);
        }
    }

    #[test]
    fn zero_a_is_the_base() {
        let nq = NonQuadraticProblem::new(base(), 0.0, vec![1.0, 2.0]).unwrap();
        let z = [0.3, -0.2, 0.9, 1.1];
        assert_eq!(nq.grad(&z).unwrap(), nq.base.grad(&z).unwrap());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
    }
}
