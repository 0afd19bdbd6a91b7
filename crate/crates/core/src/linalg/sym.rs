use super::{DenseMatrix, LinalgError, ABS_FLOOR};

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DenseMatrix,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// The input must be square and symmetric to `1e-12 * ||S||`. Sweeps over all
/// off-diagonal pairs until the off-diagonal mass is negligible against the
/// diagonal, then sorts the spectrum ascending.
pub fn sym_eig(s: &DenseMatrix) -> Result<SymEig, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::InvalidInput(format!(
            "sym_eig needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    if n == 0 {
        return Err(LinalgError::InvalidInput("empty matrix".into()));
    }
    let scale = s.frobenius_norm();
    if s.asymmetry() > SYMMETRY_TOL * scale.max(ABS_FLOOR) {
        return Err(LinalgError::InvalidInput(format!(
            "matrix is not symmetric (max |s_ij - s_ji| = {:e})",
            s.asymmetry()
        )));
    }

    let mut a = s.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // negligible against both diagonals (or the whole matrix): drop it
                let diag = a[(p, p)].abs() + a[(q, q)].abs();
                if apq.abs() <= 1e-3 * f64::EPSILON * diag
                    || apq.abs() <= 1e-3 * f64::EPSILON * f64::EPSILON * scale
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // rotation angle that annihilates a_pq
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            routine: "jacobi",
            iterations: MAX_SWEEPS,
            partial: Vec::new(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEig { values, vectors })
}

/// Largest singular value, `sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    // use the smaller Gram matrix
    let gram = if m.rows() < m.cols() {
        m.matmul(&m.transpose())
    } else {
        m.transpose().matmul(m)
    };
    let eig = sym_eig(&gram.symmetrize())?;
    Ok(eig.max().max(0.0).sqrt())
}
