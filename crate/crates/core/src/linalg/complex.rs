use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use super::{sym_eig, DenseMatrix, LinalgError, ABS_FLOOR};

/// Row-major dense complex matrix. Only what eigenvector work needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_real(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<Complex64>]) -> Self {
        let n = cols.first().map_or(0, Vec::len);
        let mut out = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Real embedding `[[Re, -Im], [Im, Re]]`, whose singular values are
    /// those of `self`, each repeated twice.
    pub fn real_embedding(&self) -> DenseMatrix {
        let (n, m) = (self.rows, self.cols);
        DenseMatrix::from_fn(2 * n, 2 * m, |i, j| {
            let z = self[(i % n, j % m)];
            match (i < n, j < m) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// In-place LU with partial pivoting. Tiny pivots are replaced by `floor` so
/// inverse iteration can proceed on (nearly) singular shifted matrices.
pub(crate) struct ComplexLu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl ComplexLu {
    pub(crate) fn new(mut a: ComplexMatrix, floor: f64) -> Self {
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
                .unwrap_or(k);
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            if a[(k, k)].norm() < floor {
                a[(k, k)] = Complex64::new(floor, 0.0);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        Self { lu: a, perm }
    }

    pub(crate) fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let yk = y[k];
                y[i] -= l * yk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let yk = y[k];
                y[i] -= u * yk;
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }
}

/// Singular values of a complex matrix, descending.
///
/// Computed as the positive eigenvalues of the symmetric Jordan-Wielandt
/// matrix `[[0, E], [E^T, 0]]` of the real embedding `E`. This keeps the
/// small singular values accurate to `eps * sigma_max` instead of squaring
/// the condition number through a Gram matrix.
pub fn singular_values_complex(p: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    let e = p.real_embedding();
    let (r, c) = (e.rows(), e.cols());
    let zeros_r = DenseMatrix::zeros(r, r);
    let zeros_c = DenseMatrix::zeros(c, c);
    let jw = DenseMatrix::block(&zeros_r, &e, &e.transpose(), &zeros_c);
    let eig = sym_eig(&jw)?;
    let k = p.rows().min(p.cols());
    // top 2k eigenvalues are the singular values of E, each doubled
    let mut sv: Vec<f64> = eig.values.iter().rev().take(2 * k).step_by(2).map(|v| v.max(0.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// 2-norm condition number `sigma_max / sigma_min`.
pub fn cond_2(p: &ComplexMatrix) -> Result<f64, LinalgError> {
    if p.rows() != p.cols() || p.rows() == 0 {
        return Err(LinalgError::InvalidInput("cond_2 needs a non-empty square matrix".into()));
    }
    let sv = singular_values_complex(p)?;
    let (max, min) = (sv[0], *sv.last().unwrap());
    if max <= ABS_FLOOR || min <= 1e-12 * max {
        return Err(LinalgError::Singular {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok((max / min).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cond_of_identity_and_diag() {
        let i = ComplexMatrix::from_real(&DenseMatrix::identity(3));
        assert!((cond_2(&i).unwrap() - 1.0).abs() < 1e-14);
        let d = ComplexMatrix::from_real(&DenseMatrix::from_diag(&[10.0, 1.0]));
        assert!((cond_2(&d).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cond_rejects_singular() {
        let d = ComplexMatrix::from_real(&DenseMatrix::from_diag(&[1.0, 0.0]));
        assert!(matches!(cond_2(&d), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn unitary_complex_matrix_has_unit_condition() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut u = ComplexMatrix::zeros(2, 2);
        u[(0, 0)] = Complex64::new(s, 0.0);
        u[(0, 1)] = Complex64::new(s, 0.0);
        u[(1, 0)] = Complex64::new(0.0, s);
        u[(1, 1)] = Complex64::new(0.0, -s);
        assert!((cond_2(&u).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lu_solves() {
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 0)] = Complex64::new(0.0, 1.0);
        a[(0, 1)] = Complex64::new(2.0, 0.0);
        a[(1, 0)] = Complex64::new(3.0, 0.0);
        a[(1, 1)] = Complex64::new(1.0, -1.0);
        let x = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let b = a.matvec(&x);
        let got = ComplexLu::new(a, 1e-300).solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-14);
        }
    }
}
