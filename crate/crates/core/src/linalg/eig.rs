use num_complex::Complex64;

use super::complex::ComplexLu;
use super::{ComplexMatrix, DenseMatrix, LinalgError, ABS_FLOOR};

/// Eigenvalues (with multiplicity) and, when inverse iteration succeeded for
/// every one of them, the matching unit-norm right eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct GeneralEig {
    pub values: Vec<Complex64>,
    pub vectors: Option<ComplexMatrix>,
}

impl GeneralEig {
    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

const INVERSE_ITERATION_STEPS: usize = 6;
const EIGVEC_RESIDUAL_TOL: f64 = 1e-8;

/// Reduces a square matrix to upper Hessenberg form by Householder
/// similarity transforms. Returns the reduced matrix only.
pub fn hessenberg(m: &DenseMatrix) -> DenseMatrix {
    assert!(m.is_square());
    let n = m.rows();
    let mut a = m.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xn == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xn } else { xn };
        let mut v = x;
        v[0] -= alpha;
        let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|t| *t /= vn);
        // left: rows k+1.., all columns from k
        for j in k..n {
            let s: f64 = (0..v.len()).map(|t| v[t] * a[(k + 1 + t, j)]).sum();
            for t in 0..v.len() {
                a[(k + 1 + t, j)] -= 2.0 * v[t] * s;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let s: f64 = (0..v.len()).map(|t| a[(i, k + 1 + t)] * v[t]).sum();
            for t in 0..v.len() {
                a[(i, k + 1 + t)] -= 2.0 * s * v[t];
            }
        }
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
    a
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR with
/// exceptional shifts after 10 and 20 stalled iterations.
fn hessenberg_qr(h: &DenseMatrix) -> Result<Vec<Complex64>, LinalgError> {
    let n = h.rows();
    // 1-based working copy keeps the index arithmetic readable
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut found = vec![false; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let cap = 100 * n.max(1);
    let mut total_its = 0usize;

    let partial = |wr: &[f64], wi: &[f64], found: &[bool]| -> Vec<Complex64> {
        (1..=n)
            .filter(|&i| found[i])
            .map(|i| Complex64::new(wr[i], wi[i]))
            .collect()
    };

    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= f64::EPSILON * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                found[nn] = true;
                nn -= 1;
            } else {
                let mut y = a[nn - 1][nn - 1];
                let mut w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let zz = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        let z = p + zz.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = zz;
                        wi[nn] = -zz;
                    }
                    found[nn - 1] = true;
                    found[nn] = true;
                    nn -= 2;
                } else {
                    if total_its >= cap {
                        return Err(LinalgError::NoConvergence {
                            routine: "francis_qr",
                            iterations: total_its,
                            partial: partial(&wr, &wi, &found),
                        });
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for (i, row) in a.iter_mut().enumerate().take(nn + 1).skip(1) {
                            row[i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    total_its += 1;

                    let (mut p, mut q, mut r);
                    let mut m = nn - 2;
                    loop {
                        let z = a[m][m];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - rr - ss;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u <= f64::EPSILON * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    pp += r * a[k + 2][j];
                                    a[k + 2][j] -= pp * z;
                                }
                                a[k + 1][j] -= pp * y;
                                a[k][j] -= pp * x;
                            }
                            let mmin = nn.min(k + 3);
                            for row in a.iter_mut().take(mmin + 1).skip(l) {
                                let mut pp = x * row[k] + y * row[k + 1];
                                if k != nn - 1 {
                                    pp += z * row[k + 2];
                                    row[k + 2] -= pp * r;
                                }
                                row[k + 1] -= pp * q;
                                row[k] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// All eigenvalues of a real square matrix, plus right eigenvectors from
/// shifted inverse iteration.
///
/// Complex eigenvalues come in exact conjugate pairs (positive imaginary part
/// first); their eigenvectors are conjugates of each other. When inverse
/// iteration fails to reach a residual of `1e-8 * ||M||` for some eigenvalue,
/// `vectors` is `None` and the eigenvalues are still returned.
pub fn general_eig(m: &DenseMatrix) -> Result<GeneralEig, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::InvalidInput(format!(
            "general_eig needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Err(LinalgError::InvalidInput("empty matrix".into()));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::InvalidInput("non-finite entry".into()));
    }
    let raw = hessenberg_qr(&hessenberg(m))?;

    // canonical ordering: descending modulus, then real part, then imaginary part
    let mut values: Vec<Complex64> = Vec::with_capacity(raw.len());
    let mut rest = raw;
    rest.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    // force exact conjugate symmetry of the pairs
    let mut used = vec![false; rest.len()];
    for i in 0..rest.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let v = rest[i];
        if v.im == 0.0 {
            values.push(v);
            continue;
        }
        let partner = (0..rest.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (rest[a] - v.conj()).norm().total_cmp(&(rest[b] - v.conj()).norm()));
        let avg = match partner {
            Some(j) => {
                used[j] = true;
                Complex64::new(0.5 * (v.re + rest[j].re), 0.5 * (v.im.abs() + rest[j].im.abs()))
            }
            None => Complex64::new(v.re, v.im.abs()),
        };
        values.push(avg);
        values.push(avg.conj());
    }

    let vectors = eigenvectors(m, &values);
    Ok(GeneralEig { values, vectors })
}

fn eigenvectors(m: &DenseMatrix, values: &[Complex64]) -> Option<ComplexMatrix> {
    let n = m.rows();
    let norm = m.frobenius_norm().max(ABS_FLOOR);
    let cm = ComplexMatrix::from_real(m);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut i = 0;
    while i < values.len() {
        let lambda = values[i];
        // vectors already found for (numerically) the same eigenvalue
        let cluster: Vec<&Vec<Complex64>> = cols
            .iter()
            .zip(values)
            .filter(|(_, &mu)| (mu - lambda).norm() <= 1e-8 * norm)
            .map(|(c, _)| c)
            .collect();
        let v = inverse_iteration(&cm, lambda, norm, i, &cluster)?;
        if lambda.im != 0.0 {
            let conj: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
            cols.push(v);
            cols.push(conj);
            i += 2;
        } else {
            cols.push(v);
            i += 1;
        }
    }
    Some(ComplexMatrix::from_columns(&cols))
}

fn inverse_iteration(
    m: &ComplexMatrix,
    lambda: Complex64,
    norm: f64,
    index: usize,
    cluster: &[&Vec<Complex64>],
) -> Option<Vec<Complex64>> {
    let n = m.rows();
    let shift = lambda + Complex64::new(1e-10 * norm, 0.0);
    let mut shifted = m.clone();
    for k in 0..n {
        shifted[(k, k)] -= shift;
    }
    let lu = ComplexLu::new(shifted, f64::EPSILON * norm);

    // deterministic, index-dependent start vector
    let mut v: Vec<Complex64> = (0..n)
        .map(|k| {
            let phase = ((k * 7 + index * 13) % 17) as f64 / 17.0;
            Complex64::new(1.0 + phase, 0.5 - phase)
        })
        .collect();
    orthogonalize(&mut v, cluster);
    normalize(&mut v)?;

    let residual = |v: &[Complex64]| -> f64 {
        let mv = m.matvec(v);
        mv.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt()
    };
    for _ in 0..INVERSE_ITERATION_STEPS {
        let mut w = lu.solve(&v);
        orthogonalize(&mut w, cluster);
        normalize(&mut w)?;
        v = w;
        if residual(&v) <= 1e-3 * EIGVEC_RESIDUAL_TOL * norm {
            break;
        }
    }
    // fix the phase so the largest component is real positive
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = big.conj() / big.norm();
    v.iter_mut().for_each(|z| *z *= phase);
    (residual(&v) <= EIGVEC_RESIDUAL_TOL * norm).then_some(v)
}

fn orthogonalize(v: &mut [Complex64], basis: &[&Vec<Complex64>]) {
    for b in basis {
        let proj: Complex64 = b.iter().zip(v.iter()).map(|(bi, vi)| bi.conj() * vi).sum();
        for (vi, bi) in v.iter_mut().zip(b.iter()) {
            *vi -= proj * bi;
        }
    }
}

fn normalize(v: &mut [Complex64]) -> Option<()> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !n.is_finite() || n == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= n);
    Some(())
}
