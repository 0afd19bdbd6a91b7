use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttgda::linalg::{general_eig, norm2, solve_spd, spectral_norm, sym_eig, DenseMatrix};

fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn power_iteration(s: &DenseMatrix, iters: usize) -> f64 {
    let mut v = vec![1.0; s.rows()];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = s.matvec(&v);
        lambda = norm2(&w) / norm2(&v);
        let n = norm2(&w);
        v = w.iter().map(|x| x / n).collect();
    }
    lambda
}

#[test]
fn rotation_scaling_block_has_conjugate_pair() {
    let m = DenseMatrix::from_rows(&[vec![0.5, -2.0], vec![2.0, 0.5]]).unwrap();
    let e = general_eig(&m).unwrap();
    let mut ims: Vec<f64> = e.values.iter().map(|v| v.im).collect();
    ims.sort_by(f64::total_cmp);
    for v in &e.values {
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-12);
    }
    assert_relative_eq!(ims[0], -2.0, epsilon = 1e-12);
    assert_relative_eq!(ims[1], 2.0, epsilon = 1e-12);
}

#[test]
fn general_eig_matches_trace_det_and_residuals() {
    for seed in 0..20 {
        let n = 2 + (seed as usize % 7);
        let m = random_matrix(n, seed);
        let e = general_eig(&m).unwrap();
        assert_eq!(e.values.len(), n);
        let sum: Complex64 = e.values.iter().sum();
        let prod: Complex64 = e.values.iter().product();
        let scale = m.frobenius_norm();
        assert!((sum.re - m.trace()).abs() <= 1e-10 * scale, "seed {seed}");
        assert!(sum.im.abs() <= 1e-10 * scale);
        assert!((prod.re - m.determinant()).abs() <= 1e-9 * scale.powi(n as i32).max(1.0));
        let vecs = e.vectors.expect("random matrices are diagonalizable");
        let mc = ttgda::linalg::ComplexMatrix::from_real(&m);
        for (j, lam) in e.values.iter().enumerate() {
            let v = vecs.column(j);
            let mv = mc.matvec(&v);
            let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - lam * b).norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * scale, "seed {seed} residual {res}");
        }
    }
}

#[test]
fn spectral_radius_agrees_with_power_iteration_on_spd() {
    let g = random_matrix(6, 99);
    let s = g.matmul(&g.transpose()).shift_diag(0.1);
    let radius = general_eig(&s).unwrap().spectral_radius();
    let top = sym_eig(&s).unwrap().max();
    assert_relative_eq!(radius, top, max_relative = 1e-10);
    assert_relative_eq!(power_iteration(&s, 2000), top, max_relative = 1e-8);
    assert_relative_eq!(spectral_norm(&s).unwrap(), top, max_relative = 1e-10);
}

#[test]
fn cholesky_solves_spd_systems() {
    let g = random_matrix(5, 7);
    let s = g.matmul(&g.transpose()).shift_diag(1.0);
    let b = vec![1.0, -2.0, 0.5, 3.0, 0.0];
    let x = solve_spd(&s, &b).unwrap();
    let sx = s.matvec(&x);
    for (u, v) in sx.iter().zip(&b) {
        assert_relative_eq!(u, v, epsilon = 1e-12);
    }
}

#[test]
fn non_square_input_is_rejected() {
    let m = DenseMatrix::zeros(2, 3);
    assert!(general_eig(&m).is_err());
    assert!(sym_eig(&m).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_reconstruction(n in 1usize..7, seed in any::<u64>()) {
        let s = random_matrix(n, seed).symmetrize();
        let e = sym_eig(&s).unwrap();
        let q = &e.vectors;
        let back = q.matmul(&DenseMatrix::from_diag(&e.values)).matmul(&q.transpose());
        prop_assert!(back.sub(&s).max_abs() <= 1e-12 * s.max_abs().max(1.0));
        let qtq = q.transpose().matmul(q);
        prop_assert!(qtq.sub(&DenseMatrix::identity(n)).max_abs() <= 1e-12);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvalues_come_in_conjugate_pairs(n in 2usize..8, seed in any::<u64>()) {
        let m = random_matrix(n, seed);
        let e = general_eig(&m).unwrap();
        let tol = 1e-9 * m.frobenius_norm();
        for v in &e.values {
            prop_assert!(e.values.iter().any(|w| (w - v.conj()).norm() <= tol));
        }
    }
}
