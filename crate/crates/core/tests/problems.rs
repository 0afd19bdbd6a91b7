use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttgda::linalg::dot;
use ttgda::problems::{
    hard_rate_instance, hard_ratio_instance, sample_instance, NoiseModel, NonQuadraticProblem, QuadraticProblem,
    SampleOptions,
};

fn instance(seed: u64) -> QuadraticProblem {
    sample_instance(3, 4, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed), &SampleOptions::default()).unwrap()
}

fn finite_difference(f: impl Fn(&[f64]) -> f64, z: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..z.len())
        .map(|i| {
            let mut p = z.to_vec();
            let mut q = z.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn sampled_instances_satisfy_assumptions() {
    for seed in 0..10 {
        let p = instance(seed);
        let rep = p.validate().unwrap();
        assert!(rep.passed(), "seed {seed}: {:?}", rep.failed_clauses());
        assert!(p.derive_constants().unwrap().schur_min_eig >= -1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for a in [0.0, 0.7] {
        let base = instance(3).with_optimum(vec![0.1, -0.2, 0.3], vec![0.5, 0.0, -0.4, 0.2]).unwrap();
        let nq = NonQuadraticProblem::new(base, a, vec![0.3, -1.0, 0.2]).unwrap();
        let z = [0.4, -0.3, 1.2, 0.9, -0.1, 0.05, 0.6];
        let (gx, gy) = nq.grad(&z).unwrap();
        let fd = finite_difference(|w| nq.value(w), &z);
        for (g, f) in gx.iter().chain(&gy).zip(&fd) {
            assert_relative_eq!(g, f, epsilon = 1e-6, max_relative = 1e-6);
        }
    }
}

#[test]
fn noise_second_moment_matches_sigma_squared_over_batch() {
    let noise = NoiseModel::new(2.0, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 100_000;
    let mut sum = 0.0;
    let mut mean = [0.0; 3];
    for _ in 0..trials {
        let mut g = [0.0; 3];
        noise.perturb(&mut g, &mut rng);
        sum += dot(&g, &g);
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v / trials as f64;
        }
    }
    let second = sum / trials as f64;
    // sigma^2 / S = 1; standard error of the mean of a scaled chi^2_3 is ~ 0.8/sqrt(trials)
    assert!((second - 1.0).abs() < 0.02, "{second}");
    assert!(mean.iter().all(|m| m.abs() < 0.01));
}

#[test]
fn hard_instances_have_stated_constants() {
    let p = hard_ratio_instance(10.0, 1.0).unwrap();
    assert_eq!(p.kappa(), 10.0);
    let q = hard_rate_instance(2.0, 1.0, 0.1).unwrap();
    let k = q.derive_constants().unwrap();
    assert_relative_eq!(k.mu_x, 0.1, epsilon = 1e-14);
    assert_relative_eq!(q.primal_gap(&[2.0]).unwrap(), 0.2, epsilon = 1e-14);
    assert!(hard_ratio_instance(1.0, 1.0).is_err());
    assert!(hard_rate_instance(2.0, 1.0, 0.0).is_err());
}

#[test]
fn regularized_saddle_point_makes_gradient_vanish() {
    let p = instance(5).with_optimum(vec![0.3, 0.1, -0.2], vec![0.0; 4]).unwrap();
    let delta = 0.25;
    let reg = p.regularize(delta).unwrap();
    let zs = reg.z_star();
    // grad of f + delta/2 ||x||^2 at z*_delta, computed from the original f
    let (mut gx, gy) = p.grad(&zs).unwrap();
    for (g, x) in gx.iter_mut().zip(&zs) {
        *g += delta * x;
    }
    assert!(gx.iter().chain(&gy).all(|g| g.abs() < 1e-12));
    let (rx, ry) = reg.grad(&zs).unwrap();
    assert!(rx.iter().chain(&ry).all(|g| g.abs() < 1e-12));
}

#[test]
fn json_round_trip_is_exact() {
    let p = instance(8).with_optimum(vec![0.1 + 0.2, 1.0 / 3.0, -7e-300], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let back = QuadraticProblem::from_json(&p.to_json()).unwrap();
    assert_eq!(back, p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // gradient is affine in z: g(s z1 + (1 - s) z2) = s g(z1) + (1 - s) g(z2)
    #[test]
    fn gradient_is_affine(seed in 0u64..50, s in -2.0f64..2.0, u in prop::collection::vec(-5.0f64..5.0, 7), v in prop::collection::vec(-5.0f64..5.0, 7)) {
        let p = instance(seed);
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + (1.0 - s) * b).collect();
        let (gu, hu) = p.grad(&u).unwrap();
        let (gv, hv) = p.grad(&v).unwrap();
        let (gw, hw) = p.grad(&w).unwrap();
        let lhs: Vec<f64> = gw.into_iter().chain(hw).collect();
        let rhs: Vec<f64> = gu.iter().chain(&hu).zip(gv.iter().chain(&hv)).map(|(a, b)| s * a + (1.0 - s) * b).collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn primal_gap_is_nonnegative_and_zero_at_optimum(seed in 0u64..50, x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let p = instance(seed);
        prop_assert!(p.primal_gap(&x).unwrap() >= 0.0);
        prop_assert_eq!(p.primal_gap(&p.x_star).unwrap(), 0.0);
    }

    #[test]
    fn hessian_maps_offset_to_gradient(seed in 0u64..20, z in prop::collection::vec(-3.0f64..3.0, 7)) {
        let p = instance(seed).with_optimum(vec![0.2, -0.1, 0.4], vec![1.0, 0.0, -1.0, 0.5]).unwrap();
        let dz: Vec<f64> = z.iter().zip(p.z_star()).map(|(a, b)| a - b).collect();
        let hz = p.hessian().matvec(&dz);
        let (gx, gy) = p.grad(&z).unwrap();
        for (a, b) in gx.iter().chain(&gy).zip(&hz) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }
}
