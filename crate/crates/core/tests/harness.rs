use ttgda::dynamics::Algorithm;
use ttgda::exec::Executor;
use ttgda::harness::{
    divergence_report, log_spaced, rate_lower_bound_check, ratio_sweep, ExperimentSpec, InstanceSource, RatioChoice,
    StepsizeChoice,
};
use ttgda::problems::{NoiseModel, SampleOptions};
use ttgda::spectral::spectral_report;

fn small_spec(seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        max_iters: 200_000,
        seeds: vec![0, 1, 2],
        algorithms: vec![Algorithm::Gda, Algorithm::Eg],
        ..ExperimentSpec::quadratic_default(seed)
    }
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_executors() {
    let spec = small_spec(3);
    let a = ratio_sweep(&spec, &Executor::Sequential).unwrap().to_csv_string();
    let b = ratio_sweep(&spec, &Executor::Sequential).unwrap().to_csv_string();
    let c = ratio_sweep(&spec, &Executor::Parallel { jobs: 2 }).unwrap().to_csv_string();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.starts_with("ratio,seed,algorithm,status,measured_rate,rho1,iters_to_eps,final_distance,final_gap\r\n"));
    assert_eq!(a.lines().count(), 1 + 4 * 3 * 2);
}

#[test]
fn proved_ratios_converge_within_three_times_prediction() {
    for seed in 0..4 {
        let spec = ExperimentSpec {
            instance: InstanceSource::Generated {
                n: 4,
                m: 4,
                l: 20.0,
                mu: 1.0,
                seed,
                options: SampleOptions {
                    mu_x_floor: 1.0,
                    ..Default::default()
                },
            },
            ratios: vec![RatioChoice::KappaTimes(0.5), RatioChoice::KappaTimes(2.0), RatioChoice::KappaTimes(8.0)],
            ..small_spec(seed)
        };
        let problem = spec.instance.load().unwrap();
        let res = ratio_sweep(&spec, &Executor::default()).unwrap();
        for row in res.rows.iter().filter(|r| r.ratio >= 2.0 * problem.kappa()) {
            assert_eq!(row.status, "converged", "instance {seed} ratio {} {:?}", row.ratio, row.algorithm);
            let (ex, _) = spec.stepsizes.stepsizes(problem.l, row.ratio);
            let rep = spectral_report(&problem, row.ratio, ex).unwrap();
            let predicted = match row.algorithm {
                Algorithm::Eg => rep.predicted_iters_eg(spec.eps, 1.0),
                _ => rep.predicted_iters(spec.eps, 1.0),
            }
            .unwrap();
            let iters = row.iters_to_eps.unwrap() as f64;
            assert!(iters <= 3.0 * predicted, "instance {seed} ratio {}: {iters} > 3 x {predicted}", row.ratio);
            let measured = row.measured_rate.unwrap();
            assert!(measured <= rep.rho_bound, "{measured} > {}", rep.rho_bound);
        }
    }
}

#[test]
fn half_kappa_ratio_diverges_the_hard_instance() {
    let spec = ExperimentSpec {
        instance: InstanceSource::HardRatio { l: 10.0, mu: 1.0 },
        ratios: vec![RatioChoice::KappaTimes(0.5), RatioChoice::KappaTimes(2.0)],
        stepsizes: StepsizeChoice::Quarter,
        max_iters: 100_000,
        ..ExperimentSpec::quadratic_default(0)
    };
    let res = ratio_sweep(&spec, &Executor::Sequential).unwrap();
    assert_eq!(res.rows[0].status, "diverged");
    assert_eq!(res.rows[1].status, "converged");
    assert!(res.rows[0].rho1.unwrap() > 1.0);
}

#[test]
fn divergence_certificate_small_grid() {
    let report = divergence_report(&[(1.0, 4.0), (10.0, 20.0)], &log_spaced(1e-4, 0.5, 5), 10_000, &Executor::default()).unwrap();
    assert_eq!(report.cells.len(), 2 * 2 * 5);
    assert!(report.passed, "{:?}", report.first_failure());
    assert!(report.cells.iter().all(|c| !c.status.is_converged()));
}

#[test]
fn rate_lower_bound_on_hard_rate_instance() {
    let rep = rate_lower_bound_check(2.0, 1.0, 0.1, 4.0, 1000).unwrap();
    assert!(rep.passed);
    assert!(rep.s1 >= rep.bound && rep.s1 < 1.0);
    assert!(rate_lower_bound_check(2.0, 1.0, 0.1, 3.0, 100).is_err());
}

#[test]
fn spec_validation_and_json() {
    let mut spec = ExperimentSpec::quadratic_default(1);
    spec.noise = Some(NoiseModel::new(0.1, 4).unwrap());
    let json = serde_json::to_string(&spec).unwrap();
    let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);
    spec.algorithms.push(Algorithm::Sgda);
    assert!(spec.validate().is_ok());
    spec.noise = None;
    assert!(spec.validate().is_err());
    spec.ratios.clear();
    assert!(spec.validate().is_err());
}

#[test]
fn ratio_choice_parsing() {
    assert_eq!("2k".parse::<RatioChoice>().unwrap(), RatioChoice::KappaTimes(2.0));
    assert_eq!("0.5kappa".parse::<RatioChoice>().unwrap(), RatioChoice::KappaTimes(0.5));
    assert_eq!("2k2".parse::<RatioChoice>().unwrap(), RatioChoice::KappaSquaredTimes(2.0));
    assert_eq!("12.5".parse::<RatioChoice>().unwrap(), RatioChoice::Absolute(12.5));
    assert!("-1".parse::<RatioChoice>().is_err());
    assert!("k3".parse::<RatioChoice>().is_err());
}
