use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ttgda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttgda"))
        .args(args)
        .env("TTGDA_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn generate_is_deterministic_and_prints_constants() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "-n", "4", "-m", "4", "-L", "100", "--mu", "1", "--seed", "7"];
    let a = ttgda(dir.path(), &[&args[..], &["-o", "a.json"]].concat());
    let b = ttgda(dir.path(), &[&args[..], &["-o", "b.json"]].concat());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let fa = std::fs::read(dir.path().join("a.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(fa, fb);
    let out = stdout(&a);
    for key in ["mu_x ", "kappa ", "kappa_x "] {
        assert!(out.lines().any(|l| l.starts_with(key)), "{out}");
    }
    let inst: Value = serde_json::from_slice(&fa).unwrap();
    assert_eq!(inst["n"], 4);
    assert_eq!(inst["A"].as_array().unwrap().len(), 4);
    assert!(stdout(&b).contains("b.json"));
}

#[test]
fn generate_mu_x_zero_has_singular_schur() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttgda(dir.path(), &["generate", "--mu-x-zero", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o).lines().find(|l| l.starts_with("schur_min_eig")).unwrap().to_string();
    let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(v.abs() <= 1e-9 * 100.0, "{v}");
}

#[test]
fn inspect_hard_ratio_instance() {
    let dir = tempfile::tempdir().unwrap();
    let below = ttgda(dir.path(), &["inspect", "--hard-ratio", "-L", "10", "--mu", "1", "-r", "1k"]);
    assert_eq!(code(&below), 0);
    let rep: Value = serde_json::from_str(&stdout(&below)).unwrap();
    assert!(rep["rho1"].as_f64().unwrap() > 1.0);
    assert_eq!(rep["verdict"], "below_threshold");

    let above = ttgda(dir.path(), &["inspect", "--hard-ratio", "-L", "10", "--mu", "1", "-r", "2k"]);
    let rep: Value = serde_json::from_str(&stdout(&above)).unwrap();
    assert_eq!(rep["verdict"], "proved_convergent");
    assert!(rep["rho1"].as_f64().unwrap() <= rep["rho_bound"].as_f64().unwrap());
    assert_eq!(rep["lemma_checks"].as_array().unwrap().len(), 5);
}

#[test]
fn malformed_instance_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let o = ttgda(dir.path(), &["inspect", "--instance", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&ttgda(dir.path(), &["inspect", "--no-such-flag"])), 1);
    assert_eq!(code(&ttgda(dir.path(), &["--help"])), 0);
}

#[test]
fn run_converges_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    ttgda(dir.path(), &["generate", "-L", "10", "--mu-x-floor", "0.5", "--seed", "1"]);
    let inst = dir.path().join("instance.json");
    for alg in ["gda", "eg"] {
        let out = format!("{alg}.csv");
        let o = ttgda(
            dir.path(),
            &["run", "--instance", inst.to_str().unwrap(), "--algorithm", alg, "-r", "2k", "--seed", "0", "-o", &out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let line = stdout(&o);
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert_eq!(fields[0], "converged");
        assert!(fields[2].parse::<f64>().unwrap() <= 1e-6);
        let rate: f64 = fields[3].parse().unwrap();
        assert!(rate > 0.0 && rate < 1.0);
        let csv = std::fs::read_to_string(dir.path().join(&out)).unwrap();
        assert!(csv.starts_with("iter,distance,primal_gap\r\n"));
    }
}

#[test]
fn zero_noise_sgda_matches_gda_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["run", "--hard-rate", "-L", "2", "--mu", "1", "--mu-x", "0.5", "-r", "4", "--seed", "5"];
    let g = ttgda(dir.path(), &[&base[..], &["-o", "g.csv"]].concat());
    let s = ttgda(
        dir.path(),
        &[&base[..], &["--algorithm", "sgda", "--sigma", "0", "--batch", "1", "-o", "s.csv"]].concat(),
    );
    assert_eq!(code(&g), 0);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(stdout(&g), stdout(&s));
    assert_eq!(
        std::fs::read(dir.path().join("g.csv")).unwrap(),
        std::fs::read(dir.path().join("s.csv")).unwrap()
    );
}

#[test]
fn divergence_exits_zero_and_sgda_needs_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttgda(dir.path(), &["run", "--hard-ratio", "-L", "10", "--mu", "1", "-r", "0.5k", "--eta-y", "0.05"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("diverged "), "{}", stdout(&o));
    let o = ttgda(dir.path(), &["run", "--hard-ratio", "--algorithm", "sgda", "--sigma", "1", "--batch", "4"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "-L", "10", "--mu-x-floor", "0.5", "--ratios", "0.5k,2k", "--seeds", "0,1", "--max-iters", "200000"];
    let a = ttgda(dir.path(), &[&args[..], &["-o", "a.csv", "--jobs", "1"]].concat());
    let b = ttgda(dir.path(), &[&args[..], &["-o", "b.csv", "--jobs", "2"]].concat());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let ca = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(ca, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(ca.lines().count(), 5);
    assert_eq!(code(&b), 0);
    let j = ttgda(dir.path(), &[&args[..], &["--format", "json", "-o", "s.json"]].concat());
    assert_eq!(code(&j), 0);
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_spectral_quick_and_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ttgda(dir.path(), &["verify", "spectral", "--budget", "quick", "--seed", "1"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["results"].as_array().unwrap().len(), 2);

    let bad = ttgda(
        dir.path(),
        &["verify", "spectral", "--budget", "quick", "--bound-constant", "0.5", "-o", "bad.json"],
    );
    assert_eq!(code(&bad), 2, "{}", stdout(&bad));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("FAIL [2]")));
}
