use std::path::Path;
use std::process::{Command, Output};

fn heatctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatctl")).args(args).output().unwrap()
}

const SMALL: &str = r#"{"problem": {"nx": 30, "nt": 40, "omega": [0.3, 0.8],
    "u0": {"kind": "sine", "k": 1}, "u_d": {"kind": "parabola"}},
    "sweep": {"epsilons": [0.3, 0.2, 0.1]}}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn selftest_passes() {
    let out = heatctl(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn missing_csv_is_an_input_error() {
    let out = heatctl(&["fit", "definitely_missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"problem": {"nx": 1, "nt": 0, "omega": [0.8, 0.3], "u0": {"kind": "zero"}, "u_d": {"kind": "zero"}},
            "sweep": {"epsilons": [0.0]}}"#,
    );
    let out = heatctl(&["linear", &cfg, "--out", &dir.path().join("o").display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nx") && err.contains("nt") && err.contains("omega") && err.contains("epsilon"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", r#"{"problem": {"nx": 10, "nt": 10, "omega": [0.3, 0.8], "u0": {"kind": "zero"}, "u_d": {"kind": "zero"}}, "swep": {}}"#);
    let out = heatctl(&["semilinear", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("swep"));
}

#[test]
fn linear_sweep_writes_outputs_and_refits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out_dir = dir.path().join("run");
    let out = heatctl(&["linear", &cfg, "--out", &out_dir.display().to_string()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("epsilon,T_prime,N_used,cost_L2,err_L2,u_sup,picard_iters_total,converged,runtime_s\n"));
    assert!(out_dir.join("resolved_config.json").exists());
    assert!(out_dir.join("run.log").exists());

    let refit = heatctl(&["fit", &out_dir.join("sweep.csv").display().to_string(), "--out", &dir.path().join("f").display().to_string()]);
    assert_eq!(refit.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&refit.stdout).contains("empirical fit"));
    assert!(dir.path().join("f").join("fit_exp_inv_eps.dat").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let a = dir.path().join("a");
    heatctl(&["linear", &cfg, "--out", &a.display().to_string()]);
    let b = dir.path().join("b");
    let resolved = a.join("resolved_config.json").display().to_string();
    heatctl(&["linear", &resolved, "--out", &b.display().to_string()]);
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a.join("sweep.csv")), strip(&b.join("sweep.csv")));
}

#[test]
fn long_help_lists_config_keys() {
    let out = heatctl(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["nx", "omega", "epsilons", "t_prime_policy", "n_policy", "HEATCTL_THREADS"] {
        assert!(text.contains(key), "help lacks {key}");
    }
}
