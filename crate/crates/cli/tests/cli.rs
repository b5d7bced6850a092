use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "
[scene]
n = 32
m = 16
sigma2 = 0.01
prior = two-level:0.02,0.5,0.75
seed = 9

[run]
snr_db = 10, 20
trials = 12
calibration_trials = 12

[detector.dwld]
kind = dwld
weights = linear:0.1,0.1
pfa = 0.01

[detector.nwld]
kind = nwld
weights = linear:0.1,0.1
kappa = match:dwld

[optimize]
mc = 4
max_evaluations = 60
";

fn dwld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwld"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.conf");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dwld(&["simulate", "--config", &cfg, "--threads", "1"]);
    let b = dwld(&["simulate", "--config", &cfg, "--threads", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# threads"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&text), strip(&String::from_utf8(b.stdout).unwrap()));
    assert!(text.contains("detector,snr_db,pfa_target"));
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("dwld,") || l.starts_with("nwld,"))
            .count(),
        4
    );
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("r.json");
    let o = dwld(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--trials",
        "3",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("\"seed\": 4"));
    assert!(text.contains("\"n_trials\": 3"));
}

#[test]
fn dump_then_detect_and_fixpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let dump = dir.path().join("scene");
    assert!(dwld(&[
        "simulate",
        "--config",
        &cfg,
        "--trials",
        "1",
        "--dump",
        dump.to_str().unwrap()
    ])
    .status
    .success());
    let p = |f: &str| dump.join(f).to_str().unwrap().to_string();
    let o = dwld(&[
        "detect",
        "--y",
        &p("snr0_y.txt"),
        "--a",
        &p("snr0_a.txt"),
        "--weights",
        &p("weights_dwld.txt"),
        "--sigma2",
        "0.01",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"sigma_w2\""));
    assert!(text.contains("\"detected\""));

    let zero = dir.path().join("zero.txt");
    std::fs::write(&zero, "4\n0,0\n0,0\n0,0\n0,0\n").unwrap();
    let o = dwld(&[
        "fixpoint",
        "--x",
        zero.to_str().unwrap(),
        "--lambda",
        "0.1",
        "--gamma",
        "0.25",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("lambda_cro = 0.25"));
    assert!(text.contains("rho_ca = 0\n"));
}

#[test]
fn non_orthogonal_matrix_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let y = dir.path().join("y.txt");
    std::fs::write(&a, "2 3\n1,0\n1,0\n0,0\n0,0\n1,0\n1,0\n").unwrap();
    std::fs::write(&y, "2\n1,0\n0.5,0\n").unwrap();
    let o = dwld(&[
        "detect",
        "--y",
        y.to_str().unwrap(),
        "--a",
        a.to_str().unwrap(),
        "--lambda",
        "0.05",
        "--sigma2",
        "0.01",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("# lambda_cro"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        dwld(&["simulate", "--config", "/definitely/missing.conf"])
            .status
            .code(),
        Some(1)
    );
    let bad = write_config(
        dir.path(),
        "[scene]\nn = 8\nm = 4\nprior = uniform:0.1\nwat = 1\n",
    );
    assert_eq!(dwld(&["simulate", "--config", &bad]).status.code(), Some(1));

    let dense = dir.path().join("x.txt");
    std::fs::write(&dense, "4\n1,0\n1,0\n1,0\n0,0\n").unwrap();
    let o = dwld(&[
        "fixpoint",
        "--x",
        dense.to_str().unwrap(),
        "--lambda",
        "0.1",
        "--gamma",
        "0.25",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("increase"));
}

#[test]
fn optimize_weights_reports_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = dwld(&[
        "optimize-weights",
        "--config",
        &cfg,
        "--model",
        "exponential",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("lambda0,alpha,f2_mean"));
    assert!(text.lines().filter(|l| !l.starts_with('#')).count() > 48);
}
