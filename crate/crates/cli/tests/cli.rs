use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trapcert"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn trapcert")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL_SWEEP: &str = r#"
mode = "sweep-1d"
[potential]
kind = "quartic-family"
lambda = 0.0
omega = 1.0
[sweep]
parameter = "lambda"
values = [0.0, 0.5, 0.5, 1.0]
"#;

#[test]
fn certify_writes_certificate_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("harmonic.toml");
    let out = run(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap())
            .unwrap();
    let var = json["var_x"].as_f64().expect("var_x present");
    assert!((var - 0.5).abs() < 1e-6);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("overall: PASS"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "mode = \"certify-1d\"\nunknown_block = 1\n");
    let out = run(&["certify", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["certify", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    // Overrides are validated like the config itself.
    let cfg = configs().join("harmonic.toml");
    let out = run(&["certify", "--config", cfg.to_str().unwrap(), "--tau", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // Wrong subcommand for the config's mode.
    let out = run(&["magnetic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inconsistent_spectroscopy_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Gaussian density with variance 0.5 against a gap of 2: the bound 0.25 is violated.
    let xs: Vec<f64> = (0..=800).map(|i| -8.0 + i as f64 * 0.02).collect();
    let rho: Vec<String> = xs.iter().map(|x| format!("{:e}", (-x * x).exp())).collect();
    let xs: Vec<String> = xs.iter().map(|x| format!("{x:e}")).collect();
    let body = |delta: f64| {
        format!(
            "mode = \"spectro\"\n[spectro]\nDelta = {delta:?}\nx = [{}]\nrho = [{}]\n",
            xs.join(","),
            rho.join(",")
        )
    };
    let bad = write(dir.path(), "bad.toml", &body(2.0));
    let out_dir = dir.path().join("out");
    let out = run(&[
        "spectro",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("spectro.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "INCONSISTENT");

    let good = write(dir.path(), "good.toml", &body(1.0));
    assert_eq!(run(&["spectro", "--config", good.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn sweep_csv_is_deterministic_and_deduplicated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let plot = dir.path().join("plot.csv");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--csv",
        a.to_str().unwrap(),
        "--plot-csv",
        plot.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning:"));
    let out = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--csv", b.to_str().unwrap()])
        .env("TRAPCERT_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap(), "worker count changed the table");
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "lambda,E0,E1,E2,Delta,Gamma,var_x,bound_x,epsilon,T,eta_trk,eta_tilde,d1_rhs,d3_rhs,\
         g_norm_sq,alpha0,alpha_bound,g_xx,varp,varp_ub,varp_lb,varp_floor,verdict,failed_checks,\
         convergence_error"
    );
    assert_eq!(lines.len(), 4, "duplicate 0.5 should be dropped");
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 25);
        assert!(line.contains(",PASS,"));
    }
    let plot = fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("lambda,epsilon,varp,varp_ub,varp_lb,varp_ratio\n"));
}

#[test]
fn k_override_reaches_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("harmonic.toml");
    let out = run(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--k",
        "40",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("states used: 40"), "{summary}");
}
