use std::path::Path;
use std::process::{Command, Output};

use uplift_bench::{EvaluationReport, ExperimentConfig, ReportBody};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplift-bench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&bench(&["frobnicate"])), 1);
    assert_eq!(code(&bench(&["generate", "--seed", "minus-one"])), 1);
    assert_eq!(code(&bench(&["--help"])), 0);
    // generate without an output directory
    assert_eq!(code(&bench(&["generate"])), 1);
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "protocol = \"validate\"\nunknown_key = 3\n").unwrap();
    assert_eq!(code(&bench(&["validate", "--config", arg(&cfg)])), 1);
    std::fs::write(&cfg, "protocol = \"separability\"\nmethods = [\"tarnet\"]\n").unwrap();
    let out = bench(&["separability", "--config", arg(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("tarnet"));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bench(&["validate", "--data", arg(&dir.path().join("absent.csv"))])), 2);
    let csv = dir.path().join("broken.csv");
    std::fs::write(&csv, "f0,f1,visit\n1,2,0\n").unwrap();
    let out = bench(&["validate", "--data", arg(&csv)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
}

#[test]
fn experiment_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ite.toml");
    // the exponential surface overflows with such an offset
    std::fs::write(&cfg, "protocol = \"generate\"\n[generator]\nn = 50\nsurface = \"case-b\"\noffset = 1e4\n").unwrap();
    let out = bench(&["generate", "--config", arg(&cfg), "--out", arg(dir.path())]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_then_regenerate_from_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = bench(&["generate", "--out", arg(a.path()), "--seed", "11"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = std::fs::read_to_string(a.path().join("manifest.toml")).unwrap();
    let m = ExperimentConfig::from_toml_str(&manifest).unwrap();
    let g = m.generator.as_ref().unwrap();
    assert_eq!(m.seed, 11);
    assert_eq!(g.seed, 11);
    assert!(manifest.contains("surface = \"multi-peaked\""));
    assert!(manifest.contains("delta = 0.01"));
    assert_eq!((g.n_anchors, g.sigma), (5, 1.0));

    let cfg = a.path().join("manifest.toml");
    assert_eq!(code(&bench(&["generate", "--config", arg(&cfg), "--out", arg(b.path())])), 0);
    for f in ["data.csv", "truth.csv", "manifest.toml"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs after regeneration");
    }
    let truth = std::fs::read_to_string(a.path().join("truth.csv")).unwrap();
    assert!(truth.starts_with("row,mu0,mu1,tau,propensity\n"));
    assert_eq!(truth.lines().count(), 20_001);
}

#[test]
fn validate_generated_file_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.toml");
    std::fs::write(
        &cfg,
        "protocol = \"generate\"\nseed = 4\n[generator]\nn = 4000\noutcome = \"binary\"\nbaseline_rate = 0.2\n\
         [generator.assignment]\nmode = \"rct\"\nratio = 0.85\n",
    )
    .unwrap();
    let data_dir = dir.path().join("corpus");
    assert_eq!(code(&bench(&["generate", "--config", arg(&cfg), "--out", arg(&data_dir)])), 0);

    let report_dir = dir.path().join("report");
    let out = bench(&[
        "validate",
        "--data",
        arg(&data_dir.join("data.csv")),
        "--out",
        arg(&report_dir),
        "--workers",
        "1",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = EvaluationReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.meta.workers, 1);
    let ReportBody::Validate(v) = &report.body else { panic!("wrong body") };
    assert_eq!(v.n, 4000);
    assert!(v.constraints.is_clean());
    assert!((v.treatment_ratio - 0.85).abs() < 0.03);
    assert_eq!(v.reference.treatment_ratio, 0.85);
    assert_eq!(v.dummy.len(), 2);
    for f in ["report.json", "report.txt"] {
        assert!(report_dir.join(f).exists());
    }
    let text = std::fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert!(text.contains("median null loss") && text.contains("p-value"));
}
