use uplift_bench::protocols::{NOISED_ORACLE, ORACLE};
use uplift_bench::{run, ExperimentConfig, Protocol, ReportBody};
use uplift_core::synth::{AssignmentConfig, GeneratorConfig, SurfaceKind};

fn ite_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::for_protocol(Protocol::IteBenchmark);
    c.methods = vec!["t-learner".into(), "dr-learner".into()];
    c.generator = Some(GeneratorConfig {
        n: 10_000,
        surface: SurfaceKind::CaseA,
        ..Default::default()
    });
    c.ite.surfaces = vec![SurfaceKind::CaseA];
    c.ite.n_realizations = 2;
    c
}

#[test]
fn ite_two_by_two_with_oracle() {
    let config = ite_config();
    let a = run(&config).unwrap();
    let ReportBody::IteBenchmark(r) = &a.body else { panic!() };
    assert_eq!(r.cells.len(), 2 * 3);
    for m in ["t-learner", "dr-learner"] {
        let s = r.summary_for(SurfaceKind::CaseA, m).unwrap();
        assert_eq!((s.n_ok, s.n_missing, s.incomplete), (2, 0, false));
        let v: Vec<f64> = r.series(SurfaceKind::CaseA, m).into_iter().flatten().collect();
        assert!((s.mean.unwrap() - (v[0] + v[1]) / 2.0).abs() < 1e-15);
        assert!((s.std.unwrap() - (v[0] - v[1]).abs() / 2f64.sqrt()).abs() < 1e-12);
    }
    assert!(r.series(SurfaceKind::CaseA, ORACLE).iter().all(|v| *v == Some(0.0)));
    assert_eq!(r.summary.iter().filter(|s| s.best).count(), 1);
    assert!(!r.summary_for(SurfaceKind::CaseA, ORACLE).unwrap().best);
    assert!(r.render().contains("dr-learner"));
    assert_eq!(r.csv().lines().count(), 7);

    // same config, same numbers
    let b = run(&config).unwrap();
    assert_eq!(a.body, b.body);
    assert_eq!(a.config, b.config);
}

#[test]
fn failed_realizations_are_missing_not_fatal() {
    let mut config = ite_config();
    config.ite.surfaces = vec![SurfaceKind::CaseB];
    config.generator.as_mut().unwrap().offset = 1e4;
    let report = run(&config).unwrap();
    let ReportBody::IteBenchmark(r) = &report.body else { panic!() };
    assert!(r.cells.iter().filter(|c| c.method != ORACLE).all(|c| c.sqrt_pehe.is_none() && c.error.is_some()));
    let s = r.summary_for(SurfaceKind::CaseB, "t-learner").unwrap();
    assert_eq!((s.mean, s.n_missing, s.incomplete), (None, 2, true));
    assert!(r.render().contains("missing"));
}

#[test]
fn separability_grid_and_interval_widths() {
    let mut config = ExperimentConfig::for_protocol(Protocol::Separability);
    config.seed = 2;
    config.separability.max_train_rows = Some(4000);
    config.separability.n_bootstrap = 200;
    let report = run(&config).unwrap();
    let ReportBody::Separability(r) = &report.body else { panic!() };
    assert_eq!(r.sizes, vec![1000, 5000, 20_000]);
    assert_eq!(r.n_train, 4000);
    assert_eq!(r.n_test, 20_000);
    // 3 sizes x (4 methods + planted pair)
    assert_eq!(r.cells.len(), 18);
    assert!(r.methods.iter().all(|m| m.best.is_some()));
    for name in ["tm", "cvt", "mom", "sdr", ORACLE, NOISED_ORACLE] {
        let small = r.cell(1000, name).unwrap().ci_width().unwrap();
        let large = r.cell(20_000, name).unwrap().ci_width().unwrap();
        assert!(large < small, "{name}: {large} vs {small}");
    }
    assert_eq!(r.summary.len(), 3);
    assert!(r.summary.iter().all(|s| s.planted_separated.is_some() && !s.incomplete));
    assert_eq!(r.csv().lines().count(), 19);
}

#[test]
fn oversized_test_sizes_are_skipped() {
    let mut config = ExperimentConfig::for_protocol(Protocol::Separability);
    config.methods = vec!["mom".into()];
    config.generator.as_mut().unwrap().n = 10_000;
    config.separability.test_sizes = vec![500, 5000];
    config.separability.n_bootstrap = 50;
    let report = run(&config).unwrap();
    let ReportBody::Separability(r) = &report.body else { panic!() };
    assert_eq!(r.sizes, vec![500]);
    assert_eq!(r.skipped_sizes, vec![5000]);
}

fn validate_config(assignment: AssignmentConfig) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_protocol(Protocol::Validate);
    c.seed = 5;
    c.validate.n_permutations = 19;
    let g = c.generator.as_mut().unwrap();
    g.n = 20_000;
    g.assignment = assignment;
    g.baseline_rate = 0.2;
    c
}

#[test]
fn validate_rct_and_confounded_corpora() {
    let rct = run(&validate_config(AssignmentConfig::Rct { ratio: 0.85 })).unwrap();
    let ReportBody::Validate(v) = &rct.body else { panic!() };
    assert!(v.constraints.is_clean());
    assert!(!v.c2st.rejects(0.05), "p = {}", v.c2st.p_value);
    assert!(v.dummy.iter().all(|d| d.comparison.is_some()));

    let conf = run(&validate_config(AssignmentConfig::Confounded { delta: 0.01 })).unwrap();
    let ReportBody::Validate(v) = &conf.body else { panic!() };
    assert!(v.c2st.rejects(0.05), "p = {}", v.c2st.p_value);
}
