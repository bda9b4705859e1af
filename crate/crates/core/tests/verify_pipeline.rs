use nhexp::systems;
use nhexp::verify::{verify_theorem, MetricChoice, VerifyConfig};

fn run(system: &str, metric: MetricChoice) -> nhexp::verify::VerifyReport {
    let entry = systems::system_by_id(system, 1.0, 1.0).unwrap();
    let cfg = VerifyConfig {
        metric,
        ..VerifyConfig::default()
    };
    verify_theorem(&entry, &cfg).unwrap()
}

#[test]
fn particle_flat_passes_every_stage() {
    let r = run("particle", MetricChoice::Flat);
    assert_eq!(r.stages.len(), 5);
    for s in &r.stages {
        assert!(s.pass, "{} failed: {:?}", s.stage, s.notes);
    }
    assert!(r.all_pass);
    assert!(!r.induced.is_empty() && !r.minimization.is_empty());
}

#[test]
fn disk_gmod_passes_every_stage() {
    let r = run("disk", MetricChoice::PullbackGmod);
    assert!(r.all_pass, "{:?}", r.stages);
    assert!((r.metric_radius - 1.8).abs() < 1e-12);
}

#[test]
fn ambient_pullback_fails_gauss_stages() {
    let r = run("particle", MetricChoice::PullbackAmbient);
    assert!(r.stages[0].pass && r.stages[1].pass);
    assert!(!r.stages[2].pass && !r.stages[3].pass);
    assert!(!r.all_pass);
    let eq = r.equivalence.unwrap();
    assert!(eq.agree && !eq.gauss_pass);
}

#[test]
fn invalid_configurations_are_rejected() {
    let entry = systems::particle_system::<f64>();
    let bad_tol = VerifyConfig {
        tol: 0.0,
        ..VerifyConfig::default()
    };
    assert!(verify_theorem(&entry, &bad_tol).is_err());
    let bad_grid = VerifyConfig {
        grid: 1,
        ..VerifyConfig::default()
    };
    assert!(verify_theorem(&entry, &bad_grid).is_err());
}

#[test]
fn report_serializes_stage_names() {
    let r = run("particle", MetricChoice::Flat);
    let json = serde_json::to_value(&r).unwrap();
    let names: Vec<&str> = json["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "a-exponential-map",
            "b-fiber-metric",
            "c-gauss-equivalences",
            "d-induced-metric",
            "e-length-minimization"
        ]
    );
    assert_eq!(json["metric"], "flat");
}
