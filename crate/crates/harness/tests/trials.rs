use flexcable::flatness::flat_single;
use flexcable_harness::config::TrialConfig;
use flexcable_harness::sim::{compute_gains, initial_state, simulate};
use flexcable_harness::RunConfig;

#[test]
fn offset_and_deflected_cable_recover_within_ten_seconds() {
    let mut cfg = RunConfig::default();
    cfg.sim.horizon = 12.0;
    cfg.sim.snapshot_times.clear();
    let trial = TrialConfig {
        name: "offset".into(),
        offset: [0.5, 0.0, 0.0],
        deflection_deg: vec![20.0; 5],
        ..TrialConfig::default()
    };
    let table = compute_gains(&cfg).unwrap();
    let rec = simulate(&cfg, &trial, &table).unwrap();
    let err: Vec<f64> = rec.rows.iter().map(|r| r.position_error).collect();

    // one-second maxima shrink after the initial transient
    let window_max = |k: usize| err[k * 1000..(k + 1) * 1000].iter().copied().fold(0.0, f64::max);
    for k in 2..11 {
        assert!(window_max(k + 1) < window_max(k), "second {k}: {:?}", (window_max(k), window_max(k + 1)));
    }
    let settled = rec.summary.load_settled_at.expect("load error settles");
    assert!(settled < 10.0, "settled at {settled}");
    assert!(rec.summary.passed);
}

#[test]
fn seeded_offsets_are_reproducible() {
    let mut cfg = RunConfig::default();
    let model = cfg.single_model().unwrap();
    let dp = flat_single(&cfg.flat_outputs(), &model.quad, &model.cable, 0.0).unwrap();
    let trial = TrialConfig {
        name: "random".into(),
        random_offset: 0.2,
        ..TrialConfig::default()
    };
    assert!(!trial.is_exact_start());
    let a = initial_state(&cfg, &trial, &dp);
    let b = initial_state(&cfg, &trial, &dp);
    assert_eq!(a, b);
    let shift = a.x0 - dp.x0;
    assert!(shift.iter().all(|c| c.abs() <= 0.2) && shift.norm() > 0.0);
    cfg.seed += 1;
    assert_ne!(initial_state(&cfg, &trial, &dp).x0, a.x0);
}
