use flexcable_harness::config::{RunConfig, TrialConfig};
use flexcable_harness::output::fmt_f64;
use flexcable_harness::sim::settled_at;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, -1e-6..1e-6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
}

fn trial() -> impl Strategy<Value = TrialConfig> {
    (
        "[A-Za-z0-9]{1,6}",
        prop::array::uniform3(finite()),
        -90.0..90.0f64,
        prop::collection::vec(-45.0..45.0f64, 0..6),
        0.0..1.0f64,
    )
        .prop_map(|(name, offset, attitude_deg, deflection_deg, random_offset)| TrialConfig {
            name,
            offset,
            attitude_deg,
            deflection_deg,
            random_offset,
            ..TrialConfig::default()
        })
}

prop_compose! {
    fn config()(
        seed in 0..=i64::MAX as u64,
        mass in 0.1..5.0f64,
        amplitude in prop::array::uniform3(finite()),
        frequency in prop::array::uniform3(0.0..2.0f64),
        q1 in prop::array::uniform4(0.0..10.0f64),
        q2 in 0.01..10.0f64,
        dt in 1e-5..1e-2f64,
        trials in prop::collection::vec(trial(), 0..4),
    ) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.quad.mass = mass;
        cfg.trajectory.amplitude = amplitude;
        cfg.trajectory.frequency_hz = frequency;
        cfg.lqr.q1_blocks = q1;
        cfg.lqr.q2 = q2;
        cfg.sim.dt = dt;
        cfg.trials = trials;
        cfg
    }
}

proptest! {
    #[test]
    fn toml_round_trip(cfg in config()) {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn json_round_trip(cfg in config()) {
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn settled_time_bounds_the_tail(values in prop::collection::vec(0.0..0.1f64, 1..50)) {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * 0.5).collect();
        let limit = 0.05;
        match settled_at(&times, values.iter().copied(), limit) {
            Some(ts) => {
                let k = times.iter().position(|&t| t == ts).unwrap();
                prop_assert!(values[k..].iter().all(|&v| v < limit));
                prop_assert!(k == 0 || values[k - 1] >= limit);
            }
            None => prop_assert!(*values.last().unwrap() >= limit),
        }
    }
}
