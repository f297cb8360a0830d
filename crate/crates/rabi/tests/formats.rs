use proptest::prelude::*;
use rabi::format::{fmt_g, read_record, write_record};
use rabi::ExperimentConfig;
use rabi_core::record::Event;
use rabi_core::{EventKind, MeasurementRecord};

proptest! {
    #[test]
    fn g12_parses_back_within_precision(x in prop::num::f64::NORMAL) {
        let s = fmt_g(x, 12);
        let back: f64 = s.parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-12, "{x} -> {s}");
        prop_assert!(s.len() <= 18);
    }

    #[test]
    fn record_csv_round_trips(
        dt in 1e-6f64..1.0,
        steps in prop::collection::btree_set(0u64..5000, 0..50),
        kinds in prop::collection::vec(0u8..3, 50),
    ) {
        let events = steps.iter().zip(&kinds).map(|(&s, &k)| Event {
            step: s,
            kind: [EventKind::Detection, EventKind::Avalanche, EventKind::DarkAvalanche][k as usize],
        }).collect();
        let rec = MeasurementRecord::from_events(dt, 5000, events).unwrap();
        let mut buf = Vec::new();
        write_record(&mut buf, &rec, &[]).unwrap();
        let (back, _) = read_record(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn manifest_round_trips(
        gamma in 0.01f64..100.0,
        eta in 0.0f64..=1.0,
        omega_true in -5.0f64..5.0,
        dt in 1e-7f64..0.1,
        seed in any::<u64>(),
        nodes in 1usize..500,
    ) {
        let mut cfg = ExperimentConfig::parse("mode = posterior").unwrap();
        cfg.gamma = gamma;
        cfg.eta = eta;
        cfg.omega_true = Some(omega_true);
        cfg.dt = dt;
        cfg.master_seed = seed;
        cfg.n_nodes = 2 * nodes;
        let back = ExperimentConfig::parse(&cfg.to_manifest()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
