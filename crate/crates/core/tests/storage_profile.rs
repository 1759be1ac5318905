use lagoon_core::io::synth_tide;
use lagoon_core::storage::storage_profile;
use lagoon_core::*;
use proptest::prelude::*;

fn tide_strategy() -> impl Strategy<Value = TideSeries> {
    prop::collection::vec(-5.0f64..5.0, 2..60)
        .prop_map(|levels| TideSeries::new(Timestamp::default(), 1800.0, levels).unwrap())
}

proptest! {
    #[test]
    fn offset_invariance(tide in tide_strategy(), offset in -10.0f64..10.0) {
        let cfg = LagoonConfig::swansea();
        let a = storage_profile(&cfg, &tide).unwrap();
        let b = storage_profile(&cfg, &tide.shifted(offset)).unwrap();
        for (x, y) in a.stored_energy_mwh.iter().zip(&b.stored_energy_mwh) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn bounded_and_gated(tide in tide_strategy()) {
        let cfg = LagoonConfig::swansea();
        let p = storage_profile(&cfg, &tide).unwrap();
        prop_assert_eq!(p.stored_energy_mwh.len(), tide.steps());
        for k in 0..tide.steps() {
            let e = p.stored_energy_mwh[k];
            prop_assert!((0.0..=160.0).contains(&e));
            let full_head = p.z_max_m - tide.level(k);
            prop_assert_eq!(e == 0.0, full_head < 1.0, "head {} energy {}", full_head, e);
        }
    }

    #[test]
    fn non_decreasing_in_head(tide in tide_strategy()) {
        let cfg = LagoonConfig::swansea();
        let p = storage_profile(&cfg, &tide).unwrap();
        let mut pairs: Vec<(f64, f64)> = p.head_m.iter().copied().zip(p.stored_energy_mwh.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            prop_assert!(w[1].1 >= w[0].1, "{:?}", w);
        }
    }
}

#[test]
fn spring_tide_reaches_the_cap() {
    let cfg = LagoonConfig::swansea();
    let tide = synth_tide(0.0, 4.0, 44_700.0, 0.0, Timestamp::default(), cfg.dt_s, 48).unwrap();
    let p = storage_profile(&cfg, &tide).unwrap();
    let max = p.stored_energy_mwh.iter().copied().fold(0.0, f64::max);
    assert_eq!(max, 160.0);
    assert!(p.stored_energy_mwh.contains(&0.0));
}
