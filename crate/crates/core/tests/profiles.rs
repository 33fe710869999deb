use leogo::profiles::{
    apply_demand_dip, ingest_csv, synthetic_profiles, TimeSeriesSet, CANONICAL_START_EPOCH, CSV_HEADER,
};
use leogo::Error;
use proptest::prelude::*;

fn csv_of(set: &TimeSeriesSet) -> Vec<u8> {
    let mut buf = Vec::new();
    set.write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn write_then_ingest_round_trips() {
    let set = synthetic_profiles(240, 3);
    let back = ingest_csv(csv_of(&set).as_slice(), None).unwrap();
    assert_eq!(back, set);
}

#[test]
fn ingest_with_resampling_matches_resample() {
    let set = synthetic_profiles(120, 4);
    let direct = set.resample(300).unwrap();
    let via_csv = ingest_csv(csv_of(&set).as_slice(), Some(300)).unwrap();
    assert_eq!(direct, via_csv);
}

#[test]
fn missing_optional_columns_take_defaults() {
    let text = "time_iso8601,wind_power_norm\n2021-01-01T00:00:00Z,0.5\n2021-01-01T00:01:00Z,0.25\n";
    let set = ingest_csv(text.as_bytes(), None).unwrap();
    assert_eq!(set.demand_multiplier, vec![1.0, 1.0]);
    assert_eq!(set.wind_forecast, vec![0.5, 0.25]);
    assert_eq!(set.wind_nowcast, set.wind_forecast);
    assert_eq!(set.start_epoch, CANONICAL_START_EPOCH);
}

#[test]
fn bad_value_reports_its_line() {
    let text = format!("{}\n2021-01-01T00:00:00Z,5,0.1,1,0.1,0.1\n2021-01-01T00:01:00Z,x,0.1,1,0.1,0.1\n", CSV_HEADER.join(","));
    match ingest_csv(text.as_bytes(), None) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_increasing_time_is_rejected() {
    let text = format!("{}\n2021-01-01T00:01:00Z,5,0.1,1,0.1,0.1\n2021-01-01T00:00:00Z,5,0.1,1,0.1,0.1\n", CSV_HEADER.join(","));
    assert!(matches!(ingest_csv(text.as_bytes(), None), Err(Error::Monotonicity { line: 3 })));
}

#[test]
fn dip_scales_only_the_window() {
    let mut set = TimeSeriesSet::flat(0, 60, 20);
    apply_demand_dip(&mut set, 0.2, 5.0, 10.0).unwrap();
    for (i, m) in set.demand_multiplier.iter().enumerate() {
        let expected = if (5..10).contains(&i) { 0.8 } else { 1.0 };
        assert!((m - expected).abs() < 1e-12);
    }
}

#[test]
fn synthetic_profiles_are_prefix_consistent() {
    let short = synthetic_profiles(600, 9);
    let long = synthetic_profiles(1200, 9);
    assert_eq!(short, long.slice(0, 600));
    assert!(short.violations(true).is_empty());
}

proptest! {
    #[test]
    fn coarsening_is_a_block_mean(values in proptest::collection::vec(0.0..30.0f64, 1..200), factor in 1u32..10) {
        let mut set = TimeSeriesSet::flat(0, 60, values.len());
        set.wind_speed = values.clone();
        let out = set.resample(60 * factor).unwrap();
        let f = factor as usize;
        prop_assert_eq!(out.len(), values.len().div_ceil(f));
        for (k, v) in out.wind_speed.iter().enumerate() {
            let block = &values[k * f..((k + 1) * f).min(values.len())];
            let mean = block.iter().sum::<f64>() / block.len() as f64;
            prop_assert!((v - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn refining_passes_through_samples(values in proptest::collection::vec(0.0..30.0f64, 2..50), factor in 1u32..6) {
        let mut set = TimeSeriesSet::flat(0, 600, values.len());
        set.wind_speed = values.clone();
        let out = set.resample(600 / factor).unwrap();
        for (i, v) in values.iter().enumerate() {
            prop_assert!((out.wind_speed[i * factor as usize] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_channels_stay_in_range(seed in 0u64..1000) {
        let set = synthetic_profiles(300, seed);
        prop_assert!(set.wind_speed.iter().all(|v| *v >= 0.0));
        for ch in [&set.wind_power_norm, &set.wind_forecast, &set.wind_nowcast] {
            prop_assert!(ch.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
