use leogo::dispatch::{plan_horizon, CommitmentState, GtStatus, HorizonForecast, PlannerConfig};
use leogo::model::{build_canonical_scenario, CaseVariation};
use leogo::oracle::{brute_force_plan, compare_with_planner, finite_difference_check, random_instances, MAX_ORACLE_HORIZON};
use leogo::par::Exec;
use leogo::Error;
use proptest::prelude::*;

#[test]
fn comparisons_match_across_policies() {
    let inst = random_instances(16, 11);
    let cfg = PlannerConfig::default();
    let a = compare_with_planner(&inst, &cfg, Exec::Sequential).unwrap();
    let b = compare_with_planner(&inst, &cfg, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|c| c.relative_error <= 1e-6));
}

#[test]
fn oracle_rejects_long_horizons() {
    let s = build_canonical_scenario(CaseVariation::A);
    let h = MAX_ORACLE_HORIZON + 1;
    let f = HorizonForecast::constant(40.0, 0.0, h);
    let err = brute_force_plan(&s, &CommitmentState::all_on(&s), &f, h, &PlannerConfig::default()).unwrap_err();
    assert!(matches!(err, Error::StateSpace(_)));
}

#[test]
fn finite_differences_recover_a_cubic() {
    let err = finite_difference_check(|x| x * x * x, 3.0 * 4.0, 2.0, 1e-3);
    assert!(err < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planner_is_optimal_for_dissimilar_units(
        seed_demand in proptest::collection::vec(20.0..60.0f64, 6),
        wind in proptest::collection::vec(0.0..24.0f64, 6),
        derate in 0.85..0.99f64,
        third_off in any::<bool>(),
    ) {
        let mut s = build_canonical_scenario(CaseVariation::A);
        s.gas_turbines[1].eff_full_load *= derate;
        s.gas_turbines[1].fuel_slope /= derate;
        let mut state = CommitmentState::all_on(&s);
        if third_off {
            state.gts[2] = GtStatus::Off;
        }
        let f = HorizonForecast { demand_mw: seed_demand, wind_mw: wind };
        let cfg = PlannerConfig::default();
        let plan = plan_horizon(&s, &state, &f, 6, &cfg).unwrap();
        let oracle = brute_force_plan(&s, &state, &f, 6, &cfg).unwrap();
        let rel = (plan.objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
        prop_assert!(rel <= 1e-6, "planner {} oracle {}", plan.objective, oracle.objective);
    }
}
