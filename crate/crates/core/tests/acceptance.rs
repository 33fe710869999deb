//! One check per acceptance criterion. Every criterion prints a PASS or FAIL
//! line and the process exits non-zero if any criterion failed.

use std::process::Command;
use std::time::Instant;

use leogo::dispatch::{
    economic_dispatch, plan_horizon, rolling_simulate, step_demand, CommitmentState, HorizonForecast, PlannerConfig,
    StepRequest,
};
use leogo::dynamics::{init_from_setpoints, simulate, steady_state_frequency, DynamicsMode, Event, SimOptions};
use leogo::model::{build_canonical_scenario, CaseVariation, FluidProperties, GasTurbineSpec};
use leogo::network::{build_canonical_grid, check_ratings, solve_power_flow, Injections, PowerFlowOptions};
use leogo::oracle::{compare_with_planner, random_instances};
use leogo::par::Exec;
use leogo::physics::{battery_step, compressor_power, gt_efficiency, gt_heat, pump_power};
use leogo::profiles::{
    apply_demand_dip, canonical_profiles, rmse, synth_demand_multiplier, synth_wind_forecast, TimeSeriesSet,
    CANONICAL_SEED, CANONICAL_START_EPOCH,
};

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, started: Instant, outcome: Result<String, String>) {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {name} ({detail}; {secs:.2} s)"),
            Err(detail) => {
                println!("FAIL criterion {id}: {name} ({detail}; {secs:.2} s)");
                self.failures.push(id);
            }
        }
    }
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn formula_regression() -> Result<String, String> {
    let fluid = FluidProperties::canonical();
    let export = pump_power(0.277, 0.7e6, 25e6, 0.75).map_err(|e| e.to_string())?;
    let booster = pump_power(0.098, 0.3e6, 5e6, 0.6).map_err(|e| e.to_string())?;
    let main = compressor_power(68.3, 2e6, 20e6, 300.0, &fluid, 0.75).map_err(|e| e.to_string())?;
    let recomp = compressor_power(70.8, 1.3e6, 2e6, 300.0, &fluid, 0.75).map_err(|e| e.to_string())?;
    let detail = format!("pumps {export:.3}/{booster:.3} MW, compressors {main:.2}/{recomp:.3} MW");
    ensure(within(export, 8.97, 0.01), format!("water injection pump: {detail}"))?;
    ensure((booster - 0.79).abs() / 0.79 <= 0.03, format!("oil export pump: {detail}"))?;
    ensure(within(main, 24.2, 0.1), format!("export compressor: {detail}"))?;
    ensure(within(recomp, 3.8, 0.05), format!("re-compression: {detail}"))?;
    Ok(detail)
}

fn fuel_curve_endpoints() -> Result<String, String> {
    let gt = GasTurbineSpec::canonical("GT1");
    let full = gt_efficiency(21.8, &gt).map_err(|e| e.to_string())?;
    let low = gt_efficiency(4.36, &gt).map_err(|e| e.to_string())?;
    ensure(within(full, 0.347, 1e-6), format!("eff(21.8) = {full}"))?;
    ensure(within(low, 0.200, 1e-6), format!("eff(4.36) = {low}"))?;
    let n = 10_000;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=n {
        let p = 3.5 + (21.8 - 3.5) * i as f64 / n as f64;
        let e = gt_efficiency(p, &gt).map_err(|e| e.to_string())?;
        ensure(e > prev, format!("efficiency not increasing at {p} MW"))?;
        prev = e;
    }
    Ok(format!("eff(21.8) = {full:.9}, eff(4.36) = {low:.9}, increasing on {n} points"))
}

fn nominal_state() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::Base);
    let cfg = PlannerConfig::default();
    let demand = step_demand(&s, 1.0).map_err(|e| e.to_string())?;
    ensure(within(demand, 43.18, 0.05), format!("demand {demand}"))?;
    let plan = plan_horizon(&s, &CommitmentState::all_on(&s), &HorizonForecast::constant(demand, 0.0, 12), 12, &cfg)
        .map_err(|e| e.to_string())?;
    for step in &plan.steps {
        ensure(step.feasible && step.on_count() == 3, format!("step at {} min: {} units on", step.t_min, step.on_count()))?;
        for p in &step.gt_mw {
            ensure(within(*p, 14.39, 0.05), format!("unit output {p}"))?;
        }
    }
    let req = StepRequest::new(demand, 0.0, s.reserve_requirement);
    let two = economic_dispatch(&s.gas_turbines, &[true, true, false], &req);
    ensure(!two.feasible, "two-unit commitment reported feasible")?;
    ensure(two.reserve_shortfall_mw > 0.0, "two-unit commitment has no reserve shortfall")?;
    Ok(format!(
        "demand {demand:.3} MW, 3 x {:.3} MW, two units short {:.2} MW of reserve",
        plan.steps[0].gt_mw[0], two.reserve_shortfall_mw
    ))
}

fn heat_balance() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::Base);
    let gt = &s.gas_turbines[0];
    let per_gt = gt_heat(14.39, gt).map_err(|e| e.to_string())?;
    let supply = 3.0 * per_gt;
    let demand = s.heat_demand_mw();
    ensure(within(per_gt, 15.2, 0.05), format!("per-unit heat {per_gt}"))?;
    ensure(within(supply, 45.6, 0.15), format!("total heat {supply}"))?;
    ensure(within(demand, 8.0, 1e-9) && supply >= demand, format!("heat demand {demand}"))?;
    Ok(format!("{per_gt:.3} MW per unit, {supply:.2} MW supply vs {demand:.1} MW demand"))
}

fn experiment_dip() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::Base);
    let cfg = PlannerConfig::default();
    let mut prof = TimeSeriesSet::flat(CANONICAL_START_EPOCH, 60, 1200);
    apply_demand_dip(&mut prof, 0.2, 500.0, 750.0).map_err(|e| e.to_string())?;
    let plan = rolling_simulate(&s, &prof, 1000.0, &cfg).map_err(|e| e.to_string())?;
    let runs = plan.on_count_runs();
    ensure(runs == vec![3, 2, 3], format!("unit-count runs {runs:?}"))?;
    ensure(plan.all_feasible(), "infeasible steps")?;
    let min_reserve = plan
        .steps
        .iter()
        .filter(|st| st.feasible)
        .map(|st| st.reserve_mw)
        .fold(f64::INFINITY, f64::min);
    ensure(min_reserve >= s.reserve_requirement - 1e-9, format!("reserve {min_reserve}"))?;
    Ok(format!("runs {runs:?}, min reserve {min_reserve:.2} MW"))
}

fn experiment_wind() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::A);
    let cfg = PlannerConfig::default();
    let plan = rolling_simulate(&s, &canonical_profiles(), 1000.0, &cfg).map_err(|e| e.to_string())?;
    let starts: usize = plan.steps.iter().map(|st| st.starts).sum();
    let stops: usize = plan.steps.iter().map(|st| st.stops).sum();
    ensure(starts >= 1 && stops >= 1, format!("{starts} starts, {stops} stops"))?;
    let summary = plan.summary();
    for st in &plan.steps {
        let short = st.reserve_mw < s.reserve_requirement - 1e-9;
        if short {
            ensure(!st.feasible, format!("reserve {} MW at {} min not flagged", st.reserve_mw, st.t_min))?;
            ensure(
                summary.deficit_log.iter().any(|d| d.t_min == st.t_min && d.reserve_shortfall_mw > 0.0),
                format!("reserve shortfall at {} min missing from the deficit log", st.t_min),
            )?;
        }
    }
    Ok(format!(
        "{starts} starts, {stops} stops, {} flagged steps, runs {:?}",
        summary.infeasible_steps,
        plan.on_count_runs()
    ))
}

fn optimizer_optimality() -> Result<String, String> {
    let instances = random_instances(200, 42);
    let (lo, hi) = instances.iter().fold((usize::MAX, 0), |(lo, hi), i| (lo.min(i.horizon), hi.max(i.horizon)));
    ensure(lo >= 4 && hi <= 12, format!("horizons {lo}..{hi}"))?;
    let results = compare_with_planner(&instances, &PlannerConfig::default(), Exec::Parallel).map_err(|e| e.to_string())?;
    let worst = results.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    ensure(results.len() == 200, "missing comparisons")?;
    ensure(worst <= 1e-6, format!("worst relative error {worst:e}"))?;
    Ok(format!("200 instances, horizons {lo}-{hi}, worst relative error {worst:.1e}"))
}

fn battery_cycle() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::B);
    let b = s.batteries.first().ok_or("no battery in variation B")?;
    let dt = 0.1;
    let p = b.power_capacity;
    let mut soc = 0.0;
    let mut drawn = 0.0;
    while soc < b.energy_capacity - 1e-12 {
        let room = (b.energy_capacity - soc) / (b.charge_efficiency * dt);
        let charge = p.min(room);
        soc = battery_step(soc, -charge, dt, b).map_err(|e| e.to_string())?;
        drawn += charge * dt;
    }
    let mut delivered = 0.0;
    while soc > 1e-12 {
        let available = soc * b.discharge_efficiency / dt;
        let discharge = p.min(available);
        soc = battery_step(soc, discharge, dt, b).map_err(|e| e.to_string())?;
        delivered += discharge * dt;
    }
    let ratio = delivered / drawn;
    ensure(within(ratio, 0.9, 1e-9), format!("recovered fraction {ratio}"))?;
    Ok(format!("{drawn:.4} MWh in, {delivered:.4} MWh out, ratio {ratio:.12}"))
}

fn forecast_calibration() -> Result<String, String> {
    let prof = canonical_profiles();
    let week = 7 * 24 * 60;
    ensure(prof.step_s == 60 && prof.len() >= week, "canonical profile shorter than a week at 1 min")?;
    let forecast = synth_wind_forecast(&prof.wind_speed, CANONICAL_SEED);
    let err = rmse(&forecast[..week], &prof.wind_speed[..week]);
    ensure(within(err, 3.3, 0.3), format!("forecast RMSE {err}"))?;
    let demand = synth_demand_multiplier(week as f64, 0.25, 0.04, 25.0).map_err(|e| e.to_string())?;
    let max = demand.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = demand.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(within(max, 1.04, 1e-9) && within(min, 0.96, 1e-9), format!("demand extrema {min}, {max}"))?;
    Ok(format!("week RMSE {err:.3} m/s, demand in [{min:.6}, {max:.6}]"))
}

fn power_flow() -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::Base);
    let grid = build_canonical_grid(&s).map_err(|e| e.to_string())?;
    let inj = Injections::table_point(&s, &grid);
    let r = solve_power_flow(&grid, &inj, &PowerFlowOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.max_mismatch_pu < 1e-8, format!("mismatch {:e}", r.max_mismatch_pu))?;
    ensure((0.2..=2.0).contains(&r.losses_mw), format!("losses {} MW", r.losses_mw))?;
    let gap = r.total_generation_mw - r.total_load_mw - r.losses_mw;
    ensure(gap.abs() <= 1e-6, format!("generation - load - losses = {gap:e}"))?;
    let branch_losses: f64 = r.branches.iter().map(|b| b.loss_mw()).sum();
    ensure(within(branch_losses, r.losses_mw, 1e-6), format!("branch losses {branch_losses} vs {}", r.losses_mw))?;
    let over = check_ratings(&grid, &r);
    ensure(over.is_empty(), format!("{} overloads", over.len()))?;
    Ok(format!(
        "{} iterations, mismatch {:.1e} pu, losses {:.3} MW, no overloads",
        r.iterations, r.max_mismatch_pu, r.losses_mw
    ))
}

fn trip_event(online: usize, per_unit_mw: f64) -> Result<String, String> {
    let s = build_canonical_scenario(CaseVariation::Base);
    let mut set: Vec<Option<f64>> = vec![None; s.gas_turbines.len()];
    for p in set.iter_mut().take(online) {
        *p = Some(per_unit_mw);
    }
    let state = init_from_setpoints(&s, &set, 0.0, DynamicsMode::Uniform).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let tr = simulate(&state, &[Event::trip("GT1", 1.0)], &SimOptions::new(60.0, 0.001)).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    let remaining: Vec<(GasTurbineSpec, f64)> = s.gas_turbines[1..online].iter().map(|g| (g.clone(), per_unit_mw)).collect();
    let damping = state.damping_mw_per_hz();
    let df = steady_state_frequency(per_unit_mw, &remaining, damping).map_err(|e| e.to_string())?;
    let f_ss = 50.0 + df;
    let simulated = tr.final_f_hz() - 50.0;
    ensure(((simulated - df) / df).abs() <= 0.01, format!("steady deviation {simulated} Hz vs analytic {df} Hz"))?;
    ensure(tr.nadir_hz() < tr.final_f_hz() - 1e-6, format!("nadir {} not below steady {}", tr.nadir_hz(), tr.final_f_hz()))?;
    let gains: Vec<f64> = remaining.iter().map(|(g, _)| g.rated_apparent_power / (g.droop * 50.0)).collect();
    let total_gain: f64 = gains.iter().sum();
    let last = tr.gt_mw.last().ok_or("empty trajectory")?;
    let increase_total: f64 = (1..online).map(|i| last[i] - per_unit_mw).sum();
    let expected_total = per_unit_mw - damping * (-df);
    ensure(
        ((increase_total - expected_total) / expected_total).abs() <= 0.02,
        format!("total increase {increase_total} MW vs {expected_total} MW"),
    )?;
    for (k, i) in (1..online).enumerate() {
        let share = expected_total * gains[k] / total_gain;
        let inc = last[i] - per_unit_mw;
        ensure(((inc - share) / share).abs() <= 0.02, format!("unit {} increase {inc} MW vs {share} MW", i + 1))?;
    }
    ensure(elapsed < 5.0, format!("simulation took {elapsed:.2} s"))?;
    Ok(format!(
        "{per_unit_mw} MW trip: steady {f_ss:.4} Hz (analytic {:.4}), nadir {:.4} Hz",
        50.0 + df,
        tr.nadir_hz()
    ))
}

fn dynamics() -> Result<String, String> {
    let a = trip_event(3, 13.5)?;
    let b = trip_event(2, 8.3)?;
    Ok(format!("{a}; {b}"))
}

fn determinism() -> Result<String, String> {
    let exe = env!("CARGO_BIN_EXE_leogo");
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "dispatch",
            vec!["dispatch", "--case", "A", "--duration", "1000", "--seed", "1"],
            vec!["dispatch.csv", "summary.json", "manifest.json"],
        ),
        ("dynamics", vec!["dynamics", "--trip", "gt1", "--duration", "10"], vec!["trajectory.csv", "manifest.json"]),
        ("powerflow", vec!["powerflow"], vec!["buses.csv", "branches.csv", "summary.json"]),
    ];
    let mut compared = 0;
    for (name, args, files) in runs {
        let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
        for d in &dirs {
            let status = Command::new(exe)
                .args(&args)
                .arg("--out")
                .arg(d.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), format!("{name} exited with {}", status.status))?;
        }
        for f in files {
            let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{name}/{f}: {e}"))?;
            let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| format!("{name}/{f}: {e}"))?;
            ensure(!a.is_empty() && a == b, format!("{name}/{f} differs between runs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} output files byte-identical across paired runs"))
}

fn main() {
    let mut report = Report { failures: Vec::new() };
    let criteria: [(&str, fn() -> Result<String, String>); 12] = [
        ("formula regression", formula_regression),
        ("fuel-curve endpoints", fuel_curve_endpoints),
        ("nominal operating state", nominal_state),
        ("heat balance", heat_balance),
        ("demand dip experiment", experiment_dip),
        ("wind variation experiment", experiment_wind),
        ("optimizer optimality", optimizer_optimality),
        ("battery round trip", battery_cycle),
        ("forecast calibration", forecast_calibration),
        ("power flow", power_flow),
        ("frequency dynamics", dynamics),
        ("determinism", determinism),
    ];
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        report.record(i + 1, name, started, check());
    }
    if report.failures.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {:?}", report.failures);
        std::process::exit(1);
    }
}
