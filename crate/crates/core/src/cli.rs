//! Command-line front end: reproducible dispatch, dynamics and power-flow
//! runs that write CSV data, a JSON summary and a manifest.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dispatch::{plan_horizon, rolling_simulate, CommitmentState, HorizonForecast, PlannerConfig};
use crate::dynamics::{init_from_dispatch, init_from_setpoints, simulate, DynamicsMode, Event, EventKind, SimOptions};
use crate::model::{build_canonical_scenario, consistency_notes, validate, CaseVariation, Scenario, SCENARIO_CONSTANTS_VERSION};
use crate::network::{build_canonical_grid, check_ratings, solve_power_flow, write_branch_csv, write_bus_csv, Injections, PowerFlowOptions};
use crate::profiles::{apply_demand_dip, ingest_csv, synthetic_profiles, CANONICAL_SEED};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "leogo", version, about = "Offshore platform energy-system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rolling-horizon unit commitment and dispatch.
    Dispatch(DispatchArgs),
    /// Frequency transient after a disturbance.
    Dynamics(DynamicsArgs),
    /// AC power flow at the nominal operating point.
    Powerflow(PowerflowArgs),
    /// Check a scenario file and optionally a profile CSV.
    Validate(ValidateArgs),
    /// Write a canonical scenario as TOML.
    ExportScenario(ExportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Case variation: base, A or B.
    #[arg(long, default_value = "base")]
    case: CaseVariation,
    /// Scenario TOML overriding the canonical case.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = CANONICAL_SEED)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DispatchArgs {
    #[command(flatten)]
    common: Common,
    /// Run length in minutes.
    #[arg(long, default_value_t = 1000.0)]
    duration: f64,
    /// Step in minutes.
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    /// Planning horizon in steps.
    #[arg(long, default_value_t = 18)]
    horizon: usize,
    /// Profile CSV; synthetic profiles from the seed are used otherwise.
    #[arg(long)]
    wind_profile: Option<PathBuf>,
    /// Demand reduction as fraction:start_min:end_min.
    #[arg(long)]
    demand_dip: Option<String>,
}

#[derive(Debug, Args)]
struct DynamicsArgs {
    #[command(flatten)]
    common: Common,
    /// Machine to trip, e.g. gt1.
    #[arg(long)]
    trip: Option<String>,
    /// Trip time in seconds.
    #[arg(long, default_value_t = 1.0)]
    at: f64,
    /// Simulated time in seconds.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Integration step in milliseconds.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Comma-separated gas turbine setpoints in MW, `off` for offline units.
    #[arg(long)]
    setpoints: Option<String>,
    /// Wind injection in MW when setpoints are given.
    #[arg(long, default_value_t = 0.0)]
    wind_mw: f64,
    /// Keep every n-th integration step in the output.
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// Per-machine swing equations instead of a uniform frequency.
    #[arg(long)]
    multi_machine: bool,
}

#[derive(Debug, Args)]
struct PowerflowArgs {
    #[command(flatten)]
    common: Common,
    /// Demand multiplier on flow-dependent loads.
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    /// Replace every branch by an ideal connection.
    #[arg(long)]
    copper_plate: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value = "base")]
    case: CaseVariation,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Profile CSV to check.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, default_value = "base")]
    case: CaseVariation,
    /// Destination file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: Vec<String>,
    seed: u64,
    case: &'a str,
    package_version: &'a str,
    scenario_constants_version: &'a str,
    scenario_sha256: String,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let recorded = recorded_args(&args);
    let result = match cli.command {
        Command::Dispatch(a) => run_dispatch(&a, &recorded),
        Command::Dynamics(a) => run_dynamics(&a, &recorded),
        Command::Powerflow(a) => run_powerflow(&a, &recorded),
        Command::Validate(a) => run_validate(&a),
        Command::ExportScenario(a) => run_export(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

/// Command-line arguments minus the output location, so manifests of
/// identical runs into different directories compare equal.
fn recorded_args(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = iter.next() {
        if a == "--out" {
            iter.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

fn load_scenario(case: CaseVariation, path: Option<&Path>) -> anyhow::Result<Scenario> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Scenario::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => Ok(build_canonical_scenario(case)),
    }
}

fn prepare(common: &Common) -> anyhow::Result<Scenario> {
    let scenario = load_scenario(common.case, common.scenario.as_deref())?;
    let violations = validate(&scenario);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        bail!("scenario has {} violations", violations.len());
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(scenario)
}

fn write_manifest(common: &Common, command: &str, args: &[String], scenario: &Scenario) -> anyhow::Result<()> {
    let toml = scenario.to_toml()?;
    let digest = Sha256::digest(toml.as_bytes());
    let manifest = Manifest {
        command,
        args: args.to_vec(),
        seed: common.seed,
        case: scenario.case.label(),
        package_version: env!("CARGO_PKG_VERSION"),
        scenario_constants_version: SCENARIO_CONSTANTS_VERSION,
        scenario_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    };
    write_json(&common.out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn parse_dip(spec: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("--demand-dip expects fraction:start:end, got {spec:?}");
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| anyhow!("bad number {s:?} in --demand-dip"));
    Ok((num(parts[0])?, num(parts[1])?, num(parts[2])?))
}

fn run_dispatch(a: &DispatchArgs, args: &[String]) -> anyhow::Result<i32> {
    if !(a.step > 0.0) || !(a.duration >= 0.0) || a.horizon == 0 {
        bail!("--step and --horizon must be positive and --duration non-negative");
    }
    let dip = a.demand_dip.as_deref().map(parse_dip).transpose()?;
    let scenario = prepare(&a.common)?;
    let cfg = PlannerConfig {
        step_min: a.step,
        horizon_steps: a.horizon,
        ..PlannerConfig::default()
    };
    let needed_min = (a.duration + (a.horizon as f64 + 1.0) * a.step).ceil() as usize;
    let mut profiles = match &a.wind_profile {
        Some(p) => ingest_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?, None)?,
        None => synthetic_profiles(needed_min, a.common.seed),
    };
    if let Some((frac, start, end)) = dip {
        apply_demand_dip(&mut profiles, frac, start, end)?;
    }
    let plan = rolling_simulate(&scenario, &profiles, a.duration, &cfg)?;
    plan.write_csv(create(&a.common.out.join("dispatch.csv"))?, scenario.gas_turbines.len())?;

    #[derive(Serialize)]
    struct Summary {
        objective: f64,
        on_count_runs: Vec<usize>,
        #[serde(flatten)]
        totals: crate::dispatch::PlanSummary,
    }
    let summary = Summary {
        objective: plan.objective,
        on_count_runs: plan.on_count_runs(),
        totals: plan.summary(),
    };
    write_json(&a.common.out.join("summary.json"), &summary)?;
    write_manifest(&a.common, "dispatch", args, &scenario)?;
    let infeasible = summary.totals.infeasible_steps;
    println!(
        "dispatch: {} steps, fuel {:.1} Sm3, CO2 {:.1} kg, {} starts, {} infeasible steps",
        summary.totals.steps, summary.totals.fuel_sm3, summary.totals.co2_kg, summary.totals.gt_starts, infeasible
    );
    Ok(if infeasible > 0 { EXIT_INFEASIBLE } else { EXIT_OK })
}

fn parse_setpoints(spec: &str, n: usize) -> anyhow::Result<Vec<Option<f64>>> {
    let values: Vec<Option<f64>> = spec
        .split(',')
        .map(|s| {
            let s = s.trim();
            if s.eq_ignore_ascii_case("off") {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| anyhow!("bad setpoint {s:?}"))
            }
        })
        .collect::<anyhow::Result<_>>()?;
    if values.len() != n {
        bail!("{} setpoints given for {n} gas turbines", values.len());
    }
    Ok(values)
}

/// Settled dispatch at nominal demand with all wind available.
fn nominal_snapshot(scenario: &Scenario) -> anyhow::Result<crate::dispatch::PlanStep> {
    let cfg = PlannerConfig::default();
    let demand = crate::dispatch::step_demand(scenario, 1.0)?;
    let steps = 12;
    let forecast = HorizonForecast::constant(demand, scenario.wind_capacity(), steps);
    let plan = plan_horizon(scenario, &CommitmentState::all_on(scenario), &forecast, steps, &cfg)?;
    plan.steps.last().cloned().ok_or_else(|| anyhow!("empty snapshot plan"))
}

fn run_dynamics(a: &DynamicsArgs, args: &[String]) -> anyhow::Result<i32> {
    let scenario = prepare(&a.common)?;
    let mode = if a.multi_machine {
        DynamicsMode::MultiMachine {
            x_d_pu: 0.3,
            damping_pu: 2.0,
        }
    } else {
        DynamicsMode::Uniform
    };
    let state = match &a.setpoints {
        Some(s) => init_from_setpoints(&scenario, &parse_setpoints(s, scenario.gas_turbines.len())?, a.wind_mw, mode)?,
        None => init_from_dispatch(&scenario, &nominal_snapshot(&scenario)?, mode)?,
    };
    let mut events = Vec::new();
    if let Some(id) = &a.trip {
        let tag = state
            .machines
            .iter()
            .find(|m| m.tag.eq_ignore_ascii_case(id))
            .map(|m| m.tag.clone())
            .ok_or_else(|| anyhow!("unknown machine {id:?}"))?;
        events.push(Event {
            t: a.at,
            kind: EventKind::Trip(tag),
        });
    }
    let opts = SimOptions {
        duration_s: a.duration,
        dt_s: a.dt / 1000.0,
        record_every: a.record_every.max(1),
    };
    write_manifest(&a.common, "dynamics", args, &scenario)?;
    let traj = match simulate(&state, &events, &opts) {
        Ok(t) => t,
        Err(e @ Error::Instability { .. }) => {
            eprintln!("dynamics: {e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    traj.write_csv(create(&a.common.out.join("trajectory.csv"))?)?;

    #[derive(Serialize)]
    struct Summary {
        samples: usize,
        nadir_hz: f64,
        final_hz: f64,
        max_deviation_hz: f64,
        initial_mw: Vec<f64>,
        final_mw: Vec<f64>,
    }
    let summary = Summary {
        samples: traj.len(),
        nadir_hz: traj.nadir_hz(),
        final_hz: traj.final_f_hz(),
        max_deviation_hz: traj.max_deviation_hz(),
        initial_mw: traj.gt_mw.first().cloned().unwrap_or_default(),
        final_mw: traj.gt_mw.last().cloned().unwrap_or_default(),
    };
    write_json(&a.common.out.join("summary.json"), &summary)?;
    println!(
        "dynamics: nadir {:.4} Hz, final {:.4} Hz, {} samples",
        summary.nadir_hz, summary.final_hz, summary.samples
    );
    Ok(EXIT_OK)
}

fn run_powerflow(a: &PowerflowArgs, args: &[String]) -> anyhow::Result<i32> {
    let scenario = prepare(&a.common)?;
    let mut grid = build_canonical_grid(&scenario)?;
    if a.copper_plate {
        grid = grid.copper_plate();
    }
    let mut inj = Injections::table_point(&scenario, &grid);
    inj.load_multiplier = a.multiplier;
    write_manifest(&a.common, "powerflow", args, &scenario)?;
    let result = match solve_power_flow(&grid, &inj, &PowerFlowOptions::default()) {
        Ok(r) => r,
        Err(e @ Error::NonConvergence { .. }) => {
            eprintln!("powerflow: {e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    write_bus_csv(create(&a.common.out.join("buses.csv"))?, &result)?;
    write_branch_csv(create(&a.common.out.join("branches.csv"))?, &result)?;
    let overloads = check_ratings(&grid, &result);

    #[derive(Serialize)]
    struct Summary<'a> {
        converged: bool,
        iterations: usize,
        max_mismatch_pu: f64,
        losses_mw: f64,
        total_generation_mw: f64,
        total_load_mw: f64,
        overloads: &'a [crate::network::Overload],
    }
    write_json(
        &a.common.out.join("summary.json"),
        &Summary {
            converged: true,
            iterations: result.iterations,
            max_mismatch_pu: result.max_mismatch_pu,
            losses_mw: result.losses_mw,
            total_generation_mw: result.total_generation_mw,
            total_load_mw: result.total_load_mw,
            overloads: &overloads,
        },
    )?;
    println!(
        "powerflow: converged in {} iterations, losses {:.4} MW, {} overloads",
        result.iterations,
        result.losses_mw,
        overloads.len()
    );
    for o in &overloads {
        println!("overload: {} at {:.1} %", o.branch, o.loading_pct);
    }
    Ok(EXIT_OK)
}

fn run_validate(a: &ValidateArgs) -> anyhow::Result<i32> {
    let scenario = match load_scenario(a.case, a.scenario.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            println!("invalid: {e:#}");
            return Ok(EXIT_USAGE);
        }
    };
    let mut problems: Vec<String> = validate(&scenario).iter().map(ToString::to_string).collect();
    if let Ok(grid) = build_canonical_grid(&scenario) {
        problems.extend(grid.check_topology());
    }
    if let Some(p) = &a.profile {
        match File::open(p).map_err(Error::from).and_then(|f| ingest_csv(f, None)) {
            Ok(set) => problems.extend(set.violations(false).into_iter().map(|v| format!("profile: {v}"))),
            Err(e) => problems.push(format!("profile: {e}")),
        }
    }
    for n in consistency_notes(&scenario) {
        println!("note: {n}");
    }
    for p in &problems {
        println!("violation: {p}");
    }
    if problems.is_empty() {
        println!("valid: {} case", scenario.case.label());
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_USAGE)
    }
}

fn run_export(a: &ExportArgs) -> anyhow::Result<i32> {
    let text = build_canonical_scenario(a.case).to_toml()?;
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
