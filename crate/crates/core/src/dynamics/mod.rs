//! RMS-domain frequency dynamics after generation or load disturbances.
//!
//! The default model aggregates all synchronous machines into one inertia
//! with a common frequency. The multi-machine model keeps one swing equation
//! per machine, coupled through transient reactances to a common load bus.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dispatch::PlanStep;
use crate::model::{GasTurbineSpec, Scenario, F_NOMINAL};
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Frequency deviation beyond which a run is declared unstable (Hz).
pub const INSTABILITY_HZ: f64 = 5.0;
const EQUILIBRIUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum DynamicsMode {
    #[default]
    Uniform,
    /// Per-machine swing equations with transient reactance `x_d_pu` on the
    /// machine base and mechanical damping `damping_pu` on the machine base.
    MultiMachine { x_d_pu: f64, damping_pu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineState {
    pub tag: String,
    pub spec: GasTurbineSpec,
    pub online: bool,
    /// Governor reference (MW).
    pub p_ref: f64,
    /// Mechanical power (MW).
    pub pm: f64,
    /// Rotor angle (rad).
    pub delta: f64,
    /// Speed deviation (pu).
    pub dw: f64,
}

impl MachineState {
    /// Inertia in MW·s/Hz.
    pub fn inertia(&self) -> f64 {
        2.0 * self.spec.inertia_constant * self.spec.rated_apparent_power / F_NOMINAL
    }

    /// Governor gain in MW/Hz.
    pub fn droop_gain(&self) -> f64 {
        self.spec.rated_apparent_power / (self.spec.droop * F_NOMINAL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicState {
    pub t: f64,
    /// Centre-of-inertia frequency (Hz).
    pub f_hz: f64,
    pub machines: Vec<MachineState>,
    /// Constant injections that do not respond to frequency (wind, battery) (MW).
    pub wind_mw: f64,
    pub other_injection_mw: f64,
    /// Load at nominal frequency (MW).
    pub load_mw: f64,
    /// Load damping (pu power per pu frequency).
    pub load_damping: f64,
    pub mode: DynamicsMode,
}

impl DynamicState {
    /// Load damping in MW/Hz.
    pub fn damping_mw_per_hz(&self) -> f64 {
        self.load_damping * self.load_mw / F_NOMINAL
    }

    pub fn online(&self) -> impl Iterator<Item = &MachineState> {
        self.machines.iter().filter(|m| m.online)
    }

    /// Largest mismatch between mechanical and electrical power at the current state (MW).
    pub fn equilibrium_residual(&self) -> f64 {
        let pe = electrical_power(self, &self.machines.iter().map(|m| m.delta).collect::<Vec<_>>(), self.f_hz - F_NOMINAL);
        match pe {
            Ok(pe) => self
                .machines
                .iter()
                .zip(&pe)
                .filter(|(m, _)| m.online)
                .map(|(m, p)| (m.pm - p).abs())
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Builds an equilibrium with explicit setpoints; `None` marks an offline unit.
pub fn init_from_setpoints(
    scenario: &Scenario,
    gt_mw: &[Option<f64>],
    wind_mw: f64,
    mode: DynamicsMode,
) -> Result<DynamicState> {
    init_with_injection(scenario, gt_mw, wind_mw, 0.0, mode)
}

/// Builds an equilibrium from a dispatched step. Battery power is held
/// constant as a non-responsive injection.
pub fn init_from_dispatch(scenario: &Scenario, step: &PlanStep, mode: DynamicsMode) -> Result<DynamicState> {
    if !step.feasible {
        return Err(Error::Invalid(format!("dispatch step at t = {} min is infeasible", step.t_min)));
    }
    let gt: Vec<Option<f64>> = step
        .status
        .iter()
        .zip(&step.gt_mw)
        .map(|(s, &p)| s.is_on().then_some(p))
        .collect();
    init_with_injection(scenario, &gt, step.wind_mw, step.batt_mw, mode)
}

fn init_with_injection(
    scenario: &Scenario,
    gt_mw: &[Option<f64>],
    wind_mw: f64,
    other_mw: f64,
    mode: DynamicsMode,
) -> Result<DynamicState> {
    if gt_mw.len() != scenario.gas_turbines.len() {
        return Err(Error::Invalid(format!(
            "{} setpoints for {} gas turbines",
            gt_mw.len(),
            scenario.gas_turbines.len()
        )));
    }
    if gt_mw.iter().all(Option::is_none) {
        return Err(Error::Invalid("no synchronous machine online".into()));
    }
    let mut machines = Vec::new();
    for (spec, p) in scenario.gas_turbines.iter().zip(gt_mw) {
        if let Some(p) = *p {
            if p < spec.min_load - 1e-9 || p > spec.capacity + 1e-9 {
                return Err(Error::Range(format!(
                    "{} setpoint {p} MW outside [{}, {}]",
                    spec.tag, spec.min_load, spec.capacity
                )));
            }
        }
        let pm = p.unwrap_or(0.0);
        let delta = match (mode, *p) {
            (DynamicsMode::MultiMachine { x_d_pu, .. }, Some(p)) => {
                let b = spec.rated_apparent_power / x_d_pu;
                if p > b {
                    return Err(Error::Range(format!("{} output {p} MW exceeds transfer limit {b} MW", spec.tag)));
                }
                (p / b).asin()
            }
            _ => 0.0,
        };
        machines.push(MachineState {
            tag: spec.tag.clone(),
            spec: spec.clone(),
            online: p.is_some(),
            p_ref: pm,
            pm,
            delta,
            dw: 0.0,
        });
    }
    let load_mw = gt_mw.iter().flatten().sum::<f64>() + wind_mw + other_mw;
    let state = DynamicState {
        t: 0.0,
        f_hz: F_NOMINAL,
        machines,
        wind_mw,
        other_injection_mw: other_mw,
        load_mw,
        load_damping: scenario.load_damping(),
        mode,
    };
    let residual = state.equilibrium_residual();
    if residual > EQUILIBRIUM_TOL {
        return Err(Error::Invalid(format!("initial state not in equilibrium (residual {residual:e} MW)")));
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Disconnect the machine with this tag.
    Trip(String),
    /// Change the load at a bus by `delta_mw`.
    LoadStep { bus: String, delta_mw: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn trip(tag: &str, t: f64) -> Self {
        Event {
            t,
            kind: EventKind::Trip(tag.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub tags: Vec<String>,
    pub t: Vec<f64>,
    pub f_hz: Vec<f64>,
    /// Electrical output per machine at each sample.
    pub gt_mw: Vec<Vec<f64>>,
    /// Mechanical power per machine at each sample.
    pub pm_mw: Vec<Vec<f64>>,
    /// Speed deviation per machine at each sample (pu).
    pub dw: Vec<Vec<f64>>,
    pub wind_mw: Vec<f64>,
    /// Total electrical load served at each sample.
    pub load_mw: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn nadir_hz(&self) -> f64 {
        self.f_hz.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_f_hz(&self) -> f64 {
        *self.f_hz.last().unwrap_or(&F_NOMINAL)
    }

    pub fn max_deviation_hz(&self) -> f64 {
        self.f_hz.iter().map(|f| (f - F_NOMINAL).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t_s".to_string(), "f_hz".to_string()];
        header.extend((1..=self.tags.len()).map(|i| format!("gt{i}_mw")));
        header.push("wind_mw".to_string());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![format!("{:.4}", self.t[k]), format!("{:.9}", self.f_hz[k])];
            rec.extend(self.gt_mw[k].iter().map(|p| format!("{p:.6}")));
            rec.push(format!("{:.6}", self.wind_mw[k]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub duration_s: f64,
    pub dt_s: f64,
    /// Keep every n-th integration step in the trajectory.
    pub record_every: usize,
}

impl SimOptions {
    pub fn new(duration_s: f64, dt_s: f64) -> Self {
        SimOptions {
            duration_s,
            dt_s,
            record_every: 1,
        }
    }
}

/// Load bus angle for given rotor angles, solving Σ bᵢ·sin(δᵢ − θ) = P.
fn load_bus_angle(b: &[f64], delta: &[f64], online: &[bool], p: f64) -> Option<f64> {
    let total: f64 = b.iter().zip(online).filter(|(_, &o)| o).map(|(b, _)| b).sum();
    if p.abs() >= total {
        return None;
    }
    let w: f64 = b.iter().zip(delta).zip(online).filter(|(_, &o)| o).map(|((b, d), _)| b * d).sum::<f64>() / total;
    let mut theta = w - (p / total).asin();
    for _ in 0..50 {
        let (mut f, mut df) = (-p, 0.0);
        for i in 0..b.len() {
            if online[i] {
                f += b[i] * (delta[i] - theta).sin();
                df -= b[i] * (delta[i] - theta).cos();
            }
        }
        if df == 0.0 {
            return None;
        }
        let step = f / df;
        theta -= step;
        if step.abs() < 1e-14 {
            return Some(theta);
        }
    }
    Some(theta)
}

/// Electrical output per machine (MW) at rotor angles `delta` and COI frequency deviation `df`.
fn electrical_power(state: &DynamicState, delta: &[f64], df: f64) -> Result<Vec<f64>> {
    let demand = state.load_mw * (1.0 + state.load_damping * df / F_NOMINAL) - state.wind_mw - state.other_injection_mw;
    let online: Vec<bool> = state.machines.iter().map(|m| m.online).collect();
    match state.mode {
        DynamicsMode::Uniform => {
            let m_tot: f64 = state.online().map(MachineState::inertia).sum();
            let pm_tot: f64 = state.online().map(|m| m.pm).sum();
            Ok(state
                .machines
                .iter()
                .map(|m| {
                    if m.online {
                        m.pm - m.inertia() / m_tot * (pm_tot - demand)
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        DynamicsMode::MultiMachine { x_d_pu, .. } => {
            let b: Vec<f64> = state.machines.iter().map(|m| m.spec.rated_apparent_power / x_d_pu).collect();
            let theta = load_bus_angle(&b, delta, &online, demand).ok_or(Error::Instability {
                t: state.t,
                deviation_hz: df,
            })?;
            Ok((0..b.len())
                .map(|i| if online[i] { b[i] * (delta[i] - theta).sin() } else { 0.0 })
                .collect())
        }
    }
}

/// Equilibrium frequency deviation (Hz) after losing `delta_p_mw` of
/// generation, with governors saturating at their limits. `machines` pairs
/// each remaining unit with its pre-event output.
pub fn steady_state_frequency(delta_p_mw: f64, machines: &[(GasTurbineSpec, f64)], damping_mw_per_hz: f64) -> Result<f64> {
    if delta_p_mw == 0.0 {
        return Ok(0.0);
    }
    let gain = |s: &GasTurbineSpec| s.rated_apparent_power / (s.droop * F_NOMINAL);
    let mut free: Vec<bool> = vec![true; machines.len()];
    loop {
        let k: f64 = machines.iter().zip(&free).filter(|(_, &f)| f).map(|((s, _), _)| gain(s)).sum();
        let fixed: f64 = machines
            .iter()
            .zip(&free)
            .filter(|(_, &f)| !f)
            .map(|((s, p), _)| if delta_p_mw > 0.0 { s.capacity - p } else { s.min_load - p })
            .sum();
        if k + damping_mw_per_hz <= 0.0 {
            return Err(Error::Invalid("no governor headroom or load damping to absorb the imbalance".into()));
        }
        let df = -(delta_p_mw - fixed) / (k + damping_mw_per_hz);
        let mut changed = false;
        for (i, (s, p)) in machines.iter().enumerate() {
            if free[i] {
                let target = p - gain(s) * df;
                if target > s.capacity + 1e-12 || target < s.min_load - 1e-12 {
                    free[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            if k == 0.0 && delta_p_mw > fixed + 1e-12 && damping_mw_per_hz == 0.0 {
                return Err(Error::Invalid("no machine with governor headroom".into()));
            }
            return Ok(df);
        }
    }
}

/// Integrates the system with fixed-step RK4, applying events at their times.
pub fn simulate(initial: &DynamicState, events: &[Event], opts: &SimOptions) -> Result<Trajectory> {
    if !(opts.dt_s > 0.0 && opts.dt_s <= 0.010 + 1e-15) {
        return Err(Error::Domain(format!("time step {} s must be in (0, 0.01]", opts.dt_s)));
    }
    if !(opts.duration_s >= 0.0) {
        return Err(Error::Domain("duration must be >= 0".into()));
    }
    for e in events {
        if e.t < 0.0 || e.t > opts.duration_s {
            return Err(Error::Domain(format!("event at {} s outside [0, {}]", e.t, opts.duration_s)));
        }
        if let EventKind::Trip(tag) = &e.kind {
            if !initial.machines.iter().any(|m| &m.tag == tag) {
                return Err(Error::Invalid(format!("unknown machine {tag}")));
            }
        }
    }
    let mut events: Vec<&Event> = events.iter().collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut st = initial.clone();
    let n = st.machines.len();
    let multi = matches!(st.mode, DynamicsMode::MultiMachine { .. });
    // State vector: [df_coi or df_i..., pm_i..., delta_i...]
    let nf = if multi { n } else { 1 };
    let mut x = vec![0.0; nf + 2 * n];
    for (i, m) in st.machines.iter().enumerate() {
        if multi {
            x[i] = m.dw * F_NOMINAL;
        }
        x[nf + i] = m.pm;
        x[nf + n + i] = m.delta;
    }
    if !multi {
        x[0] = st.f_hz - F_NOMINAL;
    }

    let deriv = |st: &DynamicState, x: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut probe = st.clone();
        for i in 0..n {
            probe.machines[i].pm = x[nf + i];
        }
        let df_of = |i: usize| if multi { x[i] } else { x[0] };
        let coi = if multi {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, m) in st.machines.iter().enumerate().filter(|(_, m)| m.online) {
                num += m.inertia() * x[i];
                den += m.inertia();
            }
            num / den
        } else {
            x[0]
        };
        let pe = electrical_power(&probe, &x[nf + n..], coi)?;
        let mut dx = vec![0.0; x.len()];
        let m_tot: f64 = st.online().map(MachineState::inertia).sum();
        let demand = st.load_mw * (1.0 + st.load_damping * coi / F_NOMINAL) - st.wind_mw - st.other_injection_mw;
        for (i, m) in st.machines.iter().enumerate() {
            if !m.online {
                continue;
            }
            let df = df_of(i);
            let target = (m.p_ref - m.droop_gain() * df).clamp(m.spec.min_load, m.spec.capacity);
            dx[nf + i] = (target - x[nf + i]) / m.spec.governor_time_constant;
            dx[nf + n + i] = std::f64::consts::TAU * df;
            if let DynamicsMode::MultiMachine { damping_pu, .. } = st.mode {
                let damp = damping_pu * m.spec.rated_apparent_power / F_NOMINAL * (df - coi);
                dx[i] = (x[nf + i] - pe[i] - damp) / m.inertia();
            }
        }
        if !multi {
            let pm_tot: f64 = (0..n).filter(|&i| st.machines[i].online).map(|i| x[nf + i]).sum();
            dx[0] = (pm_tot - demand) / m_tot;
        }
        Ok((dx, pe))
    };

    let mut traj = Trajectory {
        tags: st.machines.iter().map(|m| m.tag.clone()).collect(),
        ..Default::default()
    };
    let record = |traj: &mut Trajectory, st: &DynamicState, x: &[f64], pe: &[f64]| {
        let coi = coi_of(st, x, nf, multi);
        traj.t.push(st.t);
        traj.f_hz.push(F_NOMINAL + coi);
        traj.gt_mw.push(pe.to_vec());
        traj.pm_mw.push((0..n).map(|i| if st.machines[i].online { x[nf + i] } else { 0.0 }).collect());
        traj.dw.push((0..n).map(|i| if multi { x[i] } else { x[0] } / F_NOMINAL).collect());
        traj.wind_mw.push(st.wind_mw);
        traj.load_mw.push(st.load_mw * (1.0 + st.load_damping * coi / F_NOMINAL));
    };

    let steps = (opts.duration_s / opts.dt_s - 1e-9).ceil().max(0.0) as usize;
    let mut next_event = 0;
    let apply_events = |st: &mut DynamicState, x: &mut [f64], upto: f64, next_event: &mut usize| -> Result<()> {
        while *next_event < events.len() && events[*next_event].t <= upto + 1e-12 {
            match &events[*next_event].kind {
                EventKind::Trip(tag) => {
                    let i = st.machines.iter().position(|m| &m.tag == tag).expect("validated");
                    st.machines[i].online = false;
                    x[nf + i] = 0.0;
                    if multi {
                        x[i] = 0.0;
                    }
                    // Without synchronous machines the frequency collapses.
                    if st.online().next().is_none() {
                        return Err(Error::Instability {
                            t: st.t,
                            deviation_hz: -F_NOMINAL,
                        });
                    }
                }
                EventKind::LoadStep { delta_mw, .. } => st.load_mw += delta_mw,
            }
            *next_event += 1;
        }
        Ok(())
    };

    apply_events(&mut st, &mut x, 0.0, &mut next_event)?;
    let (_, pe0) = deriv(&st, &x)?;
    record(&mut traj, &st, &x, &pe0);
    for k in 0..steps {
        let h = opts.dt_s.min(opts.duration_s - st.t);
        let (k1, _) = deriv(&st, &x)?;
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, d)| a + 0.5 * h * d).collect();
        let (k2, _) = deriv(&st, &x2)?;
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, d)| a + 0.5 * h * d).collect();
        let (k3, _) = deriv(&st, &x3)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, d)| a + h * d).collect();
        let (k4, _) = deriv(&st, &x4)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (i, m) in st.machines.iter().enumerate() {
            if m.online {
                x[nf + i] = x[nf + i].clamp(m.spec.min_load, m.spec.capacity);
            }
        }
        st.t = if k + 1 == steps { opts.duration_s } else { (k + 1) as f64 * opts.dt_s };
        let now = st.t;
        apply_events(&mut st, &mut x, now, &mut next_event)?;
        let coi = coi_of(&st, &x, nf, multi);
        if !coi.is_finite() || coi.abs() > INSTABILITY_HZ {
            return Err(Error::Instability {
                t: st.t,
                deviation_hz: coi,
            });
        }
        if (k + 1) % opts.record_every.max(1) == 0 || k + 1 == steps {
            let (_, pe) = deriv(&st, &x)?;
            record(&mut traj, &st, &x, &pe);
        }
    }
    Ok(traj)
}

fn coi_of(st: &DynamicState, x: &[f64], nf: usize, multi: bool) -> f64 {
    if !multi {
        return x[0];
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, m) in st.machines.iter().enumerate().take(nf) {
        if m.online {
            num += m.inertia() * x[i];
            den += m.inertia();
        }
    }
    num / den
}

/// Runs independent event studies from a shared initial state.
pub fn simulate_batch(
    initial: &DynamicState,
    studies: &[Vec<Event>],
    opts: &SimOptions,
    exec: Exec,
) -> Vec<Result<Trajectory>> {
    par::map(exec, studies, |events| simulate(initial, events, opts))
}
