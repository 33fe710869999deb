//! Forward dynamic program over commitment and storage states.
//!
//! Identical gas turbines are interchangeable, so their statuses are kept as
//! a sorted multiset; labels are reassigned when the optimal path is read
//! back, keeping lower-numbered units on in preference to higher ones.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::economic::{economic_dispatch, EconomicDispatch, StepRequest};
use super::plan::{DispatchPlan, PlanStep};
use super::{CommitmentState, GtStatus, PlannerConfig};
use crate::model::{BatterySpec, GasTurbineSpec, Scenario};
use crate::par;
use crate::{Error, Result};

pub(crate) const ON: u8 = 0;
pub(crate) const OFF: u8 = u8::MAX;
const MAX_UNITS: usize = 6;

/// Per-step demand and available wind over the planning horizon (MW).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HorizonForecast {
    pub demand_mw: Vec<f64>,
    pub wind_mw: Vec<f64>,
}

impl HorizonForecast {
    pub fn constant(demand_mw: f64, wind_mw: f64, steps: usize) -> Self {
        HorizonForecast {
            demand_mw: vec![demand_mw; steps],
            wind_mw: vec![wind_mw; steps],
        }
    }
}

/// Discretized state-of-charge grid for a single battery.
#[derive(Debug, Clone)]
pub(crate) struct SocGrid {
    pub spec: BatterySpec,
    pub levels: usize,
    pub resolution: f64,
    pub max_charge: usize,
    pub max_discharge: usize,
    pub dt_h: f64,
    pub reserve: bool,
}

impl SocGrid {
    pub fn new(spec: &BatterySpec, cfg: &PlannerConfig) -> Self {
        let dt_h = cfg.step_hours();
        let levels = if spec.energy_capacity > 0.0 {
            (spec.energy_capacity / cfg.soc_resolution_mwh).round().max(1.0) as usize + 1
        } else {
            1
        };
        let resolution = if levels > 1 {
            spec.energy_capacity / (levels - 1) as f64
        } else {
            1.0
        };
        let max_charge = (spec.power_capacity * spec.charge_efficiency * dt_h / resolution + 1e-9).floor() as usize;
        let max_discharge = (spec.power_capacity * dt_h / spec.discharge_efficiency / resolution + 1e-9).floor() as usize;
        SocGrid {
            spec: spec.clone(),
            levels,
            resolution,
            max_charge: max_charge.min(levels - 1),
            max_discharge: max_discharge.min(levels - 1),
            dt_h,
            reserve: cfg.battery_reserve,
        }
    }

    pub fn index(&self, soc: f64) -> usize {
        ((soc / self.resolution).round().max(0.0) as usize).min(self.levels - 1)
    }

    pub fn soc(&self, idx: usize) -> f64 {
        idx as f64 * self.resolution
    }

    /// Battery power (positive = discharge) moving from `from` to `to`.
    pub fn power(&self, from: usize, to: usize) -> f64 {
        if to >= from {
            -((to - from) as f64) * self.resolution / (self.spec.charge_efficiency * self.dt_h)
        } else {
            (from - to) as f64 * self.resolution * self.spec.discharge_efficiency / self.dt_h
        }
    }

    pub fn headroom(&self, from: usize, power: f64) -> f64 {
        if !self.reserve {
            return 0.0;
        }
        let energy_limit = self.soc(from) * self.spec.discharge_efficiency / self.dt_h;
        (self.spec.power_capacity - power).min(energy_limit - power).max(0.0)
    }
}

/// Shared per-instance data for the planner and the reconstruction step.
pub(crate) struct Setup<'a> {
    pub scenario: &'a Scenario,
    pub cfg: &'a PlannerConfig,
    pub specs: &'a [GasTurbineSpec],
    pub delays: Vec<u32>,
    pub battery: Option<SocGrid>,
}

impl<'a> Setup<'a> {
    pub fn new(scenario: &'a Scenario, cfg: &'a PlannerConfig) -> Result<Self> {
        cfg.check()?;
        let specs = &scenario.gas_turbines[..];
        if specs.len() > MAX_UNITS {
            return Err(Error::StateSpace(format!(
                "{} gas turbines exceed the planner limit of {MAX_UNITS}",
                specs.len()
            )));
        }
        if scenario.batteries.len() > 1 {
            return Err(Error::StateSpace(format!(
                "{} batteries; the planner supports at most one",
                scenario.batteries.len()
            )));
        }
        let delays: Vec<u32> = specs.iter().map(|s| cfg.startup_steps(s.startup_delay_min())).collect();
        if delays.iter().any(|&d| d >= u32::from(OFF)) {
            return Err(Error::StateSpace("startup delay too long for the step size".into()));
        }
        Ok(Setup {
            scenario,
            cfg,
            specs,
            delays,
            battery: scenario.batteries.first().map(|b| SocGrid::new(b, cfg)),
        })
    }

    pub fn soc_levels(&self) -> usize {
        self.battery.as_ref().map_or(1, |b| b.levels)
    }

    pub fn code_of(&self, unit: usize, status: GtStatus) -> u8 {
        match status {
            GtStatus::On => ON,
            GtStatus::Off => OFF,
            GtStatus::Starting(min) => {
                let k = (f64::from(min) / self.cfg.step_min - 1e-9).ceil().max(0.0) as u32;
                if k == 0 {
                    ON
                } else {
                    k.min(self.delays[unit].max(1)) as u8
                }
            }
        }
    }

    pub fn status_of(&self, code: u8) -> GtStatus {
        match code {
            ON => GtStatus::On,
            OFF => GtStatus::Off,
            k => GtStatus::Starting((f64::from(k) * self.cfg.step_min).ceil() as u32),
        }
    }

    /// Successor codes of one unit with a flag marking a start.
    pub fn options(&self, unit: usize, code: u8) -> ([(u8, bool); 2], usize) {
        match code {
            ON => ([(ON, false), (OFF, false)], 2),
            OFF => {
                let d = self.delays[unit];
                let start = if d == 0 { ON } else { d as u8 };
                ([(OFF, false), (start, true)], 2)
            }
            1 => ([(ON, false), (ON, false)], 1),
            k => ([(k - 1, false), (k - 1, false)], 1),
        }
    }

    /// Battery setpoint and headroom for a SoC move.
    pub fn battery_move(&self, from: usize, to: usize) -> (f64, f64) {
        match &self.battery {
            Some(b) => {
                let p = b.power(from, to);
                (p, b.headroom(from, p))
            }
            None => (0.0, 0.0),
        }
    }

    /// Reachable target SoC indices from `from`.
    pub fn soc_targets(&self, from: usize) -> std::ops::RangeInclusive<usize> {
        match &self.battery {
            Some(b) => from.saturating_sub(b.max_discharge)..=(from + b.max_charge).min(b.levels - 1),
            None => 0..=0,
        }
    }

    pub fn request(&self, demand_mw: f64, wind_mw: f64, soc_from: usize, soc_to: usize) -> StepRequest {
        let (battery_mw, battery_headroom_mw) = self.battery_move(soc_from, soc_to);
        StepRequest {
            demand_mw,
            wind_available_mw: wind_mw,
            battery_mw,
            battery_headroom_mw,
            reserve_mw: self.scenario.reserve_requirement,
            heat_mw: self.scenario.heat_demand_mw(),
        }
    }

    pub fn dispatch(&self, on: &[bool], demand_mw: f64, wind_mw: f64, soc_from: usize, soc_to: usize) -> EconomicDispatch {
        economic_dispatch(self.specs, on, &self.request(demand_mw, wind_mw, soc_from, soc_to))
    }

    pub fn symmetric(&self) -> bool {
        self.specs.windows(2).all(|w| {
            let mut b = w[1].clone();
            b.tag = w[0].tag.clone();
            w[0] == b
        })
    }

    pub fn initial_codes(&self, state: &CommitmentState) -> Vec<u8> {
        state.gts.iter().enumerate().map(|(i, &s)| self.code_of(i, s)).collect()
    }

    pub fn initial_soc(&self, state: &CommitmentState) -> usize {
        match (&self.battery, state.soc.first()) {
            (Some(b), Some(&soc)) => b.index(soc),
            (Some(b), None) => b.index(0.5 * b.spec.energy_capacity),
            _ => 0,
        }
    }

    pub fn build_step(
        &self,
        t_min: f64,
        codes: &[u8],
        starts: usize,
        stops: usize,
        demand_mw: f64,
        wind_mw: f64,
        soc_from: usize,
        soc_to: usize,
    ) -> PlanStep {
        let on: Vec<bool> = codes.iter().map(|&c| c == ON).collect();
        let d = self.dispatch(&on, demand_mw, wind_mw, soc_from, soc_to);
        let soc = self.battery.as_ref().map(|b| b.soc(soc_to));
        PlanStep::from_dispatch(
            self.scenario,
            self.cfg,
            t_min,
            codes.iter().map(|&c| self.status_of(c)).collect(),
            starts,
            stops,
            demand_mw,
            soc,
            d,
        )
    }
}

fn on_mask(codes: &[u8]) -> usize {
    codes
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == ON)
        .fold(0, |m, (i, _)| m | (1 << i))
}

/// Every combination of per-unit successors as (next codes, starts, stops).
pub(crate) fn successors(setup: &Setup, codes: &[u8]) -> Vec<(Vec<u8>, usize, usize)> {
    let n = codes.len();
    let opts: Vec<([(u8, bool); 2], usize)> = (0..n).map(|i| setup.options(i, codes[i])).collect();
    let total: usize = opts.iter().map(|o| o.1).product();
    let mut out = Vec::with_capacity(total);
    for mut combo in 0..total {
        let mut next = Vec::with_capacity(n);
        let (mut starts, mut stops) = (0, 0);
        for (i, (o, len)) in opts.iter().enumerate() {
            let (c, start) = o[combo % len];
            combo /= len;
            starts += usize::from(start);
            stops += usize::from(codes[i] == ON && c == OFF);
            next.push(c);
        }
        out.push((next, starts, stops));
    }
    out
}

/// Step cost table indexed by `[mask][soc_from][soc_to - soc_from + max_discharge]`.
struct CostTable {
    span: usize,
    offset: usize,
    levels: usize,
    values: Vec<f64>,
}

impl CostTable {
    fn build(setup: &Setup, demand: f64, wind: f64) -> Self {
        let n = setup.specs.len();
        let levels = setup.soc_levels();
        let (offset, span) = match &setup.battery {
            Some(b) => (b.max_discharge, b.max_discharge + b.max_charge + 1),
            None => (0, 1),
        };
        let reserve_req = setup.scenario.reserve_requirement;
        // Setpoints depend on the battery move only through its power, so one
        // dispatch per (mask, move) serves every starting SoC.
        let blocks = par::map_range(setup.cfg.exec, (1usize << n) * span, |idx| {
            let mask = idx / span;
            let d_idx = idx % span;
            let on: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let (from, to) = if d_idx >= offset { (0, d_idx - offset) } else { (offset - d_idx, 0) };
            let (battery_mw, _) = setup.battery_move(from, to);
            let mut req = setup.request(demand, wind, 0, 0);
            req.battery_mw = battery_mw;
            req.battery_headroom_mw = 0.0;
            let base = economic_dispatch(setup.specs, &on, &req);
            (0..levels)
                .map(|from| {
                    let to = from as isize + d_idx as isize - offset as isize;
                    if to < 0 || to >= levels as isize {
                        return f64::INFINITY;
                    }
                    let (_, headroom) = setup.battery_move(from, to as usize);
                    setup
                        .cfg
                        .step_cost(setup.scenario, &base.clone().with_battery_headroom(headroom, reserve_req))
                })
                .collect::<Vec<f64>>()
        });
        let mut values = vec![f64::INFINITY; (1usize << n) * levels * span];
        for (idx, block) in blocks.into_iter().enumerate() {
            let (mask, d_idx) = (idx / span, idx % span);
            for (from, c) in block.into_iter().enumerate() {
                values[(mask * levels + from) * span + d_idx] = c;
            }
        }
        CostTable {
            span,
            offset,
            levels,
            values,
        }
    }

    fn get(&self, mask: usize, from: usize, to: usize) -> f64 {
        self.values[(mask * self.levels + from) * self.span + (to + self.offset - from)]
    }
}

/// Minimum-cost commitment, dispatch and storage schedule over the horizon.
pub fn plan_horizon(
    scenario: &Scenario,
    state: &CommitmentState,
    forecast: &HorizonForecast,
    horizon_steps: usize,
    cfg: &PlannerConfig,
) -> Result<DispatchPlan> {
    let setup = Setup::new(scenario, cfg)?;
    state.validate(scenario)?;
    if forecast.demand_mw.len() < horizon_steps || forecast.wind_mw.len() < horizon_steps {
        return Err(Error::Invalid(format!(
            "forecast covers {} demand and {} wind steps, horizon needs {horizon_steps}",
            forecast.demand_mw.len(),
            forecast.wind_mw.len()
        )));
    }
    let symmetric = setup.symmetric();
    let start_codes = setup.initial_codes(state);
    let start_soc = setup.initial_soc(state);
    let canon = |mut c: Vec<u8>| {
        if symmetric {
            c.sort_unstable();
        }
        c
    };

    // Every commitment configuration reachable from the start, with its moves.
    let mut codes_list: Vec<Vec<u8>> = vec![canon(start_codes.clone())];
    let mut code_index: HashMap<Vec<u8>, usize> = HashMap::from([(codes_list[0].clone(), 0)]);
    let mut moves: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    let mut k = 0;
    while k < codes_list.len() {
        let mut out = Vec::new();
        for (next, starts, _) in successors(&setup, &codes_list[k].clone()) {
            let next = canon(next);
            let mask = on_mask(&next);
            let idx = *code_index.entry(next.clone()).or_insert_with(|| {
                codes_list.push(next);
                codes_list.len() - 1
            });
            if !out.iter().any(|&(i, _, _)| i == idx) {
                out.push((idx, mask, starts as f64 * cfg.startup_penalty_sm3));
            }
        }
        moves.push(out);
        k += 1;
    }
    let levels = setup.soc_levels();
    let n_states = codes_list.len() * levels;

    let mut cost = vec![f64::INFINITY; n_states];
    cost[start_soc] = 0.0;
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(horizon_steps);
    for t in 0..horizon_steps {
        let table = CostTable::build(&setup, forecast.demand_mw[t], forecast.wind_mw[t]);
        let sources: Vec<usize> = (0..n_states).filter(|&s| cost[s].is_finite()).collect();
        let chunks: Vec<&[usize]> = sources.chunks(256).collect();
        let candidates = par::map(cfg.exec, &chunks, |chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 16);
            for &src in chunk.iter() {
                let (code, soc) = (src / levels, src % levels);
                for &(next, mask, penalty) in &moves[code] {
                    for to in setup.soc_targets(soc) {
                        let c = table.get(mask, soc, to);
                        if c.is_finite() {
                            out.push((src as u32, (next * levels + to) as u32, cost[src] + c + penalty));
                        }
                    }
                }
            }
            out
        });
        let mut next_cost = vec![f64::INFINITY; n_states];
        let mut parent = vec![u32::MAX; n_states];
        for (src, dst, c) in candidates.into_iter().flatten() {
            if c < next_cost[dst as usize] {
                next_cost[dst as usize] = c;
                parent[dst as usize] = src;
            }
        }
        cost = next_cost;
        parents.push(parent);
    }

    let mut best = 0;
    for s in 0..n_states {
        if cost[s] < cost[best] {
            best = s;
        }
    }
    let objective = if horizon_steps == 0 { 0.0 } else { cost[best] };
    let mut path = vec![best; horizon_steps + 1];
    for t in (0..horizon_steps).rev() {
        path[t] = parents[t][path[t + 1]] as usize;
    }
    if horizon_steps == 0 {
        path[0] = start_soc;
    }

    let mut labelled = start_codes;
    let mut steps = Vec::with_capacity(horizon_steps);
    for t in 0..horizon_steps {
        let soc_from = path[t] % levels;
        let (target, soc_to) = (&codes_list[path[t + 1] / levels], path[t + 1] % levels);
        let (next, starts, stops) = successors(&setup, &labelled)
            .into_iter()
            .filter(|(c, _, _)| canon(c.clone()) == *target)
            .min_by(|a, b| a.0.cmp(&b.0))
            .expect("optimal transition has a labelled realization");
        steps.push(setup.build_step(
            t as f64 * cfg.step_min,
            &next,
            starts,
            stops,
            forecast.demand_mw[t],
            forecast.wind_mw[t],
            soc_from,
            soc_to,
        ));
        labelled = next;
    }
    Ok(DispatchPlan::new(cfg.step_min, steps, objective, scenario))
}
