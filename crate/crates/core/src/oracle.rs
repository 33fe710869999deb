//! Independent verifiers: an exhaustive commitment optimizer and a
//! finite-difference derivative check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dispatch::{economic_dispatch, plan_horizon, CommitmentState, GtStatus, HorizonForecast, PlannerConfig, StepRequest};
use crate::model::{build_canonical_scenario, CaseVariation, Scenario};
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Longest horizon the exhaustive optimizer accepts.
pub const MAX_ORACLE_HORIZON: usize = 12;
const MAX_ORACLE_STATES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePlan {
    pub objective: f64,
    pub status: Vec<Vec<GtStatus>>,
    pub soc_mwh: Vec<Option<f64>>,
}

/// Labelled unit status: 0 = off, 1..=d starting with k steps left, d + 1 = on.
struct Space {
    delays: Vec<usize>,
    radix: Vec<usize>,
    codes: usize,
    levels: usize,
    res: f64,
}

impl Space {
    fn decode(&self, mut idx: usize) -> Vec<usize> {
        self.radix
            .iter()
            .map(|&r| {
                let c = idx % r;
                idx /= r;
                c
            })
            .collect()
    }

    fn encode(&self, units: &[usize]) -> usize {
        units.iter().zip(&self.radix).rev().fold(0, |acc, (&c, &r)| acc * r + c)
    }

    fn is_on(&self, unit: usize, c: usize) -> bool {
        c == self.delays[unit] + 1
    }

    fn next(&self, unit: usize, c: usize) -> Vec<(usize, bool)> {
        let d = self.delays[unit];
        let on = d + 1;
        if c == 0 {
            vec![(0, false), (if d == 0 { on } else { d }, true)]
        } else if c == on {
            vec![(on, false), (0, false)]
        } else if c == 1 {
            vec![(on, false)]
        } else {
            vec![(c - 1, false)]
        }
    }
}

/// Exhaustive backward dynamic program over every labelled commitment state
/// and every state-of-charge level.
pub fn brute_force_plan(
    scenario: &Scenario,
    state: &CommitmentState,
    forecast: &HorizonForecast,
    horizon: usize,
    cfg: &PlannerConfig,
) -> Result<OraclePlan> {
    if horizon > MAX_ORACLE_HORIZON {
        return Err(Error::StateSpace(format!("horizon {horizon} exceeds {MAX_ORACLE_HORIZON}")));
    }
    if forecast.demand_mw.len() < horizon || forecast.wind_mw.len() < horizon {
        return Err(Error::Invalid("forecast shorter than horizon".into()));
    }
    if scenario.batteries.len() > 1 {
        return Err(Error::StateSpace("at most one battery".into()));
    }
    let step_min = cfg.step_min;
    let dt_h = step_min / 60.0;
    let specs = &scenario.gas_turbines;
    let delays: Vec<usize> = specs
        .iter()
        .map(|s| ((s.startup_delay_min() / step_min) - 1e-9).ceil().max(0.0) as usize)
        .collect();
    let radix: Vec<usize> = delays.iter().map(|d| d + 2).collect();
    let codes: usize = radix.iter().product();
    let battery = scenario.batteries.first();
    let (levels, res) = match battery {
        Some(b) if b.energy_capacity > 0.0 => {
            let l = (b.energy_capacity / cfg.soc_resolution_mwh).round().max(1.0) as usize + 1;
            (l, b.energy_capacity / (l - 1) as f64)
        }
        _ => (1, 1.0),
    };
    if codes * levels > MAX_ORACLE_STATES {
        return Err(Error::StateSpace(format!("{} states", codes * levels)));
    }
    let sp = Space {
        delays,
        radix,
        codes,
        levels,
        res,
    };

    // Battery move from level i to level j: (power, headroom), or None if infeasible.
    let battery_move = |i: usize, j: usize| -> Option<(f64, f64)> {
        let Some(b) = battery else {
            return Some((0.0, 0.0));
        };
        let de = (j as f64 - i as f64) * sp.res;
        let p = if de >= 0.0 {
            -de / (b.charge_efficiency * dt_h)
        } else {
            -de * b.discharge_efficiency / dt_h
        };
        if p.abs() > b.power_capacity + 1e-9 {
            return None;
        }
        let headroom = if cfg.battery_reserve {
            (b.power_capacity - p).min(i as f64 * sp.res * b.discharge_efficiency / dt_h - p).max(0.0)
        } else {
            0.0
        };
        Some((p, headroom))
    };

    let n = specs.len();
    let step_cost = |t: usize, on: &[bool], i: usize, j: usize| -> Option<f64> {
        let (p, headroom) = battery_move(i, j)?;
        let req = StepRequest {
            demand_mw: forecast.demand_mw[t],
            wind_available_mw: forecast.wind_mw[t],
            battery_mw: p,
            battery_headroom_mw: headroom,
            reserve_mw: scenario.reserve_requirement,
            heat_mw: scenario.heat_demand_mw(),
        };
        let d = economic_dispatch(specs, on, &req);
        let fuel = d.fuel_mw * step_min * 60.0 / scenario.fluid.gas_energy_value;
        Some(
            fuel + cfg.balance_penalty * (d.deficit_mw + d.surplus_mw) * dt_h
                + cfg.reserve_penalty * d.reserve_shortfall_mw * dt_h
                + cfg.heat_penalty * d.heat_shortfall_mw * dt_h,
        )
    };

    // value[t][code * levels + soc] = optimal cost-to-go from step t.
    let mut value = vec![vec![0.0; sp.codes * sp.levels]; horizon + 1];
    let mut choice = vec![vec![usize::MAX; sp.codes * sp.levels]; horizon];
    for t in (0..horizon).rev() {
        let mut cost_cache: Vec<Option<Option<f64>>> = vec![None; (1 << n) * sp.levels * sp.levels];
        for code in 0..sp.codes {
            let units = sp.decode(code);
            let mut options: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
            for (u, &c) in units.iter().enumerate() {
                let mut grown = Vec::new();
                for (prefix, starts) in &options {
                    for (nc, start) in sp.next(u, c) {
                        let mut v = prefix.clone();
                        v.push(nc);
                        grown.push((v, starts + usize::from(start)));
                    }
                }
                options = grown;
            }
            for soc in 0..sp.levels {
                let mut best = f64::INFINITY;
                let mut arg = usize::MAX;
                for (next, starts) in &options {
                    let on: Vec<bool> = next.iter().enumerate().map(|(u, &c)| sp.is_on(u, c)).collect();
                    let mask = on.iter().enumerate().fold(0, |m, (u, &o)| m | (usize::from(o) << u));
                    let nidx = sp.encode(next);
                    for to in 0..sp.levels {
                        let slot = (mask * sp.levels + soc) * sp.levels + to;
                        let c = *cost_cache[slot].get_or_insert_with(|| step_cost(t, &on, soc, to));
                        let Some(c) = c else { continue };
                        let total = c + *starts as f64 * cfg.startup_penalty_sm3 + value[t + 1][nidx * sp.levels + to];
                        if total < best {
                            best = total;
                            arg = nidx * sp.levels + to;
                        }
                    }
                }
                value[t][code * sp.levels + soc] = best;
                choice[t][code * sp.levels + soc] = arg;
            }
        }
    }

    let start_units: Vec<usize> = state
        .gts
        .iter()
        .enumerate()
        .map(|(u, s)| match s {
            GtStatus::Off => 0,
            GtStatus::On => sp.delays[u] + 1,
            GtStatus::Starting(min) => {
                let k = ((f64::from(*min) / step_min) - 1e-9).ceil().max(0.0) as usize;
                if k == 0 {
                    sp.delays[u] + 1
                } else {
                    k.min(sp.delays[u].max(1))
                }
            }
        })
        .collect();
    let start_soc = match (battery, state.soc.first()) {
        (Some(_), Some(&s)) => ((s / sp.res).round().max(0.0) as usize).min(sp.levels - 1),
        _ => 0,
    };
    let mut idx = sp.encode(&start_units) * sp.levels + start_soc;
    let objective = value[0][idx];
    let mut status = Vec::with_capacity(horizon);
    let mut soc_mwh = Vec::with_capacity(horizon);
    for row in choice.iter() {
        idx = row[idx];
        let units = sp.decode(idx / sp.levels);
        status.push(
            units
                .iter()
                .enumerate()
                .map(|(u, &c)| {
                    if c == 0 {
                        GtStatus::Off
                    } else if sp.is_on(u, c) {
                        GtStatus::On
                    } else {
                        GtStatus::Starting((c as f64 * step_min).ceil() as u32)
                    }
                })
                .collect(),
        );
        soc_mwh.push(battery.map(|_| (idx % sp.levels) as f64 * sp.res));
    }
    Ok(OraclePlan {
        objective,
        status,
        soc_mwh,
    })
}

/// Relative error between an analytic derivative and a central difference.
///
/// The difference is Richardson-extrapolated and evaluated at `step`, a
/// tenth of it, and the round-off-optimal step `ε^(1/3)·max(|x|, 1)`; the
/// smallest error is returned, so a step shrunk toward zero cannot make the
/// check diverge.
pub fn finite_difference_check(f: impl Fn(f64) -> f64, analytic: f64, x: f64, step: f64) -> f64 {
    let step = if step.abs() > 0.0 {
        step.abs()
    } else {
        1e-6 * x.abs().max(1.0)
    };
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let richardson = |h: f64| (4.0 * central(h / 2.0) - central(h)) / 3.0;
    let scale = analytic.abs().max(f64::MIN_POSITIVE);
    [step, 0.1 * step, f64::EPSILON.cbrt() * x.abs().max(1.0)]
        .into_iter()
        .map(|h| {
            let err = (richardson(h) - analytic).abs();
            if analytic == 0.0 {
                err
            } else {
                err / scale
            }
        })
        .filter(|e| e.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// One randomized planner-vs-oracle instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub scenario: Scenario,
    pub state: CommitmentState,
    pub forecast: HorizonForecast,
    pub horizon: usize,
}

/// Random instances with demand in [20, 60] MW, wind in [0, 24] MW and
/// horizons of 4 to 12 steps. Every fourth instance includes the battery.
pub fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = build_canonical_scenario(CaseVariation::A);
    let b = build_canonical_scenario(CaseVariation::B);
    (0..count)
        .map(|k| {
            let scenario = if k % 4 == 3 { b.clone() } else { a.clone() };
            let horizon = rng.random_range(4..=12);
            let forecast = HorizonForecast {
                demand_mw: (0..horizon).map(|_| rng.random_range(20.0..=60.0)).collect(),
                wind_mw: (0..horizon).map(|_| rng.random_range(0.0..=24.0)).collect(),
            };
            let gts = (0..scenario.gas_turbines.len())
                .map(|_| match rng.random_range(0..4) {
                    0 => GtStatus::Off,
                    1 => GtStatus::Starting(5 * rng.random_range(1..=6)),
                    _ => GtStatus::On,
                })
                .collect();
            let soc = scenario
                .batteries
                .iter()
                .map(|bat| (rng.random_range(0.0..=bat.energy_capacity) * 10.0).round() / 10.0)
                .collect();
            Instance {
                scenario,
                state: CommitmentState { gts, soc },
                forecast,
                horizon,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub planner: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

/// Solves each instance with the planner and the oracle.
pub fn compare_with_planner(instances: &[Instance], cfg: &PlannerConfig, exec: Exec) -> Result<Vec<Comparison>> {
    let inner = PlannerConfig {
        exec: Exec::Sequential,
        ..*cfg
    };
    par::map(exec, instances, |inst| {
        let plan = plan_horizon(&inst.scenario, &inst.state, &inst.forecast, inst.horizon, &inner)?;
        let oracle = brute_force_plan(&inst.scenario, &inst.state, &inst.forecast, inst.horizon, &inner)?;
        let scale = oracle.objective.abs().max(1e-12);
        Ok(Comparison {
            planner: plan.objective,
            oracle: oracle.objective,
            relative_error: (plan.objective - oracle.objective).abs() / scale,
        })
    })
    .into_iter()
    .collect()
}
