use serde::{Deserialize, Serialize};

use super::planner::{plan_horizon, HorizonForecast, Setup};
use super::{step_demand, CommitmentState, DispatchPlan, PlannerConfig};
use crate::model::Scenario;
use crate::profiles::TimeSeriesSet;
use crate::{Error, Result};

/// Wind power taken as realized when a planned step is committed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RealizedWind {
    #[default]
    Nowcast,
    Measured,
}

/// Rolling-horizon run from all units on and batteries half full.
pub fn rolling_simulate(
    scenario: &Scenario,
    profiles: &TimeSeriesSet,
    duration_min: f64,
    cfg: &PlannerConfig,
) -> Result<DispatchPlan> {
    rolling_simulate_from(scenario, &CommitmentState::all_on(scenario), profiles, duration_min, cfg)
}

/// Re-plans at every step, commits the first planned step with realized
/// wind, and advances the commitment and storage state.
pub fn rolling_simulate_from(
    scenario: &Scenario,
    initial: &CommitmentState,
    profiles: &TimeSeriesSet,
    duration_min: f64,
    cfg: &PlannerConfig,
) -> Result<DispatchPlan> {
    let setup = Setup::new(scenario, cfg)?;
    initial.validate(scenario)?;
    if !(duration_min >= 0.0) {
        return Err(Error::Domain(format!("duration {duration_min} min must be >= 0")));
    }
    let n_steps = (duration_min / cfg.step_min).round() as usize;
    if n_steps == 0 {
        return Ok(DispatchPlan::new(cfg.step_min, Vec::new(), 0.0, scenario));
    }
    let step_s = (cfg.step_min * 60.0).round() as u32;
    let prof = profiles.resample(step_s)?;
    if prof.len() < n_steps {
        return Err(Error::Invalid(format!(
            "profiles cover {} steps of {} min, run needs {n_steps}",
            prof.len(),
            cfg.step_min
        )));
    }
    let wind_cap = scenario.wind_capacity();
    let demand: Vec<f64> = prof
        .demand_multiplier
        .iter()
        .map(|&m| step_demand(scenario, m))
        .collect::<Result<_>>()?;

    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(n_steps);
    for i in 0..n_steps {
        let h = cfg.horizon_steps.max(1).min(prof.len() - i);
        let forecast = HorizonForecast {
            demand_mw: demand[i..i + h].to_vec(),
            wind_mw: (0..h)
                .map(|j| {
                    let src = if j < cfg.nowcast_steps {
                        &prof.wind_nowcast
                    } else {
                        &prof.wind_forecast
                    };
                    src[i + j] * wind_cap
                })
                .collect(),
        };
        let plan = plan_horizon(scenario, &state, &forecast, h, cfg)?;
        let first = &plan.steps[0];
        let realized = match cfg.realized_wind {
            RealizedWind::Nowcast => prof.wind_nowcast[i],
            RealizedWind::Measured => prof.wind_power_norm[i],
        } * wind_cap;
        let codes: Vec<u8> = first.status.iter().enumerate().map(|(u, &s)| setup.code_of(u, s)).collect();
        let soc_from = setup.initial_soc(&state);
        let soc_to = first.soc_mwh.map_or(0, |s| setup.battery.as_ref().map_or(0, |b| b.index(s)));
        let step = setup.build_step(
            i as f64 * cfg.step_min,
            &codes,
            first.starts,
            first.stops,
            demand[i],
            realized,
            soc_from,
            soc_to,
        );
        state.gts = step.status.clone();
        if let Some(soc) = step.soc_mwh {
            state.soc = vec![soc];
        }
        steps.push(step);
    }
    let objective = steps.iter().map(|s| s.cost).sum();
    Ok(DispatchPlan::new(cfg.step_min, steps, objective, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_canonical_scenario, CaseVariation};

    #[test]
    fn zero_duration_is_empty() {
        let s = build_canonical_scenario(CaseVariation::Base);
        let p = TimeSeriesSet::flat(0, 60, 10);
        let plan = rolling_simulate(&s, &p, 0.0, &PlannerConfig::default()).unwrap();
        assert!(plan.is_empty());
    }

    #[test]
    fn short_profile_rejected() {
        let s = build_canonical_scenario(CaseVariation::Base);
        let p = TimeSeriesSet::flat(0, 60, 10);
        assert!(rolling_simulate(&s, &p, 60.0, &PlannerConfig::default()).is_err());
    }
}
