//! Unit commitment and economic dispatch over a rolling horizon.

mod economic;
mod plan;
mod planner;
mod rolling;

pub use economic::{economic_dispatch, EconomicDispatch, StepRequest};
pub use plan::{DeficitEntry, DispatchPlan, PlanStep, PlanSummary};
pub use planner::{plan_horizon, HorizonForecast};
pub use rolling::{rolling_simulate, rolling_simulate_from, RealizedWind};

use serde::{Deserialize, Serialize};

use crate::model::Scenario;
use crate::par::Exec;
use crate::{Error, Result};

/// Operating status of one gas turbine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GtStatus {
    Off,
    /// Activated; delivers power once the given number of minutes has elapsed.
    Starting(u32),
    On,
}

impl GtStatus {
    pub fn is_on(self) -> bool {
        self == GtStatus::On
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentState {
    pub gts: Vec<GtStatus>,
    /// State of charge per battery (MWh).
    pub soc: Vec<f64>,
}

impl CommitmentState {
    /// Every gas turbine on and batteries half full.
    pub fn all_on(scenario: &Scenario) -> Self {
        CommitmentState {
            gts: vec![GtStatus::On; scenario.gas_turbines.len()],
            soc: scenario.batteries.iter().map(|b| 0.5 * b.energy_capacity).collect(),
        }
    }

    pub fn on_count(&self) -> usize {
        self.gts.iter().filter(|s| s.is_on()).count()
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.gts.len() != scenario.gas_turbines.len() || self.soc.len() != scenario.batteries.len() {
            return Err(Error::Invalid(format!(
                "state has {} units and {} batteries, scenario has {} and {}",
                self.gts.len(),
                self.soc.len(),
                scenario.gas_turbines.len(),
                scenario.batteries.len()
            )));
        }
        for (s, spec) in self.gts.iter().zip(&scenario.gas_turbines) {
            if let GtStatus::Starting(k) = s {
                if f64::from(*k) > spec.startup_delay_min() {
                    return Err(Error::Invalid(format!(
                        "{} starting counter {k} min exceeds startup delay {} min",
                        spec.tag,
                        spec.startup_delay_min()
                    )));
                }
            }
        }
        for (soc, b) in self.soc.iter().zip(&scenario.batteries) {
            if !(0.0..=b.energy_capacity).contains(soc) {
                return Err(Error::Invalid(format!(
                    "{} state of charge {soc} MWh outside [0, {}]",
                    b.tag, b.energy_capacity
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub step_min: f64,
    pub horizon_steps: usize,
    /// Objective penalty per gas turbine start (Sm³ fuel equivalent).
    pub startup_penalty_sm3: f64,
    /// Count battery discharge headroom toward spinning reserve.
    pub battery_reserve: bool,
    pub soc_resolution_mwh: f64,
    /// Penalty per MWh of unserved or surplus energy (Sm³).
    pub balance_penalty: f64,
    /// Penalty per MWh of reserve shortfall (Sm³).
    pub reserve_penalty: f64,
    /// Penalty per MWh of unmet heat demand (Sm³).
    pub heat_penalty: f64,
    /// Leading horizon steps planned on the nowcast instead of the forecast.
    pub nowcast_steps: usize,
    pub realized_wind: RealizedWind,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            step_min: 5.0,
            horizon_steps: 18,
            startup_penalty_sm3: 50.0,
            battery_reserve: true,
            soc_resolution_mwh: 0.1,
            balance_penalty: 1e6,
            reserve_penalty: 1e5,
            heat_penalty: 1e5,
            nowcast_steps: 3,
            realized_wind: RealizedWind::Nowcast,
            exec: Exec::default(),
        }
    }
}

impl PlannerConfig {
    pub fn step_hours(&self) -> f64 {
        self.step_min / 60.0
    }

    /// Whole steps between activation and first delivered power.
    pub fn startup_steps(&self, delay_min: f64) -> u32 {
        ((delay_min / self.step_min) - 1e-9).ceil().max(0.0) as u32
    }

    pub fn check(&self) -> Result<()> {
        if !(self.step_min > 0.0) {
            return Err(Error::Domain(format!("step {} min must be positive", self.step_min)));
        }
        if !(self.soc_resolution_mwh > 0.0) {
            return Err(Error::Domain("SoC resolution must be positive".into()));
        }
        Ok(())
    }

    /// Objective contribution of one dispatched step, excluding start penalties.
    pub fn step_cost(&self, scenario: &Scenario, d: &EconomicDispatch) -> f64 {
        let dt_h = self.step_hours();
        fuel_sm3(scenario, d.fuel_mw, self.step_min)
            + self.balance_penalty * (d.deficit_mw + d.surplus_mw) * dt_h
            + self.reserve_penalty * d.reserve_shortfall_mw * dt_h
            + self.heat_penalty * d.heat_shortfall_mw * dt_h
    }
}

/// Fuel volume (Sm³) burnt at `fuel_mw` over `step_min` minutes.
pub fn fuel_sm3(scenario: &Scenario, fuel_mw: f64, step_min: f64) -> f64 {
    crate::physics::fuel_volume_rate(fuel_mw, &scenario.fluid) * step_min * 60.0
}

/// Electric demand (MW) at a demand multiplier: flow-dependent loads scale,
/// fixed loads, the consumption deviation and the loss allowance do not.
pub fn step_demand(scenario: &Scenario, multiplier: f64) -> Result<f64> {
    if !(multiplier >= 0.0) {
        return Err(Error::Domain(format!("demand multiplier {multiplier} must be >= 0")));
    }
    let flow = scenario.flow_dependent_load();
    let fixed = scenario.device_load() - flow;
    Ok(multiplier * flow + fixed + scenario.consumption_deviation + scenario.loss_allowance)
}
