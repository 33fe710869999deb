use std::io::Write;

use serde::Serialize;

use super::economic::EconomicDispatch;
use super::{fuel_sm3, GtStatus, PlannerConfig};
use crate::model::Scenario;
use crate::Result;

/// One dispatched step; power in MW, energy in MWh, fuel in Sm³.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStep {
    pub t_min: f64,
    pub status: Vec<GtStatus>,
    pub gt_mw: Vec<f64>,
    pub wind_available_mw: f64,
    pub wind_mw: f64,
    pub curtail_mw: f64,
    /// Positive when discharging.
    pub batt_mw: f64,
    /// State of charge at the end of the step, if a battery is present.
    pub soc_mwh: Option<f64>,
    pub demand_mw: f64,
    pub reserve_mw: f64,
    pub heat_mw: f64,
    pub fuel_sm3: f64,
    pub co2_kg: f64,
    pub starts: usize,
    pub stops: usize,
    pub deficit_mw: f64,
    pub surplus_mw: f64,
    pub reserve_shortfall_mw: f64,
    pub heat_shortfall_mw: f64,
    pub feasible: bool,
    pub cost: f64,
}

impl PlanStep {
    #[allow(clippy::too_many_arguments)]
    pub fn from_dispatch(
        scenario: &Scenario,
        cfg: &PlannerConfig,
        t_min: f64,
        status: Vec<GtStatus>,
        starts: usize,
        stops: usize,
        demand_mw: f64,
        soc_mwh: Option<f64>,
        d: EconomicDispatch,
    ) -> Self {
        let fuel = fuel_sm3(scenario, d.fuel_mw, cfg.step_min);
        let cost = cfg.step_cost(scenario, &d) + starts as f64 * cfg.startup_penalty_sm3;
        PlanStep {
            t_min,
            status,
            wind_available_mw: d.wind_mw + d.curtail_mw,
            wind_mw: d.wind_mw,
            curtail_mw: d.curtail_mw,
            batt_mw: d.battery_mw,
            soc_mwh,
            demand_mw,
            reserve_mw: d.reserve_mw,
            heat_mw: d.heat_mw,
            fuel_sm3: fuel,
            co2_kg: scenario.field.co2_content * fuel,
            starts,
            stops,
            deficit_mw: d.deficit_mw,
            surplus_mw: d.surplus_mw,
            reserve_shortfall_mw: d.reserve_shortfall_mw,
            heat_shortfall_mw: d.heat_shortfall_mw,
            feasible: d.feasible,
            cost,
            gt_mw: d.gt_mw,
        }
    }

    pub fn on_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_on()).count()
    }

    /// Generation plus storage plus unserved energy minus surplus minus demand.
    pub fn balance_residual(&self) -> f64 {
        self.gt_mw.iter().sum::<f64>() + self.wind_mw + self.batt_mw + self.deficit_mw - self.surplus_mw - self.demand_mw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficitEntry {
    pub t_min: f64,
    pub deficit_mw: f64,
    pub surplus_mw: f64,
    pub reserve_shortfall_mw: f64,
    pub heat_shortfall_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub steps: usize,
    pub fuel_sm3: f64,
    pub co2_kg: f64,
    pub gt_starts: usize,
    pub gt_stops: usize,
    pub curtailed_mwh: f64,
    pub min_reserve_mw: Option<f64>,
    pub infeasible_steps: usize,
    pub ramp_violations: usize,
    pub deficit_log: Vec<DeficitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchPlan {
    pub step_min: f64,
    pub steps: Vec<PlanStep>,
    pub objective: f64,
    /// (step index, unit index) pairs whose output change exceeds the ramp limit.
    pub ramp_violations: Vec<(usize, usize)>,
}

impl DispatchPlan {
    pub fn new(step_min: f64, steps: Vec<PlanStep>, objective: f64, scenario: &Scenario) -> Self {
        let mut ramp_violations = Vec::new();
        for (t, w) in steps.windows(2).enumerate() {
            for (i, spec) in scenario.gas_turbines.iter().enumerate() {
                if w[0].status[i].is_on() && w[1].status[i].is_on() {
                    let limit = spec.ramp_rate * spec.capacity * step_min;
                    if (w[1].gt_mw[i] - w[0].gt_mw[i]).abs() > limit + 1e-9 {
                        ramp_violations.push((t + 1, i));
                    }
                }
            }
        }
        DispatchPlan {
            step_min,
            steps,
            objective,
            ramp_violations,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn all_feasible(&self) -> bool {
        self.steps.iter().all(|s| s.feasible)
    }

    /// Number of gas turbines on at each step.
    pub fn on_counts(&self) -> Vec<usize> {
        self.steps.iter().map(PlanStep::on_count).collect()
    }

    /// The on-count trajectory with consecutive repeats collapsed, e.g. `[3, 2, 3]`.
    pub fn on_count_runs(&self) -> Vec<usize> {
        let mut runs = self.on_counts();
        runs.dedup();
        runs
    }

    pub fn summary(&self) -> PlanSummary {
        let dt_h = self.step_min / 60.0;
        PlanSummary {
            steps: self.steps.len(),
            fuel_sm3: self.steps.iter().fold(0.0, |acc, s| acc + s.fuel_sm3),
            co2_kg: self.steps.iter().fold(0.0, |acc, s| acc + s.co2_kg),
            gt_starts: self.steps.iter().map(|s| s.starts).sum(),
            gt_stops: self.steps.iter().map(|s| s.stops).sum(),
            curtailed_mwh: self.steps.iter().fold(0.0, |acc, s| acc + s.curtail_mw * dt_h),
            min_reserve_mw: self.steps.iter().map(|s| s.reserve_mw).reduce(f64::min),
            infeasible_steps: self.steps.iter().filter(|s| !s.feasible).count(),
            ramp_violations: self.ramp_violations.len(),
            deficit_log: self
                .steps
                .iter()
                .filter(|s| !s.feasible)
                .map(|s| DeficitEntry {
                    t_min: s.t_min,
                    deficit_mw: s.deficit_mw,
                    surplus_mw: s.surplus_mw,
                    reserve_shortfall_mw: s.reserve_shortfall_mw,
                    heat_shortfall_mw: s.heat_shortfall_mw,
                })
                .collect(),
        }
    }

    /// Writes the per-step CSV with one `gtN_mw` column per gas turbine.
    pub fn write_csv<W: Write>(&self, out: W, n_gt: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t_min".to_string()];
        header.extend((1..=n_gt).map(|i| format!("gt{i}_mw")));
        header.extend(
            [
                "wind_mw", "curtail_mw", "batt_mw", "soc_mwh", "demand_mw", "reserve_mw", "fuel_sm3", "co2_kg", "feasible",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for s in &self.steps {
            let mut rec = vec![format!("{}", s.t_min)];
            rec.extend(s.gt_mw.iter().map(|p| format!("{p:.6}")));
            rec.push(format!("{:.6}", s.wind_mw));
            rec.push(format!("{:.6}", s.curtail_mw));
            rec.push(format!("{:.6}", s.batt_mw));
            rec.push(s.soc_mwh.map_or(String::new(), |x| format!("{x:.6}")));
            rec.push(format!("{:.6}", s.demand_mw));
            rec.push(format!("{:.6}", s.reserve_mw));
            rec.push(format!("{:.6}", s.fuel_sm3));
            rec.push(format!("{:.6}", s.co2_kg));
            rec.push(s.feasible.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
