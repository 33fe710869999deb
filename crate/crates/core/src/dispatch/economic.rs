use serde::Serialize;

use crate::model::GasTurbineSpec;
use crate::physics::{gt_fuel, gt_heat};

const FEASIBILITY_EPS: f64 = 1e-9;

/// Quantities fixed for one dispatch step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRequest {
    /// Electric demand including the loss allowance (MW).
    pub demand_mw: f64,
    pub wind_available_mw: f64,
    /// Battery setpoint, positive when discharging (MW).
    pub battery_mw: f64,
    /// Additional discharge the battery could deliver on demand (MW).
    pub battery_headroom_mw: f64,
    pub reserve_mw: f64,
    pub heat_mw: f64,
}

impl StepRequest {
    pub fn new(demand_mw: f64, wind_available_mw: f64, reserve_mw: f64) -> Self {
        StepRequest {
            demand_mw,
            wind_available_mw,
            battery_mw: 0.0,
            battery_headroom_mw: 0.0,
            reserve_mw,
            heat_mw: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicDispatch {
    /// Electric output per gas turbine; zero for units that are not on.
    pub gt_mw: Vec<f64>,
    pub wind_mw: f64,
    pub curtail_mw: f64,
    pub battery_mw: f64,
    pub reserve_mw: f64,
    pub heat_mw: f64,
    /// Total fuel power (MW).
    pub fuel_mw: f64,
    pub deficit_mw: f64,
    pub surplus_mw: f64,
    pub reserve_shortfall_mw: f64,
    pub heat_shortfall_mw: f64,
    pub feasible: bool,
}

impl EconomicDispatch {
    pub fn gt_total(&self) -> f64 {
        self.gt_mw.iter().sum()
    }

    /// Adds battery discharge headroom to the reserve and re-evaluates the
    /// reserve shortfall and feasibility against `reserve_req`.
    pub fn with_battery_headroom(mut self, headroom_mw: f64, reserve_req: f64) -> Self {
        self.reserve_mw += headroom_mw.max(0.0);
        self.reserve_shortfall_mw = (reserve_req - self.reserve_mw).max(0.0);
        self.feasible = self.deficit_mw <= FEASIBILITY_EPS
            && self.surplus_mw <= FEASIBILITY_EPS
            && self.reserve_shortfall_mw <= FEASIBILITY_EPS
            && self.heat_shortfall_mw <= FEASIBILITY_EPS;
        self
    }

    /// Supply minus demand, counting deficit as supply and surplus as demand.
    pub fn balance_residual(&self, demand_mw: f64) -> f64 {
        self.gt_total() + self.wind_mw + self.battery_mw + self.deficit_mw - self.surplus_mw - demand_mw
    }
}

/// Loads on-units in merit order of fuel slope, sharing equally (in MW above
/// minimum load) among units with the same slope.
fn share_load(specs: &[GasTurbineSpec], on: &[bool], total: f64) -> Vec<f64> {
    let mut p: Vec<f64> = specs
        .iter()
        .zip(on)
        .map(|(s, &o)| if o { s.min_load } else { 0.0 })
        .collect();
    let mut order: Vec<usize> = (0..specs.len()).filter(|&i| on[i]).collect();
    order.sort_by(|&a, &b| specs[a].fuel_slope.total_cmp(&specs[b].fuel_slope).then(a.cmp(&b)));
    let mut remaining = (total - p.iter().sum::<f64>()).max(0.0);
    let mut k = 0;
    while k < order.len() && remaining > 0.0 {
        let slope = specs[order[k]].fuel_slope;
        let mut group: Vec<usize> = order[k..]
            .iter()
            .copied()
            .take_while(|&i| (specs[i].fuel_slope - slope).abs() <= 1e-12 * slope.abs().max(1.0))
            .collect();
        k += group.len();
        let range = |i: usize| specs[i].capacity - specs[i].min_load;
        group.sort_by(|&a, &b| range(a).total_cmp(&range(b)).then(a.cmp(&b)));
        let group_room: f64 = group.iter().map(|&i| range(i)).sum();
        let mut to_place = remaining.min(group_room);
        remaining -= to_place;
        let mut left = group.len();
        for &i in &group {
            let x = (to_place / left as f64).min(range(i));
            p[i] += x;
            to_place -= x;
            left -= 1;
        }
    }
    p
}

fn total_heat(specs: &[GasTurbineSpec], p: &[f64], on: &[bool]) -> f64 {
    specs
        .iter()
        .zip(p)
        .zip(on)
        .filter(|(_, &o)| o)
        .map(|((s, &pi), _)| gt_heat(pi, s).unwrap_or(0.0))
        .sum()
}

/// Smallest total output in `[mins, caps]` whose recovered heat meets
/// `heat_mw`, or `caps` if none does. Heat is piecewise linear and
/// nondecreasing in total output, so regula falsi terminates quickly.
fn heat_lower_bound(specs: &[GasTurbineSpec], on: &[bool], mins: f64, caps: f64, heat_mw: f64) -> f64 {
    let h = |g: f64| total_heat(specs, &share_load(specs, on, g), on) - heat_mw;
    let (mut lo, mut hi) = (mins, caps);
    let (mut h_lo, h_hi) = (h(lo), h(hi));
    if h_lo >= 0.0 {
        return mins;
    }
    if h_hi < 0.0 {
        return caps;
    }
    let mut h_hi = h_hi;
    let mut side = 0i8;
    for _ in 0..100 {
        let g = (lo - h_lo * (hi - lo) / (h_hi - h_lo)).clamp(lo, hi);
        let hg = h(g);
        if hg.abs() <= 1e-10 {
            return g;
        }
        if hg > 0.0 {
            hi = g;
            h_hi = hg;
            if side == 1 {
                h_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = g;
            h_lo = hg;
            if side == -1 {
                h_hi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 1e-12 {
            return hi;
        }
    }
    hi
}

/// Minimum-fuel setpoints for a fixed commitment.
///
/// Wind is used up to availability unless that would push the committed
/// units below minimum load or recovered heat below the requirement; the
/// remainder is curtailed. Deficit, surplus, reserve and heat shortfalls are
/// reported rather than hidden, and `feasible` is false when any is nonzero.
pub fn economic_dispatch(specs: &[GasTurbineSpec], on: &[bool], req: &StepRequest) -> EconomicDispatch {
    assert_eq!(specs.len(), on.len());
    let mins: f64 = specs.iter().zip(on).filter(|(_, &o)| o).map(|(s, _)| s.min_load).sum();
    let caps: f64 = specs.iter().zip(on).filter(|(_, &o)| o).map(|(s, _)| s.capacity).sum();
    let any_on = on.iter().any(|&o| o);
    let wind_avail = req.wind_available_mw.max(0.0);
    let net = req.demand_mw - req.battery_mw;

    let (mut deficit, mut surplus) = (0.0, 0.0);
    let (wind, g) = if !any_on {
        let w = net.clamp(0.0, wind_avail);
        deficit = (net - wind_avail).max(0.0);
        surplus = (-net).max(0.0);
        (w, 0.0)
    } else {
        let mut g_low = mins;
        if req.heat_mw > 0.0 {
            g_low = heat_lower_bound(specs, on, mins, caps, req.heat_mw);
        }
        let w = (net - g_low).clamp(0.0, wind_avail);
        let mut g = net - w;
        if g > caps {
            deficit = g - caps;
            g = caps;
        }
        if g < mins {
            surplus = mins - g;
            g = mins;
        }
        (w, g)
    };

    let gt_mw = share_load(specs, on, g);
    let fuel_mw: f64 = specs
        .iter()
        .zip(&gt_mw)
        .zip(on)
        .filter(|(_, &o)| o)
        .map(|((s, &p), _)| gt_fuel(p, s).expect("setpoint within unit limits"))
        .sum();
    let heat_mw = total_heat(specs, &gt_mw, on);
    let gt_headroom: f64 = specs
        .iter()
        .zip(&gt_mw)
        .zip(on)
        .filter(|(_, &o)| o)
        .map(|((s, &p), _)| s.capacity - p)
        .sum();
    let heat_shortfall_mw = (req.heat_mw - heat_mw).max(0.0);
    EconomicDispatch {
        gt_mw,
        wind_mw: wind,
        curtail_mw: wind_avail - wind,
        battery_mw: req.battery_mw,
        reserve_mw: gt_headroom,
        heat_mw,
        fuel_mw,
        deficit_mw: deficit,
        surplus_mw: surplus,
        reserve_shortfall_mw: 0.0,
        heat_shortfall_mw,
        feasible: false,
    }
    .with_battery_headroom(req.battery_headroom_mw, req.reserve_mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gts() -> Vec<GasTurbineSpec> {
        ["GT1", "GT2", "GT3"].iter().map(|t| GasTurbineSpec::canonical(t)).collect()
    }

    #[test]
    fn equal_share_at_table_point() {
        let d = economic_dispatch(&gts(), &[true; 3], &StepRequest::new(43.18, 0.0, 5.0));
        assert!(d.feasible);
        for p in &d.gt_mw {
            assert!((p - 43.18 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_units_lack_reserve() {
        let d = economic_dispatch(&gts(), &[true, true, false], &StepRequest::new(43.18, 0.0, 5.0));
        assert!(!d.feasible);
        assert!((d.reserve_mw - 0.42).abs() < 1e-9);
        assert!((d.reserve_shortfall_mw - 4.58).abs() < 1e-9);
    }

    #[test]
    fn below_min_load_is_flagged_not_emitted() {
        let d = economic_dispatch(&gts(), &[true, false, false], &StepRequest::new(2.0, 0.0, 0.0));
        assert!(!d.feasible);
        assert_eq!(d.gt_mw[0], 3.5);
        assert!((d.surplus_mw - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wind_curtailed_to_keep_min_load() {
        let d = economic_dispatch(&gts(), &[true, true, false], &StepRequest::new(20.0, 24.0, 5.0));
        assert!(d.feasible);
        assert_eq!(d.gt_mw[0], 3.5);
        assert!((d.wind_mw - 13.0).abs() < 1e-12);
        assert!((d.curtail_mw - 11.0).abs() < 1e-12);
    }

    #[test]
    fn heat_lower_bound_raises_output() {
        let mut req = StepRequest::new(10.0, 24.0, 0.0);
        req.heat_mw = 8.0;
        let d = economic_dispatch(&gts(), &[true, false, false], &req);
        assert!(d.feasible);
        assert!((d.heat_mw - 8.0).abs() < 1e-6);
        assert!(d.gt_mw[0] > 3.5);
    }
}
