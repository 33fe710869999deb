//! Closed-form device physics.
//!
//! Pressures are in Pa, volumetric flows in Sm³/s (or m³/s for liquids) and
//! powers in MW.

use serde::{Deserialize, Serialize};

use crate::model::{BatterySpec, FieldState, FluidProperties, GasTurbineSpec, WindTurbineSpec};
use crate::{Error, Result};

/// Standard reference conditions (15 °C, 101.325 kPa).
pub const STANDARD_TEMPERATURE: f64 = 288.15;
pub const STANDARD_PRESSURE: f64 = 101_325.0;

/// Weymouth constant for SI units (Q in Sm³/s, p in Pa, D and L in m, T in K).
///
/// Converted from the field-unit form `0.0037435 · (Tb/Pb) · D^(8/3) · sqrt(...)`
/// with Q in m³/day, p in kPa, D in mm and L in km:
/// `0.0037435 · 1e8 · sqrt(1000) / 86400`.
pub const WEYMOUTH_SI: f64 = 0.0037435 * 1e8 * 31.622_776_601_683_793 / 86_400.0;

/// Floating-point slack on range checks (MW).
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerKind {
    Electric,
    Fuel,
    Heat,
}

/// A power value with its carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub mw: f64,
    pub kind: PowerKind,
}

/// Pump shaft-to-grid power `q·(p2 − p1)/η`.
pub fn pump_power(q: f64, p1: f64, p2: f64, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!("pump efficiency {efficiency} outside (0, 1]")));
    }
    if p2 < p1 {
        return Err(Error::Domain(format!("outlet pressure {p2} below inlet {p1}")));
    }
    if q < 0.0 {
        return Err(Error::Domain(format!("negative flow {q}")));
    }
    Ok(q * (p2 - p1) / efficiency / 1e6)
}

/// Adiabatic ideal-gas compressor power
/// `(1/η)·(ρZRT/(k−1))·q·((p2/p1)^a − 1)` with `a = (k−1)/k`.
pub fn compressor_power(
    q: f64,
    p1: f64,
    p2: f64,
    temperature: f64,
    fluid: &FluidProperties,
    efficiency: f64,
) -> Result<f64> {
    check_compressor_domain(q, p1, p2, efficiency)?;
    let a = fluid.adiabatic_exponent();
    Ok(compressor_prefactor(fluid, temperature, efficiency) * q * ((p2 / p1).powf(a) - 1.0) / 1e6)
}

/// Analytic ∂P_comp/∂p2 (MW/Pa).
pub fn compressor_power_dp2(
    q: f64,
    p1: f64,
    p2: f64,
    temperature: f64,
    fluid: &FluidProperties,
    efficiency: f64,
) -> Result<f64> {
    check_compressor_domain(q, p1, p2, efficiency)?;
    let a = fluid.adiabatic_exponent();
    Ok(compressor_prefactor(fluid, temperature, efficiency) * q * a * (p2 / p1).powf(a - 1.0) / p1 / 1e6)
}

fn compressor_prefactor(fluid: &FluidProperties, temperature: f64, efficiency: f64) -> f64 {
    fluid.gas_density * fluid.gas_compressibility * fluid.gas_individual_constant * temperature
        / (fluid.gas_heat_capacity_ratio - 1.0)
        / efficiency
}

fn check_compressor_domain(q: f64, p1: f64, p2: f64, efficiency: f64) -> Result<()> {
    if p1 <= 0.0 {
        return Err(Error::Domain(format!("inlet pressure {p1} must be positive")));
    }
    if p2 < p1 {
        return Err(Error::Domain(format!("outlet pressure {p2} below inlet {p1}")));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!("compressor efficiency {efficiency} outside (0, 1]")));
    }
    if q < 0.0 {
        return Err(Error::Domain(format!("negative flow {q}")));
    }
    Ok(())
}

fn check_gt_range(p_el: f64, spec: &GasTurbineSpec) -> Result<()> {
    if p_el < 0.0 || (p_el > 0.0 && p_el < spec.min_load - RANGE_EPS) || p_el > spec.capacity + RANGE_EPS {
        return Err(Error::Range(format!(
            "{}: output {p_el} MW outside {{0}} ∪ [{}, {}]",
            spec.tag, spec.min_load, spec.capacity
        )));
    }
    Ok(())
}

/// Fuel power (MW) for electric output `p_el`; zero when the unit is off.
pub fn gt_fuel(p_el: f64, spec: &GasTurbineSpec) -> Result<f64> {
    check_gt_range(p_el, spec)?;
    if p_el == 0.0 {
        return Ok(0.0);
    }
    Ok(spec.fuel_intercept + spec.fuel_slope * p_el)
}

pub fn gt_efficiency(p_el: f64, spec: &GasTurbineSpec) -> Result<f64> {
    let fuel = gt_fuel(p_el, spec)?;
    Ok(if fuel == 0.0 { 0.0 } else { p_el / fuel })
}

/// Recovered heat κ·(fuel − P_el) (MW).
pub fn gt_heat(p_el: f64, spec: &GasTurbineSpec) -> Result<f64> {
    let fuel = gt_fuel(p_el, spec)?;
    Ok(if fuel == 0.0 {
        0.0
    } else {
        spec.heat_recovery_fraction * (fuel - p_el)
    })
}

/// CO₂ emission rate in kg/s.
pub fn gt_co2_rate(p_el: f64, spec: &GasTurbineSpec, field: &FieldState, fluid: &FluidProperties) -> Result<f64> {
    let fuel = gt_fuel(p_el, spec)?;
    Ok(field.co2_content * fuel / fluid.gas_energy_value)
}

/// Fuel energy in MW converted to a standard gas volume rate (Sm³/s).
pub fn fuel_volume_rate(fuel_mw: f64, fluid: &FluidProperties) -> f64 {
    fuel_mw / fluid.gas_energy_value
}

fn weymouth_coefficient(diameter: f64, length: f64, fluid: &FluidProperties, temperature: f64) -> f64 {
    WEYMOUTH_SI * (STANDARD_TEMPERATURE / STANDARD_PRESSURE) * diameter.powf(8.0 / 3.0)
        / (fluid.gas_gravity * temperature * length * fluid.gas_compressibility).sqrt()
}

fn check_geometry(diameter: f64, length: f64) -> Result<()> {
    if !(diameter > 0.0 && length > 0.0) {
        return Err(Error::Domain(format!("pipe geometry must be positive (D = {diameter}, L = {length})")));
    }
    Ok(())
}

/// Gas pipeline flow (Sm³/s) from the Weymouth relation, efficiency factor 1.
pub fn weymouth_flow(
    p1: f64,
    p2: f64,
    diameter: f64,
    length: f64,
    fluid: &FluidProperties,
    temperature: f64,
) -> Result<f64> {
    check_geometry(diameter, length)?;
    if p2 <= 0.0 || p2 > p1 {
        return Err(Error::Domain(format!("need p1 >= p2 > 0 (p1 = {p1}, p2 = {p2})")));
    }
    Ok(weymouth_coefficient(diameter, length, fluid, temperature) * (p1 * p1 - p2 * p2).sqrt())
}

/// Outlet pressure that carries flow `q` through the pipe.
pub fn weymouth_outlet_pressure(
    p1: f64,
    q: f64,
    diameter: f64,
    length: f64,
    fluid: &FluidProperties,
    temperature: f64,
) -> Result<f64> {
    check_geometry(diameter, length)?;
    if q < 0.0 || p1 <= 0.0 {
        return Err(Error::Domain(format!("need q >= 0 and p1 > 0 (q = {q}, p1 = {p1})")));
    }
    let k = weymouth_coefficient(diameter, length, fluid, temperature);
    let p2_sq = p1 * p1 - (q / k).powi(2);
    if p2_sq <= 0.0 {
        return Err(Error::Domain(format!("flow {q} Sm³/s exceeds pipe capacity from {p1} Pa")));
    }
    Ok(p2_sq.sqrt())
}

/// Darcy-Weisbach pressure drop `f·(L/D)·ρv²/2` (Pa).
pub fn darcy_pressure_drop(q: f64, diameter: f64, length: f64, density: f64, friction: f64) -> Result<f64> {
    check_geometry(diameter, length)?;
    let area = std::f64::consts::PI * diameter * diameter / 4.0;
    let v = q / area;
    Ok(friction * (length / diameter) * density * v * v / 2.0)
}

/// Power curve lookup with linear interpolation, clamped to `[0, capacity]`.
pub fn wind_power(wind_speed: f64, spec: &WindTurbineSpec) -> Result<f64> {
    if !(wind_speed >= 0.0) {
        return Err(Error::Domain(format!("wind speed {wind_speed} must be >= 0")));
    }
    let pc = &spec.power_curve;
    if wind_speed < pc.cut_in || wind_speed >= pc.cut_out {
        return Ok(0.0);
    }
    let nodes = &pc.nodes;
    let p = match nodes.iter().position(|&(v, _)| v > wind_speed) {
        None => nodes.last().map_or(0.0, |n| n.1),
        Some(0) => nodes[0].1,
        Some(i) => {
            let (v0, p0) = nodes[i - 1];
            let (v1, p1) = nodes[i];
            p0 + (p1 - p0) * (wind_speed - v0) / (v1 - v0)
        }
    };
    Ok(p.clamp(0.0, spec.capacity))
}

/// New state of charge after applying `power_mw` (positive = discharge) for `dt_h` hours.
pub fn battery_step(state_of_charge: f64, power_mw: f64, dt_h: f64, spec: &BatterySpec) -> Result<f64> {
    if power_mw.abs() > spec.power_capacity + RANGE_EPS {
        return Err(Error::Capacity(format!(
            "setpoint {power_mw} MW exceeds power capacity {} MW",
            spec.power_capacity
        )));
    }
    let next = if power_mw < 0.0 {
        state_of_charge - spec.charge_efficiency * power_mw * dt_h
    } else {
        state_of_charge - power_mw * dt_h / spec.discharge_efficiency
    };
    let tol = 1e-9 * spec.energy_capacity.max(1.0);
    if next < -tol || next > spec.energy_capacity + tol {
        return Err(Error::Capacity(format!(
            "state of charge would reach {next} MWh outside [0, {}]",
            spec.energy_capacity
        )));
    }
    Ok(next.clamp(0.0, spec.energy_capacity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_canonical_scenario, CaseVariation};
    use proptest::prelude::*;

    fn fluid() -> FluidProperties {
        FluidProperties::canonical()
    }

    #[test]
    fn pump_worked_values() {
        let p = pump_power(0.277, 0.7e6, 25e6, 0.75).unwrap();
        assert!((p - 8.97).abs() < 0.01, "{p}");
        let p = pump_power(0.098, 0.3e6, 5e6, 0.6).unwrap();
        assert!((p - 0.7676666666666667).abs() < 1e-12);
        assert!((p - 0.79).abs() / 0.79 < 0.03);
        assert_eq!(pump_power(0.3, 2e6, 2e6, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn pump_domain_errors() {
        assert!(pump_power(0.1, 1e6, 2e6, 0.0).is_err());
        assert!(pump_power(0.1, 2e6, 1e6, 0.7).is_err());
    }

    #[test]
    fn compressor_worked_values() {
        let p = compressor_power(68.3, 2e6, 20e6, 300.0, &fluid(), 0.75).unwrap();
        assert!((p - 24.2).abs() <= 0.1, "{p}");
        assert!((p - 24.155242425721998).abs() < 1e-9);
        let p = compressor_power(70.8, 1.3e6, 2e6, 300.0, &fluid(), 0.75).unwrap();
        assert!((p - 3.8).abs() <= 0.05, "{p}");
        assert_eq!(compressor_power(50.0, 3e6, 3e6, 300.0, &fluid(), 0.75).unwrap(), 0.0);
        assert!(compressor_power(1.0, 0.0, 1e6, 300.0, &fluid(), 0.75).is_err());
    }

    #[test]
    fn recompression_matches_unit_loadings() {
        // Three re-compressors at 1.27 MW carry the 3.8 MW duty.
        let p = compressor_power(70.8, 1.3e6, 2e6, 300.0, &fluid(), 0.75).unwrap();
        assert!((p - 3.0 * 1.27).abs() < 0.02);
    }

    #[test]
    fn gt_fuel_endpoints_and_off() {
        let g = GasTurbineSpec::canonical("GT1");
        let full = gt_fuel(21.8, &g).unwrap();
        assert!((full - 21.8 / 0.347).abs() < 1e-9);
        assert!((full - 62.82).abs() < 0.01);
        assert!((gt_fuel(4.36, &g).unwrap() - 21.8).abs() < 1e-9);
        assert_eq!(gt_fuel(0.0, &g).unwrap(), 0.0);
        assert!(matches!(gt_fuel(2.0, &g), Err(Error::Range(_))));
        assert!(matches!(gt_fuel(22.0, &g), Err(Error::Range(_))));
    }

    #[test]
    fn gt_heat_efficiency_co2() {
        let s = build_canonical_scenario(CaseVariation::Base);
        let g = &s.gas_turbines[0];
        assert!((gt_heat(14.39, g).unwrap() - 15.2).abs() <= 0.05);
        assert!((gt_efficiency(14.39, g).unwrap() - 0.3170048733183243).abs() < 1e-9);
        let co2 = gt_co2_rate(21.8, g, &s.field, &s.fluid).unwrap();
        // 2.34 · 62.824 / 40
        assert!((co2 - 3.6752161383285307).abs() < 1e-9);
        assert!((co2 - 3.675).abs() < 1e-3);
    }

    #[test]
    fn gt_efficiency_strictly_increasing() {
        let g = GasTurbineSpec::canonical("GT1");
        let mut prev = 0.0;
        for i in 0..=1000 {
            let p = g.min_load + (g.capacity - g.min_load) * i as f64 / 1000.0;
            let e = gt_efficiency(p, &g).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn weymouth_identities() {
        let f = fluid();
        assert_eq!(weymouth_flow(5e6, 5e6, 0.5, 10_000.0, &f, 300.0).unwrap(), 0.0);
        let q = weymouth_flow(20e6, 15e6, 0.5, 50_000.0, &f, 300.0).unwrap();
        let p2 = weymouth_outlet_pressure(20e6, q, 0.5, 50_000.0, &f, 300.0).unwrap();
        assert!(((p2 - 15e6) / 15e6).abs() < 1e-9);
        let q2 = weymouth_flow(20e6, 15e6, 0.5, 100_000.0, &f, 300.0).unwrap();
        assert!((q2 / q - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(weymouth_flow(1e6, 2e6, 0.5, 1000.0, &f, 300.0).is_err());
    }

    #[test]
    fn weymouth_matches_field_unit_form() {
        // Same pipe evaluated in m³/day, kPa, mm, km.
        let f = fluid();
        let (p1, p2, d, l, t): (f64, f64, f64, f64, f64) = (20e6, 15e6, 0.5, 50_000.0, 300.0);
        let field_units = 0.0037435 * (STANDARD_TEMPERATURE / 101.325)
            * (((p1 / 1e3) * (p1 / 1e3) - (p2 / 1e3) * (p2 / 1e3))
                / (f.gas_gravity * t * (l / 1e3) * f.gas_compressibility))
                .sqrt()
            * (d * 1e3).powf(8.0 / 3.0)
            / 86_400.0;
        let si = weymouth_flow(p1, p2, d, l, &f, t).unwrap();
        assert!(((si - field_units) / field_units).abs() < 1e-12);
    }

    #[test]
    fn darcy_oil_pipe() {
        let f = fluid();
        assert_eq!(darcy_pressure_drop(0.0, 0.3, 5000.0, f.oil_density, f.oil_darcy_friction).unwrap(), 0.0);
        let dp = darcy_pressure_drop(0.1, 0.3, 5000.0, f.oil_density, f.oil_darcy_friction).unwrap();
        // v = 0.1/(π·0.3²/4) = 1.41471 m/s; 0.02·(5000/0.3)·900·v²/2
        assert!((dp - 300210.91449581564).abs() < 1e-6);
        let dp2 = darcy_pressure_drop(0.2, 0.3, 5000.0, f.oil_density, f.oil_darcy_friction).unwrap();
        assert!((dp2 / dp - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wind_curve_regions() {
        let w = WindTurbineSpec::canonical("WT1");
        assert_eq!(wind_power(0.0, &w).unwrap(), 0.0);
        assert_eq!(wind_power(3.9, &w).unwrap(), 0.0);
        assert_eq!(wind_power(15.0, &w).unwrap(), 8.0);
        assert_eq!(wind_power(25.0, &w).unwrap(), 0.0);
        assert_eq!(wind_power(30.0, &w).unwrap(), 0.0);
        assert!((wind_power(9.5, &w).unwrap() - 3.675).abs() < 1e-12);
        assert!(wind_power(-1.0, &w).is_err());
    }

    #[test]
    fn battery_split_efficiency() {
        let b = BatterySpec::canonical("BAT1");
        let soc = battery_step(0.0, -4.0, 1.0, &b).unwrap();
        assert!((soc - 3.794733192202055).abs() < 1e-12);
        assert_eq!(battery_step(1.7, 0.0, 0.5, &b).unwrap(), 1.7);
        // Discharge what was stored: energy delivered / energy drawn = 0.9.
        let delivered = soc * b.discharge_efficiency;
        let empty = battery_step(soc, delivered, 1.0, &b).unwrap();
        assert!(empty.abs() < 1e-12);
        assert!((delivered / 4.0 - 0.9).abs() < 1e-9);
        assert!(matches!(battery_step(3.9, -4.0, 1.0, &b), Err(Error::Capacity(_))));
        assert!(matches!(battery_step(1.0, 5.0, 0.1, &b), Err(Error::Capacity(_))));
    }

    proptest! {
        #[test]
        fn flows_linear_and_non_negative(q in 0.0f64..100.0, p1 in 0.1e6f64..10e6, ratio in 1.0f64..15.0, eta in 0.1f64..1.0) {
            let f = fluid();
            let p2 = p1 * ratio;
            let full = compressor_power(q, p1, p2, 300.0, &f, eta).unwrap();
            let half = compressor_power(q / 2.0, p1, p2, 300.0, &f, eta).unwrap();
            prop_assert!(full >= 0.0 && full.is_finite());
            prop_assert!((full - 2.0 * half).abs() <= 1e-12 * full.max(1.0));
            let pump = pump_power(q / 100.0, p1, p2, eta).unwrap();
            let pump_half = pump_power(q / 200.0, p1, p2, eta).unwrap();
            prop_assert!(pump >= 0.0 && (pump - 2.0 * pump_half).abs() <= 1e-12 * pump.max(1.0));
        }

        #[test]
        fn gt_outputs_finite_non_negative(p in 3.5f64..21.8) {
            let g = GasTurbineSpec::canonical("GT1");
            let s = build_canonical_scenario(CaseVariation::Base);
            prop_assert!(gt_fuel(p, &g).unwrap() > p);
            prop_assert!(gt_heat(p, &g).unwrap() > 0.0);
            prop_assert!(gt_co2_rate(p, &g, &s.field, &s.fluid).unwrap() > 0.0);
        }

        #[test]
        fn wind_power_bounded(v in 0.0f64..40.0) {
            let w = WindTurbineSpec::canonical("WT1");
            let p = wind_power(v, &w).unwrap();
            prop_assert!((0.0..=8.0).contains(&p));
        }

        #[test]
        fn battery_soc_in_bounds(soc in 0.0f64..4.0, p in -4.0f64..4.0, dt in 0.0f64..0.25) {
            let b = BatterySpec::canonical("BAT1");
            if let Ok(next) = battery_step(soc, p, dt, &b) {
                prop_assert!((0.0..=4.0).contains(&next));
            }
        }
    }
}
