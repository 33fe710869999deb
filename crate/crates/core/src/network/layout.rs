use serde::{Deserialize, Serialize};

use crate::model::Violation;

/// XLPE copper cable data per km for one three-core circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableType {
    pub name: String,
    pub kv: f64,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub c_uf_per_km: f64,
    pub rated_current_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerType {
    pub name: String,
    pub rating_mva: f64,
    pub hv_kv: f64,
    pub lv_kv: f64,
    /// Short-circuit voltage (%).
    pub uk_pct: f64,
    /// Load (copper) losses at rated power (%).
    pub load_loss_pct: f64,
    pub vector_group: String,
}

/// Star-point earthing data; carried for completeness, not used by the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarthingPoint {
    pub location: String,
    pub resistance_ohm: f64,
    pub fault_current_a: f64,
}

/// Everything needed to instantiate the grid of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub base_mva: f64,
    pub frequency_hz: f64,
    pub cable_types: Vec<CableType>,
    /// On-platform 11 kV and LV runs (m).
    pub platform_cable_length_m: f64,
    /// Generator connection runs (m).
    pub gt_cable_length_m: f64,
    /// Wind turbine to platform (m).
    pub wind_cable_length_m: f64,
    pub gt_parallel_cables: u32,
    pub utility_transformer: TransformerType,
    pub accommodation_transformer: TransformerType,
    /// Candidate dedicated drive transformers, smallest first.
    pub vsd_transformers: Vec<TransformerType>,
    pub drilling_transformer: TransformerType,
    pub drilling_converter_efficiency: f64,
    pub wind_turbine_transformer: TransformerType,
    pub wind_platform_transformer: TransformerType,
    pub gt_voltage_setpoint: f64,
    pub tie_11kv_closed: bool,
    pub tie_690v_closed: bool,
    pub tie_dc_closed: bool,
    pub earthing: Vec<EarthingPoint>,
}

fn transformer(name: &str, mva: f64, hv: f64, lv: f64, uk: f64, loss: f64, group: &str) -> TransformerType {
    TransformerType {
        name: name.into(),
        rating_mva: mva,
        hv_kv: hv,
        lv_kv: lv,
        uk_pct: uk,
        load_loss_pct: loss,
        vector_group: group.into(),
    }
}

impl NetworkLayout {
    pub fn canonical() -> Self {
        NetworkLayout {
            base_mva: 100.0,
            frequency_hz: 50.0,
            // Manufacturer-typical XLPE data at operating temperature.
            cable_types: vec![
                CableType {
                    name: "33kV-3x240".into(),
                    kv: 33.0,
                    r_ohm_per_km: 0.0980,
                    x_ohm_per_km: 0.112,
                    c_uf_per_km: 0.18,
                    rated_current_a: 489.0,
                },
                CableType {
                    name: "11kV-3x120".into(),
                    kv: 11.0,
                    r_ohm_per_km: 0.196,
                    x_ohm_per_km: 0.104,
                    c_uf_per_km: 0.34,
                    rated_current_a: 360.0,
                },
                CableType {
                    name: "11kV-3x240".into(),
                    kv: 11.0,
                    r_ohm_per_km: 0.0980,
                    x_ohm_per_km: 0.094,
                    c_uf_per_km: 0.44,
                    rated_current_a: 520.0,
                },
            ],
            platform_cable_length_m: 150.0,
            gt_cable_length_m: 400.0,
            wind_cable_length_m: 2500.0,
            gt_parallel_cables: 4,
            utility_transformer: transformer("UT 11/0.69", 3.3, 11.0, 0.69, 11.0, 0.35, "Dyn"),
            accommodation_transformer: transformer("AT 0.69/0.4", 0.6, 0.69, 0.4, 6.0, 1.0, "Dyn"),
            vsd_transformers: vec![
                transformer("VSD 11/0.69", 2.0, 11.0, 0.69, 6.0, 1.0, "Dd"),
                transformer("VSD 11/3.3 S", 6.0, 11.0, 3.3, 6.0, 1.0, "Dd"),
                transformer("VSD 11/3.3 L", 10.0, 11.0, 3.3, 6.0, 1.0, "Dd"),
            ],
            drilling_transformer: transformer("DRT 11/0.69", 3.3, 11.0, 0.69, 6.0, 1.0, "Dd"),
            drilling_converter_efficiency: 0.98,
            wind_turbine_transformer: transformer("WTT 0.69/33", 9.0, 33.0, 0.69, 6.0, 1.0, "Dyn"),
            wind_platform_transformer: transformer("PT 33/11", 30.0, 33.0, 11.0, 8.0, 0.5, "YNd"),
            gt_voltage_setpoint: 1.0,
            tie_11kv_closed: true,
            tie_690v_closed: false,
            tie_dc_closed: false,
            earthing: vec![
                EarthingPoint {
                    location: "GT star point".into(),
                    resistance_ohm: 127.0,
                    fault_current_a: 50.0,
                },
                EarthingPoint {
                    location: "utility transformer LV star point".into(),
                    resistance_ohm: 4.0,
                    fault_current_a: 100.0,
                },
            ],
        }
    }

    pub fn cable(&self, name: &str) -> Option<&CableType> {
        self.cable_types.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: String, inv: &str| {
            out.push(Violation {
                field,
                invariant: inv.to_string(),
            })
        };
        for c in &self.cable_types {
            if !(c.r_ohm_per_km >= 0.0 && c.x_ohm_per_km >= 0.0 && c.c_uf_per_km >= 0.0 && c.rated_current_a > 0.0) {
                push(format!("network.cable_types[{}]", c.name), "non-negative impedance, positive rating");
            }
        }
        let mut transformers = vec![
            &self.utility_transformer,
            &self.accommodation_transformer,
            &self.drilling_transformer,
            &self.wind_turbine_transformer,
            &self.wind_platform_transformer,
        ];
        transformers.extend(self.vsd_transformers.iter());
        for t in transformers {
            if !(t.rating_mva > 0.0 && t.uk_pct >= t.load_loss_pct && t.load_loss_pct >= 0.0) {
                push(
                    format!("network.transformer[{}]", t.name),
                    "positive rating and uk >= load losses >= 0",
                );
            }
        }
        for (name, v) in [
            ("network.platform_cable_length_m", self.platform_cable_length_m),
            ("network.gt_cable_length_m", self.gt_cable_length_m),
            ("network.wind_cable_length_m", self.wind_cable_length_m),
        ] {
            if v < 0.0 {
                push(name.into(), "length >= 0");
            }
        }
        if self.gt_parallel_cables == 0 {
            push("network.gt_parallel_cables".into(), "at least one cable");
        }
        if !(self.drilling_converter_efficiency > 0.0 && self.drilling_converter_efficiency <= 1.0) {
            push("network.drilling_converter_efficiency".into(), "0 < η <= 1");
        }
        out
    }
}
