use serde::{Deserialize, Serialize};

use super::layout::{CableType, NetworkLayout, TransformerType};
use crate::model::{LoadKind, Scenario, ZipComposition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Ac,
    /// AC side of the rectifiers feeding the 1.3 kV DC drilling bus.
    DcConverter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub kv: f64,
    pub side: Option<char>,
    pub kind: BusKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BranchKind {
    Cable {
        cable: CableType,
        length_km: f64,
        parallel: u32,
    },
    Transformer(TransformerType),
    /// Bus-section breaker; zero impedance when closed.
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub kind: BranchKind,
    pub in_service: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenKind {
    Synchronous,
    Wind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub tag: String,
    pub bus: usize,
    pub kind: GenKind,
    pub rating_mva: f64,
    pub v_setpoint: f64,
}

/// A load as seen by the grid, at nominal voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLoad {
    pub tag: String,
    pub bus: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub zip: ZipComposition,
    pub flow_dependent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub base_mva: f64,
    pub frequency_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<GridLoad>,
}

/// Series impedance and total shunt susceptance of a branch in system per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BranchPu {
    pub r: f64,
    pub x: f64,
    pub b: f64,
}

impl GridModel {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn branch_mut(&mut self, id: &str) -> Option<&mut Branch> {
        self.branches.iter_mut().find(|b| b.id == id)
    }

    pub fn generator_index(&self, tag: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.tag == tag)
    }

    pub fn has_voltage_level(&self, kv: f64) -> bool {
        self.buses.iter().any(|b| (b.kv - kv).abs() < 1e-9)
    }

    pub(crate) fn branch_pu(&self, br: &Branch) -> BranchPu {
        match &br.kind {
            BranchKind::Tie => BranchPu { r: 0.0, x: 0.0, b: 0.0 },
            BranchKind::Cable {
                cable,
                length_km,
                parallel,
            } => {
                let kv = self.buses[br.from].kv;
                let z_base = kv * kv / self.base_mva;
                let n = f64::from((*parallel).max(1));
                let r = cable.r_ohm_per_km * length_km / n / z_base;
                let x = cable.x_ohm_per_km * length_km / n / z_base;
                let b = 2.0 * std::f64::consts::PI * self.frequency_hz * cable.c_uf_per_km * 1e-6 * length_km * n * z_base;
                BranchPu { r, x, b }
            }
            BranchKind::Transformer(t) => {
                let scale = self.base_mva / t.rating_mva;
                let z = t.uk_pct / 100.0 * scale;
                let r = t.load_loss_pct / 100.0 * scale;
                BranchPu {
                    r,
                    x: (z * z - r * r).max(0.0).sqrt(),
                    b: 0.0,
                }
            }
        }
    }

    /// A variant where every branch has zero impedance, so the whole grid is one node.
    pub fn copper_plate(&self) -> GridModel {
        let mut g = self.clone();
        for br in &mut g.branches {
            br.kind = BranchKind::Tie;
        }
        g
    }

    /// Topology problems; empty when the grid is well formed.
    pub fn check_topology(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for br in &self.branches {
            let (kf, kt) = (self.buses[br.from].kv, self.buses[br.to].kv);
            match &br.kind {
                BranchKind::Transformer(t) => {
                    let matches = ((kf - t.hv_kv).abs() < 1e-9 && (kt - t.lv_kv).abs() < 1e-9)
                        || ((kf - t.lv_kv).abs() < 1e-9 && (kt - t.hv_kv).abs() < 1e-9);
                    if !matches {
                        problems.push(format!("{}: transformer ratio does not match bus voltages", br.id));
                    }
                }
                BranchKind::Cable { cable, .. } => {
                    if (kf - kt).abs() > 1e-9 {
                        problems.push(format!("{}: cable joins different voltage levels", br.id));
                    }
                    if cable.kv + 1e-9 < kf {
                        problems.push(format!("{}: cable rated below bus voltage", br.id));
                    }
                }
                BranchKind::Tie => {
                    if (kf - kt).abs() > 1e-9 {
                        problems.push(format!("{}: tie joins different voltage levels", br.id));
                    }
                }
            }
        }
        let comps = self.components(true);
        let n_comp = comps.iter().copied().max().map_or(0, |m| m + 1);
        if n_comp > 1 {
            problems.push(format!("grid has {n_comp} islands with in-service branches"));
        }
        problems
    }

    /// Connected-component label per bus over in-service branches.
    pub(crate) fn components(&self, in_service_only: bool) -> Vec<usize> {
        let mut uf = UnionFind::new(self.buses.len());
        for br in &self.branches {
            if !in_service_only || br.in_service {
                uf.union(br.from, br.to);
            }
        }
        let mut labels = vec![usize::MAX; self.buses.len()];
        let mut next = 0;
        let mut out = vec![0; self.buses.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let r = uf.find(i);
            if labels[r] == usize::MAX {
                labels[r] = next;
                next += 1;
            }
            *o = labels[r];
        }
        out
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

struct Builder<'a> {
    layout: &'a NetworkLayout,
    grid: GridModel,
}

impl<'a> Builder<'a> {
    fn bus(&mut self, id: &str, kv: f64, side: Option<char>, kind: BusKind) -> usize {
        if let Some(i) = self.grid.bus_index(id) {
            return i;
        }
        self.grid.buses.push(Bus {
            id: id.to_string(),
            kv,
            side,
            kind,
        });
        self.grid.buses.len() - 1
    }

    fn cable(&mut self, id: String, from: usize, to: usize, cable: &str, length_m: f64, parallel: u32) -> Result<()> {
        let cable = self
            .layout
            .cable(cable)
            .ok_or_else(|| Error::Invalid(format!("unknown cable type {cable}")))?
            .clone();
        self.grid.branches.push(Branch {
            id,
            from,
            to,
            kind: BranchKind::Cable {
                cable,
                length_km: length_m / 1000.0,
                parallel,
            },
            in_service: true,
        });
        Ok(())
    }

    fn transformer(&mut self, id: String, hv: usize, lv: usize, t: &TransformerType) {
        self.grid.branches.push(Branch {
            id,
            from: hv,
            to: lv,
            kind: BranchKind::Transformer(t.clone()),
            in_service: true,
        });
    }

    fn tie(&mut self, id: &str, a: usize, b: usize, closed: bool) {
        self.grid.branches.push(Branch {
            id: id.to_string(),
            from: a,
            to: b,
            kind: BranchKind::Tie,
            in_service: closed,
        });
    }

    /// 11 kV feeder cable sized by full-load current.
    fn feeder_cable_for(&self, capacity_mw: f64) -> &'static str {
        let amps = capacity_mw * 1e3 / (3f64.sqrt() * 11.0);
        if amps > 0.9 * 360.0 {
            "11kV-3x240"
        } else {
            "11kV-3x120"
        }
    }
}

fn q_from_pf(p: f64, pf: f64) -> f64 {
    if pf >= 1.0 {
        0.0
    } else {
        p * (1.0 / (pf * pf) - 1.0).sqrt()
    }
}

/// Instantiates buses, branches and injections from the scenario.
pub fn build_canonical_grid(scenario: &Scenario) -> Result<GridModel> {
    let layout = &scenario.network;
    let mut b = Builder {
        layout,
        grid: GridModel {
            base_mva: layout.base_mva,
            frequency_hz: layout.frequency_hz,
            buses: Vec::new(),
            branches: Vec::new(),
            generators: Vec::new(),
            loads: Vec::new(),
        },
    };
    let plat = layout.platform_cable_length_m;

    let mb_a = b.bus("MB11-A", 11.0, Some('A'), BusKind::Ac);
    let mb_b = b.bus("MB11-B", 11.0, Some('B'), BusKind::Ac);
    b.tie("TIE-MB11", mb_a, mb_b, layout.tie_11kv_closed);

    let ub_a = b.bus("UB690-A", 0.69, Some('A'), BusKind::Ac);
    let ub_b = b.bus("UB690-B", 0.69, Some('B'), BusKind::Ac);
    b.tie("TIE-UB690", ub_a, ub_b, layout.tie_690v_closed);
    let ut = layout.utility_transformer.clone();
    b.transformer("UT-A".into(), mb_a, ub_a, &ut);
    b.transformer("UT-B".into(), mb_b, ub_b, &ut);

    let at = layout.accommodation_transformer.clone();
    for (side, ub) in [('A', ub_a), ('B', ub_b)] {
        let acc = b.bus(&format!("ACC690-{side}"), 0.69, Some(side), BusKind::Ac);
        let lv = b.bus(&format!("LV400-{side}"), 0.4, Some(side), BusKind::Ac);
        b.cable(format!("C-ACC-{side}"), ub, acc, "11kV-3x240", plat, 1)?;
        b.transformer(format!("AT-{side}"), acc, lv, &at);
    }

    let drt = layout.drilling_transformer.clone();
    let dc_a = b.bus("DC1300-A", 0.69, Some('A'), BusKind::DcConverter);
    let dc_b = b.bus("DC1300-B", 0.69, Some('B'), BusKind::DcConverter);
    b.transformer("DRT-A".into(), mb_a, dc_a, &drt);
    b.transformer("DRT-B".into(), mb_b, dc_b, &drt);
    b.tie("TIE-DC1300", dc_a, dc_b, layout.tie_dc_closed);

    let side_bus = |side: char, a: usize, bb: usize| if side == 'B' { bb } else { a };

    for gt in &scenario.gas_turbines {
        let side = crate::model::side_for_tag(&gt.tag);
        let term = b.bus(&format!("{}-T", gt.tag), 11.0, Some(side), BusKind::Ac);
        b.cable(
            format!("C-{}", gt.tag),
            term,
            side_bus(side, mb_a, mb_b),
            "11kV-3x240",
            layout.gt_cable_length_m,
            layout.gt_parallel_cables,
        )?;
        b.grid.generators.push(Generator {
            tag: gt.tag.clone(),
            bus: term,
            kind: GenKind::Synchronous,
            rating_mva: gt.rated_apparent_power,
            v_setpoint: layout.gt_voltage_setpoint,
        });
    }

    if !scenario.wind_turbines.is_empty() {
        let wf = b.bus("WF33", 33.0, None, BusKind::Ac);
        let pt = layout.wind_platform_transformer.clone();
        b.transformer("PT-WF".into(), wf, mb_a, &pt);
        let wtt = layout.wind_turbine_transformer.clone();
        for wt in &scenario.wind_turbines {
            let lv = b.bus(&format!("{}-LV", wt.tag), wt.generator_voltage, None, BusKind::Ac);
            let mv = b.bus(&format!("{}-MV", wt.tag), 33.0, None, BusKind::Ac);
            b.transformer(format!("WTT-{}", wt.tag), mv, lv, &wtt);
            b.cable(format!("C-{}", wt.tag), mv, wf, "33kV-3x240", layout.wind_cable_length_m, 1)?;
            b.grid.generators.push(Generator {
                tag: wt.tag.clone(),
                bus: lv,
                kind: GenKind::Wind,
                rating_mva: wt.capacity / wt.rated_power_factor,
                v_setpoint: 1.0,
            });
        }
    }

    for load in &scenario.loads {
        let busbar = b
            .grid
            .bus_index(&load.bus)
            .ok_or_else(|| Error::Invalid(format!("{}: unknown busbar {}", load.tag, load.bus)))?;
        let side = crate::model::side_for_tag(&load.tag);
        let (bus, p) = match load.kind {
            LoadKind::InductionMotor if b.grid.buses[busbar].kv > 1.0 => {
                let m = b.bus(&load.tag, b.grid.buses[busbar].kv, Some(side), BusKind::Ac);
                let cable = b.feeder_cable_for(load.capacity);
                b.cable(format!("C-{}", load.tag), busbar, m, cable, plat, 1)?;
                (m, load.nominal_load)
            }
            LoadKind::VariableSpeedDrive => {
                let hv = b.bus(&format!("{}-HV", load.tag), 11.0, Some(side), BusKind::Ac);
                let cable = b.feeder_cable_for(load.capacity);
                b.cable(format!("C-{}", load.tag), busbar, hv, cable, plat, 1)?;
                let t = layout
                    .vsd_transformers
                    .iter()
                    .find(|t| (t.lv_kv - load.voltage_kv).abs() < 1e-9 && t.rating_mva >= load.capacity)
                    .ok_or_else(|| Error::Invalid(format!("{}: no drive transformer fits", load.tag)))?
                    .clone();
                let lv = b.bus(&load.tag, t.lv_kv, Some(side), BusKind::Ac);
                b.transformer(format!("VT-{}", load.tag), hv, lv, &t);
                (lv, load.nominal_load)
            }
            LoadKind::Drilling => (busbar, load.nominal_load / layout.drilling_converter_efficiency),
            _ => (busbar, load.nominal_load),
        };
        b.grid.loads.push(GridLoad {
            tag: load.tag.clone(),
            bus,
            p_mw: p,
            q_mvar: q_from_pf(p, load.power_factor),
            zip: load.zip,
            flow_dependent: load.flow_dependent,
        });
    }

    Ok(b.grid)
}
