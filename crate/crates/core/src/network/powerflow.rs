//! Newton-Raphson power flow in polar coordinates.
//!
//! Closed ties and zero-impedance branches are contracted before the
//! admittance matrix is formed; their flows are recovered afterwards from
//! nodal balance.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::grid::{BranchKind, GenKind, GridModel, UnionFind};
use crate::model::{total_nominal_demand, Scenario};
use crate::{Error, Result};

/// Generator dispatch and load scaling for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    /// Active power per synchronous generator in grid order; `None` = offline.
    /// The slack unit's value is ignored.
    pub gt_mw: Vec<Option<f64>>,
    /// Active power per wind generator in grid order (unity power factor).
    pub wind_mw: Vec<f64>,
    /// Multiplier on flow-dependent loads.
    pub load_multiplier: f64,
}

impl Injections {
    /// All gas turbines online sharing the nominal demand equally, wind off.
    pub fn table_point(scenario: &Scenario, grid: &GridModel) -> Self {
        let n_gt = grid.generators.iter().filter(|g| g.kind == GenKind::Synchronous).count();
        let n_wt = grid.generators.len() - n_gt;
        let share = total_nominal_demand(scenario) / n_gt.max(1) as f64;
        Injections {
            gt_mw: vec![Some(share); n_gt],
            wind_mw: vec![0.0; n_wt],
            load_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerFlowOptions {
    pub tolerance_pu: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tolerance_pu: 1e-10,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BusResult {
    pub id: String,
    pub kv: f64,
    pub v_pu: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchResult {
    pub id: String,
    pub from: String,
    pub to: String,
    pub p_from_mw: f64,
    pub q_from_mvar: f64,
    pub p_to_mw: f64,
    pub q_to_mvar: f64,
    /// Larger of the two terminal currents (A).
    pub i_a: f64,
    pub loading_pct: f64,
    pub in_service: bool,
}

impl BranchResult {
    pub fn loss_mw(&self) -> f64 {
        self.p_from_mw + self.p_to_mw
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitResult {
    pub tag: String,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerFlowResult {
    pub iterations: usize,
    pub max_mismatch_pu: f64,
    pub buses: Vec<BusResult>,
    pub branches: Vec<BranchResult>,
    pub generators: Vec<UnitResult>,
    pub loads: Vec<UnitResult>,
    pub total_generation_mw: f64,
    pub total_load_mw: f64,
    pub losses_mw: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BusType {
    Slack,
    Pv,
    Pq,
}

struct Reduced {
    /// Reduced index per original bus, `None` if outside the slack island.
    map: Vec<Option<usize>>,
    n: usize,
}

fn contract(grid: &GridModel, slack_bus: usize) -> Result<Reduced> {
    let mut uf = UnionFind::new(grid.buses.len());
    for br in grid.branches.iter().filter(|b| b.in_service) {
        let pu = grid.branch_pu(br);
        if pu.r == 0.0 && pu.x == 0.0 {
            uf.union(br.from, br.to);
        }
    }
    let island = grid.components(true);
    let mut map = vec![None; grid.buses.len()];
    let mut rep_to_idx = std::collections::BTreeMap::new();
    for i in 0..grid.buses.len() {
        if island[i] != island[slack_bus] {
            continue;
        }
        let r = uf.find(i);
        let next = rep_to_idx.len();
        let idx = *rep_to_idx.entry(r).or_insert(next);
        map[i] = Some(idx);
    }
    Ok(Reduced {
        n: rep_to_idx.len(),
        map,
    })
}

/// Solves the AC power flow for the given injections.
pub fn solve_power_flow(grid: &GridModel, inj: &Injections, opts: &PowerFlowOptions) -> Result<PowerFlowResult> {
    let base = grid.base_mva;
    let sync: Vec<usize> = (0..grid.generators.len())
        .filter(|&i| grid.generators[i].kind == GenKind::Synchronous)
        .collect();
    let wind: Vec<usize> = (0..grid.generators.len())
        .filter(|&i| grid.generators[i].kind == GenKind::Wind)
        .collect();
    if inj.gt_mw.len() != sync.len() || inj.wind_mw.len() != wind.len() {
        return Err(Error::Invalid(format!(
            "injections cover {} synchronous and {} wind units, grid has {} and {}",
            inj.gt_mw.len(),
            inj.wind_mw.len(),
            sync.len(),
            wind.len()
        )));
    }
    // Generator active power (MW) per grid generator; None = offline.
    let mut gen_p: Vec<Option<f64>> = vec![None; grid.generators.len()];
    for (k, &gi) in sync.iter().enumerate() {
        gen_p[gi] = inj.gt_mw[k];
    }
    for (k, &gi) in wind.iter().enumerate() {
        gen_p[gi] = Some(inj.wind_mw[k]);
    }
    let slack_gen = *sync
        .iter()
        .find(|&&gi| gen_p[gi].is_some())
        .ok_or_else(|| Error::Invalid("no synchronous generator online for the slack".into()))?;
    let slack_bus = grid.generators[slack_gen].bus;
    let red = contract(grid, slack_bus)?;
    let n = red.n;
    let rs = red.map[slack_bus].expect("slack in own island");

    for (gi, g) in grid.generators.iter().enumerate() {
        if gen_p[gi].is_some() && red.map[g.bus].is_none() {
            return Err(Error::Invalid(format!("{} is islanded from the slack", g.tag)));
        }
    }
    let load_scale = |l: &super::grid::GridLoad| if l.flow_dependent { inj.load_multiplier } else { 1.0 };
    for l in &grid.loads {
        if l.p_mw * load_scale(l) > 0.0 && red.map[l.bus].is_none() {
            return Err(Error::Invalid(format!("load {} is islanded", l.tag)));
        }
    }

    let mut g_mat = vec![vec![0.0; n]; n];
    let mut b_mat = vec![vec![0.0; n]; n];
    for br in grid.branches.iter().filter(|b| b.in_service) {
        let (Some(f), Some(t)) = (red.map[br.from], red.map[br.to]) else {
            continue;
        };
        if f == t {
            continue;
        }
        let pu = grid.branch_pu(br);
        let den = pu.r * pu.r + pu.x * pu.x;
        let (gs, bs) = (pu.r / den, -pu.x / den);
        g_mat[f][f] += gs;
        g_mat[t][t] += gs;
        b_mat[f][f] += bs + pu.b / 2.0;
        b_mat[t][t] += bs + pu.b / 2.0;
        g_mat[f][t] -= gs;
        g_mat[t][f] -= gs;
        b_mat[f][t] -= bs;
        b_mat[t][f] -= bs;
    }

    let mut kind = vec![BusType::Pq; n];
    let mut v = vec![1.0; n];
    let mut theta = vec![0.0; n];
    let mut p_gen = vec![0.0; n];
    let q_gen = vec![0.0; n];
    for (gi, g) in grid.generators.iter().enumerate() {
        let Some(p) = gen_p[gi] else { continue };
        let r = red.map[g.bus].unwrap();
        if gi != slack_gen {
            p_gen[r] += p / base;
        }
        if g.kind == GenKind::Synchronous {
            if r == rs {
                kind[r] = BusType::Slack;
            } else if kind[r] != BusType::Slack {
                kind[r] = BusType::Pv;
            }
            v[r] = g.v_setpoint;
        }
    }
    kind[rs] = BusType::Slack;
    v[rs] = grid.generators[slack_gen].v_setpoint;

    // Per reduced bus load terms (pu at V = 1).
    let mut loads_at: Vec<Vec<(f64, f64, crate::model::ZipComposition)>> = vec![Vec::new(); n];
    for l in &grid.loads {
        if let Some(r) = red.map[l.bus] {
            let s = load_scale(l);
            loads_at[r].push((l.p_mw * s / base, l.q_mvar * s / base, l.zip));
        }
    }
    let load_pq = |r: usize, vr: f64| -> (f64, f64, f64, f64) {
        let (mut p, mut q, mut dp, mut dq) = (0.0, 0.0, 0.0, 0.0);
        for &(p0, q0, zip) in &loads_at[r] {
            p += p0 * zip.factor(vr);
            q += q0 * zip.factor(vr);
            dp += p0 * zip.dfactor_dv(vr);
            dq += q0 * zip.dfactor_dv(vr);
        }
        (p, q, dp, dq)
    };

    let pq_calc = |v: &[f64], theta: &[f64], i: usize| -> (f64, f64) {
        let (mut p, mut q) = (0.0, 0.0);
        for k in 0..n {
            let (s, c) = (theta[i] - theta[k]).sin_cos();
            p += v[k] * (g_mat[i][k] * c + b_mat[i][k] * s);
            q += v[k] * (g_mat[i][k] * s - b_mat[i][k] * c);
        }
        (v[i] * p, v[i] * q)
    };

    let ang: Vec<usize> = (0..n).filter(|&i| kind[i] != BusType::Slack).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| kind[i] == BusType::Pq).collect();
    let mut ang_pos = vec![usize::MAX; n];
    let mut mag_pos = vec![usize::MAX; n];
    for (k, &i) in ang.iter().enumerate() {
        ang_pos[i] = k;
    }
    for (k, &i) in mag.iter().enumerate() {
        mag_pos[i] = ang.len() + k;
    }
    let dim = ang.len() + mag.len();

    let mismatch = |v: &[f64], theta: &[f64]| -> (DVector<f64>, Vec<(f64, f64)>) {
        let calc: Vec<(f64, f64)> = (0..n).map(|i| pq_calc(v, theta, i)).collect();
        let mut f = DVector::zeros(dim);
        for &i in &ang {
            let (pl, _, _, _) = load_pq(i, v[i]);
            f[ang_pos[i]] = calc[i].0 + pl - p_gen[i];
        }
        for &i in &mag {
            let (_, ql, _, _) = load_pq(i, v[i]);
            f[mag_pos[i]] = calc[i].1 + ql - q_gen[i];
        }
        (f, calc)
    };

    let mut iterations = 0;
    let (mut f, mut calc) = mismatch(&v, &theta);
    let mut max_mis = f.amax();
    while max_mis > opts.tolerance_pu {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                mismatch: max_mis,
            });
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for &i in ang.iter() {
            let (pi, qi) = calc[i];
            let row_p = ang_pos[i];
            let row_q = mag_pos[i];
            let (_, _, dpl, dql) = load_pq(i, v[i]);
            for k in 0..n {
                if kind[k] == BusType::Slack && k != i {
                    continue;
                }
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                let (gik, bik) = (g_mat[i][k], b_mat[i][k]);
                if k == i {
                    jac[(row_p, ang_pos[i])] = -qi - bik * v[i] * v[i];
                    if kind[i] == BusType::Pq {
                        jac[(row_p, mag_pos[i])] = pi / v[i] + gik * v[i] + dpl;
                        jac[(row_q, ang_pos[i])] = pi - gik * v[i] * v[i];
                        jac[(row_q, mag_pos[i])] = qi / v[i] - bik * v[i] + dql;
                    }
                } else {
                    jac[(row_p, ang_pos[k])] = v[i] * v[k] * (gik * s - bik * c);
                    if kind[k] == BusType::Pq {
                        jac[(row_p, mag_pos[k])] = v[i] * (gik * c + bik * s);
                    }
                    if kind[i] == BusType::Pq {
                        jac[(row_q, ang_pos[k])] = -v[i] * v[k] * (gik * c + bik * s);
                        if kind[k] == BusType::Pq {
                            jac[(row_q, mag_pos[k])] = v[i] * (gik * s - bik * c);
                        }
                    }
                }
            }
        }
        let dx = jac
            .lu()
            .solve(&(-&f))
            .ok_or_else(|| Error::NonConvergence {
                iterations,
                mismatch: max_mis,
            })?;
        for &i in &ang {
            theta[i] += dx[ang_pos[i]];
        }
        for &i in &mag {
            v[i] += dx[mag_pos[i]];
        }
        iterations += 1;
        (f, calc) = mismatch(&v, &theta);
        max_mis = f.amax();
        if !max_mis.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                mismatch: max_mis,
            });
        }
    }

    // Unit results.
    let mut gen_out: Vec<UnitResult> = Vec::with_capacity(grid.generators.len());
    let mut net_gen_q = vec![0.0; n];
    let mut slack_p = 0.0;
    for i in 0..n {
        if kind[i] == BusType::Pq {
            continue;
        }
        let (pl, ql, _, _) = load_pq(i, v[i]);
        net_gen_q[i] = calc[i].1 + ql;
        if i == rs {
            slack_p = calc[i].0 + pl - p_gen[i];
        }
    }
    for (gi, g) in grid.generators.iter().enumerate() {
        let (p, q) = match (gen_p[gi], red.map[g.bus]) {
            (Some(p), Some(r)) => {
                let p = if gi == slack_gen { slack_p * base } else { p };
                let q = if g.kind == GenKind::Synchronous && kind[r] != BusType::Pq {
                    let share: f64 = grid
                        .generators
                        .iter()
                        .enumerate()
                        .filter(|(gj, o)| {
                            o.kind == GenKind::Synchronous && gen_p[*gj].is_some() && red.map[o.bus] == Some(r)
                        })
                        .map(|(_, o)| o.rating_mva)
                        .sum();
                    net_gen_q[r] * base * g.rating_mva / share
                } else {
                    0.0
                };
                (p, q)
            }
            _ => (0.0, 0.0),
        };
        gen_out.push(UnitResult {
            tag: g.tag.clone(),
            p_mw: p,
            q_mvar: q,
        });
    }
    let mut load_out = Vec::with_capacity(grid.loads.len());
    for l in &grid.loads {
        let (p, q) = match red.map[l.bus] {
            Some(r) => {
                let s = load_scale(l) * l.zip.factor(v[r]);
                (l.p_mw * s, l.q_mvar * s)
            }
            None => (0.0, 0.0),
        };
        load_out.push(UnitResult {
            tag: l.tag.clone(),
            p_mw: p,
            q_mvar: q,
        });
    }

    let bus_v = |i: usize| red.map[i].map_or(0.0, |r| v[r]);
    let bus_th = |i: usize| red.map[i].map_or(0.0, |r| theta[r]);

    let i_base_a = |kv: f64| base * 1e3 / (3f64.sqrt() * kv);
    let mut branches: Vec<BranchResult> = Vec::with_capacity(grid.branches.len());
    // Net injection per original bus (MW, Mvar), used to recover contracted flows.
    let mut net_p = vec![0.0; grid.buses.len()];
    let mut net_q = vec![0.0; grid.buses.len()];
    for (gi, g) in grid.generators.iter().enumerate() {
        net_p[g.bus] += gen_out[gi].p_mw;
        net_q[g.bus] += gen_out[gi].q_mvar;
    }
    for (li, l) in grid.loads.iter().enumerate() {
        net_p[l.bus] -= load_out[li].p_mw;
        net_q[l.bus] -= load_out[li].q_mvar;
    }
    let mut contracted: Vec<usize> = Vec::new();
    for (bi, br) in grid.branches.iter().enumerate() {
        let mut res = BranchResult {
            id: br.id.clone(),
            from: grid.buses[br.from].id.clone(),
            to: grid.buses[br.to].id.clone(),
            p_from_mw: 0.0,
            q_from_mvar: 0.0,
            p_to_mw: 0.0,
            q_to_mvar: 0.0,
            i_a: 0.0,
            loading_pct: 0.0,
            in_service: br.in_service,
        };
        let (rf, rt) = (red.map[br.from], red.map[br.to]);
        if br.in_service && rf.is_some() && rt.is_some() {
            if rf == rt {
                contracted.push(bi);
            } else {
                let pu = grid.branch_pu(br);
                let vf = nalgebra::Complex::from_polar(bus_v(br.from), bus_th(br.from));
                let vt = nalgebra::Complex::from_polar(bus_v(br.to), bus_th(br.to));
                let z = nalgebra::Complex::new(pu.r, pu.x);
                let i_series = (vf - vt) / z;
                let ysh = nalgebra::Complex::new(0.0, pu.b / 2.0);
                let i_f = i_series + vf * ysh;
                let i_t = -i_series + vt * ysh;
                let s_f = vf * i_f.conj() * base;
                let s_t = vt * i_t.conj() * base;
                res.p_from_mw = s_f.re;
                res.q_from_mvar = s_f.im;
                res.p_to_mw = s_t.re;
                res.q_to_mvar = s_t.im;
                let ia_f = i_f.norm() * i_base_a(grid.buses[br.from].kv);
                let ia_t = i_t.norm() * i_base_a(grid.buses[br.to].kv);
                res.i_a = ia_f.max(ia_t);
                res.loading_pct = match &br.kind {
                    BranchKind::Cable { cable, parallel, .. } => {
                        100.0 * res.i_a / (cable.rated_current_a * f64::from((*parallel).max(1)))
                    }
                    BranchKind::Transformer(t) => 100.0 * s_f.norm().max(s_t.norm()) / t.rating_mva,
                    BranchKind::Tie => 0.0,
                };
                net_p[br.from] -= res.p_from_mw;
                net_q[br.from] -= res.q_from_mvar;
                net_p[br.to] -= res.p_to_mw;
                net_q[br.to] -= res.q_to_mvar;
            }
        }
        branches.push(res);
    }
    // Peel leaves of the contracted forest: a leaf's residual injection flows out over its only edge.
    let mut remaining = contracted;
    loop {
        let mut degree = vec![0usize; grid.buses.len()];
        for &bi in &remaining {
            degree[grid.branches[bi].from] += 1;
            degree[grid.branches[bi].to] += 1;
        }
        let pos = remaining.iter().position(|&bi| {
            let br = &grid.branches[bi];
            degree[br.from] == 1 || degree[br.to] == 1
        });
        let Some(k) = pos else { break };
        let bi = remaining.remove(k);
        let br = &grid.branches[bi];
        let (leaf, other, sign) = if degree[br.from] == 1 {
            (br.from, br.to, 1.0)
        } else {
            (br.to, br.from, -1.0)
        };
        let (p, q) = (net_p[leaf], net_q[leaf]);
        net_p[other] += p;
        net_q[other] += q;
        net_p[leaf] = 0.0;
        net_q[leaf] = 0.0;
        let res = &mut branches[bi];
        res.p_from_mw = sign * p;
        res.q_from_mvar = sign * q;
        res.p_to_mw = -sign * p;
        res.q_to_mvar = -sign * q;
        let vm = bus_v(br.from).max(1e-9);
        res.i_a = (p * p + q * q).sqrt() / vm * 1e3 / (3f64.sqrt() * grid.buses[br.from].kv);
    }

    let total_generation_mw: f64 = gen_out.iter().map(|g| g.p_mw).sum();
    let total_load_mw: f64 = load_out.iter().map(|l| l.p_mw).sum();
    Ok(PowerFlowResult {
        iterations,
        max_mismatch_pu: max_mis,
        buses: grid
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| BusResult {
                id: b.id.clone(),
                kv: b.kv,
                v_pu: bus_v(i),
                angle_deg: bus_th(i).to_degrees(),
            })
            .collect(),
        branches,
        generators: gen_out,
        loads: load_out,
        total_generation_mw,
        total_load_mw,
        losses_mw: total_generation_mw - total_load_mw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overload {
    pub branch: String,
    pub loading_pct: f64,
}

/// Branches whose current (cables) or apparent power (transformers) exceeds the rating.
pub fn check_ratings(grid: &GridModel, flows: &PowerFlowResult) -> Vec<Overload> {
    grid.branches
        .iter()
        .zip(&flows.branches)
        .filter(|(br, res)| br.in_service && !matches!(br.kind, BranchKind::Tie) && res.loading_pct > 100.0)
        .map(|(br, res)| Overload {
            branch: br.id.clone(),
            loading_pct: res.loading_pct,
        })
        .collect()
}

pub fn write_bus_csv<W: Write>(out: W, result: &PowerFlowResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "kv", "v_pu", "angle_deg"])?;
    for b in &result.buses {
        w.write_record([
            b.id.clone(),
            format!("{}", b.kv),
            format!("{:.6}", b.v_pu),
            format!("{:.6}", b.angle_deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_branch_csv<W: Write>(out: W, result: &PowerFlowResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "p_mw", "q_mvar", "i_a", "loading_pct"])?;
    for b in result.branches.iter().filter(|b| b.in_service) {
        w.write_record([
            b.from.clone(),
            b.to.clone(),
            format!("{:.6}", b.p_from_mw),
            format!("{:.6}", b.q_from_mvar),
            format!("{:.3}", b.i_a),
            format!("{:.3}", b.loading_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
