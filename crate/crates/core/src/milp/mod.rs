//! Capacitated flow-refuelling location model.
//!
//! Binary `y_i` opens candidate site `i` at cost `c_i`; `x` carries each
//! path's weekly flow from its pseudo origin to its pseudo destination
//! through open sites. Total inflow into a site is bounded by
//! `Cap_i * y_i` and at most `budget` sites may open.

mod bb;
mod brute;
mod greedy;
pub mod lp;

use serde::{Deserialize, Serialize};

pub use bb::solve_bb;
pub use brute::{brute_force, BRUTE_FORCE_MAX_SITES};
pub use greedy::greedy_add;
pub use lp::{solve_lp, LinearProgram, LpOptions, LpSolution, LpStatus, RowSense};

use crate::path_network::{MilpInstance, NodeRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Proven optimal.
    Optimal,
    /// Feasible plan from a heuristic, optimality not proven.
    Feasible,
    /// No plan exists even with every site open.
    Infeasible,
    /// Plans exist, but none within the station budget.
    BudgetInfeasible,
    IterLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Progress lines, recorded when `verbose` is set.
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Open flag per site.
    pub y: Vec<bool>,
    /// Flow per path, per arc of that path's network.
    pub x: Vec<Vec<f64>>,
    /// Sum of costs of the open sites; infinite when no plan was found.
    pub objective: f64,
    pub bound_gap: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub(crate) fn without_plan(inst: &MilpInstance, status: SolveStatus, stats: SolveStats) -> Self {
        Self {
            status,
            y: vec![false; inst.sites.len()],
            x: inst.paths.iter().map(|p| vec![0.0; p.network.arcs.len()]).collect(),
            objective: f64::INFINITY,
            bound_gap: f64::INFINITY,
            stats,
        }
    }

    pub fn has_plan(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn open_sites(&self) -> Vec<usize> {
        self.y.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect()
    }

    /// Weekly inflow into each site summed over all paths.
    pub fn site_inflows(&self, inst: &MilpInstance) -> Vec<f64> {
        let mut inflow = vec![0.0; inst.sites.len()];
        for (p, xs) in inst.paths.iter().zip(&self.x) {
            for (arc, v) in p.network.arcs.iter().zip(xs) {
                if let Some(site) = p.site_of(arc.to) {
                    inflow[site] += v;
                }
            }
        }
        inflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub int_tol: f64,
    /// Absolute gap; ignored in favour of rounding when every cost is integral.
    pub gap_tol: f64,
    pub max_nodes: usize,
    pub lp: LpOptions,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            int_tol: 1e-6,
            gap_tol: 1e-6,
            max_nodes: 200_000,
            lp: LpOptions::default(),
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FlowMode {
    /// Every path must carry its full flow.
    Fixed,
    /// Route as much flow as possible.
    Maximize,
}

pub(crate) struct Formulation {
    pub lp: LinearProgram,
    pub y_cols: Vec<usize>,
    pub x_cols: Vec<Vec<usize>>,
}

impl Formulation {
    /// LP over the instance with `y_i` bounded by `y_bounds[i]`.
    pub fn build(inst: &MilpInstance, y_bounds: &[(f64, f64)], mode: FlowMode, with_budget: bool) -> Self {
        let mut lp = LinearProgram::new();
        let y_cols: Vec<usize> = inst
            .sites
            .iter()
            .zip(y_bounds)
            .map(|(s, &(lo, hi))| {
                let cost = if mode == FlowMode::Fixed { s.cost } else { 0.0 };
                lp.add_var(cost, lo, hi)
            })
            .collect();
        let mut inflow_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.sites.len()];
        let mut x_cols = Vec::with_capacity(inst.paths.len());
        for path in &inst.paths {
            let net = &path.network;
            let cols: Vec<usize> = net.arcs.iter().map(|_| lp.add_var(0.0, 0.0, net.flow)).collect();
            // rows: origin, then one per stop; the destination row is implied
            let row_of = |n: NodeRef| match n {
                NodeRef::Origin => Some(0),
                NodeRef::Stop(i) => Some(i + 1),
                NodeRef::Destination => None,
            };
            let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.stops.len() + 1];
            for (arc, &col) in net.arcs.iter().zip(&cols) {
                if let Some(r) = row_of(arc.from) {
                    rows[r].push((col, 1.0));
                }
                if let Some(r) = row_of(arc.to) {
                    rows[r].push((col, -1.0));
                }
                if let Some(site) = path.site_of(arc.to) {
                    inflow_terms[site].push((col, 1.0));
                    // x <= flow * y tightens the relaxation; implied once y is fixed
                    // or when the aggregate capacity row is already as strong
                    let (lo, hi) = y_bounds[site];
                    if lo < hi && net.flow < inst.sites[site].capacity {
                        lp.add_row(&[(col, 1.0), (y_cols[site], -net.flow)], RowSense::Le, 0.0);
                    }
                }
            }
            let origin_rhs = match mode {
                FlowMode::Fixed => net.flow,
                FlowMode::Maximize => {
                    let routed = lp.add_var(-1.0, 0.0, net.flow);
                    rows[0].push((routed, -1.0));
                    0.0
                }
            };
            for (r, coefs) in rows.iter().enumerate() {
                lp.add_row(coefs, RowSense::Eq, if r == 0 { origin_rhs } else { 0.0 });
            }
            x_cols.push(cols);
        }
        for ((terms, site), &y) in inflow_terms.iter_mut().zip(&inst.sites).zip(&y_cols) {
            if !terms.is_empty() {
                terms.push((y, -site.capacity));
                lp.add_row(terms, RowSense::Le, 0.0);
            }
        }
        if with_budget && inst.budget < inst.sites.len() {
            let coefs: Vec<(usize, f64)> = y_cols.iter().map(|&c| (c, 1.0)).collect();
            lp.add_row(&coefs, RowSense::Le, inst.budget as f64);
        }
        Self { lp, y_cols, x_cols }
    }

    pub fn flows(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.x_cols
            .iter()
            .map(|cols| cols.iter().map(|&c| clean(values[c])).collect())
            .collect()
    }
}

/// Snaps round-off around zero so emitted flows stay tidy.
fn clean(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        0.0
    } else {
        v
    }
}

pub(crate) fn cost_of(inst: &MilpInstance, y: &[bool]) -> f64 {
    inst.sites.iter().zip(y).filter(|(_, &o)| o).map(|(s, _)| s.cost).sum()
}

/// Flow-feasibility LP with the open set fixed; returns the flows if feasible.
pub(crate) fn route_fixed(inst: &MilpInstance, y: &[bool], opts: &LpOptions) -> Result<(Option<Vec<Vec<f64>>>, usize)> {
    let bounds: Vec<(f64, f64)> = y.iter().map(|&o| if o { (1.0, 1.0) } else { (0.0, 0.0) }).collect();
    let f = Formulation::build(inst, &bounds, FlowMode::Fixed, false);
    let sol = solve_lp(&f.lp, opts)?;
    Ok(match sol.status {
        LpStatus::Optimal => (Some(f.flows(&sol.values)), sol.iterations),
        LpStatus::Infeasible => (None, sol.iterations),
        LpStatus::Unbounded => return Err(Error::Domain("flow feasibility LP reported unbounded".into())),
        LpStatus::IterLimit => return Err(Error::Domain("flow feasibility LP hit its iteration limit".into())),
    })
}

/// Routes every path through the given open sites; `None` if that is impossible.
pub fn route_with_open(inst: &MilpInstance, open: &[bool], opts: &LpOptions) -> Result<Option<Vec<Vec<f64>>>> {
    if open.len() != inst.sites.len() {
        return Err(Error::InvalidParameter("open flags do not match the site count".into()));
    }
    Ok(route_fixed(inst, open, opts)?.0)
}

/// Tells the two failure modes apart: with every site open and no budget,
/// a feasible routing means only the budget stands in the way.
pub(crate) fn classify_failure(inst: &MilpInstance, opts: &LpOptions) -> Result<SolveStatus> {
    if inst.budget >= inst.sites.len() {
        return Ok(SolveStatus::Infeasible);
    }
    let (flows, _) = route_fixed(inst, &vec![true; inst.sites.len()], opts)?;
    Ok(if flows.is_some() {
        SolveStatus::BudgetInfeasible
    } else {
        SolveStatus::Infeasible
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::path_network::*;

    pub fn four_stations(capacity: Option<f64>, budget: usize) -> MilpInstance {
        let nodes = [
            ("origin", 0.0),
            ("A", 10.0),
            ("B", 50.0),
            ("C", 80.0),
            ("D", 120.0),
            ("dest", 130.0),
        ]
        .iter()
        .map(|&(id, d)| PathNode {
            node_id: id.into(),
            x: d,
            y: 0.0,
            cum_dist_km: d,
        })
        .collect();
        let path = TravelPath::new("p1", nodes, 80.0).unwrap();
        let net = expand_path(&path, 100.0, OriginRule::HalfOrigin).unwrap();
        let sites = ["A", "B", "C", "D"]
            .iter()
            .map(|l| Site {
                label: l.to_string(),
                cell: None,
                cost: 1.0,
                capacity: capacity.unwrap_or(80.0),
            })
            .collect();
        let paths = vec![PathNetwork {
            network: net,
            stop_sites: vec![0, 1, 2, 3],
        }];
        MilpInstance::new(sites, paths, budget, capacity.is_none()).unwrap()
    }
}
