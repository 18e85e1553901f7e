use log::debug;

use super::{
    cost_of, route_fixed, solve_lp, FlowMode, Formulation, LpStatus, Solution, SolveOptions, SolveStats, SolveStatus,
};
use crate::path_network::MilpInstance;
use crate::{Error, Result};

/// Largest total flow routable with the given open set.
fn routable(inst: &MilpInstance, open: &[bool], stats: &mut SolveStats, opts: &SolveOptions) -> Result<f64> {
    let bounds: Vec<(f64, f64)> = open.iter().map(|&o| if o { (1.0, 1.0) } else { (0.0, 0.0) }).collect();
    let f = Formulation::build(inst, &bounds, FlowMode::Maximize, false);
    let sol = solve_lp(&f.lp, &opts.lp)?;
    stats.lp_iterations += sol.iterations;
    match sol.status {
        LpStatus::Optimal => Ok(-sol.objective),
        other => Err(Error::Domain(format!("max-flow LP ended with {other:?}"))),
    }
}

/// Closed site the LP relaxation leans on most, given the sites already open.
fn relaxation_pick(
    inst: &MilpInstance,
    open: &[bool],
    stats: &mut SolveStats,
    opts: &SolveOptions,
) -> Result<Option<usize>> {
    let bounds: Vec<(f64, f64)> = open.iter().map(|&o| if o { (1.0, 1.0) } else { (0.0, 1.0) }).collect();
    let f = Formulation::build(inst, &bounds, FlowMode::Fixed, true);
    let sol = solve_lp(&f.lp, &opts.lp)?;
    stats.lp_iterations += sol.iterations;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut pick: Option<(usize, f64)> = None;
    for (i, &col) in f.y_cols.iter().enumerate() {
        let v = sol.values[col];
        if !open[i] && v > opts.int_tol && pick.is_none_or(|(_, b)| v > b) {
            pick = Some((i, v));
        }
    }
    Ok(pick.map(|(i, _)| i))
}

fn score(gain: f64, cost: f64) -> f64 {
    if cost > 0.0 {
        gain / cost
    } else {
        f64::INFINITY
    }
}

/// Greedy-adding heuristic.
///
/// Each round opens the site with the best newly-routable flow per unit
/// cost (lowest index on ties). Single openings often route nothing on
/// their own, since a trip needs a station near each end, so when no single
/// site helps the best pair is tried, and failing that the closed site with
/// the largest value in the LP relaxation. A failure is classified like the
/// exact solvers do, so `BudgetInfeasible` here means only that greedy found
/// no plan within the budget.
pub fn greedy_add(inst: &MilpInstance, opts: &SolveOptions) -> Result<Solution> {
    let n = inst.sites.len();
    let mut stats = SolveStats::default();
    let mut open = vec![false; n];
    let target = inst.total_flow;
    let tol = 1e-7 * target.max(1.0);
    let mut current = routable(inst, &open, &mut stats, opts)?;

    while current < target - tol {
        let used = open.iter().filter(|&&o| o).count();
        if used >= inst.budget {
            let status = super::classify_failure(inst, &opts.lp)?;
            return Ok(Solution::without_plan(inst, status, stats));
        }
        stats.nodes += 1;
        let closed: Vec<usize> = (0..n).filter(|&i| !open[i]).collect();
        let mut best: Option<(Vec<usize>, f64, f64)> = None;
        for &i in &closed {
            open[i] = true;
            let flow = routable(inst, &open, &mut stats, opts)?;
            open[i] = false;
            let s = score(flow - current, inst.sites[i].cost);
            if flow - current > tol && best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((vec![i], s, flow));
            }
        }
        if best.is_none() && used + 2 <= inst.budget {
            for (k, &i) in closed.iter().enumerate() {
                for &j in &closed[k + 1..] {
                    open[i] = true;
                    open[j] = true;
                    let flow = routable(inst, &open, &mut stats, opts)?;
                    open[i] = false;
                    open[j] = false;
                    let s = score(flow - current, inst.sites[i].cost + inst.sites[j].cost);
                    if flow - current > tol && best.as_ref().is_none_or(|b| s > b.1) {
                        best = Some((vec![i, j], s, flow));
                    }
                }
            }
        }
        if best.is_none() {
            if let Some(i) = relaxation_pick(inst, &open, &mut stats, opts)? {
                open[i] = true;
                let flow = routable(inst, &open, &mut stats, opts)?;
                open[i] = false;
                best = Some((vec![i], 0.0, flow));
            }
        }
        let Some((chosen, _, flow)) = best else {
            debug!("greedy saturated at {current} of {target}");
            let status = super::classify_failure(inst, &opts.lp)?;
            return Ok(Solution::without_plan(inst, status, stats));
        };
        for i in chosen {
            open[i] = true;
            if opts.verbose {
                stats.log.push(format!("open {} routable {flow}", inst.sites[i].label));
            }
        }
        current = flow;
    }

    let (flows, it) = route_fixed(inst, &open, &opts.lp)?;
    stats.lp_iterations += it;
    let x = flows.ok_or_else(|| Error::Domain("greedy open set failed the final routing".into()))?;
    Ok(Solution {
        status: SolveStatus::Feasible,
        objective: cost_of(inst, &open),
        y: open,
        x,
        bound_gap: f64::INFINITY,
        stats,
    })
}
