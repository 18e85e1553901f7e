use super::{cost_of, route_fixed, Solution, SolveOptions, SolveStats, SolveStatus};
use crate::path_network::{MilpInstance, NodeRef};
use crate::{Error, Result};

pub const BRUTE_FORCE_MAX_SITES: usize = 20;

/// Cheap necessary condition: every loaded path has an `o -> d` route
/// through open sites only.
fn reachable_with(inst: &MilpInstance, open: &[bool]) -> bool {
    inst.paths.iter().filter(|p| p.network.flow > 0.0).all(|p| {
        let net = &p.network;
        let mut reached = vec![false; net.stops.len()];
        for a in &net.arcs {
            let tail = match a.from {
                NodeRef::Origin => true,
                NodeRef::Stop(i) => reached[i],
                NodeRef::Destination => false,
            };
            let head_open = p.site_of(a.to).is_none_or(|s| open[s]);
            if tail && head_open {
                match a.to {
                    NodeRef::Stop(j) => reached[j] = true,
                    NodeRef::Destination => return true,
                    NodeRef::Origin => {}
                }
            }
        }
        false
    })
}

/// Exhaustive oracle: tries open sets in increasing cost order (then size,
/// then bitmask) and returns the first one that routes every path.
pub fn brute_force(inst: &MilpInstance, opts: &SolveOptions) -> Result<Solution> {
    let n = inst.sites.len();
    if n > BRUTE_FORCE_MAX_SITES {
        return Err(Error::InvalidParameter(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_SITES} sites, got {n}"
        )));
    }
    let mut stats = SolveStats::default();
    let all = vec![true; n];
    let (full, it) = if reachable_with(inst, &all) {
        route_fixed(inst, &all, &opts.lp)?
    } else {
        (None, 0)
    };
    stats.lp_iterations += it;
    if full.is_none() {
        return Ok(Solution::without_plan(inst, SolveStatus::Infeasible, stats));
    }

    let mut masks: Vec<(f64, u32, u32)> = (0..1u32 << n)
        .filter(|m| m.count_ones() as usize <= inst.budget)
        .map(|m| {
            let y: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
            (cost_of(inst, &y), m.count_ones(), m)
        })
        .collect();
    masks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (cost, _, mask) in masks {
        let y: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        if !reachable_with(inst, &y) {
            continue;
        }
        stats.nodes += 1;
        let (flows, it) = route_fixed(inst, &y, &opts.lp)?;
        stats.lp_iterations += it;
        if let Some(x) = flows {
            return Ok(Solution {
                status: SolveStatus::Optimal,
                y,
                x,
                objective: cost,
                bound_gap: 0.0,
                stats,
            });
        }
    }
    Ok(Solution::without_plan(inst, SolveStatus::BudgetInfeasible, stats))
}
