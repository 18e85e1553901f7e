use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::debug;

use super::{
    classify_failure, cost_of, solve_lp, FlowMode, Formulation, LpStatus, Solution, SolveOptions, SolveStats,
    SolveStatus,
};
use crate::path_network::MilpInstance;
use crate::{Error, Result};

struct Node {
    bound: f64,
    seq: usize,
    y_bounds: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // reversed: BinaryHeap pops the lowest bound, then the oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

enum Relaxation {
    Solved { bound: f64, values: Vec<f64> },
    Infeasible,
}

struct Search<'a> {
    inst: &'a MilpInstance,
    opts: &'a SolveOptions,
    integral_costs: bool,
    lp_iterations: usize,
}

impl Search<'_> {
    fn relax(&self, y_bounds: &[(f64, f64)]) -> Result<(Relaxation, usize)> {
        let f = Formulation::build(self.inst, y_bounds, FlowMode::Fixed, true);
        let sol = solve_lp(&f.lp, &self.opts.lp)?;
        let r = match sol.status {
            LpStatus::Optimal => Relaxation::Solved {
                bound: sol.objective,
                values: sol.values,
            },
            LpStatus::Infeasible => Relaxation::Infeasible,
            LpStatus::Unbounded => {
                debug_assert!(false, "relaxation with bounded flows cannot be unbounded");
                return Err(Error::Domain("LP relaxation reported unbounded".into()));
            }
            LpStatus::IterLimit => return Err(Error::Domain("LP relaxation hit its iteration limit".into())),
        };
        Ok((r, sol.iterations))
    }

    fn can_improve(&self, bound: f64, incumbent: f64) -> bool {
        if self.integral_costs {
            (bound - 1e-6).ceil() < incumbent
        } else {
            bound < incumbent - self.opts.gap_tol
        }
    }

    /// Most fractional `y`, lowest index on ties.
    fn branch_site(&self, y_cols: &[usize], values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in y_cols.iter().enumerate() {
            let v = values[c];
            let frac = v.min(1.0 - v);
            if frac > self.opts.int_tol && best.is_none_or(|(_, b)| frac > b) {
                best = Some((i, frac));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Best-bound branch and bound over the site binaries.
///
/// Children of a node are solved concurrently; since each relaxation is a
/// pure function of its bounds and children enter the queue in a fixed
/// order, the search is identical for any thread count.
pub fn solve_bb(inst: &MilpInstance, opts: &SolveOptions) -> Result<Solution> {
    let n = inst.sites.len();
    let search = Search {
        inst,
        opts,
        integral_costs: inst.sites.iter().all(|s| s.cost.fract() == 0.0),
        lp_iterations: 0,
    };
    let y_cols = Formulation::build(inst, &vec![(0.0, 1.0); n], FlowMode::Fixed, true).y_cols;
    let mut stats = SolveStats::default();
    let mut search = search;

    let root_bounds = vec![(0.0, 1.0); n];
    let (root, it) = search.relax(&root_bounds)?;
    search.lp_iterations += it;
    let Relaxation::Solved { bound, values } = root else {
        stats.lp_iterations = search.lp_iterations;
        let status = classify_failure(inst, &opts.lp)?;
        return Ok(Solution::without_plan(inst, status, stats));
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let offer = |values: Vec<f64>, incumbent: &mut Option<(f64, Vec<f64>)>, search: &Search| {
        let y: Vec<bool> = y_cols.iter().map(|&c| values[c] > 0.5).collect();
        let cost = cost_of(search.inst, &y);
        if incumbent.as_ref().is_none_or(|(best, _)| cost < *best) {
            *incumbent = Some((cost, values));
        }
    };
    let is_integral = |values: &[f64], s: &Search| s.branch_site(&y_cols, values).is_none();

    if is_integral(&values, &search) {
        offer(values, &mut incumbent, &search);
    } else {
        heap.push(Node {
            bound,
            seq,
            y_bounds: root_bounds,
            values,
        });
        seq += 1;
    }

    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map_or(f64::INFINITY, |(c, _)| *c);
        if !search.can_improve(node.bound, best) {
            continue;
        }
        if stats.nodes >= opts.max_nodes {
            heap.push(node);
            hit_limit = true;
            break;
        }
        stats.nodes += 1;
        let site = search
            .branch_site(&y_cols, &node.values)
            .expect("queued nodes are fractional");
        let mut down = node.y_bounds.clone();
        down[site] = (0.0, 0.0);
        let mut up = node.y_bounds;
        up[site] = (1.0, 1.0);
        let (rd, ru) = rayon::join(|| search.relax(&down), || search.relax(&up));
        let ((rd, itd), (ru, itu)) = (rd?, ru?);
        search.lp_iterations += itd + itu;
        for (child_bounds, relaxed) in [(down, rd), (up, ru)] {
            let Relaxation::Solved { bound, values } = relaxed else {
                continue;
            };
            let best = incumbent.as_ref().map_or(f64::INFINITY, |(c, _)| *c);
            if !search.can_improve(bound, best) {
                continue;
            }
            if is_integral(&values, &search) {
                offer(values, &mut incumbent, &search);
            } else {
                heap.push(Node {
                    bound,
                    seq,
                    y_bounds: child_bounds,
                    values,
                });
                seq += 1;
            }
        }
        if opts.verbose {
            let line = format!(
                "node {} bound {} incumbent {} open {}",
                stats.nodes,
                node.bound,
                incumbent.as_ref().map_or(f64::INFINITY, |(c, _)| *c),
                heap.len()
            );
            debug!("{line}");
            stats.log.push(line);
        }
    }
    stats.lp_iterations = search.lp_iterations;

    let Some((objective, values)) = incumbent else {
        if hit_limit {
            return Ok(Solution::without_plan(inst, SolveStatus::IterLimit, stats));
        }
        let status = classify_failure(inst, &opts.lp)?;
        return Ok(Solution::without_plan(inst, status, stats));
    };
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let bound_gap = if hit_limit {
        (objective - open_bound).max(0.0)
    } else {
        0.0
    };
    let f = Formulation::build(inst, &vec![(0.0, 1.0); n], FlowMode::Fixed, true);
    let y: Vec<bool> = y_cols.iter().map(|&c| values[c] > 0.5).collect();
    let status = if !hit_limit || bound_gap <= opts.gap_tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterLimit
    };
    if opts.verbose {
        stats.log.push(format!(
            "done nodes {} objective {objective} gap {bound_gap}",
            stats.nodes
        ));
    }
    Ok(Solution {
        status,
        y,
        x: f.flows(&values),
        objective,
        bound_gap,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::four_stations;
    use super::*;

    #[test]
    fn four_stations_capacitated_objective_four() {
        let inst = four_stations(Some(60.0), 4);
        let sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 4.0);
        assert_eq!(sol.y, vec![true; 4]);
        let inflows = sol.site_inflows(&inst);
        assert!(inflows.iter().all(|&v| v <= 60.0 + 1e-6), "{inflows:?}");
        assert_eq!(sol.bound_gap, 0.0);
    }

    #[test]
    fn four_stations_uncapacitated_objective_two() {
        let inst = four_stations(None, 4);
        let sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 2.0);
    }

    #[test]
    fn four_stations_single_station_budget() {
        let sol = solve_bb(&four_stations(None, 1), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::BudgetInfeasible);
        let sol = solve_bb(&four_stations(Some(60.0), 3), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::BudgetInfeasible);
    }

    #[test]
    fn too_little_capacity_is_infeasible() {
        let sol = solve_bb(&four_stations(Some(30.0), 4), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        let sol = solve_bb(&four_stations(Some(30.0), 2), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn verbose_log_records_nodes() {
        let opts = SolveOptions {
            verbose: true,
            ..SolveOptions::default()
        };
        let sol = solve_bb(&four_stations(Some(60.0), 4), &opts).unwrap();
        assert!(sol.stats.log.last().unwrap().starts_with("done"));
    }
}
