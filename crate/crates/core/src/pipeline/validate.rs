use std::fmt;

use serde::{Deserialize, Serialize};

use crate::milp::Solution;
use crate::path_network::{MilpInstance, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintFamily {
    Dimensions,
    MassBalance,
    Capacity,
    Budget,
    Nonnegativity,
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub location: String,
    /// Amount by which the constraint is missed.
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: residual {}", self.family, self.location, self.residual)
    }
}

/// Replays every model constraint against a solution from scratch.
///
/// Mass balance is checked at every node including the destination, with
/// tolerance `1e-6 * max(flow, 1)`; inflow may exceed `Cap_i * y_i` by at
/// most `1e-6`; flows may dip to `-1e-9`.
pub fn validate_plan(inst: &MilpInstance, sol: &Solution) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |family, location: String, residual: f64| {
        out.push(Violation {
            family,
            location,
            residual,
        })
    };
    if sol.y.len() != inst.sites.len()
        || sol.x.len() != inst.paths.len()
        || sol
            .x
            .iter()
            .zip(&inst.paths)
            .any(|(x, p)| x.len() != p.network.arcs.len())
    {
        push(ConstraintFamily::Dimensions, "solution".into(), f64::INFINITY);
        return out;
    }

    let mut inflow = vec![0.0; inst.sites.len()];
    for (p, xs) in inst.paths.iter().zip(&sol.x) {
        let net = &p.network;
        // net outflow per node: index 0 = o, 1..=stops, last = d
        let mut balance = vec![0.0; net.stops.len() + 2];
        let slot = |n: NodeRef| match n {
            NodeRef::Origin => 0,
            NodeRef::Stop(i) => i + 1,
            NodeRef::Destination => net.stops.len() + 1,
        };
        for (a, (arc, &v)) in net.arcs.iter().zip(xs).enumerate() {
            if v < -1e-9 || v.is_nan() {
                push(
                    ConstraintFamily::Nonnegativity,
                    format!(
                        "path {} arc {a} ({} -> {})",
                        net.path_id,
                        net.label(arc.from),
                        net.label(arc.to)
                    ),
                    -v,
                );
            }
            balance[slot(arc.from)] += v;
            balance[slot(arc.to)] -= v;
            if let NodeRef::Stop(i) = arc.to {
                inflow[p.stop_sites[i]] += v;
            }
        }
        let tol = 1e-6 * net.flow.max(1.0);
        let last = balance.len() - 1;
        for (k, b) in balance.iter().enumerate() {
            let expected = if k == 0 {
                net.flow
            } else if k == last {
                -net.flow
            } else {
                0.0
            };
            if (b - expected).abs() > tol {
                let node = match k {
                    0 => "o".to_string(),
                    k if k == last => "d".to_string(),
                    k => net.stops[k - 1].node_id.clone(),
                };
                push(
                    ConstraintFamily::MassBalance,
                    format!("path {} node {node}", net.path_id),
                    (b - expected).abs(),
                );
            }
        }
    }
    for (i, (site, &v)) in inst.sites.iter().zip(&inflow).enumerate() {
        let cap = if sol.y[i] { site.capacity } else { 0.0 };
        if v > cap + 1e-6 {
            push(ConstraintFamily::Capacity, format!("site {}", site.label), v - cap);
        }
    }
    let opened = sol.y.iter().filter(|&&o| o).count();
    if opened > inst.budget {
        push(ConstraintFamily::Budget, "budget".into(), (opened - inst.budget) as f64);
    }
    let cost: f64 = inst
        .sites
        .iter()
        .zip(&sol.y)
        .filter(|(_, &o)| o)
        .map(|(s, _)| s.cost)
        .sum();
    if (cost - sol.objective).abs() > 1e-9 * cost.abs().max(1.0) {
        push(
            ConstraintFamily::Objective,
            "objective".into(),
            (cost - sol.objective).abs(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_bb, SolveOptions};
    use crate::path_network::*;

    fn four_stations() -> MilpInstance {
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
        let grid = GridSpec::covering(std::slice::from_ref(&path), 1, 26).unwrap();
        let snap = snap_to_grid(std::slice::from_ref(&path), &grid).unwrap();
        let nets = expand_paths(std::slice::from_ref(&path), 100.0, OriginRule::HalfOrigin).unwrap();
        assemble_instance(nets, &snap, &CostSpec::Uniform(1.0), &CapacitySpec::PerWeek(60.0), 4).unwrap()
    }

    #[test]
    fn optimal_plan_is_clean() {
        let inst = four_stations();
        let sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(validate_plan(&inst, &sol), vec![]);
    }

    #[test]
    fn closing_a_used_station_is_caught() {
        let inst = four_stations();
        let mut sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        sol.y[1] = false;
        sol.objective -= 1.0;
        let v = validate_plan(&inst, &sol);
        assert!(v.iter().any(|v| v.family == ConstraintFamily::Capacity), "{v:?}");
    }

    #[test]
    fn negative_flow_is_caught() {
        let inst = four_stations();
        let mut sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        sol.x[0][0] = -1.0;
        let v = validate_plan(&inst, &sol);
        assert!(v.iter().any(|v| v.family == ConstraintFamily::Nonnegativity));
        assert!(v.iter().any(|v| v.family == ConstraintFamily::MassBalance));
    }

    #[test]
    fn wrong_shape_and_budget() {
        let inst = four_stations();
        let mut sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        let tight = inst.with_budget(3);
        assert!(validate_plan(&tight, &sol)
            .iter()
            .any(|v| v.family == ConstraintFamily::Budget));
        sol.x.pop();
        assert_eq!(validate_plan(&inst, &sol)[0].family, ConstraintFamily::Dimensions);
    }
}
