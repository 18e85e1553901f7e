//! EV driving paths, grid aggregation and per-path expanded networks.
//!
//! A path's first and last node are the trip endpoints; its interior nodes
//! are candidate charging sites. Each path becomes a small DAG: a pseudo
//! origin `o`, the interior stops in travel order, and a pseudo destination
//! `d`, with an arc wherever a vehicle can drive between two points on one
//! charge (half a charge at the trip ends).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PATH_NODES_HEADER: [&str; 6] = ["path_id", "seq", "node_id", "x", "y", "cum_dist_km"];
pub const PATH_META_HEADER: [&str; 2] = ["path_id", "flow_per_week"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    pub node_id: String,
    pub x: f64,
    pub y: f64,
    pub cum_dist_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelPath {
    pub id: String,
    pub nodes: Vec<PathNode>,
    /// Vehicles per week.
    pub flow: f64,
}

impl TravelPath {
    pub fn new(id: impl Into<String>, nodes: Vec<PathNode>, flow: f64) -> Result<Self> {
        let id = id.into();
        if nodes.len() < 2 {
            return Err(Error::Input(format!("path {id}: needs at least 2 nodes")));
        }
        if !(flow.is_finite() && flow >= 0.0) {
            return Err(Error::Input(format!("path {id}: flow must be >= 0, got {flow}")));
        }
        if nodes[0].cum_dist_km != 0.0 {
            return Err(Error::Input(format!("path {id}: cumulative distance must start at 0")));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1].cum_dist_km > w[0].cum_dist_km)) {
            return Err(Error::Input(format!(
                "path {id}: cumulative distance not strictly increasing at node {}",
                w[1].node_id
            )));
        }
        Ok(Self { id, nodes, flow })
    }

    pub fn length_km(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.cum_dist_km)
    }

    /// Interior nodes: the candidate sites along the path.
    pub fn interior(&self) -> &[PathNode] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostic {
    pub path_id: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedPaths {
    pub paths: Vec<TravelPath>,
    /// Paths rejected during loading.
    pub diagnostics: Vec<PathDiagnostic>,
}

fn check_header(rdr: &mut csv::Reader<impl std::io::Read>, expected: &[&str], source: &str) -> Result<()> {
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: source.into(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

struct RawRow {
    line: usize,
    seq: i64,
    node: std::result::Result<PathNode, String>,
}

/// Parses the `path_nodes.csv` / `path_meta.csv` pair.
///
/// Paths keep the order of their first row; nodes are ordered by `seq`.
/// Malformed paths are dropped with a diagnostic, a repeated
/// `(path_id, seq)` is a hard error.
pub fn load_paths(
    nodes: impl std::io::Read,
    meta: impl std::io::Read,
    nodes_source: &str,
    meta_source: &str,
) -> Result<LoadedPaths> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(meta);
    check_header(&mut rdr, &PATH_META_HEADER, meta_source)?;
    let mut flows: HashMap<String, std::result::Result<f64, (usize, String)>> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id = rec.get(0).unwrap_or("").to_string();
        let flow = rec
            .get(1)
            .unwrap_or("")
            .parse::<f64>()
            .map_err(|e| (line, format!("flow_per_week: {e}")));
        if flows.insert(id.clone(), flow).is_some() {
            return Err(Error::Parse {
                path: meta_source.into(),
                line,
                message: format!("duplicate path_id {id}"),
            });
        }
    }

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(nodes);
    check_header(&mut rdr, &PATH_NODES_HEADER, nodes_source)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<RawRow>> = HashMap::new();
    let mut seen: HashSet<(String, i64)> = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let path_id = get(0).to_string();
        let seq: i64 = get(1).parse().map_err(|e| Error::Parse {
            path: nodes_source.into(),
            line,
            message: format!("seq: {e}"),
        })?;
        if !seen.insert((path_id.clone(), seq)) {
            return Err(Error::Parse {
                path: nodes_source.into(),
                line,
                message: format!("duplicate (path_id, seq) = ({path_id}, {seq})"),
            });
        }
        let num = |k: usize| -> std::result::Result<f64, String> {
            get(k)
                .parse::<f64>()
                .map_err(|e| format!("{}: {e}", PATH_NODES_HEADER[k]))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(format!("{} is not finite", PATH_NODES_HEADER[k]))
                    }
                })
        };
        let node = (|| {
            Ok(PathNode {
                node_id: get(2).to_string(),
                x: num(3)?,
                y: num(4)?,
                cum_dist_km: num(5)?,
            })
        })();
        if !rows.contains_key(&path_id) {
            order.push(path_id.clone());
        }
        rows.entry(path_id).or_default().push(RawRow { line, seq, node });
    }

    let mut paths = Vec::new();
    let mut diagnostics = Vec::new();
    for id in order {
        let mut group = rows.remove(&id).unwrap_or_default();
        group.sort_by_key(|r| r.seq);
        let first_line = group.iter().map(|r| r.line).min().unwrap_or(0);
        let reject = |line: usize, message: String| PathDiagnostic {
            path_id: id.clone(),
            line,
            message,
        };
        if let Some(bad) = group.iter().find(|r| r.node.is_err()) {
            diagnostics.push(reject(bad.line, bad.node.clone().unwrap_err()));
            continue;
        }
        if let Some(w) = group
            .windows(2)
            .find(|w| !(w[1].node.as_ref().unwrap().cum_dist_km > w[0].node.as_ref().unwrap().cum_dist_km))
        {
            diagnostics.push(reject(w[1].line, "cum_dist_km is not strictly increasing".into()));
            continue;
        }
        if let Some(r) = group.first().filter(|r| r.node.as_ref().unwrap().cum_dist_km != 0.0) {
            diagnostics.push(reject(r.line, "cum_dist_km must start at 0".into()));
            continue;
        }
        let flow = match flows.get(&id) {
            None => {
                diagnostics.push(reject(first_line, format!("no flow_per_week entry in {meta_source}")));
                continue;
            }
            Some(Err((line, msg))) => {
                diagnostics.push(reject(*line, msg.clone()));
                continue;
            }
            Some(Ok(f)) => *f,
        };
        let nodes: Vec<PathNode> = group.into_iter().map(|r| r.node.unwrap()).collect();
        match TravelPath::new(id.clone(), nodes, flow) {
            Ok(path) => paths.push(path),
            Err(e) => diagnostics.push(reject(first_line, e.to_string())),
        }
    }
    for d in &diagnostics {
        warn!("rejected path {} (line {}): {}", d.path_id, d.line, d.message);
    }
    Ok(LoadedPaths { paths, diagnostics })
}

pub fn load_paths_from_files(nodes: &Path, meta: &Path) -> Result<LoadedPaths> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::io(p, e));
    load_paths(
        open(nodes)?,
        open(meta)?,
        &nodes.display().to_string(),
        &meta.display().to_string(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeMode {
    /// Keep paths strictly longer than the range.
    StrictGt,
    Geq,
}

/// Keeps the paths whose length exceeds the driving range.
pub fn filter_by_range(paths: &[TravelPath], range_km: f64, mode: RangeMode) -> Result<Vec<TravelPath>> {
    if !(range_km.is_finite() && range_km > 0.0) {
        return Err(Error::InvalidParameter(format!("range must be > 0, got {range_km}")));
    }
    Ok(paths
        .iter()
        .filter(|p| match mode {
            RangeMode::StrictGt => p.length_km() > range_km,
            RangeMode::Geq => p.length_km() >= range_km,
        })
        .cloned()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}c{}", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    pub bbox: BBox,
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32, bbox: BBox) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("grid needs at least one row and column".into()));
        }
        let finite = [bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(bbox.x_max > bbox.x_min) || !(bbox.y_max > bbox.y_min) {
            return Err(Error::InvalidParameter(format!("degenerate bounding box {bbox:?}")));
        }
        Ok(Self { rows, cols, bbox })
    }

    /// Grid over the bounding box of every node; a flat extent is padded by 0.5 each side.
    pub fn covering(paths: &[TravelPath], rows: u32, cols: u32) -> Result<Self> {
        let mut b = BBox {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for n in paths.iter().flat_map(|p| &p.nodes) {
            b.x_min = b.x_min.min(n.x);
            b.y_min = b.y_min.min(n.y);
            b.x_max = b.x_max.max(n.x);
            b.y_max = b.y_max.max(n.y);
        }
        if !b.x_min.is_finite() {
            return Err(Error::Input("no path nodes to cover".into()));
        }
        if b.x_max == b.x_min {
            b.x_min -= 0.5;
            b.x_max += 0.5;
        }
        if b.y_max == b.y_min {
            b.y_min -= 0.5;
            b.y_max += 0.5;
        }
        Self::new(rows, cols, b)
    }

    /// Cell containing `(x, y)` with `row = floor(v_y rows)`, `col = floor(v_x cols)`
    /// on normalized coordinates. The flag reports a point outside the box.
    pub fn cell_of(&self, x: f64, y: f64) -> (Cell, bool) {
        let b = &self.bbox;
        let vx = (x - b.x_min) / (b.x_max - b.x_min);
        let vy = (y - b.y_min) / (b.y_max - b.y_min);
        let outside = !(0.0..=1.0).contains(&vx) || !(0.0..=1.0).contains(&vy);
        let index = |v: f64, n: u32| ((v * n as f64).floor().max(0.0) as u64).min(n as u64 - 1) as u32;
        (
            Cell {
                row: index(vy, self.rows),
                col: index(vx, self.cols),
            },
            outside,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cell: Cell,
    /// Smallest node id aggregated into the cell.
    pub label: String,
    pub node_ids: Vec<String>,
    /// Summed flow of the distinct paths passing through the cell.
    pub potential_inflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSnap {
    pub grid: GridSpec,
    /// Sorted by cell.
    pub candidates: Vec<Candidate>,
    pub path_ids: Vec<String>,
    /// Candidate index of every interior node, per path.
    pub stop_candidates: Vec<Vec<usize>>,
    /// Nodes outside the bounding box that were clamped onto the border cells.
    pub clamped_nodes: usize,
}

impl GridSnap {
    pub fn node_cells(&self) -> BTreeMap<&str, Cell> {
        self.candidates
            .iter()
            .flat_map(|c| c.node_ids.iter().map(move |n| (n.as_str(), c.cell)))
            .collect()
    }
}

/// Aggregates the interior nodes of all paths into grid-cell candidates.
pub fn snap_to_grid(paths: &[TravelPath], grid: &GridSpec) -> Result<GridSnap> {
    let grid = GridSpec::new(grid.rows, grid.cols, grid.bbox)?;
    let mut clamped_nodes = 0;
    let mut per_path_cells: Vec<Vec<Cell>> = Vec::with_capacity(paths.len());
    let mut cells: BTreeMap<Cell, (Vec<String>, f64)> = BTreeMap::new();
    for path in paths {
        let mut path_cells = Vec::with_capacity(path.interior().len());
        let mut touched: HashSet<Cell> = HashSet::new();
        for node in path.interior() {
            let (cell, outside) = grid.cell_of(node.x, node.y);
            if outside {
                clamped_nodes += 1;
                warn!(
                    "node {} of path {} lies outside the grid; clamped to {cell}",
                    node.node_id, path.id
                );
            }
            let entry = cells.entry(cell).or_insert_with(|| (Vec::new(), 0.0));
            if !entry.0.contains(&node.node_id) {
                entry.0.push(node.node_id.clone());
            }
            if touched.insert(cell) {
                entry.1 += path.flow;
            }
            path_cells.push(cell);
        }
        per_path_cells.push(path_cells);
    }
    let mut index: HashMap<Cell, usize> = HashMap::new();
    let candidates: Vec<Candidate> = cells
        .into_iter()
        .enumerate()
        .map(|(i, (cell, (mut node_ids, potential_inflow)))| {
            index.insert(cell, i);
            node_ids.sort();
            Candidate {
                cell,
                label: node_ids[0].clone(),
                node_ids,
                potential_inflow,
            }
        })
        .collect();
    let stop_candidates = per_path_cells
        .into_iter()
        .map(|cs| cs.into_iter().map(|c| index[&c]).collect())
        .collect();
    Ok(GridSnap {
        grid,
        candidates,
        path_ids: paths.iter().map(|p| p.id.clone()).collect(),
        stop_candidates,
        clamped_nodes,
    })
}

/// Which point the half-range rule at each trip end is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OriginRule {
    /// Stations within `R/2` of the trip origin (and of the destination).
    HalfOrigin,
    /// Stations within `R/2` of the first (and of the last) candidate station.
    HalfFirstStation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    Origin,
    Stop(usize),
    Destination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetArc {
    pub from: NodeRef,
    pub to: NodeRef,
    /// Along-path distance.
    pub dist_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub node_id: String,
    pub cum_dist_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedNetwork {
    pub path_id: String,
    pub flow: f64,
    pub length_km: f64,
    pub range_km: f64,
    pub origin_rule: OriginRule,
    pub stops: Vec<Stop>,
    /// Ordered by tail (`o` first), then head (`d` last).
    pub arcs: Vec<NetArc>,
    /// No way to get from `o` to `d` through the arc set.
    pub infeasible_by_construction: bool,
}

impl ExpandedNetwork {
    pub fn label(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Origin => "o",
            NodeRef::Destination => "d",
            NodeRef::Stop(i) => &self.stops[i].node_id,
        }
    }

    pub fn arc_labels(&self) -> Vec<(String, String)> {
        self.arcs
            .iter()
            .map(|a| (self.label(a.from).to_string(), self.label(a.to).to_string()))
            .collect()
    }

    fn position(&self, node: NodeRef) -> f64 {
        match node {
            NodeRef::Origin => 0.0,
            NodeRef::Destination => self.length_km,
            NodeRef::Stop(i) => self.stops[i].cum_dist_km,
        }
    }

    /// Replays the distance rules on every arc; returns the offending arcs.
    pub fn rule_violations(&self) -> Vec<NetArc> {
        let half = self.range_km / 2.0;
        let first = self.stops.first().map(|s| s.cum_dist_km);
        let last = self.stops.last().map(|s| s.cum_dist_km);
        self.arcs
            .iter()
            .filter(|a| {
                let forward = a.from < a.to && a.from != NodeRef::Destination && a.to != NodeRef::Origin;
                let along = self.position(a.to) - self.position(a.from);
                let ok = match (a.from, a.to) {
                    (NodeRef::Origin, NodeRef::Destination) => false,
                    (NodeRef::Origin, to) => match self.origin_rule {
                        OriginRule::HalfOrigin => self.position(to) <= half,
                        OriginRule::HalfFirstStation => first.is_some_and(|f| self.position(to) - f <= half),
                    },
                    (from, NodeRef::Destination) => match self.origin_rule {
                        OriginRule::HalfOrigin => self.length_km - self.position(from) <= half,
                        OriginRule::HalfFirstStation => last.is_some_and(|l| l - self.position(from) <= half),
                    },
                    _ => along <= self.range_km,
                };
                !(forward && ok && a.dist_km == along)
            })
            .copied()
            .collect()
    }
}

/// Builds the expanded network of one path for driving range `range_km`.
pub fn expand_path(path: &TravelPath, range_km: f64, rule: OriginRule) -> Result<ExpandedNetwork> {
    if !(range_km.is_finite() && range_km > 0.0) {
        return Err(Error::InvalidParameter(format!("range must be > 0, got {range_km}")));
    }
    let stops: Vec<Stop> = path
        .interior()
        .iter()
        .map(|n| Stop {
            node_id: n.node_id.clone(),
            cum_dist_km: n.cum_dist_km,
        })
        .collect();
    let length = path.length_km();
    let half = range_km / 2.0;
    let first = stops.first().map(|s| s.cum_dist_km);
    let last = stops.last().map(|s| s.cum_dist_km);

    let mut arcs = Vec::new();
    for (i, s) in stops.iter().enumerate() {
        let reach = match rule {
            OriginRule::HalfOrigin => s.cum_dist_km,
            OriginRule::HalfFirstStation => s.cum_dist_km - first.unwrap_or(0.0),
        };
        if reach <= half {
            arcs.push(NetArc {
                from: NodeRef::Origin,
                to: NodeRef::Stop(i),
                dist_km: s.cum_dist_km,
            });
        }
    }
    for (i, si) in stops.iter().enumerate() {
        for (j, sj) in stops.iter().enumerate().skip(i + 1) {
            let d = sj.cum_dist_km - si.cum_dist_km;
            if d <= range_km {
                arcs.push(NetArc {
                    from: NodeRef::Stop(i),
                    to: NodeRef::Stop(j),
                    dist_km: d,
                });
            }
        }
        let to_end = match rule {
            OriginRule::HalfOrigin => length - si.cum_dist_km,
            OriginRule::HalfFirstStation => last.unwrap_or(length) - si.cum_dist_km,
        };
        if to_end <= half {
            arcs.push(NetArc {
                from: NodeRef::Stop(i),
                to: NodeRef::Destination,
                dist_km: length - si.cum_dist_km,
            });
        }
    }

    let mut network = ExpandedNetwork {
        path_id: path.id.clone(),
        flow: path.flow,
        length_km: length,
        range_km,
        origin_rule: rule,
        stops,
        arcs,
        infeasible_by_construction: false,
    };
    network.infeasible_by_construction = !reaches_destination(&network);
    Ok(network)
}

fn reaches_destination(net: &ExpandedNetwork) -> bool {
    // arcs are sorted by tail in travel order, so one forward sweep suffices
    let mut reached = vec![false; net.stops.len()];
    for a in &net.arcs {
        let tail_reached = match a.from {
            NodeRef::Origin => true,
            NodeRef::Stop(i) => reached[i],
            NodeRef::Destination => false,
        };
        if !tail_reached {
            continue;
        }
        match a.to {
            NodeRef::Stop(j) => reached[j] = true,
            NodeRef::Destination => return true,
            NodeRef::Origin => {}
        }
    }
    false
}

/// Expands every path; output order follows input order.
pub fn expand_paths(paths: &[TravelPath], range_km: f64, rule: OriginRule) -> Result<Vec<ExpandedNetwork>> {
    paths.par_iter().map(|p| expand_path(p, range_km, rule)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub label: String,
    pub cell: Option<Cell>,
    pub cost: f64,
    /// Vehicles per week.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNetwork {
    pub network: ExpandedNetwork,
    /// Site index of every stop.
    pub stop_sites: Vec<usize>,
}

impl PathNetwork {
    pub fn site_of(&self, node: NodeRef) -> Option<usize> {
        match node {
            NodeRef::Stop(i) => Some(self.stop_sites[i]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub sites: Vec<Site>,
    pub paths: Vec<PathNetwork>,
    /// Maximum number of open stations.
    pub budget: usize,
    pub uncapacitated: bool,
    /// Total charging demand, the sum of path flows.
    pub total_flow: f64,
}

impl MilpInstance {
    pub fn new(sites: Vec<Site>, paths: Vec<PathNetwork>, budget: usize, uncapacitated: bool) -> Result<Self> {
        for s in &sites {
            if !(s.cost.is_finite() && s.cost >= 0.0) {
                return Err(Error::InvalidParameter(format!("site {}: cost must be >= 0", s.label)));
            }
            if !(s.capacity.is_finite() && s.capacity >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "site {}: capacity must be >= 0",
                    s.label
                )));
            }
        }
        for p in &paths {
            let net = &p.network;
            if p.stop_sites.len() != net.stops.len() {
                return Err(Error::Input(format!("path {}: stop/site count mismatch", net.path_id)));
            }
            if p.stop_sites.iter().any(|&s| s >= sites.len()) {
                return Err(Error::Input(format!("path {}: unknown site index", net.path_id)));
            }
            let valid = |n: NodeRef| !matches!(n, NodeRef::Stop(i) if i >= net.stops.len());
            if net.arcs.iter().any(|a| !valid(a.from) || !valid(a.to)) {
                return Err(Error::Input(format!(
                    "path {}: arc references a missing stop",
                    net.path_id
                )));
            }
        }
        let total_flow = paths.iter().map(|p| p.network.flow).sum();
        Ok(Self {
            sites,
            paths,
            budget,
            uncapacitated,
            total_flow,
        })
    }

    pub fn arc_count(&self) -> usize {
        self.paths.iter().map(|p| p.network.arcs.len()).sum()
    }

    pub fn with_budget(&self, budget: usize) -> Self {
        Self { budget, ..self.clone() }
    }

    /// Same network with every capacity lifted to the total flow.
    pub fn uncapacitated_variant(&self) -> Self {
        let mut inst = self.clone();
        for s in &mut inst.sites {
            s.capacity = self.total_flow;
        }
        inst.uncapacitated = true;
        inst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostSpec {
    Uniform(f64),
    PerCandidate(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CapacitySpec {
    /// Capacity set to the total flow, which never binds.
    Uncapacitated,
    PerWeek(f64),
    PerHour {
        per_hour: f64,
        hours_per_week: f64,
    },
    PerCandidate(Vec<f64>),
}

/// Joins expanded networks and grid candidates into a solver instance.
pub fn assemble_instance(
    networks: Vec<ExpandedNetwork>,
    snap: &GridSnap,
    cost: &CostSpec,
    capacity: &CapacitySpec,
    budget: usize,
) -> Result<MilpInstance> {
    if networks.is_empty() {
        return Err(Error::Input("no path networks to assemble".into()));
    }
    let ids: Vec<&str> = networks.iter().map(|n| n.path_id.as_str()).collect();
    if ids != snap.path_ids.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Input("networks and grid snap cover different paths".into()));
    }
    let n = snap.candidates.len();
    let per_candidate = |v: &[f64], what: &str| -> Result<Vec<f64>> {
        if v.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{what}: expected {n} values, got {}",
                v.len()
            )));
        }
        Ok(v.to_vec())
    };
    let costs = match cost {
        CostSpec::Uniform(c) => vec![*c; n],
        CostSpec::PerCandidate(v) => per_candidate(v, "costs")?,
    };
    let total_flow: f64 = networks.iter().map(|n| n.flow).sum();
    let capacities = match capacity {
        CapacitySpec::Uncapacitated => vec![total_flow; n],
        CapacitySpec::PerWeek(c) => vec![*c; n],
        CapacitySpec::PerHour {
            per_hour,
            hours_per_week,
        } => vec![per_hour * hours_per_week; n],
        CapacitySpec::PerCandidate(v) => per_candidate(v, "capacities")?,
    };
    if costs.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidParameter("station cost must be >= 0".into()));
    }
    if capacities.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidParameter("station capacity must be >= 0".into()));
    }
    let sites = snap
        .candidates
        .iter()
        .zip(costs.into_iter().zip(capacities))
        .map(|(c, (cost, capacity))| Site {
            label: c.label.clone(),
            cell: Some(c.cell),
            cost,
            capacity,
        })
        .collect();
    let paths = networks
        .into_iter()
        .zip(&snap.stop_candidates)
        .map(|(network, stops)| PathNetwork {
            network,
            stop_sites: stops.clone(),
        })
        .collect();
    MilpInstance::new(sites, paths, budget, matches!(capacity, CapacitySpec::Uncapacitated))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FOUR_STATION_NODES: &str = "path_id,seq,node_id,x,y,cum_dist_km
p1,0,origin,0,0,0
p1,1,A,10,0,10
p1,2,B,50,0,50
p1,3,C,80,0,80
p1,4,D,120,0,120
p1,5,dest,130,0,130
";
    pub(crate) const FOUR_STATION_META: &str = "path_id,flow_per_week\np1,80\n";

    fn four_stations_path() -> TravelPath {
        load_paths(
            FOUR_STATION_NODES.as_bytes(),
            FOUR_STATION_META.as_bytes(),
            "nodes",
            "meta",
        )
        .unwrap()
        .paths
        .remove(0)
    }

    fn node(id: &str, x: f64, y: f64, d: f64) -> PathNode {
        PathNode {
            node_id: id.into(),
            x,
            y,
            cum_dist_km: d,
        }
    }

    const EXPECTED_ARCS: [(&str, &str); 9] = [
        ("o", "A"),
        ("o", "B"),
        ("A", "B"),
        ("A", "C"),
        ("B", "C"),
        ("B", "D"),
        ("C", "D"),
        ("C", "d"),
        ("D", "d"),
    ];

    #[test]
    fn four_stations_fixture_loads() {
        let path = four_stations_path();
        assert_eq!(path.length_km(), 130.0);
        assert_eq!(path.flow, 80.0);
        assert_eq!(path.interior().len(), 4);
    }

    #[test]
    fn two_node_path() {
        let nodes = "path_id,seq,node_id,x,y,cum_dist_km\nk,0,a,0,0,0\nk,1,b,3,4,5\n";
        let loaded = load_paths(nodes.as_bytes(), "path_id,flow_per_week\nk,2\n".as_bytes(), "n", "m").unwrap();
        assert_eq!(loaded.paths.len(), 1);
        assert_eq!(loaded.paths[0].length_km(), 5.0);
    }

    #[test]
    fn corrupt_path_is_rejected_with_line() {
        let nodes = "path_id,seq,node_id,x,y,cum_dist_km
a,0,n1,0,0,0
a,1,n2,1,0,10
b,0,n3,0,0,0
b,1,n4,1,0,20
b,2,n5,2,0,15
c,0,n6,0,0,0
c,1,n7,0,1,30
";
        let meta = "path_id,flow_per_week\na,1\nb,2\nc,3\n";
        let loaded = load_paths(nodes.as_bytes(), meta.as_bytes(), "n", "m").unwrap();
        assert_eq!(
            loaded.paths.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );
        assert_eq!(loaded.diagnostics.len(), 1);
        assert_eq!(loaded.diagnostics[0].path_id, "b");
        assert_eq!(loaded.diagnostics[0].line, 6);
    }

    #[test]
    fn duplicate_seq_is_an_error() {
        let nodes = "path_id,seq,node_id,x,y,cum_dist_km\na,0,n1,0,0,0\na,0,n2,1,0,10\n";
        let err = load_paths(nodes.as_bytes(), "path_id,flow_per_week\na,1\n".as_bytes(), "n", "m");
        assert!(matches!(err, Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn rows_are_grouped_and_sorted_by_seq() {
        let nodes = "path_id,seq,node_id,x,y,cum_dist_km
q,1,q1,1,0,10
p,0,p0,0,0,0
q,0,q0,0,0,0
p,1,p1,1,0,7
";
        let meta = "path_id,flow_per_week\np,1\nq,1\n";
        let loaded = load_paths(nodes.as_bytes(), meta.as_bytes(), "n", "m").unwrap();
        assert_eq!(loaded.paths[0].id, "q");
        assert_eq!(loaded.paths[0].nodes[0].node_id, "q0");
        assert_eq!(loaded.paths[1].id, "p");
    }

    #[test]
    fn bad_header_is_an_error() {
        let err = load_paths("a,b\n".as_bytes(), FOUR_STATION_META.as_bytes(), "n", "m");
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
    }

    fn straight(id: &str, len: f64) -> TravelPath {
        TravelPath::new(id, vec![node("s", 0.0, 0.0, 0.0), node("t", len, 0.0, len)], 1.0).unwrap()
    }

    #[test]
    fn range_filter_modes() {
        let paths = vec![straight("a", 100.0), straight("b", 150.0), straight("c", 160.0)];
        let ids = |v: Vec<TravelPath>| v.into_iter().map(|p| p.id).collect::<Vec<_>>();
        assert_eq!(ids(filter_by_range(&paths, 150.0, RangeMode::StrictGt).unwrap()), ["c"]);
        assert!(filter_by_range(&paths, 250.0, RangeMode::StrictGt).unwrap().is_empty());
        assert_eq!(ids(filter_by_range(&paths, 150.0, RangeMode::Geq).unwrap()), ["b", "c"]);
        let once = filter_by_range(&paths, 120.0, RangeMode::StrictGt).unwrap();
        assert_eq!(filter_by_range(&once, 120.0, RangeMode::StrictGt).unwrap(), once);
        assert!(filter_by_range(&paths, 0.0, RangeMode::Geq).is_err());
    }

    #[test]
    fn grid_cell_arithmetic() {
        let unit = BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
        };
        let grid = GridSpec::new(10, 10, unit).unwrap();
        assert_eq!(grid.cell_of(0.55, 0.35), (Cell { row: 3, col: 5 }, false));
        assert_eq!(grid.cell_of(1.0, 1.0), (Cell { row: 9, col: 9 }, false));
        assert_eq!(grid.cell_of(1.5, -0.2), (Cell { row: 0, col: 9 }, true));
        let flat = BBox { y_max: 0.0, ..unit };
        assert!(GridSpec::new(10, 10, flat).is_err());
        assert!(GridSpec::new(0, 10, unit).is_err());
    }

    #[test]
    fn crossing_paths_share_a_candidate() {
        let a = TravelPath::new(
            "a",
            vec![
                node("a0", 0.0, 0.5, 0.0),
                node("x", 0.52, 0.52, 1.0),
                node("a1", 1.0, 0.5, 2.0),
            ],
            3.0,
        )
        .unwrap();
        let b = TravelPath::new(
            "b",
            vec![
                node("b0", 0.5, 0.0, 0.0),
                node("y", 0.55, 0.58, 1.0),
                node("b1", 0.5, 1.0, 2.0),
            ],
            4.0,
        )
        .unwrap();
        let grid = GridSpec::new(
            10,
            10,
            BBox {
                x_min: 0.0,
                y_min: 0.0,
                x_max: 1.0,
                y_max: 1.0,
            },
        )
        .unwrap();
        let snap = snap_to_grid(&[a, b], &grid).unwrap();
        assert_eq!(snap.candidates.len(), 1);
        assert_eq!(snap.candidates[0].potential_inflow, 7.0);
        assert_eq!(snap.candidates[0].label, "x");
        assert_eq!(snap.stop_candidates, vec![vec![0], vec![0]]);
    }

    #[test]
    fn four_stations_arc_set_under_both_rules() {
        let path = four_stations_path();
        for rule in [OriginRule::HalfOrigin, OriginRule::HalfFirstStation] {
            let net = expand_path(&path, 100.0, rule).unwrap();
            let labels = net.arc_labels();
            let expected: Vec<(String, String)> = EXPECTED_ARCS
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            assert_eq!(labels, expected, "{rule:?}");
            assert!(!net.infeasible_by_construction);
            assert!(net.rule_violations().is_empty());
        }
    }

    #[test]
    fn no_direct_origin_destination_arc() {
        let path = four_stations_path();
        let net = expand_path(&path, 1000.0, OriginRule::HalfOrigin).unwrap();
        assert!(!net
            .arcs
            .iter()
            .any(|a| a.from == NodeRef::Origin && a.to == NodeRef::Destination));
        let bare = straight("s", 300.0);
        let net = expand_path(&bare, 1000.0, OriginRule::HalfOrigin).unwrap();
        assert!(net.arcs.is_empty());
        assert!(net.infeasible_by_construction);
    }

    #[test]
    fn gap_beyond_range_is_infeasible_by_construction() {
        let path = four_stations_path();
        let net = expand_path(&path, 30.0, OriginRule::HalfOrigin).unwrap();
        assert!(net.infeasible_by_construction);
    }

    #[test]
    fn shrinking_range_shrinks_arc_set() {
        let path = four_stations_path();
        let mut prev: Option<HashSet<(String, String)>> = None;
        for r in (0..=40).rev().map(|k| 5.0 + 5.0 * k as f64) {
            let arcs: HashSet<_> = expand_path(&path, r, OriginRule::HalfOrigin)
                .unwrap()
                .arc_labels()
                .into_iter()
                .collect();
            if let Some(bigger) = &prev {
                assert!(arcs.is_subset(bigger), "range {r}");
            }
            prev = Some(arcs);
        }
    }

    fn four_stations_instance(capacity: CapacitySpec) -> MilpInstance {
        let path = four_stations_path();
        let grid = GridSpec::covering(std::slice::from_ref(&path), 1, 26).unwrap();
        let snap = snap_to_grid(std::slice::from_ref(&path), &grid).unwrap();
        let nets = expand_paths(std::slice::from_ref(&path), 100.0, OriginRule::HalfOrigin).unwrap();
        assemble_instance(nets, &snap, &CostSpec::Uniform(1.0), &capacity, 4).unwrap()
    }

    #[test]
    fn four_stations_instance_shape() {
        let inst = four_stations_instance(CapacitySpec::PerWeek(60.0));
        assert_eq!(inst.sites.len(), 4);
        assert_eq!(inst.arc_count(), 9);
        assert_eq!(inst.paths.len(), 1);
        assert_eq!(
            inst.sites.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
            ["A", "B", "C", "D"]
        );
        assert!(inst.sites.iter().all(|s| s.capacity == 60.0));
        assert_eq!(inst.total_flow, 80.0);

        let uncap = four_stations_instance(CapacitySpec::Uncapacitated);
        assert!(uncap.uncapacitated);
        assert!(uncap.sites.iter().all(|s| s.capacity == 80.0));

        let hourly = four_stations_instance(CapacitySpec::PerHour {
            per_hour: 5.0,
            hours_per_week: 168.0,
        });
        assert!(hourly.sites.iter().all(|s| s.capacity == 840.0));
    }

    #[test]
    fn assembly_is_idempotent_and_validates() {
        assert_eq!(
            four_stations_instance(CapacitySpec::PerWeek(60.0)),
            four_stations_instance(CapacitySpec::PerWeek(60.0))
        );
        let path = four_stations_path();
        let grid = GridSpec::covering(std::slice::from_ref(&path), 1, 26).unwrap();
        let snap = snap_to_grid(std::slice::from_ref(&path), &grid).unwrap();
        let nets = expand_paths(std::slice::from_ref(&path), 100.0, OriginRule::HalfOrigin).unwrap();
        assert!(assemble_instance(
            nets.clone(),
            &snap,
            &CostSpec::Uniform(-1.0),
            &CapacitySpec::PerWeek(1.0),
            1
        )
        .is_err());
        assert!(assemble_instance(
            nets.clone(),
            &snap,
            &CostSpec::Uniform(1.0),
            &CapacitySpec::PerWeek(-1.0),
            1
        )
        .is_err());
        assert!(assemble_instance(vec![], &snap, &CostSpec::Uniform(1.0), &CapacitySpec::PerWeek(1.0), 1).is_err());
    }

    #[test]
    fn snapping_preserves_paths() {
        let path = four_stations_path();
        let before = path.clone();
        let grid = GridSpec::covering(std::slice::from_ref(&path), 3, 3).unwrap();
        let _ = snap_to_grid(std::slice::from_ref(&path), &grid).unwrap();
        assert_eq!(path, before);
    }
}
