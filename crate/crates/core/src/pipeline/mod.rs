//! End-to-end planning run: diffusion curves, station budget, path
//! networks, station siting, plan validation and delay evaluation.

pub mod config;
mod evaluate;
mod validate;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

pub use config::{BudgetRule, CapacityUnit, RunConfig, SolverChoice, CONFIG_KEYS};
pub use evaluate::{evaluate_delay, feedback_metrics, DelayEvaluation, DelayParams, Feedback};
pub use validate::{validate_plan, ConstraintFamily, Violation};

use crate::calibration::{
    derive_timeline, fit_bass, fit_inconvenience, FitOptions, ObservationKind, ObservationSeries, OriginMode,
};
use crate::diffusion::BassParams;
use crate::fluid_queue::NetFlowPoly;
use crate::milp::{brute_force, greedy_add, route_with_open, solve_bb, Solution, SolveStatus};
use crate::path_network::{
    assemble_instance, expand_paths, filter_by_range, load_paths_from_files, snap_to_grid, CapacitySpec, CostSpec,
    GridSpec, MilpInstance,
};
use crate::supply::{CurveSample, SupplyModel, SweepParam, SweepSeries, TimeGrid, UtilizationScenario};
use crate::{Error, Result};

/// Env var capping worker threads.
pub const THREADS_ENV: &str = "EVPLAN_THREADS";

/// Thread cap from `EVPLAN_THREADS`, if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub const CURVES_HEADER: [&str; 6] = ["t", "lambda", "mu", "A", "D", "Q"];
pub const STATIONS_HEADER: [&str; 7] = [
    "candidate_id",
    "cell_row",
    "cell_col",
    "open",
    "inflow_per_week",
    "dc_ratio",
    "delay",
];
pub const FLOWS_HEADER: [&str; 4] = ["path_id", "from", "to", "volume"];

const DELAY_FUNCTION_NOTE: &str =
    "power-law stand-in w = service_time_scale * alpha * (D/C)^beta; configurable, not a calibrated queueing model";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationReport {
    pub candidate_id: String,
    pub cell_row: Option<u32>,
    pub cell_col: Option<u32>,
    pub open: bool,
    pub inflow_per_week: f64,
    pub dc_ratio: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bass: BassParams,
    pub demand_fit: Option<FitSummary>,
    pub supply_fit: Option<FitSummary>,
    /// Curvature in the units of `bass.m`.
    pub rho: f64,
    pub t0_year: f64,
    pub t2_year: f64,
    /// Derived end of the congestion episode.
    pub t3_year: f64,
    pub peak_year: Option<f64>,
    pub inflection_years: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub paths_loaded: usize,
    pub paths_rejected: usize,
    pub paths_in_range: usize,
    pub candidates: usize,
    pub arcs: usize,
    pub clamped_nodes: usize,
    /// Paths with no `o -> d` route at this range.
    pub disconnected_paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: SolverChoice,
    pub status: SolveStatus,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub bound_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    /// Construction cost of the open stations.
    pub objective: f64,
    pub delay_cost: f64,
    pub augmented_objective: f64,
    pub delay_function: String,
    pub stations: Vec<StationReport>,
    pub ev_count: Option<f64>,
    pub ev_cs_ratio: Option<f64>,
    pub max_dc: f64,
    pub suggestion: Option<String>,
    pub budget_used: usize,
    pub budget_cap: usize,
    pub scenario: Option<UtilizationScenario>,
    pub calibration: Option<CalibrationReport>,
    pub instance: Option<InstanceSummary>,
    pub solver: Option<SolverSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub path_id: String,
    pub from: String,
    pub to: String,
    pub volume: f64,
}

/// Everything a run produces, ready to be written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub curves: Vec<CurveSample>,
    pub sweeps: Vec<SweepSeries>,
    pub report: Option<PlanReport>,
    pub flows: Vec<FlowRow>,
    pub solver_log: Vec<String>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Demand/supply model from observation files or configured constants.
pub fn build_supply_model(cfg: &RunConfig) -> Result<Option<(SupplyModel, CalibrationReport)>> {
    stage("calibrate", supply_model_inner(cfg))
}

fn supply_model_inner(cfg: &RunConfig) -> Result<Option<(SupplyModel, CalibrationReport)>> {
    let (bass, demand_fit) = match &cfg.demand_csv {
        Some(path) => {
            let series = ObservationSeries::from_csv(path, ObservationKind::Demand)?;
            let opts = FitOptions {
                origin: cfg.t_origin.map_or(OriginMode::Fit, OriginMode::Fixed),
                ..FitOptions::default()
            };
            let fit = fit_bass(&series, &opts)?;
            if !fit.converged {
                return Err(Error::NonConvergence(format!(
                    "demand fit stopped after {} iterations (sse {})",
                    fit.iterations, fit.sse
                )));
            }
            let summary = FitSummary {
                sse: fit.sse,
                iterations: fit.iterations,
                converged: fit.converged,
            };
            (fit.params, Some(summary))
        }
        None => match (cfg.bass_p, cfg.bass_q, cfg.bass_m, cfg.t_origin) {
            (Some(p), Some(q), Some(m), Some(origin)) => (BassParams::new(p, q, m, origin)?, None),
            (None, None, None, _) => return Ok(None),
            _ => {
                return Err(Error::InvalidParameter(
                    "bass_p, bass_q, bass_m and t_origin must be given together".into(),
                ))
            }
        },
    };

    let (poly, supply_fit) = match (&cfg.supply_csv, cfg.rho, cfg.t2) {
        (Some(path), _, _) => {
            let size = cfg.station_market_size.ok_or_else(|| {
                Error::InvalidParameter("station_market_size is required to fit supply observations".into())
            })?;
            let series = ObservationSeries::from_csv(path, ObservationKind::Supply)?;
            let fit = fit_inconvenience(&series, &bass.with_market(size), &FitOptions::default())?;
            if !fit.converged {
                return Err(Error::NonConvergence(format!(
                    "supply fit stopped after {} iterations (sse {})",
                    fit.iterations, fit.sse
                )));
            }
            // station units -> units of the demand curve
            let poly = fit.params.with_rho(fit.params.rho * bass.m / size);
            let summary = FitSummary {
                sse: fit.sse,
                iterations: fit.iterations,
                converged: fit.converged,
            };
            (poly, Some(summary))
        }
        (None, Some(rho), Some(t2)) => {
            let t0 = cfg.t0.unwrap_or(bass.t_origin);
            (
                NetFlowPoly::new(rho, bass.years_since_origin(t0), bass.years_since_origin(t2))?,
                None,
            )
        }
        (None, None, None) => (NetFlowPoly::new(0.0, 0.0, 1.0)?, None),
        _ => return Err(Error::InvalidParameter("rho and t2 must be given together".into())),
    };
    let model = SupplyModel::new(bass, poly)?;
    let timeline = derive_timeline(&bass).ok();
    let report = CalibrationReport {
        bass,
        demand_fit,
        supply_fit,
        rho: poly.rho,
        t0_year: bass.calendar_year(poly.t0),
        t2_year: bass.calendar_year(poly.t2),
        t3_year: bass.calendar_year(poly.congestion_end()),
        peak_year: timeline.map(|t| t.t_peak),
        inflection_years: timeline.map(|t| (t.t_ip_minus, t.t_ip_plus)),
    };
    Ok(Some((model, report)))
}

fn curve_grid(cfg: &RunConfig, bass: &BassParams) -> Result<TimeGrid> {
    let start = cfg.curves_start.unwrap_or(bass.t_origin);
    let end = cfg.curves_end.unwrap_or(start + 40.0);
    TimeGrid::new(start, end, cfg.curves_step)
}

/// Demand/supply curves and the configured sensitivity sweeps.
pub fn project_curves(
    cfg: &RunConfig,
    model: &SupplyModel,
) -> Result<(Vec<CurveSample>, Vec<SweepSeries>, UtilizationScenario)> {
    stage(
        "curves",
        (|| {
            let grid = curve_grid(cfg, &model.bass)?;
            let curves = model.emit_curves(&grid)?;
            let mut sweeps = Vec::new();
            for (param, values) in [
                (SweepParam::P, &cfg.sweep_p),
                (SweepParam::Q, &cfg.sweep_q),
                (SweepParam::Rho, &cfg.sweep_rho),
            ] {
                if !values.is_empty() {
                    sweeps.extend(model.sensitivity_sweep(param, values, &grid)?);
                }
            }
            let scenario = model.classify_utilization((grid.start, grid.end), cfg.utilization_tol)?;
            Ok((curves, sweeps, scenario))
        })(),
    )
}

/// Loads, filters, snaps and expands the paths into a solver instance.
pub fn build_instance(cfg: &RunConfig, budget: Option<usize>) -> Result<(MilpInstance, InstanceSummary, Vec<String>)> {
    stage(
        "network",
        (|| {
            let (Some(nodes), Some(meta)) = (&cfg.path_nodes_csv, &cfg.path_meta_csv) else {
                return Err(Error::InvalidParameter(
                    "path_nodes_csv and path_meta_csv are required".into(),
                ));
            };
            let loaded = load_paths_from_files(nodes, meta)?;
            let mut warnings: Vec<String> = loaded
                .diagnostics
                .iter()
                .map(|d| format!("rejected path {} (line {}): {}", d.path_id, d.line, d.message))
                .collect();
            let kept = filter_by_range(&loaded.paths, cfg.range_km, cfg.range_mode)?;
            if kept.is_empty() {
                return Err(Error::Input(format!("no path exceeds the {} km range", cfg.range_km)));
            }
            let grid = match cfg.grid_bbox {
                Some(b) => GridSpec::new(cfg.grid_rows, cfg.grid_cols, b)?,
                None => GridSpec::covering(&kept, cfg.grid_rows, cfg.grid_cols)?,
            };
            let snap = snap_to_grid(&kept, &grid)?;
            if snap.clamped_nodes > 0 {
                warnings.push(format!(
                    "{} nodes outside the grid box were clamped to border cells",
                    snap.clamped_nodes
                ));
            }
            let networks = expand_paths(&kept, cfg.range_km, cfg.origin_rule)?;
            let disconnected: Vec<String> = networks
                .iter()
                .filter(|n| n.infeasible_by_construction && n.flow > 0.0)
                .map(|n| n.path_id.clone())
                .collect();
            for id in &disconnected {
                warnings.push(format!(
                    "path {id} has no origin-to-destination route at {} km",
                    cfg.range_km
                ));
            }
            let capacity = match cfg.weekly_capacity() {
                Some(c) => CapacitySpec::PerWeek(c),
                None => CapacitySpec::Uncapacitated,
            };
            let budget = budget.unwrap_or(snap.candidates.len());
            let inst = assemble_instance(networks, &snap, &CostSpec::Uniform(cfg.station_cost), &capacity, budget)?;
            let summary = InstanceSummary {
                paths_loaded: loaded.paths.len(),
                paths_rejected: loaded.diagnostics.len(),
                paths_in_range: kept.len(),
                candidates: inst.sites.len(),
                arcs: inst.arc_count(),
                clamped_nodes: snap.clamped_nodes,
                disconnected_paths: disconnected,
            };
            info!(
                "instance: {} paths, {} candidates, {} arcs, budget {}",
                summary.paths_in_range, summary.candidates, summary.arcs, inst.budget
            );
            Ok((inst, summary, warnings))
        })(),
    )
}

/// Runs the configured solver; failures carry a diagnostic hint.
pub fn solve_instance(cfg: &RunConfig, inst: &MilpInstance) -> Result<Solution> {
    stage(
        "solve",
        (|| {
            let opts = cfg.solve_options();
            let sol = match cfg.solver {
                SolverChoice::BranchAndBound => solve_bb(inst, &opts)?,
                SolverChoice::Greedy => greedy_add(inst, &opts)?,
                SolverChoice::BruteForce => brute_force(inst, &opts)?,
            };
            match sol.status {
            SolveStatus::Optimal | SolveStatus::Feasible => Ok(sol),
            SolveStatus::IterLimit => Err(Error::NonConvergence(format!(
                "branch and bound stopped at {} nodes with gap {}",
                sol.stats.nodes, sol.bound_gap
            ))),
            SolveStatus::Infeasible => Err(Error::Infeasible(
                "even with every candidate open some path flow cannot be routed (range too short or capacity too small)"
                    .into(),
            )),
            SolveStatus::BudgetInfeasible => {
                let relaxed = inst.uncapacitated_variant().with_budget(inst.sites.len());
                let hint = match solve_bb(&relaxed, &opts) {
                    Ok(s) if s.status == SolveStatus::Optimal => format!(
                        "the uncapacitated minimum is {} stations (cost {})",
                        s.open_sites().len(),
                        s.objective
                    ),
                    _ => "the uncapacitated minimum could not be determined".into(),
                };
                Err(Error::BudgetInfeasible { budget: inst.budget, hint })
            }
        }
        })(),
    )
}

fn station_budget(cfg: &RunConfig, model: Option<&SupplyModel>) -> Result<(Option<usize>, Vec<String>)> {
    stage(
        "budget",
        (|| match cfg.budget {
            BudgetRule::Unlimited => Ok((None, vec![])),
            BudgetRule::Count(n) => Ok((Some(n), vec![])),
            BudgetRule::FromSupply => {
                let model =
                    model.ok_or_else(|| Error::InvalidParameter("budget = supply needs a demand model".into()))?;
                let year = cfg
                    .budget_year
                    .ok_or_else(|| Error::InvalidParameter("budget = supply needs budget_year".into()))?;
                let size = cfg
                    .station_market_size
                    .ok_or_else(|| Error::InvalidParameter("budget = supply needs station_market_size".into()))?;
                let b = model.station_budget(year, size, cfg.budget_rounding)?;
                let mut warnings = Vec::new();
                if b.before_origin {
                    warnings.push(format!("budget year {year} precedes adoption onset; budget is 0"));
                }
                if b.negative_supply_rate {
                    warnings.push(format!("projected supply is shrinking in {year}"));
                }
                Ok((Some(b.count as usize), warnings))
            }
        })(),
    )
}

fn flow_rows(inst: &MilpInstance, sol: &Solution) -> Vec<FlowRow> {
    let mut rows = Vec::new();
    for (p, xs) in inst.paths.iter().zip(&sol.x) {
        let net = &p.network;
        for (arc, &v) in net.arcs.iter().zip(xs) {
            if v > 0.0 {
                rows.push(FlowRow {
                    path_id: net.path_id.clone(),
                    from: net.label(arc.from).to_string(),
                    to: net.label(arc.to).to_string(),
                    volume: v,
                });
            }
        }
    }
    rows
}

fn solver_log(cfg: &RunConfig, sol: &Solution) -> Vec<String> {
    let mut lines = vec![
        format!("solver {:?}", cfg.solver),
        format!("status {:?}", sol.status),
        format!("nodes {}", sol.stats.nodes),
        format!("lp_iterations {}", sol.stats.lp_iterations),
        format!("objective {}", fmt_num(sol.objective)),
        format!("bound_gap {}", fmt_num(sol.bound_gap)),
    ];
    lines.extend(sol.stats.log.iter().cloned());
    lines
}

/// Checks, evaluates and reports a solved plan.
fn report_plan(
    cfg: &RunConfig,
    inst: &MilpInstance,
    sol: &Solution,
    summary: InstanceSummary,
    mut warnings: Vec<String>,
    ev_count: Option<f64>,
) -> Result<PlanReport> {
    let violations = validate_plan(inst, sol);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Domain(format!("plan failed validation: {}", list.join("; "))).in_stage("validate"));
    }
    let params = DelayParams {
        alpha: cfg.delay_alpha,
        beta: cfg.delay_beta,
        service_time_scale: cfg.service_time_scale,
    };
    let eval = stage("evaluate", evaluate_delay(inst, sol, cfg.vot, &params))?;
    warnings.extend(eval.warnings.iter().cloned());
    let stations = inst
        .sites
        .iter()
        .enumerate()
        .map(|(i, s)| StationReport {
            candidate_id: s.label.clone(),
            cell_row: s.cell.map(|c| c.row),
            cell_col: s.cell.map(|c| c.col),
            open: sol.y[i],
            inflow_per_week: eval.inflow[i],
            dc_ratio: eval.dc_ratio[i],
            delay: eval.delay[i],
        })
        .collect();
    let mut report = PlanReport {
        objective: sol.objective,
        delay_cost: eval.delay_cost,
        augmented_objective: eval.augmented_objective,
        delay_function: DELAY_FUNCTION_NOTE.into(),
        stations,
        budget_used: sol.open_sites().len(),
        budget_cap: inst.budget,
        instance: Some(summary),
        solver: Some(SolverSummary {
            solver: cfg.solver,
            status: sol.status,
            nodes: sol.stats.nodes,
            lp_iterations: sol.stats.lp_iterations,
            bound_gap: sol.bound_gap,
        }),
        ..PlanReport::default()
    };
    let feedback = feedback_metrics(&report, ev_count.unwrap_or(0.0), cfg.dc_threshold);
    report.ev_count = ev_count;
    report.ev_cs_ratio = ev_count.and(feedback.ev_cs_ratio);
    report.max_dc = feedback.max_dc;
    report.suggestion = feedback.suggestion;
    warnings.extend(feedback.flags);
    report.warnings = warnings;
    Ok(report)
}

/// Full run: calibrate, project, budget, plan, validate, evaluate.
pub fn plan_artifacts(cfg: &RunConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let supply = build_supply_model(cfg)?;
    let mut warnings = Vec::new();
    let mut scenario = None;
    if let Some((model, _)) = &supply {
        let (curves, sweeps, sc) = project_curves(cfg, model)?;
        for s in &sweeps {
            if let Err(msg) = &s.outcome {
                warnings.push(format!("sweep {} = {}: {msg}", s.param.name(), s.value));
            }
        }
        art.curves = curves;
        art.sweeps = sweeps;
        scenario = Some(sc);
    }
    let model = supply.as_ref().map(|(m, _)| m);
    let (budget, budget_warnings) = station_budget(cfg, model)?;
    warnings.extend(budget_warnings);
    let ev_count = match (cfg.ev_count, model, cfg.budget_year) {
        (Some(n), _, _) => Some(n),
        (None, Some(m), Some(year)) => Some(m.cumulative_demand(m.bass.years_since_origin(year))?.round()),
        _ => None,
    };

    let (inst, summary, net_warnings) = build_instance(cfg, budget)?;
    warnings.extend(net_warnings);
    let sol = solve_instance(cfg, &inst)?;
    art.solver_log = solver_log(cfg, &sol);
    art.flows = flow_rows(&inst, &sol);
    let mut report = report_plan(cfg, &inst, &sol, summary, warnings, ev_count)?;
    report.scenario = scenario;
    report.calibration = supply.map(|(_, c)| c);
    art.report = Some(report);
    Ok(art)
}

/// Runs the full pipeline and writes every output under `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PlanReport> {
    let art = plan_artifacts(cfg)?;
    stage("output", emit_outputs(&art, &cfg.out_dir))?;
    Ok(art.report.expect("planning run yields a report"))
}

/// Reads the open flags of a `stations.csv` plan, keyed by candidate id.
pub fn read_plan(path: &Path) -> Result<HashMap<String, bool>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let (id_col, open_col) = (col("candidate_id")?, col("open")?);
    let mut plan = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let open = match rec.get(open_col).unwrap_or("") {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("open must be 0 or 1, got {other}"),
                })
            }
        };
        plan.insert(rec.get(id_col).unwrap_or("").to_string(), open);
    }
    Ok(plan)
}

/// Re-evaluates a fixed station plan: routes flow through its open
/// stations, validates, and reports delay and feedback metrics.
pub fn evaluate_plan(cfg: &RunConfig) -> Result<Artifacts> {
    let plan_path = cfg
        .plan_csv
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("plan_csv is required".into()))?;
    let plan = stage("evaluate", read_plan(plan_path))?;
    let (inst, summary, warnings) = build_instance(cfg, None)?;
    let y: Vec<bool> = inst
        .sites
        .iter()
        .map(|s| plan.get(&s.label).copied().unwrap_or(false))
        .collect();
    let flows = stage("evaluate", route_with_open(&inst, &y, &cfg.solve_options().lp))?;
    let x = flows.ok_or_else(|| {
        Error::Infeasible("the given open stations cannot route every path".into()).in_stage("evaluate")
    })?;
    let objective = inst.sites.iter().zip(&y).filter(|(_, &o)| o).map(|(s, _)| s.cost).sum();
    let sol = Solution {
        status: SolveStatus::Feasible,
        y,
        x,
        objective,
        bound_gap: f64::INFINITY,
        stats: Default::default(),
    };
    let report = report_plan(cfg, &inst, &sol, summary, warnings, cfg.ev_count)?;
    Ok(Artifacts {
        flows: flow_rows(&inst, &sol),
        report: Some(report),
        ..Artifacts::default()
    })
}

/// Shortest round-trip decimal, with `-0` folded into `0`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn curve_row(s: &CurveSample) -> Vec<String> {
    [s.t, s.lambda, s.mu, s.a, s.d, s.q]
        .iter()
        .map(|&v| fmt_num(v))
        .collect()
}

/// Writes the curve, plan and log files present in `art`; curves.csv is
/// skipped for a plan without curves.
pub fn emit_outputs(art: &Artifacts, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    // a plan-only run has no curves to write
    if !art.curves.is_empty() || art.report.is_none() {
        write_csv(
            &out_dir.join("curves.csv"),
            &CURVES_HEADER,
            art.curves.iter().map(curve_row),
        )?;
    }
    for param in [SweepParam::P, SweepParam::Q, SweepParam::Rho] {
        let series: Vec<&SweepSeries> = art.sweeps.iter().filter(|s| s.param == param).collect();
        if series.is_empty() {
            continue;
        }
        let rows = series.iter().flat_map(|s| {
            let value = fmt_num(s.value);
            s.outcome.iter().flat_map(|c| &c.samples).map(move |sample| {
                let mut row = vec![value.clone()];
                row.extend(curve_row(sample));
                row
            })
        });
        let mut header = vec!["value"];
        header.extend(CURVES_HEADER);
        write_csv(&out_dir.join(format!("sweep_{}.csv", param.name())), &header, rows)?;
    }
    if let Some(report) = &art.report {
        let rows = report.stations.iter().map(|s| {
            let cell = |c: Option<u32>| c.map_or(String::new(), |v| v.to_string());
            vec![
                s.candidate_id.clone(),
                cell(s.cell_row),
                cell(s.cell_col),
                if s.open { "1" } else { "0" }.to_string(),
                fmt_num(s.inflow_per_week),
                fmt_num(s.dc_ratio),
                fmt_num(s.delay),
            ]
        });
        write_csv(&out_dir.join("stations.csv"), &STATIONS_HEADER, rows)?;
        let rows = art
            .flows
            .iter()
            .map(|f| vec![f.path_id.clone(), f.from.clone(), f.to.clone(), fmt_num(f.volume)]);
        write_csv(&out_dir.join("flows.csv"), &FLOWS_HEADER, rows)?;
        let path = out_dir.join("report.json");
        let json = serde_json::to_string_pretty(report)? + "\n";
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        let path = out_dir.join("solver.log");
        let mut log = art.solver_log.join("\n");
        if !log.is_empty() {
            log.push('\n');
        }
        fs::write(&path, log).map_err(|e| Error::io(&path, e))?;
    }
    for w in art.report.iter().flat_map(|r| &r.warnings) {
        warn!("{w}");
    }
    Ok(())
}
