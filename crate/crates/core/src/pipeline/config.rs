//! Run configuration: flat `key = value` files with `#` comments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::milp::SolveOptions;
use crate::path_network::{BBox, OriginRule, RangeMode};
use crate::supply::Rounding;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverChoice {
    BranchAndBound,
    Greedy,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CapacityUnit {
    PerWeek,
    PerHour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetRule {
    /// No limit beyond the number of candidates.
    Unlimited,
    Count(usize),
    /// Derived from projected cumulative supply at `budget_year`.
    FromSupply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub demand_csv: Option<PathBuf>,
    pub supply_csv: Option<PathBuf>,
    pub path_nodes_csv: Option<PathBuf>,
    pub path_meta_csv: Option<PathBuf>,
    pub plan_csv: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub bass_p: Option<f64>,
    pub bass_q: Option<f64>,
    pub bass_m: Option<f64>,
    pub t_origin: Option<f64>,
    /// Net-flow curvature, in the units of `bass_m`.
    pub rho: Option<f64>,
    /// Calendar year congestion starts; defaults to `t_origin`.
    pub t0: Option<f64>,
    /// Calendar year of the largest demand/supply gap.
    pub t2: Option<f64>,

    pub range_km: f64,
    pub range_mode: RangeMode,
    pub origin_rule: OriginRule,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub grid_bbox: Option<BBox>,
    /// `None` leaves stations uncapacitated.
    pub capacity: Option<f64>,
    pub capacity_unit: CapacityUnit,
    pub hours_per_week: f64,
    pub station_cost: f64,

    pub budget: BudgetRule,
    pub budget_year: Option<f64>,
    pub station_market_size: Option<f64>,
    pub budget_rounding: Rounding,

    pub vot: f64,
    pub delay_alpha: f64,
    pub delay_beta: f64,
    pub service_time_scale: f64,

    pub solver: SolverChoice,
    pub int_tol: f64,
    pub gap_tol: f64,
    pub max_nodes: usize,

    pub curves_start: Option<f64>,
    pub curves_end: Option<f64>,
    pub curves_step: f64,
    pub sweep_p: Vec<f64>,
    pub sweep_q: Vec<f64>,
    pub sweep_rho: Vec<f64>,
    pub utilization_tol: f64,

    pub ev_count: Option<f64>,
    pub dc_threshold: f64,
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            demand_csv: None,
            supply_csv: None,
            path_nodes_csv: None,
            path_meta_csv: None,
            plan_csv: None,
            out_dir: PathBuf::from("out"),
            bass_p: None,
            bass_q: None,
            bass_m: None,
            t_origin: None,
            rho: None,
            t0: None,
            t2: None,
            range_km: 150.0,
            range_mode: RangeMode::StrictGt,
            origin_rule: OriginRule::HalfOrigin,
            grid_rows: 10,
            grid_cols: 10,
            grid_bbox: None,
            capacity: None,
            capacity_unit: CapacityUnit::PerWeek,
            hours_per_week: 168.0,
            station_cost: 1.0,
            budget: BudgetRule::Unlimited,
            budget_year: None,
            station_market_size: None,
            budget_rounding: Rounding::Floor,
            vot: 1.0,
            delay_alpha: 0.15,
            delay_beta: 4.0,
            service_time_scale: 1.0,
            solver: SolverChoice::BranchAndBound,
            int_tol: 1e-6,
            gap_tol: 1e-6,
            max_nodes: 200_000,
            curves_start: None,
            curves_end: None,
            curves_step: 1.0,
            sweep_p: Vec::new(),
            sweep_q: Vec::new(),
            sweep_rho: Vec::new(),
            utilization_tol: 1e-9,
            ev_count: None,
            dc_threshold: 0.9,
            verbose: false,
        }
    }
}

/// Every key accepted in a config file or as a CLI override.
pub const CONFIG_KEYS: &[&str] = &[
    "demand_csv",
    "supply_csv",
    "path_nodes_csv",
    "path_meta_csv",
    "plan_csv",
    "out_dir",
    "bass_p",
    "bass_q",
    "bass_m",
    "t_origin",
    "rho",
    "t0",
    "t2",
    "range_km",
    "range_mode",
    "origin_rule",
    "grid_rows",
    "grid_cols",
    "grid_bbox",
    "capacity",
    "capacity_unit",
    "hours_per_week",
    "station_cost",
    "budget",
    "budget_year",
    "station_market_size",
    "budget_rounding",
    "vot",
    "delay_alpha",
    "delay_beta",
    "service_time_scale",
    "solver",
    "int_tol",
    "gap_tol",
    "max_nodes",
    "curves_start",
    "curves_end",
    "curves_step",
    "sweep_p",
    "sweep_q",
    "sweep_rho",
    "utilization_tol",
    "ev_count",
    "dc_threshold",
    "verbose",
];

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{key} = {value}: {why}"))
}

fn num(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|e| bad(key, v, e))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "must be finite"))
    }
}

fn positive(key: &str, v: &str) -> Result<f64> {
    let x = num(key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(bad(key, v, "must be > 0"))
    }
}

fn nonneg(key: &str, v: &str) -> Result<f64> {
    let x = num(key, v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(bad(key, v, "must be >= 0"))
    }
}

fn count<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| bad(key, v, e))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            bad(key, v, format!("expected one of {}", names.join(", ")))
        })
}

impl RunConfig {
    /// Applies one `key = value` setting; relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        let path = || base.join(v);
        match key {
            "demand_csv" => self.demand_csv = Some(path()),
            "supply_csv" => self.supply_csv = Some(path()),
            "path_nodes_csv" => self.path_nodes_csv = Some(path()),
            "path_meta_csv" => self.path_meta_csv = Some(path()),
            "plan_csv" => self.plan_csv = Some(path()),
            "out_dir" => self.out_dir = path(),
            "bass_p" => self.bass_p = Some(positive(key, v)?),
            "bass_q" => self.bass_q = Some(nonneg(key, v)?),
            "bass_m" => self.bass_m = Some(positive(key, v)?),
            "t_origin" => self.t_origin = Some(num(key, v)?),
            "rho" => self.rho = Some(num(key, v)?),
            "t0" => self.t0 = Some(num(key, v)?),
            "t2" => self.t2 = Some(num(key, v)?),
            "range_km" => self.range_km = positive(key, v)?,
            "range_mode" => {
                self.range_mode = choice(key, v, &[("strict", RangeMode::StrictGt), ("geq", RangeMode::Geq)])?
            }
            "origin_rule" => {
                self.origin_rule = choice(
                    key,
                    v,
                    &[
                        ("half_origin", OriginRule::HalfOrigin),
                        ("half_first_station", OriginRule::HalfFirstStation),
                    ],
                )?
            }
            "grid_rows" => self.grid_rows = count(key, v)?,
            "grid_cols" => self.grid_cols = count(key, v)?,
            "grid_bbox" => {
                let b = list(key, v)?;
                if b.len() != 4 {
                    return Err(bad(key, v, "expected x_min,y_min,x_max,y_max"));
                }
                self.grid_bbox = Some(BBox {
                    x_min: b[0],
                    y_min: b[1],
                    x_max: b[2],
                    y_max: b[3],
                });
            }
            "capacity" => self.capacity = if v == "none" { None } else { Some(nonneg(key, v)?) },
            "capacity_unit" => {
                self.capacity_unit = choice(
                    key,
                    v,
                    &[("per_week", CapacityUnit::PerWeek), ("per_hour", CapacityUnit::PerHour)],
                )?
            }
            "hours_per_week" => self.hours_per_week = positive(key, v)?,
            "station_cost" => self.station_cost = nonneg(key, v)?,
            "budget" => {
                self.budget = match v {
                    "none" => BudgetRule::Unlimited,
                    "supply" => BudgetRule::FromSupply,
                    n => BudgetRule::Count(count(key, n)?),
                }
            }
            "budget_year" => self.budget_year = Some(num(key, v)?),
            "station_market_size" => self.station_market_size = Some(positive(key, v)?),
            "budget_rounding" => {
                self.budget_rounding = choice(key, v, &[("floor", Rounding::Floor), ("nearest", Rounding::Nearest)])?
            }
            "vot" => self.vot = nonneg(key, v)?,
            "delay_alpha" => self.delay_alpha = nonneg(key, v)?,
            "delay_beta" => self.delay_beta = nonneg(key, v)?,
            "service_time_scale" => self.service_time_scale = nonneg(key, v)?,
            "solver" => {
                self.solver = choice(
                    key,
                    v,
                    &[
                        ("bb", SolverChoice::BranchAndBound),
                        ("greedy", SolverChoice::Greedy),
                        ("brute", SolverChoice::BruteForce),
                    ],
                )?
            }
            "int_tol" => self.int_tol = positive(key, v)?,
            "gap_tol" => self.gap_tol = nonneg(key, v)?,
            "max_nodes" => self.max_nodes = count(key, v)?,
            "curves_start" => self.curves_start = Some(num(key, v)?),
            "curves_end" => self.curves_end = Some(num(key, v)?),
            "curves_step" => self.curves_step = positive(key, v)?,
            "sweep_p" => self.sweep_p = list(key, v)?,
            "sweep_q" => self.sweep_q = list(key, v)?,
            "sweep_rho" => self.sweep_rho = list(key, v)?,
            "utilization_tol" => self.utilization_tol = nonneg(key, v)?,
            "ev_count" => self.ev_count = Some(nonneg(key, v)?),
            "dc_threshold" => self.dc_threshold = positive(key, v)?,
            "verbose" => self.verbose = choice(key, v, &[("true", true), ("false", false)])?,
            _ => return Err(Error::InvalidParameter(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses config text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: source.into(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`".into()))?;
            cfg.set(key.trim(), value, base).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            int_tol: self.int_tol,
            gap_tol: self.gap_tol,
            max_nodes: self.max_nodes,
            verbose: self.verbose,
            ..SolveOptions::default()
        }
    }

    /// Weekly station capacity, if capacitated.
    pub fn weekly_capacity(&self) -> Option<f64> {
        self.capacity.map(|c| match self.capacity_unit {
            CapacityUnit::PerWeek => c,
            CapacityUnit::PerHour => c * self.hours_per_week,
        })
    }
}
