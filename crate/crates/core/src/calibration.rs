//! Calibration of the demand and supply curves from cumulative observations.
//!
//! Demand: `(p, q, m)` and optionally the diffusion origin are fitted to
//! cumulative adopters by multi-start nonlinear least squares. Supply: with
//! the demand curve fixed, `(rho, t2)` are fitted to cumulative supply
//! `D(t) = A(t) - Q(t)`, with `t0` pinned to the diffusion origin.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::BassParams;
use crate::fluid_queue::NetFlowPoly;
use crate::nls::{nls_minimize, Bounds, NlsMethod, NlsOptions, NlsSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationKind {
    Demand,
    Supply,
}

impl ObservationKind {
    pub fn csv_header(self) -> [&'static str; 2] {
        match self {
            ObservationKind::Demand => ["year", "cumulative_adopters"],
            ObservationKind::Supply => ["year", "cumulative_stations"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub year: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub kind: ObservationKind,
    pub points: Vec<Observation>,
    /// Non-fatal data issues (decreasing cumulative values).
    pub warnings: Vec<String>,
}

impl ObservationSeries {
    pub fn new(kind: ObservationKind, points: Vec<Observation>) -> Result<Self> {
        let mut warnings = Vec::new();
        for (i, o) in points.iter().enumerate() {
            if !(o.year.is_finite() && o.value.is_finite()) {
                return Err(Error::Input(format!("observation {i} is not finite")));
            }
            if o.value < 0.0 {
                return Err(Error::Input(format!("observation {i} ({}) is negative", o.year)));
            }
        }
        for w in points.windows(2) {
            if w[1].year <= w[0].year {
                return Err(Error::Input(format!(
                    "observation years must be strictly increasing ({} then {})",
                    w[0].year, w[1].year
                )));
            }
            if w[1].value < w[0].value {
                let msg = format!(
                    "cumulative value decreases at {} ({} -> {})",
                    w[1].year, w[0].value, w[1].value
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(Self { kind, points, warnings })
    }

    pub fn from_pairs(kind: ObservationKind, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            kind,
            pairs.iter().map(|&(year, value)| Observation { year, value }).collect(),
        )
    }

    /// Reads `year,cumulative_adopters` (demand) or `year,cumulative_stations` (supply).
    pub fn from_csv(path: impl AsRef<Path>, kind: ObservationKind) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, kind, &path.display().to_string())
    }

    pub fn from_reader(reader: impl std::io::Read, kind: ObservationKind, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected = kind.csv_header();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                path: source.into(),
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize| -> Result<f64> {
                rec.get(k).unwrap_or("").parse::<f64>().map_err(|e| Error::Parse {
                    path: source.into(),
                    line,
                    message: format!("column {}: {e}", expected[k]),
                })
            };
            points.push(Observation {
                year: field(0)?,
                value: field(1)?,
            });
        }
        Self::new(kind, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn max_value(&self) -> f64 {
        self.points.iter().map(|o| o.value).fold(0.0, f64::max)
    }
}

/// How the diffusion origin is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OriginMode {
    /// Fitted as a fourth parameter, initialized at the first year with nonzero adoption.
    Fit,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitTarget {
    Cumulative,
    /// Differenced observations against the adoption rate.
    Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub origin: OriginMode,
    pub target: FitTarget,
    pub nls: NlsOptions,
    pub start_p: Vec<f64>,
    pub start_q: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            origin: OriginMode::Fit,
            target: FitTarget::Cumulative,
            nls: NlsOptions::default(),
            start_p: vec![1e-3, 5e-3, 0.01, 0.03],
            start_q: vec![0.2, 0.38, 0.5, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    pub params: P,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    pub method: NlsMethod,
}

/// Diffusion milestones in calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub t_peak: f64,
    pub t_ip_minus: f64,
    pub t_ip_plus: f64,
    pub t0: f64,
}

const MIN_BASS_POINTS: usize = 4;
const MIN_SUPPLY_POINTS: usize = 3;

struct BassLayout {
    origin: OriginMode,
}

impl BassLayout {
    fn decode(&self, x: &[f64]) -> BassParams {
        let t_origin = match self.origin {
            OriginMode::Fit => x[3],
            OriginMode::Fixed(year) => year,
        };
        BassParams {
            p: x[0].exp(),
            q: x[1].exp(),
            m: x[2].exp(),
            t_origin,
        }
    }
}

fn bass_residuals(params: &BassParams, series: &ObservationSeries, target: FitTarget) -> Vec<f64> {
    match target {
        FitTarget::Cumulative => series
            .points
            .iter()
            .map(|o| {
                params
                    .cumulative_adoption(params.years_since_origin(o.year))
                    .map(|f| f - o.value)
                    .unwrap_or(f64::NAN)
            })
            .collect(),
        FitTarget::Rate => series
            .points
            .windows(2)
            .map(|w| {
                let observed = (w[1].value - w[0].value) / (w[1].year - w[0].year);
                let mid = 0.5 * (w[0].year + w[1].year);
                params.adoption_rate(params.years_since_origin(mid)) - observed
            })
            .collect(),
    }
}

/// Fits `(p, q, m)` (and the origin, if requested) to cumulative demand.
pub fn fit_bass(series: &ObservationSeries, options: &FitOptions) -> Result<FitResult<BassParams>> {
    let needed = match options.target {
        FitTarget::Cumulative => MIN_BASS_POINTS,
        FitTarget::Rate => MIN_BASS_POINTS + 1,
    };
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    let y_max = series.max_value();
    if y_max <= 0.0 {
        return Err(Error::Input("demand series has no adoption".into()));
    }
    let first_year = series.points[0].year;
    let first_nonzero = series
        .points
        .iter()
        .find(|o| o.value > 0.0)
        .map(|o| o.year)
        .unwrap_or(first_year);
    let last_value = series.points.last().map(|o| o.value).unwrap_or(y_max);

    let layout = BassLayout { origin: options.origin };
    let mut lower = vec![1e-6f64.ln(), 1e-4f64.ln(), (0.5 * y_max).ln()];
    let mut upper = vec![2f64.ln(), 5f64.ln(), (1e4 * y_max).ln()];
    if options.origin == OriginMode::Fit {
        lower.push(first_year - 50.0);
        upper.push(first_nonzero);
    }
    let bounds = Bounds::new(lower, upper)?;

    let m0 = (2.0 * last_value).max(0.5 * y_max);
    let starts: Vec<Vec<f64>> = options
        .start_p
        .iter()
        .flat_map(|&p| options.start_q.iter().map(move |&q| (p, q)))
        .map(|(p, q)| {
            let mut x = vec![p.ln(), q.ln(), m0.ln()];
            if options.origin == OriginMode::Fit {
                x.push(first_nonzero);
            }
            x
        })
        .collect();
    if starts.is_empty() {
        return Err(Error::InvalidParameter("multi-start grid is empty".into()));
    }

    let target = options.target;
    let runs: Vec<Option<NlsSolution>> = starts
        .par_iter()
        .map(|x0| {
            nls_minimize(
                |x| bass_residuals(&layout.decode(x), series, target),
                x0,
                Some(&bounds),
                &options.nls,
            )
            .ok()
        })
        .collect();

    let best = best_run(&runs).ok_or(Error::NonFiniteResidual)?;
    Ok(FitResult {
        params: layout.decode(&best.x),
        sse: best.sse,
        iterations: best.iterations,
        converged: best.converged,
        residuals: best.residuals.clone(),
        method: best.method,
    })
}

/// Lowest SSE wins; ties go to the earliest start.
fn best_run(runs: &[Option<NlsSolution>]) -> Option<&NlsSolution> {
    runs.iter()
        .flatten()
        .filter(|s| s.sse.is_finite())
        .fold(None, |best: Option<&NlsSolution>, s| match best {
            Some(b) if b.sse <= s.sse => Some(b),
            _ => Some(s),
        })
}

/// Peak and inflection years of the fitted demand curve.
pub fn derive_timeline(params: &BassParams) -> Result<Timeline> {
    let peak = params.peak_time()?;
    let (lo, hi) = params.inflection_times()?;
    Ok(Timeline {
        t_peak: params.calendar_year(peak),
        t_ip_minus: params.calendar_year(lo),
        t_ip_plus: params.calendar_year(hi),
        t0: params.t_origin,
    })
}

/// Fits `(rho, t2)` to cumulative supply with the demand curve fixed.
///
/// `bass.m` must be expressed in the units of the supply observations. The
/// returned polynomial lives on the Bass time axis, so `t0 = 0`.
pub fn fit_inconvenience(
    series: &ObservationSeries,
    bass: &BassParams,
    options: &FitOptions,
) -> Result<FitResult<NetFlowPoly>> {
    if series.len() < MIN_SUPPLY_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_SUPPLY_POINTS,
            got: series.len(),
        });
    }
    bass.validate()?;
    let t0 = 0.0;
    let times: Vec<f64> = series.points.iter().map(|o| bass.years_since_origin(o.year)).collect();
    let gaps: Vec<f64> = series
        .points
        .iter()
        .zip(&times)
        .map(|(o, &t)| bass.cumulative_adoption(t).map(|a| a - o.value))
        .collect::<Result<_>>()?;
    let horizon = times.iter().copied().fold(1.0, f64::max);
    let y_scale = series.max_value().max(bass.m * 1e-6).max(f64::MIN_POSITIVE);
    // rho is optimized in units where the queue over the observed span is O(1)
    let rho_scale = y_scale / horizon.powi(3);

    let unit_queue = |t2: f64, t: f64| NetFlowPoly { rho: 1.0, t0, t2 }.queue_length(t);
    let t2_max = 2.0 * horizon + 20.0;

    // profile over t2 with the closed-form rho (Q is linear in rho)
    let mut best = (f64::INFINITY, 0.0, 0.5);
    let steps = 400;
    for k in 1..=steps {
        let t2 = t2_max * k as f64 / steps as f64;
        let g: Vec<f64> = times.iter().map(|&t| unit_queue(t2, t)).collect();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let rho = if gg > 0.0 {
            g.iter().zip(&gaps).map(|(a, b)| a * b).sum::<f64>() / gg
        } else {
            0.0
        };
        let sse: f64 = g.iter().zip(&gaps).map(|(gi, ai)| (ai - rho * gi).powi(2)).sum();
        if sse < best.0 {
            best = (sse, rho, t2);
        }
    }

    let residuals = |x: &[f64]| -> Vec<f64> {
        let rho = x[0] * rho_scale;
        times
            .iter()
            .zip(&gaps)
            .map(|(&t, &gap)| rho * unit_queue(x[1], t) - gap)
            .collect()
    };
    let bounds = Bounds::new(vec![f64::NEG_INFINITY, t0 + 1e-6], vec![f64::INFINITY, t2_max])?;
    let sol = nls_minimize(residuals, &[best.1 / rho_scale, best.2], Some(&bounds), &options.nls)?;

    let rho = sol.x[0] * rho_scale;
    let t2 = sol.x[1];
    if t2 - t0 < 1e-3 && rho.abs() > 0.0 {
        return Err(Error::NoInconvenienceEpisode);
    }
    Ok(FitResult {
        params: NetFlowPoly::new(rho, t0, t2)?,
        sse: sol.sse,
        iterations: sol.iterations,
        converged: sol.converged,
        residuals: sol.residuals,
        method: sol.method,
    })
}
