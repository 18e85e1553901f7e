//! Supply curve derived from diffusion demand and the net inconvenience queue.
//!
//! `mu(t) = lambda(t) - pi(t)` and `D(t) = A(t) - Q(t)`, where `lambda`/`A`
//! come from the Bass model and `pi`/`Q` from the quadratic net flow. The
//! polynomial shares the Bass time axis: years since `bass.t_origin`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::BassParams;
use crate::fluid_queue::NetFlowPoly;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyModel {
    pub bass: BassParams,
    pub poly: NetFlowPoly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UtilizationKind {
    Overutilization,
    Underutilization,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationScenario {
    pub kind: UtilizationKind,
    /// Largest `|Q|` over the horizon.
    pub peak_gap: f64,
    /// Calendar window in which the gap is nonzero (empty when balanced).
    pub gap_window: (f64, f64),
}

/// One point of the demand/supply curves. `t` is a calendar year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub t: f64,
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

/// Evenly spaced calendar grid `start, start + step, ...` up to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be > 0, got {step}")));
        }
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidParameter(format!("invalid grid range [{start}, {end}]")));
        }
        Ok(Self { start, end, step })
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.start + i as f64 * self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    Floor,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationBudget {
    pub count: u64,
    /// Cumulative supply as a share of the station market.
    pub share: f64,
    /// The requested year precedes the diffusion origin.
    pub before_origin: bool,
    /// The supply rate is negative at the requested year.
    pub negative_supply_rate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    P,
    Q,
    Rho,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::P => "p",
            SweepParam::Q => "q",
            SweepParam::Rho => "rho",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub samples: Vec<CurveSample>,
    pub demand_peak_time: Option<f64>,
    pub demand_peak_rate: Option<f64>,
    pub peak_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub param: SweepParam,
    pub value: f64,
    pub outcome: std::result::Result<SweepCurve, String>,
}

impl SupplyModel {
    pub fn new(bass: BassParams, poly: NetFlowPoly) -> Result<Self> {
        bass.validate()?;
        NetFlowPoly::new(poly.rho, poly.t0, poly.t2)?;
        Ok(Self { bass, poly })
    }

    /// Builds the model from calendar-year congestion times.
    pub fn from_calendar(bass: BassParams, rho: f64, t0_year: f64, t2_year: f64) -> Result<Self> {
        let poly = NetFlowPoly::new(rho, bass.years_since_origin(t0_year), bass.years_since_origin(t2_year))?;
        Self::new(bass, poly)
    }

    pub fn demand_rate(&self, t: f64) -> f64 {
        self.bass.adoption_rate(t)
    }

    pub fn supply_rate(&self, t: f64) -> f64 {
        self.bass.adoption_rate(t) - self.poly.net_flow_rate(t)
    }

    pub fn cumulative_demand(&self, t: f64) -> Result<f64> {
        self.bass.cumulative_adoption(t)
    }

    pub fn cumulative_supply(&self, t: f64) -> Result<f64> {
        Ok(self.bass.cumulative_adoption(t)? - self.poly.queue_length(t))
    }

    pub fn sample(&self, t: f64) -> Result<CurveSample> {
        let a = self.cumulative_demand(t)?;
        let q = self.poly.queue_length(t);
        Ok(CurveSample {
            t: self.bass.calendar_year(t),
            lambda: self.demand_rate(t),
            mu: self.supply_rate(t),
            a,
            d: a - q,
            q,
        })
    }

    pub fn emit_curves(&self, grid: &TimeGrid) -> Result<Vec<CurveSample>> {
        grid.points()
            .map(|year| self.sample(self.bass.years_since_origin(year)))
            .collect()
    }

    /// Classifies the sign of the demand/supply gap over a calendar horizon.
    pub fn classify_utilization(&self, horizon: (f64, f64), tol: f64) -> Result<UtilizationScenario> {
        let (ta, tb) = horizon;
        if !(ta < tb) {
            return Err(Error::InvalidParameter(format!(
                "horizon must satisfy t_a < t_b, got ({ta}, {tb})"
            )));
        }
        let (ua, ub) = (self.bass.years_since_origin(ta), self.bass.years_since_origin(tb));
        // Q is extremal at t2 or at the horizon ends.
        let gaps: Vec<f64> = [ua, ub, self.poly.t2.clamp(ua, ub)]
            .iter()
            .map(|&u| self.poly.queue_length(u))
            .collect();
        let max_q = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_q = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let peak_gap = max_q.abs().max(min_q.abs());
        let kind = if max_q > tol {
            UtilizationKind::Overutilization
        } else if min_q < -tol {
            UtilizationKind::Underutilization
        } else {
            UtilizationKind::Balanced
        };
        let gap_window = if kind == UtilizationKind::Balanced {
            (ta, ta)
        } else {
            let lo = ua.max(self.poly.t0);
            let hi = ub.min(self.poly.congestion_end());
            (self.bass.calendar_year(lo), self.bass.calendar_year(hi))
        };
        Ok(UtilizationScenario {
            kind,
            peak_gap,
            gap_window,
        })
    }

    /// Station budget `floor(size * D(t) / m)` at calendar year `year`,
    /// clamped to `[0, size]`.
    pub fn station_budget(&self, year: f64, station_market_size: f64, rounding: Rounding) -> Result<StationBudget> {
        if !(station_market_size.is_finite() && station_market_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "station market size must be > 0, got {station_market_size}"
            )));
        }
        let t = self.bass.years_since_origin(year);
        if t < 0.0 {
            warn!(
                "budget year {year} precedes diffusion origin {}; budget is 0",
                self.bass.t_origin
            );
            return Ok(StationBudget {
                count: 0,
                share: 0.0,
                before_origin: true,
                negative_supply_rate: false,
            });
        }
        let share = self.cumulative_supply(t)? / self.bass.m;
        let negative_supply_rate = self.supply_rate(t) < 0.0;
        if negative_supply_rate {
            warn!("supply rate is negative at {year}; budget uses the clamped cumulative supply");
        }
        let raw = station_market_size * share;
        let rounded = match rounding {
            Rounding::Floor => raw.floor(),
            Rounding::Nearest => raw.round(),
        };
        let count = rounded.clamp(0.0, station_market_size.floor()) as u64;
        Ok(StationBudget {
            count,
            share,
            before_origin: false,
            negative_supply_rate,
        })
    }

    fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut model = *self;
        match param {
            SweepParam::P => model.bass.p = value,
            SweepParam::Q => model.bass.q = value,
            SweepParam::Rho => model.poly.rho = value,
        }
        Self::new(model.bass, model.poly)
    }

    /// One curve series per value of `param`, everything else held fixed.
    /// Invalid values yield an error entry; output order follows `values`.
    pub fn sensitivity_sweep(&self, param: SweepParam, values: &[f64], grid: &TimeGrid) -> Result<Vec<SweepSeries>> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one value".into()));
        }
        let horizon = (grid.start, grid.end.max(grid.start + grid.step));
        Ok(values
            .par_iter()
            .map(|&value| {
                let outcome = self
                    .with_param(param, value)
                    .and_then(|model| {
                        let samples = model.emit_curves(grid)?;
                        let peak_gap = model.classify_utilization(horizon, 0.0)?.peak_gap;
                        Ok(SweepCurve {
                            samples,
                            demand_peak_time: model.bass.peak_time().ok(),
                            demand_peak_rate: model.bass.peak_rate().ok(),
                            peak_gap,
                        })
                    })
                    .map_err(|e| e.to_string());
                SweepSeries { param, value, outcome }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REFERENCE_RHO: f64 = -2.34297e-4;

    fn reference_model() -> SupplyModel {
        let bass = BassParams::share(0.005, 0.5).unwrap();
        SupplyModel::new(bass, NetFlowPoly::new(REFERENCE_RHO, 0.0, 18.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_rho_tracks_demand() {
        let model = reference_model();
        let flat = SupplyModel {
            poly: model.poly.with_rho(0.0),
            ..model
        };
        for i in 0..60 {
            let t = 0.5 * i as f64;
            assert_eq!(flat.supply_rate(t), flat.demand_rate(t));
        }
    }

    #[test]
    fn supply_equals_demand_at_poly_roots() {
        let model = reference_model();
        assert_eq!(model.supply_rate(0.0), model.demand_rate(0.0));
        assert_eq!(model.supply_rate(18.0), model.demand_rate(18.0));
    }

    #[test]
    fn supply_rate_componentwise() {
        let model = reference_model();
        let (p, q) = (0.005f64, 0.5f64);
        let s = p + q;
        let e = (9.0 * s).exp();
        let lambda = p * s * s * e / (p * e + q).powi(2);
        let pi = REFERENCE_RHO * 9.0 * (9.0 - 18.0);
        assert!((model.supply_rate(9.0) - (lambda - pi)).abs() < 1e-12);
    }

    #[test]
    fn cumulative_supply_meets_demand_at_episode_ends() {
        let model = reference_model();
        assert_eq!(
            model.cumulative_supply(0.0).unwrap(),
            model.cumulative_demand(0.0).unwrap()
        );
        let t3 = model.poly.congestion_end();
        assert!((model.cumulative_supply(t3).unwrap() - model.cumulative_demand(t3).unwrap()).abs() < 1e-12);
        for i in 1..27 {
            let t = i as f64;
            assert!(model.cumulative_supply(t).unwrap() < model.cumulative_demand(t).unwrap());
        }
    }

    #[test]
    fn classification_follows_sign_of_rho() {
        let model = reference_model();
        let horizon = (0.0, 40.0);
        let over = model.classify_utilization(horizon, 1e-9).unwrap();
        assert_eq!(over.kind, UtilizationKind::Overutilization);
        assert!((over.peak_gap - model.poly.peak_queue()).abs() < 1e-15);
        assert_eq!(over.gap_window, (0.0, 27.0));
        let mirrored = SupplyModel {
            poly: model.poly.with_rho(-REFERENCE_RHO),
            ..model
        };
        assert_eq!(
            mirrored.classify_utilization(horizon, 1e-9).unwrap().kind,
            UtilizationKind::Underutilization
        );
        let flat = SupplyModel {
            poly: model.poly.with_rho(0.0),
            ..model
        };
        let balanced = flat.classify_utilization(horizon, 1e-9).unwrap();
        assert_eq!(balanced.kind, UtilizationKind::Balanced);
        assert_eq!(balanced.peak_gap, 0.0);
        assert!(model.classify_utilization((5.0, 5.0), 0.0).is_err());
    }

    #[test]
    fn sweeps_follow_closed_forms() {
        let model = reference_model();
        let grid = TimeGrid::new(0.0, 40.0, 0.5).unwrap();

        let by_p = model
            .sensitivity_sweep(SweepParam::P, &[0.003, 0.005, 0.007], &grid)
            .unwrap();
        let peaks: Vec<f64> = by_p
            .iter()
            .map(|s| s.outcome.as_ref().unwrap().demand_peak_time.unwrap())
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] < w[0]));
        for (series, p) in by_p.iter().zip([0.003f64, 0.005, 0.007]) {
            assert_eq!(series.value, p);
            assert!(
                (peaks[by_p.iter().position(|s| s.value == p).unwrap()] - (0.5 / p).ln() / (p + 0.5)).abs() < 1e-12
            );
        }

        let by_q = model.sensitivity_sweep(SweepParam::Q, &[0.3, 0.5, 0.7], &grid).unwrap();
        let rates: Vec<f64> = by_q
            .iter()
            .map(|s| s.outcome.as_ref().unwrap().demand_peak_rate.unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] > w[0]));

        let by_rho = model
            .sensitivity_sweep(SweepParam::Rho, &[-1e-4, -2e-4], &grid)
            .unwrap();
        let gaps: Vec<f64> = by_rho.iter().map(|s| s.outcome.as_ref().unwrap().peak_gap).collect();
        assert!(gaps[1] > gaps[0]);
        assert!((gaps[1] - 2.0 * gaps[0]).abs() < 1e-15);
    }

    #[test]
    fn sweep_keeps_going_past_invalid_values() {
        let model = reference_model();
        let grid = TimeGrid::new(0.0, 10.0, 1.0).unwrap();
        let series = model
            .sensitivity_sweep(SweepParam::P, &[0.004, -1.0, 0.006], &grid)
            .unwrap();
        assert!(series[0].outcome.is_ok());
        assert!(series[1].outcome.is_err());
        assert!(series[2].outcome.is_ok());
        assert!(model.sensitivity_sweep(SweepParam::Q, &[], &grid).is_err());
    }

    #[test]
    fn budget_floor_and_origin() {
        let bass = BassParams::new(0.005, 0.5, 1.0, 2012.0).unwrap();
        let model = SupplyModel::from_calendar(bass, REFERENCE_RHO, 2012.0, 2030.0).unwrap();
        assert_eq!(model.station_budget(2012.0, 100.0, Rounding::Floor).unwrap().count, 0);
        let early = model.station_budget(2000.0, 100.0, Rounding::Floor).unwrap();
        assert!(early.before_origin && early.count == 0);
        let t = 20.0;
        let share = model.cumulative_supply(t).unwrap();
        let b = model.station_budget(2032.0, 100.0, Rounding::Floor).unwrap();
        assert_eq!(b.count, (100.0 * share).floor() as u64);
        let nearest = model.station_budget(2032.0, 100.0, Rounding::Nearest).unwrap();
        assert_eq!(nearest.count, (100.0 * share).round() as u64);
        assert!(model.station_budget(2032.0, 0.0, Rounding::Floor).is_err());
    }

    #[test]
    fn budget_floor_of_known_share() {
        // share 0.237 of 100 stations
        let bass = BassParams::share(0.005, 0.5).unwrap();
        let flat = SupplyModel::new(bass, NetFlowPoly::new(0.0, 0.0, 18.0).unwrap()).unwrap();
        // find the year at which F = 0.237 by bisection, then ask for the budget there
        let (mut lo, mut hi) = (0.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bass.cumulative_adoption(mid).unwrap() < 0.2375 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_eq!(flat.station_budget(lo, 100.0, Rounding::Floor).unwrap().count, 23);
    }

    #[test]
    fn budget_monotone_where_supply_nonnegative() {
        let bass = BassParams::new(0.005, 0.5, 1.0, 2012.0).unwrap();
        let model = SupplyModel::from_calendar(bass, REFERENCE_RHO, 2012.0, 2030.0).unwrap();
        let mut prev = 0;
        for i in 0..=400 {
            let year = 2012.0 + 0.1 * i as f64;
            let b = model.station_budget(year, 500.0, Rounding::Floor).unwrap();
            assert!(b.count <= 500);
            if model.supply_rate(year - 2012.0) >= 0.0 {
                assert!(b.count >= prev, "budget dropped at {year}");
            }
            prev = b.count;
        }
    }

    #[test]
    fn emitted_curves_are_consistent() {
        let bass = BassParams::new(0.005, 0.5, 1.0, 2012.0).unwrap();
        let model = SupplyModel::from_calendar(bass, REFERENCE_RHO, 2012.0, 2030.0).unwrap();
        let curves = model.emit_curves(&TimeGrid::new(2012.0, 2052.0, 0.1).unwrap()).unwrap();
        assert_eq!(curves.len(), 401);
        for s in &curves {
            assert!((s.q - (s.a - s.d)).abs() < 1e-9);
        }
        let last = curves.last().unwrap();
        assert!((last.t - 2052.0).abs() < 1e-9);
        assert!((last.a - last.d).abs() < 1e-12);
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn derivative_of_cumulative_supply_is_supply_rate() {
        let model = reference_model();
        let h = 1e-5;
        for i in 0..100 {
            let t = 0.37 * i as f64 + 0.01;
            if (t - model.poly.congestion_end()).abs() < 1e-3 {
                continue;
            }
            let fd = (model.cumulative_supply(t + h).unwrap() - model.cumulative_supply(t - h).unwrap()) / (2.0 * h);
            let rate = model.supply_rate(t);
            assert!(
                (fd - rate).abs() <= 1e-5 * rate.abs().max(1e-3),
                "t={t}: {fd} vs {rate}"
            );
        }
    }

    proptest! {
        #[test]
        fn classification_depends_only_on_rho_sign(
            p in 1e-3..0.05f64,
            q in 0.2..0.8f64,
            mag in 1e-6..1e-3f64,
            span in 2.0..30.0f64,
            negative in any::<bool>(),
        ) {
            let rho = if negative { -mag } else { mag };
            let model = SupplyModel::new(
                BassParams::share(p, q).unwrap(),
                NetFlowPoly::new(rho, 0.0, span).unwrap(),
            ).unwrap();
            let kind = model.classify_utilization((0.0, 100.0), 1e-12).unwrap().kind;
            let expected = if negative { UtilizationKind::Overutilization } else { UtilizationKind::Underutilization };
            prop_assert_eq!(kind, expected);
            for i in 0..50 {
                let t = 0.73 * i as f64;
                let rate_gap = model.demand_rate(t) - model.poly.net_flow_rate(t) - model.supply_rate(t);
                prop_assert!(rate_gap.abs() < 1e-12);
            }
        }
    }
}
