use log::warn;
use serde::{Deserialize, Serialize};

use super::PlanReport;
use crate::milp::Solution;
use crate::path_network::MilpInstance;
use crate::{Error, Result};

/// Parameters of the station delay stand-in `w = scale * alpha * (D/C)^beta`.
///
/// The power law is a configurable placeholder, not a calibrated queueing
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    pub alpha: f64,
    pub beta: f64,
    pub service_time_scale: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 4.0,
            service_time_scale: 1.0,
        }
    }
}

impl DelayParams {
    pub fn delay(&self, dc_ratio: f64) -> f64 {
        if dc_ratio <= 0.0 {
            0.0
        } else {
            self.service_time_scale * self.alpha * dc_ratio.powf(self.beta)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEvaluation {
    /// Construction cost of the open stations.
    pub base_objective: f64,
    /// `vot * sum of station delays`.
    pub delay_cost: f64,
    pub augmented_objective: f64,
    pub inflow: Vec<f64>,
    pub dc_ratio: Vec<f64>,
    pub delay: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Construction cost plus the value of time lost queueing at open stations.
pub fn evaluate_delay(inst: &MilpInstance, sol: &Solution, vot: f64, params: &DelayParams) -> Result<DelayEvaluation> {
    if !sol.has_plan() {
        return Err(Error::Input(format!(
            "cannot evaluate delay of a {:?} solution",
            sol.status
        )));
    }
    let inflow = sol.site_inflows(inst);
    let dc_ratio: Vec<f64> = inflow
        .iter()
        .zip(&inst.sites)
        .map(|(&v, s)| if s.capacity > 0.0 { v / s.capacity } else { 0.0 })
        .collect();
    let mut warnings = Vec::new();
    let delay: Vec<f64> = if inst.uncapacitated {
        let msg = "stations are uncapacitated; queueing delay taken as 0".to_string();
        warn!("{msg}");
        warnings.push(msg);
        vec![0.0; inst.sites.len()]
    } else {
        dc_ratio
            .iter()
            .zip(&sol.y)
            .map(|(&x, &open)| if open { params.delay(x) } else { 0.0 })
            .collect()
    };
    let delay_cost = vot * delay.iter().sum::<f64>();
    Ok(DelayEvaluation {
        base_objective: sol.objective,
        delay_cost,
        augmented_objective: sol.objective + delay_cost,
        inflow,
        dc_ratio,
        delay,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub ev_count: f64,
    pub open_stations: usize,
    /// Undefined when no station is open.
    pub ev_cs_ratio: Option<f64>,
    pub max_dc: f64,
    /// Advisory text; nothing is re-fitted automatically.
    pub suggestion: Option<String>,
    pub flags: Vec<String>,
}

/// EV-per-station ratio and a utilization check on the planned network.
pub fn feedback_metrics(report: &PlanReport, ev_count: f64, dc_threshold: f64) -> Feedback {
    let open: Vec<_> = report.stations.iter().filter(|s| s.open).collect();
    let max_dc = open.iter().map(|s| s.dc_ratio).fold(0.0, f64::max);
    let mut flags = Vec::new();
    let ev_cs_ratio = if open.is_empty() {
        flags.push("no open stations; EV/CS ratio undefined".to_string());
        None
    } else {
        Some(ev_count / open.len() as f64)
    };
    let suggestion = (max_dc > dc_threshold).then(|| {
        format!(
            "peak demand-to-capacity ratio {max_dc} exceeds {dc_threshold}: consider a stronger supply \
             response (larger |rho|) or an earlier peak gap (earlier t2), then re-plan"
        )
    });
    Feedback {
        ev_count,
        open_stations: open.len(),
        ev_cs_ratio,
        max_dc,
        suggestion,
        flags,
    }
}
