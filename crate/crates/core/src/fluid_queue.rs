//! Polynomial arrival queue with a quadratic net flow rate.
//!
//! The net flow `pi(t) = rho (t - t0)(t - t2)` is active on the congestion
//! episode `[t0, t3]` and zero outside it. `Q(t)` is the integral of `pi`
//! from `t0`, i.e. the gap between cumulative demand and cumulative supply.
//! With `rho < 0` the gap is nonnegative: demand leads supply.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetFlowPoly {
    /// Curvature of the net flow rate.
    pub rho: f64,
    /// Congestion start.
    pub t0: f64,
    /// Time of maximum queue (second root of the net flow).
    pub t2: f64,
}

/// Closed-form values of the total delay `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalDelay {
    /// `|rho| (t3 - t0)^4 / 36`
    pub from_period: f64,
    /// `9 pi(t1)^2 / (4 |rho|)`
    pub from_midpoint_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueDiagnostics {
    pub t1: f64,
    pub t3: f64,
    pub period_p: f64,
    pub peak_queue: f64,
    pub total_delay_w: f64,
    /// Cumulative demand over the episode; only known once a demand curve is attached.
    pub total_demand_d: Option<f64>,
}

impl NetFlowPoly {
    pub fn new(rho: f64, t0: f64, t2: f64) -> Result<Self> {
        if !(rho.is_finite() && t0.is_finite() && t2.is_finite()) {
            return Err(Error::InvalidParameter("net flow polynomial must be finite".into()));
        }
        if t2 <= t0 {
            return Err(Error::InvalidParameter(format!("t2 ({t2}) must exceed t0 ({t0})")));
        }
        Ok(Self { rho, t0, t2 })
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }

    pub fn translated(self, c: f64) -> Self {
        Self {
            t0: self.t0 + c,
            t2: self.t2 + c,
            ..self
        }
    }

    /// Midpoint of the roots, where `|pi|` peaks.
    pub fn t1(&self) -> f64 {
        0.5 * (self.t0 + self.t2)
    }

    /// End of congestion: the root of `Q` after `t2`, `t0 + 1.5 (t2 - t0)`.
    pub fn congestion_end(&self) -> f64 {
        self.t0 + 1.5 * (self.t2 - self.t0)
    }

    pub fn period(&self) -> f64 {
        self.congestion_end() - self.t0
    }

    pub fn in_episode(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.congestion_end()
    }

    /// The unrestricted polynomial `rho (t - t0)(t - t2)`.
    pub fn raw_rate(&self, t: f64) -> f64 {
        self.rho * (t - self.t0) * (t - self.t2)
    }

    /// Net flow rate, zero outside the congestion episode.
    pub fn net_flow_rate(&self, t: f64) -> f64 {
        if self.in_episode(t) {
            self.raw_rate(t)
        } else {
            0.0
        }
    }

    /// Virtual queue `Q(t) = rho [u^3/3 - (t2 - t0) u^2 / 2]`, `u = t - t0`,
    /// zero before `t0` and after `t3`.
    pub fn queue_length(&self, t: f64) -> f64 {
        if !self.in_episode(t) {
            return 0.0;
        }
        let u = t - self.t0;
        let span = self.t2 - self.t0;
        self.rho * u * u * (u / 3.0 - span / 2.0)
    }

    pub fn peak_queue(&self) -> f64 {
        self.queue_length(self.t2).abs()
    }

    pub fn total_delay(&self) -> TotalDelay {
        let abs_rho = self.rho.abs();
        let from_period = abs_rho * self.period().powi(4) / 36.0;
        let from_midpoint_rate = if abs_rho == 0.0 {
            0.0
        } else {
            let pi1 = self.raw_rate(self.t1());
            9.0 * pi1 * pi1 / (4.0 * abs_rho)
        };
        TotalDelay {
            from_period,
            from_midpoint_rate,
        }
    }

    pub fn diagnostics(&self) -> QueueDiagnostics {
        QueueDiagnostics {
            t1: self.t1(),
            t3: self.congestion_end(),
            period_p: self.period(),
            peak_queue: self.peak_queue(),
            total_delay_w: self.total_delay().from_period,
            total_demand_d: None,
        }
    }
}
