//! Closed-form Bass innovation-diffusion demand model.
//!
//! All time arguments are years since [`BassParams::t_origin`]; calendar
//! conversion happens through [`BassParams::years_since_origin`] and
//! [`BassParams::calendar_year`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Above this exponent magnitude the closed forms are replaced by their limits.
const EXP_SAFE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BassParams {
    /// Coefficient of innovation (1/year).
    pub p: f64,
    /// Coefficient of imitation (1/year).
    pub q: f64,
    /// Market size. `1.0` yields share units.
    pub m: f64,
    /// Calendar year at which the diffusion clock starts.
    pub t_origin: f64,
}

impl BassParams {
    pub fn new(p: f64, q: f64, m: f64, t_origin: f64) -> Result<Self> {
        let params = Self { p, q, m, t_origin };
        params.validate()?;
        Ok(params)
    }

    /// Share-unit parameters (`m = 1`) with the clock starting at year 0.
    pub fn share(p: f64, q: f64) -> Result<Self> {
        Self::new(p, q, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        positive("p", self.p)?;
        positive("q", self.q)?;
        positive("m", self.m)?;
        if !self.t_origin.is_finite() {
            return Err(Error::InvalidParameter("t_origin must be finite".into()));
        }
        Ok(())
    }

    pub fn with_market(self, m: f64) -> Self {
        Self { m, ..self }
    }

    pub fn years_since_origin(&self, year: f64) -> f64 {
        year - self.t_origin
    }

    pub fn calendar_year(&self, t: f64) -> f64 {
        self.t_origin + t
    }

    fn total_rate(&self) -> f64 {
        self.p + self.q
    }

    /// Cumulative adopters `F(t) = m (1 - e^{-(p+q)t}) / (1 + (q/p) e^{-(p+q)t})`.
    pub fn cumulative_adoption(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("cumulative_adoption at non-finite t = {t}")));
        }
        let s = self.total_rate();
        let st = s * t;
        if st > EXP_SAFE {
            return Ok(self.m);
        }
        if st < -EXP_SAFE {
            // F(t) -> -m p / q as t -> -inf
            return Ok(-self.m * self.p / self.q);
        }
        let e = (-st).exp();
        Ok(self.m * (1.0 - e) / (1.0 + self.q / self.p * e))
    }

    /// Adoption rate `dF/dt = m p (p+q)^2 e^{(p+q)t} / (p e^{(p+q)t} + q)^2`.
    ///
    /// Evaluated through `e^{-|s t|}` so it never overflows; the rate tends to
    /// zero for `t -> +-inf`.
    pub fn adoption_rate(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        let (p, q) = (self.p, self.q);
        let s = self.total_rate();
        let st = s * t;
        if st.abs() > EXP_SAFE {
            return 0.0;
        }
        if st >= 0.0 {
            let e = (-st).exp();
            let den = p + q * e;
            self.m * p * s * s * e / (den * den)
        } else {
            let e = st.exp();
            let den = p * e + q;
            self.m * p * s * s * e / (den * den)
        }
    }

    /// Time of maximum adoption rate, `ln(q/p) / (p+q)`.
    pub fn peak_time(&self) -> Result<f64> {
        if self.q <= self.p {
            return Err(Error::NoInteriorPeak { p: self.p, q: self.q });
        }
        Ok((self.q / self.p).ln() / self.total_rate())
    }

    /// Maximum adoption rate `m (p+q)^2 / (4q)`, attained at [`Self::peak_time`].
    pub fn peak_rate(&self) -> Result<f64> {
        self.peak_time()?;
        let s = self.total_rate();
        Ok(self.m * s * s / (4.0 * self.q))
    }

    /// Inflection points of the adoption rate, `peak -+ ln(2 + sqrt 3) / (p+q)`.
    pub fn inflection_times(&self) -> Result<(f64, f64)> {
        let peak = self.peak_time()?;
        let offset = (2.0 + 3f64.sqrt()).ln() / self.total_rate();
        Ok((peak - offset, peak + offset))
    }
}
