//! Box-scaled gating distance.
//!
//! A centre residual is whitened by a diagonal covariance built from the
//! tracklet's Kalman width and height and from how long ago it was last
//! updated, instead of the filter's own (unreliable at low rates) covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbdParams {
    /// Lower clip on staleness, seconds.
    pub alpha: f64,
    /// Upper clip on staleness, seconds.
    pub beta: f64,
    /// Scale applied to width and height.
    pub c: f64,
}

impl Default for BbdParams {
    fn default() -> Self {
        BbdParams { alpha: 0.025, beta: 0.25, c: 1.0 }
    }
}

impl BbdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= self.beta && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "bbd clip bounds must satisfy 0 < alpha <= beta, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("bbd scale c must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// Diagonal 2×2 gating covariance, pixels²·seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingCovariance {
    pub var_x: f64,
    pub var_y: f64,
}

pub fn clip_tau(delta_tau: f64, params: &BbdParams) -> f64 {
    delta_tau.max(params.alpha).min(params.beta)
}

pub fn gating_covariance(w: f64, h: f64, delta_tau: f64, params: &BbdParams) -> GatingCovariance {
    let tau = clip_tau(delta_tau, params);
    GatingCovariance { var_x: (params.c * w).powi(2) * tau, var_y: (params.c * h).powi(2) * tau }
}

pub fn bbd(predicted_center: (f64, f64), detected_center: (f64, f64), cov: &GatingCovariance) -> f64 {
    let dx = detected_center.0 - predicted_center.0;
    let dy = detected_center.1 - predicted_center.1;
    (dx * dx / cov.var_x + dy * dy / cov.var_y).sqrt()
}
