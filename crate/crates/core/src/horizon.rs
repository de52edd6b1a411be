//! Stability horizons and suboptimality degrees for receding-horizon
//! control under a linear value/stage-cost bound.
//!
//! Everything here is a function of one certified ratio `gamma >= 1`
//! (between a controller's closed-loop cost vector and the stage weight)
//! and the horizon `N >= 2`. The suboptimality degree is
//!
//! ```text
//! alpha_N = 1 - (gamma - 1)^N / (gamma^(N-1) - (gamma - 1)^(N-1)),
//! ```
//!
//! evaluated in log space so large horizons cannot overflow. The
//! receding-horizon controller with horizon `N` is asymptotically
//! stabilizing and achieves closed-loop cost at most `V_N(x0) / alpha_N`
//! exactly when `alpha_N > 0`, which holds iff
//!
//! ```text
//! N > 2 + ln(gamma - 1) / (ln gamma - ln(gamma - 1)).
//! ```

use crate::error::{Error, Result};

/// Ratios within this distance of 1 are treated as exactly 1 (the
/// one-step-to-zero regime where every horizon is optimal).
const UNIT_RATIO_TOL: f64 = 1e-12;

/// Guard against a just-below-integer threshold produced by float roundoff.
const THRESHOLD_NUDGE: f64 = 1e-12;

/// The smallest horizon with a positive suboptimality degree.
///
/// Errors with [`Error::GammaBelowOne`] when `gamma < 1`; a certified
/// ratio is never below 1, so such an input is a caller mistake.
pub fn minimal_horizon(gamma: f64) -> Result<u32> {
    if gamma < 1.0 - UNIT_RATIO_TOL {
        return Err(Error::GammaBelowOne { gamma });
    }
    if gamma <= 1.0 + UNIT_RATIO_TOL {
        return Ok(2);
    }
    let d = gamma.ln() - (gamma - 1.0).ln();
    let threshold = 2.0 + (gamma - 1.0).ln() / d;
    let n0 = (threshold + THRESHOLD_NUDGE).floor() as i64 + 1;
    Ok(n0.max(2) as u32)
}

/// The suboptimality degree `alpha_N` for horizon `horizon >= 2`.
///
/// Nonpositive values are returned as computed: they mean the horizon
/// carries no closed-loop guarantee.
pub fn alpha(gamma: f64, horizon: u32) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::HorizonTooShort { n: horizon });
    }
    if gamma < 1.0 - UNIT_RATIO_TOL {
        return Err(Error::GammaBelowOne { gamma });
    }
    if gamma <= 1.0 + UNIT_RATIO_TOL {
        return Ok(1.0);
    }
    let n = f64::from(horizon);
    let d = gamma.ln() - (gamma - 1.0).ln();
    // (gamma-1)^N / (gamma^(N-1) - (gamma-1)^(N-1))
    //   = exp(N ln(gamma-1) - (N-1) ln gamma - ln(1 - exp(-(N-1) d))).
    let tail = -(-(n - 1.0) * d).exp_m1(); // 1 - exp(-(N-1) d), stable near 0
    let log_ratio = n * (gamma - 1.0).ln() - (n - 1.0) * gamma.ln() - tail.ln();
    Ok(1.0 - log_ratio.exp())
}

/// The smallest horizon whose suboptimality degree reaches `target`.
///
/// `target` must lie in `(0, 1)` when `gamma > 1` (the degree approaches
/// but never attains 1); for `gamma = 1` every horizon has degree 1.
pub fn smallest_horizon_for_alpha(gamma: f64, target: f64) -> Result<u32> {
    if !(target > 0.0) {
        return Err(Error::InfeasibleInput(format!(
            "the suboptimality target must be positive, got {target}"
        )));
    }
    if gamma < 1.0 - UNIT_RATIO_TOL {
        return Err(Error::GammaBelowOne { gamma });
    }
    if gamma <= 1.0 + UNIT_RATIO_TOL {
        return if target <= 1.0 {
            Ok(2)
        } else {
            Err(Error::InfeasibleInput(format!(
                "no horizon reaches a suboptimality degree of {target} > 1"
            )))
        };
    }
    if target >= 1.0 {
        return Err(Error::InfeasibleInput(format!(
            "the suboptimality degree approaches 1 but never attains it, \
             so a target of {target} is unreachable"
        )));
    }
    let mut n = minimal_horizon(gamma)?;
    const HORIZON_SCAN_LIMIT: u32 = 1_000_000;
    while alpha(gamma, n)? < target {
        n += 1;
        if n > HORIZON_SCAN_LIMIT {
            return Err(Error::MaxIterations { limit: HORIZON_SCAN_LIMIT as usize });
        }
    }
    Ok(n)
}

/// A horizon together with its guarantee.
#[derive(Debug, Clone, Copy)]
pub struct HorizonCertificate {
    pub gamma: f64,
    /// Smallest horizon with any guarantee at this ratio.
    pub minimal: u32,
    /// The horizon this certificate is about.
    pub horizon: u32,
    /// Suboptimality degree of `horizon` (positive iff `horizon >= minimal`).
    pub alpha: f64,
    /// Closed-loop cost is at most `suboptimality_factor` times the
    /// open-loop optimum; infinite when there is no guarantee.
    pub suboptimality_factor: f64,
}

/// Evaluates the guarantee of `horizon` at ratio `gamma`.
pub fn horizon_certificate(gamma: f64, horizon: u32) -> Result<HorizonCertificate> {
    let minimal = minimal_horizon(gamma)?;
    let a = alpha(gamma, horizon)?;
    Ok(HorizonCertificate {
        gamma,
        minimal,
        horizon,
        alpha: a,
        suboptimality_factor: if a > 0.0 { 1.0 / a } else { f64::INFINITY },
    })
}

/// Upper bound on the receding-horizon closed-loop cost from an open-loop
/// value `v` and a positive suboptimality degree.
pub fn performance_bound(v: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InfeasibleInput(format!(
            "a performance bound needs a positive suboptimality degree, got {alpha}"
        )));
    }
    Ok(v / alpha)
}
