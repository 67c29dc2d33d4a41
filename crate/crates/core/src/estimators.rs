//! Closed-form ratio, subregion and subtotal estimators.
//!
//! All three anchor on the fixed citywide credential total `N1`:
//!
//! * ratio:      `Λ̂0(A) = N1 · n0(A) / n1(A)`
//! * subregion:  `Λ̃0(B) = N1 · n0(B) / n1(A)`
//! * subtotal:   `τ̃(B)  = N1 · (n0(B) + n1(B)) / n1(A)`
//!
//! Standard errors are delta-method plug-ins under independent Poisson
//! uncredentialed counts and multinomial credentialed counts given `N1`.
//! Whenever a count the plug-in divides by is zero the estimate carries the
//! degenerate flag and no standard error.

use serde::{Deserialize, Serialize};

use crate::error::{estimation, validation, Result};
use crate::estimate::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioInputs {
    /// Citywide credential total N1(A).
    pub cap: u64,
    pub n0: u64,
    pub n1: u64,
}

impl RatioInputs {
    pub fn new(cap: u64, n0: u64, n1: u64) -> Result<Self> {
        if cap == 0 {
            return validation("credential cap must be positive");
        }
        if n1 > cap {
            return validation(format!("n1 = {n1} exceeds the credential cap {cap}"));
        }
        Ok(RatioInputs { cap, n0, n1 })
    }
}

pub(crate) fn check_anchor(cap: u64, n1a: u64) -> Result<()> {
    if cap == 0 {
        return validation("credential cap must be positive");
    }
    if n1a > cap {
        return validation(format!("n1(A) = {n1a} exceeds the credential cap {cap}"));
    }
    if n1a == 0 {
        return estimation("no credentialed respondents");
    }
    Ok(())
}

pub fn ratio_lambda0(inputs: &RatioInputs) -> Result<Estimate> {
    subregion_lambda0(inputs.cap, inputs.n0, inputs.n1)
}

pub fn p_hat(inputs: &RatioInputs) -> Result<f64> {
    check_anchor(inputs.cap, inputs.n1)?;
    Ok(inputs.n1 as f64 / inputs.cap as f64)
}

/// Estimated total of both statuses; the cap adds no variance.
pub fn total_tau(inputs: &RatioInputs) -> Result<Estimate> {
    Ok(ratio_lambda0(inputs)?.shifted(inputs.cap as f64))
}

pub fn subregion_lambda0(cap: u64, n0b: u64, n1a: u64) -> Result<Estimate> {
    check_anchor(cap, n1a)?;
    let (n, n0, n1) = (cap as f64, n0b as f64, n1a as f64);
    let value = n * n0 / n1;
    if n0b == 0 {
        return Ok(Estimate::degenerate(value));
    }
    let se = value * (1.0 / n0 + 1.0 / n1 - 1.0 / n).sqrt();
    Ok(Estimate::new(value, se))
}

pub fn subtotal_tau(cap: u64, n0b: u64, n1b: u64, n1_complement: u64) -> Result<Estimate> {
    let n1a = n1b + n1_complement;
    check_anchor(cap, n1a)?;
    let (n, n0, nb, nc, na) = (cap as f64, n0b as f64, n1b as f64, n1_complement as f64, n1a as f64);
    let value = n * (n0 + nb) / na;
    if n0b == 0 {
        return Ok(Estimate::degenerate(value));
    }
    let lambda = n * n0 / na;
    let se = lambda * (1.0 / n0 + 1.0 / na - 1.0 / n + nb * nc / (na * n0 * n0)).sqrt();
    Ok(Estimate::new(value, se))
}

pub fn q_hat(n1b: u64, n1a: u64) -> Result<f64> {
    if n1a == 0 {
        return estimation("no credentialed respondents");
    }
    if n1b > n1a {
        return validation(format!("n1(B) = {n1b} exceeds n1(A) = {n1a}"));
    }
    Ok(n1b as f64 / n1a as f64)
}

/// Central prediction interval for a Poisson count by exact CDF summation.
/// Each end is the smallest `k` whose CDF reaches the tail target.
pub fn poisson_prediction_interval(rate: f64, level: f64) -> Result<(u64, u64)> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return validation(format!("Poisson rate must be finite and nonnegative, got {rate}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return validation(format!("level must be in (0, 1), got {level}"));
    }
    if rate == 0.0 {
        return Ok((0, 0));
    }
    let alpha = 1.0 - level;
    let lo_target = alpha / 2.0;
    let hi_target = 1.0 - alpha / 2.0;

    // Start the recursion at the log-space pmf so large rates do not underflow.
    let mut k = 0u64;
    let mut log_pmf = -rate;
    let mut cdf = log_pmf.exp();
    let mut lower = None;
    loop {
        if lower.is_none() && cdf >= lo_target {
            lower = Some(k);
        }
        if cdf >= hi_target {
            return Ok((lower.unwrap_or(k), k));
        }
        k += 1;
        log_pmf += rate.ln() - (k as f64).ln();
        cdf += log_pmf.exp();
        // Guard against rounding stalling the sum just below the target.
        if k as f64 > rate + 40.0 * rate.sqrt() + 100.0 {
            return Ok((lower.unwrap_or(k), k));
        }
    }
}
