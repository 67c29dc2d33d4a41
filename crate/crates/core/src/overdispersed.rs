//! Standard errors under market clustering.
//!
//! When vendors cluster in markets, counts are negative binomial for the
//! uncredentialed and multivariate negative hypergeometric for the
//! credentialed, and the Poisson/multinomial variances inflate by the
//! dispersion weights
//!
//! * `û0 = (N1 n0(B) / n1(A) − M0(B)) / M0(B)` (vendors per market minus one),
//! * `u1 = (N1 − M1(A)) / (M1(A) + 1)`,
//!
//! where `M0`, `M1` are market counts for each status.

use serde::{Deserialize, Serialize};

use crate::counts::CountTable;
use crate::error::{validation, Result};
use crate::estimate::{Estimate, Flags};
use crate::estimators::{check_anchor, subregion_lambda0, subtotal_tau};
use crate::partition::Subregion;

/// Market counts per partition slot for each status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
}

impl MarketModel {
    pub fn new(m0: Vec<f64>, m1: Vec<f64>) -> Result<Self> {
        if m0.len() != m1.len() {
            return validation("m0 and m1 must have one entry per slot");
        }
        if let Some(bad) = m0.iter().chain(&m1).find(|m| !(m.is_finite() && **m >= 0.0)) {
            return validation(format!("market count must be finite and nonnegative, got {bad}"));
        }
        Ok(MarketModel { m0, m1 })
    }

    /// Same market count for both statuses in every slot.
    pub fn shared(markets: Vec<f64>) -> Result<Self> {
        Self::new(markets.clone(), markets)
    }

    pub fn m0_over(&self, b: &Subregion) -> f64 {
        b.indices().map(|i| self.m0[i]).sum()
    }

    pub fn m0_total(&self) -> f64 {
        self.m0.iter().sum()
    }

    pub fn m1_total(&self) -> f64 {
        self.m1.iter().sum()
    }

    fn check_slots(&self, table: &CountTable) -> Result<()> {
        if self.m0.len() != table.n0().len() {
            return validation(format!(
                "market model has {} slots, count table has {}",
                self.m0.len(),
                table.n0().len()
            ));
        }
        Ok(())
    }
}

/// `u1 = (N1 − M1(A)) / (M1(A) + 1)`.
pub fn u1(cap: u64, m1_total: f64) -> Result<f64> {
    if cap == 0 {
        return validation("credential cap must be positive");
    }
    if !(m1_total >= 0.0) {
        return validation("credentialed market total must be nonnegative");
    }
    Ok((cap as f64 - m1_total) / (m1_total + 1.0))
}

/// `û0 = (Λ̃0(B) − M0(B)) / M0(B)`.
pub fn u0_hat(cap: u64, n0b: u64, n1a: u64, m0b: f64) -> Result<f64> {
    check_anchor(cap, n1a)?;
    if !(m0b > 0.0) {
        return validation("uncredentialed market total over the subregion must be positive");
    }
    let lambda = cap as f64 * n0b as f64 / n1a as f64;
    Ok((lambda - m0b) / m0b)
}

/// Mean vendors per market, `Λ̂0 / M0`.
pub fn vendors_per_market(lambda0: f64, markets: f64) -> Result<f64> {
    if !(markets > 0.0) {
        return validation("market count must be positive");
    }
    Ok(lambda0 / markets)
}

/// Dispersion weights after clamping negatives to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub u0: f64,
    pub u1: f64,
    pub clamped: bool,
}

impl Dispersion {
    pub fn new(u0: f64, u1: f64) -> Self {
        Dispersion {
            u0: u0.max(0.0),
            u1: u1.max(0.0),
            clamped: u0 < 0.0 || u1 < 0.0,
        }
    }
}

fn finish(value: f64, scale: f64, radicand: f64, d: Dispersion) -> Estimate {
    let flags = Flags {
        dispersion_clamped: d.clamped,
        ..Flags::default()
    };
    Estimate::with_flags(value, Some(scale * radicand.max(0.0).sqrt()), flags)
}

/// Subregion estimate with the overdispersed standard error
/// `Λ̃0 √(û0/n0(B) + u1 (1/n1(A) − 1/N1))`.
pub fn od_subregion(cap: u64, n0b: u64, n1a: u64, d: Dispersion) -> Result<Estimate> {
    let base = subregion_lambda0(cap, n0b, n1a)?;
    if base.is_degenerate() {
        return Ok(base);
    }
    let (n, n0, n1) = (cap as f64, n0b as f64, n1a as f64);
    let r = d.u0 / n0 + d.u1 * (1.0 / n1 - 1.0 / n);
    Ok(finish(base.value, base.value, r, d))
}

/// Citywide ratio with the overdispersed standard error.
pub fn od_ratio(cap: u64, n0: u64, n1: u64, d: Dispersion) -> Result<Estimate> {
    od_subregion(cap, n0, n1, d)
}

/// Subtotal with the overdispersed standard error; `u1` scales the whole
/// credentialed bracket including the cross term.
pub fn od_subtotal(cap: u64, n0b: u64, n1b: u64, n1_complement: u64, d: Dispersion) -> Result<Estimate> {
    let base = subtotal_tau(cap, n0b, n1b, n1_complement)?;
    if base.is_degenerate() {
        return Ok(base);
    }
    let n1a = n1b + n1_complement;
    let (n, n0, nb, nc, na) = (cap as f64, n0b as f64, n1b as f64, n1_complement as f64, n1a as f64);
    let lambda = n * n0 / na;
    let r = d.u0 / n0 + d.u1 * (1.0 / na - 1.0 / n + nb * nc / (na * n0 * n0));
    Ok(finish(base.value, lambda, r, d))
}

/// Plug-in dispersion for a subregion from a count table and market model.
pub fn dispersion_for(table: &CountTable, markets: &MarketModel, b: &Subregion) -> Result<Dispersion> {
    markets.check_slots(table)?;
    let c = table.subregion_counts(b)?;
    let u0 = u0_hat(table.cap(), c.n0b, c.n1a(), markets.m0_over(b))?;
    let u1 = u1(table.cap(), markets.m1_total())?;
    Ok(Dispersion::new(u0, u1))
}

/// Citywide dispersion: `û0` uses every slot's uncredentialed count.
pub fn dispersion_citywide(table: &CountTable, markets: &MarketModel) -> Result<Dispersion> {
    markets.check_slots(table)?;
    let u0 = u0_hat(table.cap(), table.n0_total(), table.n1_total(), markets.m0_total())?;
    let u1 = u1(table.cap(), markets.m1_total())?;
    Ok(Dispersion::new(u0, u1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::EstimationClass;
    use crate::estimators::ratio_lambda0;
    use crate::estimators::RatioInputs;
    use approx::assert_relative_eq;

    #[test]
    fn poisson_limit_recovers_base_se() {
        // Unit dispersion weights reduce to the Poisson/multinomial formula.
        let d = Dispersion::new(1.0, 1.0);
        let od = od_ratio(5100, 1051, 349, d).unwrap();
        let base = ratio_lambda0(&RatioInputs::new(5100, 1051, 349).unwrap()).unwrap();
        assert_relative_eq!(od.se.unwrap(), base.se.unwrap(), max_relative = 1e-12);
        let st = od_subtotal(100, 5, 4, 16, d).unwrap();
        assert_relative_eq!(st.se.unwrap(), 15.165750888103101, max_relative = 1e-12);
    }

    #[test]
    fn food_five_vendors_per_market() {
        let lambda = 5100.0 * 1051.0 / 349.0;
        let u1v = u1(5100, 1020.0).unwrap();
        assert_relative_eq!(u1v, 4080.0 / 1021.0, max_relative = 1e-12);
        let u0 = u0_hat(5100, 1051, 349, lambda / 5.0).unwrap();
        assert_relative_eq!(u0, 4.0, max_relative = 1e-12);
        let e = od_ratio(5100, 1051, 349, Dispersion::new(u0, u1v)).unwrap();
        let expected = lambda * (4.0 / 1051.0 + u1v * (1.0 / 349.0 - 1.0 / 5100.0)).sqrt();
        assert_relative_eq!(e.se.unwrap(), expected, max_relative = 1e-12);
        let ratio = e.se.unwrap() / 924.156000127452706;
        assert!((ratio - 2.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn negative_u0_clamped_and_flagged() {
        let d = Dispersion::new(u0_hat(100, 5, 20, 50.0).unwrap(), 1.0);
        assert!(d.clamped);
        let e = od_subregion(100, 5, 20, d).unwrap();
        assert!(e.flags.dispersion_clamped);
        assert_relative_eq!(e.se.unwrap(), 25.0 * (1.0f64 / 20.0 - 0.01).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_passthrough() {
        let e = od_subregion(100, 0, 20, Dispersion::new(2.0, 2.0)).unwrap();
        assert!(e.is_degenerate());
    }

    #[test]
    fn market_model_validation() {
        assert!(MarketModel::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(MarketModel::new(vec![-1.0], vec![1.0]).is_err());
        let t = CountTable::new(EstimationClass::Food, vec![10, 5, 0], vec![4, 6, 0], 100).unwrap();
        let m = MarketModel::shared(vec![10.0, 10.0, 0.0]).unwrap();
        let d = dispersion_citywide(&t, &m).unwrap();
        assert_relative_eq!(d.u0, (150.0 - 20.0) / 20.0, max_relative = 1e-12);
        assert_relative_eq!(d.u1, 80.0 / 21.0, max_relative = 1e-12);
        let wrong = MarketModel::shared(vec![1.0]).unwrap();
        assert!(dispersion_citywide(&t, &wrong).is_err());
    }
}
