use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const DEFAULT_LEVEL: f64 = 0.95;

/// Diagnostics attached to an [`Estimate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// A count the plug-in standard error divides by is zero; `se` is absent.
    pub degenerate: bool,
    /// The variance radicand came out negative and was clamped to zero.
    pub radicand_clamped: bool,
    /// An overdispersion weight was negative and its term was clamped to zero.
    pub dispersion_clamped: bool,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.degenerate || self.radicand_clamped || self.dispersion_clamped
    }
}

/// Point estimate with its plug-in standard error and a normal-approximation
/// interval. `moe` is always two standard errors regardless of `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
    pub moe: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub level: f64,
    pub flags: Flags,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self::build(value, Some(se), Flags::default(), DEFAULT_LEVEL)
    }

    pub fn degenerate(value: f64) -> Self {
        let flags = Flags {
            degenerate: true,
            ..Flags::default()
        };
        Self::build(value, None, flags, DEFAULT_LEVEL)
    }

    pub(crate) fn with_flags(value: f64, se: Option<f64>, mut flags: Flags) -> Self {
        if se.is_none() {
            flags.degenerate = true;
        }
        Self::build(value, se, flags, DEFAULT_LEVEL)
    }

    fn build(value: f64, se: Option<f64>, flags: Flags, level: f64) -> Self {
        let ci = se.map(|s| normal_interval(value, s, level));
        Estimate {
            value,
            se,
            moe: se.map(|s| 2.0 * s),
            ci,
            level,
            flags,
        }
    }

    /// Recompute the interval at another confidence level.
    pub fn at_level(self, level: f64) -> Self {
        assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
        Self::build(self.value, self.se, self.flags, level)
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.degenerate
    }

    /// Shift the point value by a constant with zero variance.
    pub fn shifted(self, by: f64) -> Self {
        Self::build(self.value + by, self.se, self.flags, self.level)
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        self.ci.map(|(lo, hi)| lo <= truth && truth <= hi)
    }
}

/// Two-sided standard normal quantile for the given central coverage.
pub fn z_value(level: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + level / 2.0)
}

fn normal_interval(value: f64, se: f64, level: f64) -> (f64, f64) {
    let half = z_value(level) * se;
    ((value - half).max(0.0), (value + half).max(0.0))
}
