//! Count distributions used by the simulators and the hierarchical models.
//!
//! Negative binomial and negative hypergeometric laws use the "total trials"
//! convention: `n` counts every trial up to and including the `r`-th success,
//! so the support starts at `r`. With failure probability `q` and success
//! probability `1 − q` the negative binomial has
//!
//! * `P(n) = C(n−1, r−1) (1−q)^r q^(n−r)`,
//! * mean `r / (1−q)` and variance `r q / (1−q)²`.
//!
//! Parameterized by mean `mu` and vendors-per-market `rho`, `r = mu / rho` and
//! `q = 1 − 1/rho`, so the variance is `mu (rho − 1)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{validation, Result};

pub fn draw_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return validation(format!("Poisson rate must be finite and nonnegative, got {rate}"));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(rate).map_err(|e| crate::Error::Validation(format!("Poisson({rate}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

pub fn draw_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return validation(format!("binomial probability must be in [0, 1], got {p}"));
    }
    let d = Binomial::new(n, p).map_err(|e| crate::Error::Validation(format!("Binomial({n}, {p}): {e}")))?;
    Ok(d.sample(rng))
}

/// Multinomial draw by sequential conditional binomials. `probs` must sum to
/// one within `1e-9`; the last category absorbs rounding.
pub fn draw_multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return validation("multinomial needs at least one category");
    }
    if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return validation(format!("multinomial probability {bad} is invalid"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return validation(format!("multinomial probabilities sum to {total}, not 1"));
    }
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = draw_binomial(left, cond, rng)?;
        out[i] = k;
        left -= k;
        mass -= p;
    }
    Ok(out)
}

/// Negative binomial parameters under the total-trials convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinomial {
    pub r: f64,
    pub q: f64,
}

impl NegBinomial {
    /// From mean and variance: `rho = 1 + variance / mean`.
    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return validation(format!("negative binomial mean must be positive, got {mean}"));
        }
        if !(variance >= 0.0 && variance.is_finite()) {
            return validation(format!("negative binomial variance must be nonnegative, got {variance}"));
        }
        Self::from_mean_rho(mean, 1.0 + variance / mean)
    }

    pub fn from_mean_rho(mu: f64, rho: f64) -> Result<Self> {
        if !(mu > 0.0 && rho >= 1.0 && rho.is_finite()) {
            return validation(format!("infeasible negative binomial (mu = {mu}, rho = {rho})"));
        }
        Ok(NegBinomial {
            r: mu / rho,
            q: 1.0 - 1.0 / rho,
        })
    }

    pub fn mean(&self) -> f64 {
        self.r / (1.0 - self.q)
    }

    pub fn variance(&self) -> f64 {
        self.r * self.q / ((1.0 - self.q) * (1.0 - self.q))
    }

    /// `n = r + F` with `F` a gamma-Poisson mixture counting failures. A
    /// fractional `r` is split into its integer part plus a Bernoulli draw on
    /// the remainder, which keeps the mean exact and adds at most 1/4 to the
    /// variance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let base = self.r.floor();
        let frac = self.r - base;
        let shift = base as u64 + u64::from(frac > 0.0 && rng.random::<f64>() < frac);
        if self.q <= 0.0 || self.r <= 0.0 {
            return Ok(shift);
        }
        let scale = self.q / (1.0 - self.q);
        let g = Gamma::new(self.r, scale)
            .map_err(|e| crate::Error::Validation(format!("Gamma({}, {scale}): {e}", self.r)))?
            .sample(rng);
        Ok(shift + draw_poisson(g, rng)?)
    }
}

pub fn draw_negative_binomial<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> Result<u64> {
    NegBinomial::from_mean_variance(mean, variance)?.sample(rng)
}

/// Log-mass `lgamma(n) − lgamma(r) − lgamma(n−r+1) + (n−r) ln q + r ln(1−q)`
/// with `r = mu/rho`, `q = 1 − 1/rho`; `−∞` outside the feasible region.
/// `n ≤ 0` is also infeasible since `lgamma(0)` diverges.
pub fn nb_logmass(n: u64, mu: f64, rho: f64) -> f64 {
    let r = mu / rho;
    let q = 1.0 - 1.0 / rho;
    if !(r > 0.0 && q > 0.0 && q < 1.0) {
        return f64::NEG_INFINITY;
    }
    let n = n as f64;
    if n <= 0.0 || n - r + 1.0 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n) - ln_gamma(r) - ln_gamma(n - r + 1.0) + (n - r) * q.ln() + r * (-q).ln_1p()
}

/// Multivariate negative hypergeometric log-mass
/// `Σ_j [lgamma(n_j) − lgamma(r_j) − lgamma(n_j − r_j + 1)] − [lgamma(N) − lgamma(R) − lgamma(N − R + 1)]`.
///
/// For integer `r` this is the law of the category totals of a Pólya urn
/// seeded with `r_j` balls per category and grown to `N` balls.
pub fn mnh_logmass(n_aug: &[u64], r: &[f64]) -> f64 {
    if n_aug.len() != r.len() || r.is_empty() {
        return f64::NEG_INFINITY;
    }
    let n_tot: f64 = n_aug.iter().map(|&n| n as f64).sum();
    let r_tot: f64 = r.iter().sum();
    if !(r_tot > 0.0) || n_tot - r_tot + 1.0 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut lp = 0.0;
    for (&n, &rj) in n_aug.iter().zip(r) {
        let n = n as f64;
        if n <= 0.0 || !(rj > 0.0) || n - rj + 1.0 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        lp += ln_gamma(n) - ln_gamma(rj) - ln_gamma(n - rj + 1.0);
    }
    lp - (ln_gamma(n_tot) - ln_gamma(r_tot) - ln_gamma(n_tot - r_tot + 1.0))
}

/// Pólya urn: start with `seeds[j]` balls in category `j` and add balls one
/// at a time, each joining a category with probability proportional to its
/// current size, until `total` balls are present. Returns category sizes.
pub fn draw_mnh<R: Rng + ?Sized>(total: u64, seeds: &[u64], rng: &mut R) -> Result<Vec<u64>> {
    let start: u64 = seeds.iter().sum();
    if start == 0 {
        return validation("urn needs at least one seed ball");
    }
    if start > total {
        return validation(format!("urn seeded with {start} balls exceeds the total {total}"));
    }
    let mut counts = seeds.to_vec();
    let mut size = start;
    while size < total {
        let mut u = rng.random_range(0..size);
        for c in counts.iter_mut() {
            if u < *c {
                *c += 1;
                break;
            }
            u -= *c;
        }
        size += 1;
    }
    Ok(counts)
}

/// Round nonnegative reals to integers with the given total by the largest
/// remainder method. Returns the integers and whether any value moved.
pub fn apportion(values: &[f64], total: u64) -> Result<(Vec<u64>, bool)> {
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return validation(format!("cannot apportion {bad}"));
    }
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) {
        return validation("cannot apportion an all-zero vector");
    }
    let scaled: Vec<f64> = values.iter().map(|v| v * total as f64 / sum).collect();
    let mut out: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable on ties so the result is deterministic.
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    let moved = out
        .iter()
        .zip(values)
        .any(|(&o, &v)| (o as f64 - v).abs() > 1e-9);
    Ok((out, moved))
}
