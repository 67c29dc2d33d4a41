//! Hierarchical Bayesian Models 4 and 5 and an adaptive Metropolis fit.
//!
//! Per cell `i`, with non-centered parameters:
//!
//! * `logit p_i = mu_p + sigma_p · alpha_raw_i`
//! * `log Λ0_i = mu_0 + sigma_0 · eta0_raw_i`
//! * `log Λ1_i = sigma_1 · eta1_raw_i` (`mu_1 = 0`)
//!
//! Model 4 has Poisson uncredentialed counts and multinomial credentialed
//! counts with probabilities `p_i r_i`, `r = softmax(eta1)`, where `eta1`
//! sums to zero (its last entry is minus the sum of the others). Model 5 has
//! negative binomial uncredentialed counts with vendors-per-market `rho_i`
//! and negative hypergeometric credentialed counts with market weights
//! `s_i = (Σ Λ0/rho) p_i Λ1_i / Σ Λ1`; its `eta1` is unconstrained.
//!
//! The hyperparameters have flat priors (the scales flat on `(0, ∞)`), or an
//! optional proper prior used for calibration studies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{draw_multinomial, draw_poisson};
use crate::error::{validation, Error, Result};
use crate::rng::{RngStream, JOINT_CELL};

pub use crate::distributions::{mnh_logmass, nb_logmass};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const CHAIN_STREAM: u64 = 0x4d43_4d43;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HierModel {
    #[serde(rename = "4")]
    Model4,
    #[serde(rename = "5")]
    Model5,
}

/// Observed data: per-cell counts, the credential total and, for Model 5,
/// vendors per market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitData {
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    pub n0: Vec<u64>,
    pub n1: Vec<u64>,
    #[serde(rename = "N1")]
    pub n1_total: u64,
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
}

impl FitData {
    pub fn new(n0: Vec<u64>, n1: Vec<u64>, n1_total: u64) -> Self {
        FitData {
            k: Some(n0.len()),
            n0,
            n1,
            n1_total,
            rho: None,
        }
    }

    pub fn with_rho(mut self, rho: Vec<f64>) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn cells(&self) -> usize {
        self.n0.len()
    }

    pub fn validate(&self, model: HierModel) -> Result<()> {
        let k = self.n0.len();
        if k == 0 || self.n1.len() != k {
            return validation("n0 and n1 must have the same nonzero length");
        }
        if let Some(declared) = self.k {
            if declared != k {
                return validation(format!("K = {declared} but {k} cells were given"));
            }
        }
        let n1: u64 = self.n1.iter().sum();
        if n1 > self.n1_total {
            return validation(format!("credentialed counts {n1} exceed N1 = {}", self.n1_total));
        }
        if model == HierModel::Model5 {
            let Some(rho) = &self.rho else {
                return validation("model 5 needs rho");
            };
            if rho.len() != k {
                return validation(format!("rho has {} entries for {k} cells", rho.len()));
            }
            if let Some(bad) = rho.iter().find(|r| !(**r > 1.0 && r.is_finite())) {
                return validation(format!("rho must exceed 1, got {bad}"));
            }
            // The negative binomial and negative hypergeometric masses are
            // zero at a zero count.
            if self.n0.contains(&0) || self.n1.contains(&0) || n1 == self.n1_total {
                return validation("model 5 needs every count, and N1 − n1(A), to be positive");
            }
        }
        Ok(())
    }
}

/// Proper hyperprior: normal on the two locations, half-normal on the scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub mu_p: (f64, f64),
    pub mu_0: (f64, f64),
    pub sigma_p: f64,
    pub sigma_0: f64,
    pub sigma_1: f64,
}

impl HyperPrior {
    fn logdensity(&self, h: &HierParams) -> f64 {
        let normal = |x: f64, m: f64, s: f64| -0.5 * ((x - m) / s).powi(2) - s.ln();
        let half = |x: f64, s: f64| -0.5 * (x / s).powi(2) - s.ln();
        normal(h.mu_p, self.mu_p.0, self.mu_p.1)
            + normal(h.mu_0, self.mu_0.0, self.mu_0.1)
            + half(h.sigma_p, self.sigma_p)
            + half(h.sigma_0, self.sigma_0)
            + half(h.sigma_1, self.sigma_1)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, f64, f64, f64) {
        let z = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        (
            self.mu_p.0 + self.mu_p.1 * z(rng),
            self.sigma_p * z(rng).abs(),
            self.mu_0.0 + self.mu_0.1 * z(rng),
            self.sigma_0 * z(rng).abs(),
            self.sigma_1 * z(rng).abs(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierParams {
    pub mu_p: f64,
    pub sigma_p: f64,
    pub alpha_raw: Vec<f64>,
    pub mu_0: f64,
    pub sigma_0: f64,
    pub eta0_raw: Vec<f64>,
    pub sigma_1: f64,
    /// `K − 1` entries for Model 4, `K` for Model 5.
    pub eta1_raw: Vec<f64>,
}

fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl HierParams {
    pub fn cells(&self) -> usize {
        self.alpha_raw.len()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha_raw.iter().map(|a| self.mu_p + self.sigma_p * a).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.alpha().into_iter().map(inv_logit).collect()
    }

    pub fn lambda0(&self) -> Vec<f64> {
        self.eta0_raw.iter().map(|e| (self.mu_0 + self.sigma_0 * e).exp()).collect()
    }

    pub fn eta1(&self, model: HierModel) -> Vec<f64> {
        let mut eta: Vec<f64> = self.eta1_raw.iter().map(|e| self.sigma_1 * e).collect();
        if model == HierModel::Model4 {
            let s: f64 = eta.iter().sum();
            eta.push(-s);
        }
        eta
    }

    /// `softmax(eta1)`, equal to `Λ1_i / Λ1(A)` under either model.
    pub fn r(&self, model: HierModel) -> Vec<f64> {
        let eta = self.eta1(model);
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = eta.iter().map(|x| (x - m).exp()).collect();
        let t: f64 = e.iter().sum();
        e.into_iter().map(|x| x / t).collect()
    }

    /// Model 5 market weights, with the remainder last.
    pub fn s(&self, rho: &[f64]) -> Vec<f64> {
        let markets: f64 = self.lambda0().iter().zip(rho).map(|(l, r)| l / r).sum();
        let w = self.r(HierModel::Model5);
        let mut s: Vec<f64> = self.p().iter().zip(&w).map(|(p, w)| markets * p * w).collect();
        let sel: f64 = self.p().iter().zip(&w).map(|(p, w)| p * w).sum();
        s.push(markets * (1.0 - sel));
        s
    }

    pub fn total(&self, n1_total: u64) -> f64 {
        self.lambda0().iter().sum::<f64>() + n1_total as f64
    }

    fn eta1_len(model: HierModel, k: usize) -> usize {
        match model {
            HierModel::Model4 => k - 1,
            HierModel::Model5 => k,
        }
    }

    /// Unconstrained vector: scales on the log scale.
    fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mu_p, self.sigma_p.ln()];
        v.extend(&self.alpha_raw);
        v.extend([self.mu_0, self.sigma_0.ln()]);
        v.extend(&self.eta0_raw);
        v.push(self.sigma_1.ln());
        v.extend(&self.eta1_raw);
        v
    }

    fn from_vec(v: &[f64], model: HierModel, k: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &v[at..at + n];
            at += n;
            s.to_vec()
        };
        let head = take(2);
        let alpha_raw = take(k);
        let mid = take(2);
        let eta0_raw = take(k);
        let s1 = take(1);
        let eta1_raw = take(Self::eta1_len(model, k));
        HierParams {
            mu_p: head[0],
            sigma_p: head[1].exp(),
            alpha_raw,
            mu_0: mid[0],
            sigma_0: mid[1].exp(),
            eta0_raw,
            sigma_1: s1[0].exp(),
            eta1_raw,
        }
    }

    pub fn names(model: HierModel, k: usize) -> Vec<String> {
        let mut n = vec!["mu_p".to_string(), "sigma_p".to_string()];
        n.extend((1..=k).map(|i| format!("alpha_raw[{i}]")));
        n.extend(["mu_0".to_string(), "sigma_0".to_string()]);
        n.extend((1..=k).map(|i| format!("eta0_raw[{i}]")));
        n.push("sigma_1".to_string());
        n.extend((1..=Self::eta1_len(model, k)).map(|i| format!("eta1_raw[{i}]")));
        n
    }

    /// Values in the order of [`HierParams::names`], scales on their natural scale.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.mu_p, self.sigma_p];
        v.extend(&self.alpha_raw);
        v.extend([self.mu_0, self.sigma_0]);
        v.extend(&self.eta0_raw);
        v.push(self.sigma_1);
        v.extend(&self.eta1_raw);
        v
    }

    fn check_shape(&self, model: HierModel, k: usize) -> Result<()> {
        if self.alpha_raw.len() != k || self.eta0_raw.len() != k || self.eta1_raw.len() != Self::eta1_len(model, k) {
            return validation(format!("parameter dimensions do not match K = {k}"));
        }
        Ok(())
    }
}

fn raw_normal_logdensity(h: &HierParams) -> f64 {
    h.alpha_raw
        .iter()
        .chain(&h.eta0_raw)
        .chain(&h.eta1_raw)
        .map(|x| -0.5 * x * x - LN_SQRT_2PI)
        .sum()
}

fn poisson_logmass(n: u64, rate: f64) -> f64 {
    if rate <= 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as f64;
    n * rate.ln() - rate - ln_gamma(n + 1.0)
}

fn multinomial_logmass(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut lp = ln_gamma(total as f64 + 1.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if c > 0 {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += c as f64 * p.ln();
        }
        lp -= ln_gamma(c as f64 + 1.0);
    }
    lp
}

fn augmented(data: &FitData) -> Vec<u64> {
    let mut n = data.n1.clone();
    n.push(data.n1_total - data.n1.iter().sum::<u64>());
    n
}

/// Log posterior of Model 4 up to a constant, with flat hyperpriors.
pub fn logpost_model4(params: &HierParams, data: &FitData) -> Result<f64> {
    data.validate(HierModel::Model4)?;
    params.check_shape(HierModel::Model4, data.cells())?;
    Ok(logpost4_unchecked(params, data))
}

fn logpost4_unchecked(h: &HierParams, data: &FitData) -> f64 {
    let p = h.p();
    let l0 = h.lambda0();
    let r = h.r(HierModel::Model4);
    let mut lp = raw_normal_logdensity(h);
    for i in 0..p.len() {
        lp += poisson_logmass(data.n0[i], p[i] * l0[i]);
    }
    let mut theta: Vec<f64> = p.iter().zip(&r).map(|(p, r)| p * r).collect();
    let sel: f64 = theta.iter().sum();
    theta.push(1.0 - sel);
    lp + multinomial_logmass(&augmented(data), &theta)
}

/// Log posterior of Model 5 up to a constant, with flat hyperpriors.
pub fn logpost_model5(params: &HierParams, data: &FitData) -> Result<f64> {
    data.validate(HierModel::Model5)?;
    params.check_shape(HierModel::Model5, data.cells())?;
    Ok(logpost5_unchecked(params, data))
}

fn logpost5_unchecked(h: &HierParams, data: &FitData) -> f64 {
    let rho = data.rho.as_deref().expect("validated");
    let p = h.p();
    let l0 = h.lambda0();
    let mut lp = raw_normal_logdensity(h);
    for i in 0..p.len() {
        lp += nb_logmass(data.n0[i], p[i] * l0[i], rho[i]);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
    }
    lp + mnh_logmass(&augmented(data), &h.s(rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub chains: usize,
    pub warmup: usize,
    pub iters: usize,
    pub seed: u64,
    /// Initial proposal standard deviation on the unconstrained scale.
    pub step_scale: f64,
    /// Keep every `thin`-th post-warmup iteration.
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default)]
    pub prior: Option<HyperPrior>,
}

fn one() -> usize {
    1
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            chains: 4,
            warmup: 2000,
            iters: 2000,
            seed: 1,
            step_scale: 0.5,
            thin: 1,
            prior: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iters == 0 || self.thin == 0 {
            return validation("chains, iters and thin must be positive");
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return validation("step scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub model: HierModel,
    pub names: Vec<String>,
    /// One row per kept draw, chains concatenated in chain order.
    pub draws: Vec<Vec<f64>>,
    pub chain: Vec<usize>,
    pub iteration: Vec<usize>,
    /// `Σ Λ0_i + N1` per draw.
    pub total: Vec<f64>,
    /// Post-warmup acceptance rate per chain, averaged over coordinates.
    pub acceptance: Vec<f64>,
    pub n1_total: u64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn params(&self, row: usize) -> HierParams {
        let k = (self.names.iter().filter(|n| n.starts_with("alpha_raw")).count()).max(1);
        let v = &self.draws[row];
        let mut u = v.clone();
        // Back to the unconstrained layout for decoding.
        for idx in [1, 3 + k, 4 + 2 * k] {
            u[idx] = v[idx].ln();
        }
        HierParams::from_vec(&u, self.model, k)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("total".to_string());
        w.write_record(&header)?;
        for (i, row) in self.draws.iter().enumerate() {
            let mut rec = vec![self.chain[i].to_string(), self.iteration[i].to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            rec.push(self.total[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Target<'a> {
    model: HierModel,
    data: &'a FitData,
    prior: Option<HyperPrior>,
    k: usize,
}

impl Target<'_> {
    /// Log density on the unconstrained scale, including the log-scale Jacobian.
    fn eval(&self, v: &[f64]) -> f64 {
        let h = HierParams::from_vec(v, self.model, self.k);
        if !(h.sigma_p > 0.0 && h.sigma_0 > 0.0 && h.sigma_1 > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut lp = match self.model {
            HierModel::Model4 => logpost4_unchecked(&h, self.data),
            HierModel::Model5 => logpost5_unchecked(&h, self.data),
        };
        lp += h.sigma_p.ln() + h.sigma_0.ln() + h.sigma_1.ln();
        if let Some(prior) = &self.prior {
            lp += prior.logdensity(&h);
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

fn initial_point<R: Rng + ?Sized>(target: &Target<'_>, rng: &mut R) -> Result<Vec<f64>> {
    let data = target.data;
    let n1: u64 = data.n1.iter().sum();
    let p_hat = ((n1 as f64 + 0.5) / (data.n1_total as f64 + 1.0)).clamp(1e-3, 0.999);
    let mean0 = data.n0.iter().sum::<u64>() as f64 / data.cells() as f64 + 0.5;
    let centre = HierParams {
        mu_p: (p_hat / (1.0 - p_hat)).ln(),
        sigma_p: 0.5,
        alpha_raw: vec![0.0; target.k],
        mu_0: (mean0 / p_hat).ln(),
        sigma_0: 0.5,
        eta0_raw: vec![0.0; target.k],
        sigma_1: 0.5,
        eta1_raw: vec![0.0; HierParams::eta1_len(target.model, target.k)],
    }
    .to_vec();
    for attempt in 0..100 {
        let spread = if attempt < 50 { 0.5 } else { 0.1 };
        let v: Vec<f64> = centre.iter().map(|c| c + rng.random_range(-spread..spread)).collect();
        if target.eval(&v).is_finite() {
            return Ok(v);
        }
    }
    Err(Error::Initialization(
        "log posterior is not finite at any of 100 starting points".into(),
    ))
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    iteration: Vec<usize>,
    acceptance: f64,
}

fn run_chain(target: &Target<'_>, config: &FitConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = RngStream::new(config.seed).substream(chain as u64, JOINT_CELL, CHAIN_STREAM);
    let mut x = initial_point(target, &mut rng)?;
    let dim = x.len();
    let mut lp = target.eval(&x);
    let mut log_scale = vec![config.step_scale.ln(); dim];
    let mut batch_accepts = vec![0u32; dim];
    let mut kept_accepts = 0u64;
    const BATCH: usize = 50;
    let total_iters = config.warmup + config.iters;
    let mut draws = Vec::with_capacity(config.iters / config.thin + 1);
    let mut iteration = Vec::with_capacity(draws.capacity());

    for it in 0..total_iters {
        for j in 0..dim {
            let old = x[j];
            let z: f64 = StandardNormal.sample(&mut rng);
            x[j] = old + log_scale[j].exp() * z;
            let cand = target.eval(&x);
            let u: f64 = rng.random();
            if cand > f64::NEG_INFINITY && u.ln() < cand - lp {
                lp = cand;
                if it < config.warmup {
                    batch_accepts[j] += 1;
                } else {
                    kept_accepts += 1;
                }
            } else {
                x[j] = old;
            }
        }
        if it < config.warmup && (it + 1) % BATCH == 0 {
            let step = (1.0 / ((it + 1) / BATCH) as f64).sqrt().min(0.5);
            for j in 0..dim {
                let rate = batch_accepts[j] as f64 / BATCH as f64;
                log_scale[j] += if rate > 0.44 { step } else { -step };
                batch_accepts[j] = 0;
            }
        }
        if it >= config.warmup && (it - config.warmup) % config.thin == 0 {
            let h = HierParams::from_vec(&x, target.model, target.k);
            draws.push(h.values());
            iteration.push(it - config.warmup);
        }
    }
    Ok(ChainOutput {
        draws,
        iteration,
        acceptance: kept_accepts as f64 / (config.iters * dim) as f64,
    })
}

/// Run independent adaptive Metropolis chains; proposal scales adapt during
/// warmup only, so the kept draws come from a fixed invariant kernel.
pub fn fit(model: HierModel, data: &FitData, config: &FitConfig) -> Result<PosteriorDraws> {
    data.validate(model)?;
    config.validate()?;
    let k = data.cells();
    let target = Target {
        model,
        data,
        prior: config.prior,
        k,
    };
    let chains: Vec<Result<ChainOutput>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(&target, config, c))
        .collect();
    let names = HierParams::names(model, k);
    let mut out = PosteriorDraws {
        model,
        names,
        draws: Vec::new(),
        chain: Vec::new(),
        iteration: Vec::new(),
        total: Vec::new(),
        acceptance: Vec::new(),
        n1_total: data.n1_total,
    };
    for (c, res) in chains.into_iter().enumerate() {
        let ch = res?;
        out.acceptance.push(ch.acceptance);
        for (row, it) in ch.draws.into_iter().zip(ch.iteration) {
            out.chain.push(c);
            out.iteration.push(it);
            out.draws.push(row);
        }
    }
    out.total = (0..out.draws.len()).map(|i| out.params(i).total(data.n1_total)).collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub draws: usize,
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central credible interval of the per-draw total.
pub fn summarize(draws: &PosteriorDraws, level: f64) -> Result<PosteriorSummary> {
    summarize_values(&draws.total, level)
}

pub fn summarize_values(values: &[f64], level: f64) -> Result<PosteriorSummary> {
    if values.is_empty() {
        return validation("no posterior draws to summarize");
    }
    if !(level > 0.0 && level < 1.0) {
        return validation(format!("level must be in (0, 1), got {level}"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok(PosteriorSummary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        lower: quantile(&sorted, a),
        upper: quantile(&sorted, 1.0 - a),
        level,
        draws: values.len(),
    })
}

/// Draw hyperparameters from `prior`, then cell parameters and counts from
/// Model 4. Returns the data and the generating parameters.
pub fn simulate_model4<R: Rng + ?Sized>(
    prior: &HyperPrior,
    k: usize,
    n1_total: u64,
    rng: &mut R,
) -> Result<(FitData, HierParams)> {
    if k == 0 {
        return validation("need at least one cell");
    }
    let (mu_p, sigma_p, mu_0, sigma_0, sigma_1) = prior.draw(rng);
    let mut z = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let h = HierParams {
        mu_p,
        sigma_p,
        alpha_raw: z(k),
        mu_0,
        sigma_0,
        eta0_raw: z(k),
        sigma_1,
        eta1_raw: z(k - 1),
    };
    let p = h.p();
    let l0 = h.lambda0();
    let r = h.r(HierModel::Model4);
    let n0 = (0..k).map(|i| draw_poisson(p[i] * l0[i], rng)).collect::<Result<Vec<_>>>()?;
    let mut theta: Vec<f64> = p.iter().zip(&r).map(|(p, r)| p * r).collect();
    let sel: f64 = theta.iter().sum();
    theta.push((1.0 - sel).max(0.0));
    let mut n1 = draw_multinomial(n1_total, &theta, rng)?;
    n1.pop();
    Ok((FitData::new(n0, n1, n1_total), h))
}
