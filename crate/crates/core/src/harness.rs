//! Monte Carlo validation of the estimators and a numeric maximum-likelihood
//! oracle for Model 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{CountTable, EstimationClass};
use crate::error::{validation, Error, Result};
use crate::estimate::Estimate;
use crate::estimators::{subregion_lambda0, subtotal_tau};
use crate::overdispersed::{dispersion_citywide, dispersion_for, od_subregion, od_subtotal, MarketModel};
use crate::partition::{Partition, Subregion};
use crate::rng::RngStream;
use crate::simulator::{GenerativeModel, Scenario};
use crate::weighted::{weighted_subregion, weighted_subtotal, WeightedCounts};

pub const MIN_REPLICATES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ratio,
    Subregion,
    Subtotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    /// Poisson/multinomial plug-in.
    #[default]
    Poisson,
    /// Market-clustering plug-in using the scenario's market counts.
    Overdispersed,
    /// Weighted plug-in with deterministic per-cell weights.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Cell ids forming `B`; ignored by the ratio estimator.
    #[serde(default)]
    pub cells: Vec<String>,
    #[serde(default)]
    pub se: SeMethod,
    /// Per-cell mean weights for each status, required by `SeMethod::Weighted`.
    #[serde(default)]
    pub w0: Option<Vec<f64>>,
    #[serde(default)]
    pub w1: Option<Vec<f64>>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, cells: &[&str], se: SeMethod) -> Self {
        EstimatorSpec {
            kind,
            cells: cells.iter().map(|c| c.to_string()).collect(),
            se,
            w0: None,
            w1: None,
        }
    }

    pub fn weighted(kind: EstimatorKind, cells: &[&str], w0: Vec<f64>, w1: Vec<f64>) -> Self {
        EstimatorSpec {
            w0: Some(w0),
            w1: Some(w1),
            ..Self::new(kind, cells, SeMethod::Weighted)
        }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            EstimatorKind::Ratio => "ratio",
            EstimatorKind::Subregion => "subregion",
            EstimatorKind::Subtotal => "subtotal",
        };
        let se = match self.se {
            SeMethod::Poisson => "poisson",
            SeMethod::Overdispersed => "overdispersed",
            SeMethod::Weighted => "weighted",
        };
        if self.kind == EstimatorKind::Ratio {
            format!("{kind}/{se}")
        } else {
            format!("{kind}[{}]/{se}", self.cells.join("+"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: GenerativeModel,
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    crate::estimate::DEFAULT_LEVEL
}

/// One estimator's result in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: u64,
    pub estimator: usize,
    pub value: f64,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub covered: Option<bool>,
    pub degenerate: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub label: String,
    pub truth: f64,
    /// Replicates with a usable standard error.
    pub replicates: u64,
    /// Replicates with no standard error, excluded from the summaries.
    pub degenerate: u64,
    /// Replicates where a variance term was clamped.
    pub clamped: u64,
    pub coverage: f64,
    pub empirical_sd: f64,
    pub mean_se: f64,
    /// `mean_se / empirical_sd − 1`.
    pub relative_se_error: f64,
    pub mean_estimate: f64,
    pub relative_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: GenerativeModel,
    pub seed: u64,
    pub replicates: u64,
    pub level: f64,
    /// Replicates whose response probabilities or market counts were adjusted.
    pub adjusted_replicates: u64,
    pub estimators: Vec<EstimatorReport>,
}

struct Prepared {
    spec: EstimatorSpec,
    b: Subregion,
    truth: f64,
}

fn prepare(config: &ExperimentConfig, partition: &Partition, markets: Option<&MarketModel>) -> Result<Vec<Prepared>> {
    let intensity = config.scenario.intensity()?;
    let k = intensity.cells();
    let q: Vec<f64> = match (config.model, markets) {
        (GenerativeModel::Model3, Some(m)) => {
            let total = m.m1_total();
            m.m1[..k].iter().map(|x| x / total).collect()
        }
        _ => intensity.q(),
    };
    let n1 = config.scenario.n1 as f64;
    config
        .estimators
        .iter()
        .map(|spec| {
            let b = match spec.kind {
                EstimatorKind::Ratio => partition.all_known(),
                _ => {
                    let ids: Vec<_> = spec.cells.iter().map(|c| crate::CellId::new(c.clone())).collect();
                    if ids.is_empty() {
                        return validation(format!("{} needs at least one cell", spec.label()));
                    }
                    partition.subregion(ids.iter())?
                }
            };
            let l0: f64 = b.indices().map(|i| intensity.lambda0()[i]).sum();
            let truth = match spec.kind {
                EstimatorKind::Ratio | EstimatorKind::Subregion => l0,
                EstimatorKind::Subtotal => l0 + b.indices().map(|i| q[i]).sum::<f64>() * n1,
            };
            match spec.se {
                SeMethod::Overdispersed if markets.is_none() => {
                    return validation("overdispersed standard errors need market counts")
                }
                SeMethod::Weighted => {
                    let ok = |w: &Option<Vec<f64>>| w.as_ref().is_some_and(|w| w.len() == k);
                    if !ok(&spec.w0) || !ok(&spec.w1) {
                        return validation(format!("weighted estimator needs w0 and w1 with {k} entries"));
                    }
                }
                _ => {}
            }
            Ok(Prepared {
                spec: spec.clone(),
                b,
                truth,
            })
        })
        .collect()
}

fn with_unknown(w: &[f64]) -> Vec<f64> {
    let mut v = w.to_vec();
    v.push(1.0);
    v
}

fn evaluate(p: &Prepared, table: &CountTable, markets: Option<&MarketModel>) -> Result<Estimate> {
    let cap = table.cap();
    let c = table.subregion_counts(&p.b)?;
    // The ratio estimator is the subregion estimator over every known cell;
    // simulated tables have an empty unknown slot, so n0(B) = n0(A).
    let ratio_like = matches!(p.spec.kind, EstimatorKind::Ratio | EstimatorKind::Subregion);
    match p.spec.se {
        SeMethod::Poisson if ratio_like => subregion_lambda0(cap, c.n0b, c.n1a()),
        SeMethod::Poisson => subtotal_tau(cap, c.n0b, c.n1b, c.n1_complement),
        SeMethod::Overdispersed => {
            let m = markets.expect("checked in prepare");
            if c.n1a() == 0 {
                return crate::error::estimation("no credentialed respondents");
            }
            let d = if p.spec.kind == EstimatorKind::Ratio {
                dispersion_citywide(table, m)?
            } else {
                dispersion_for(table, m, &p.b)?
            };
            if ratio_like {
                od_subregion(cap, c.n0b, c.n1a(), d)
            } else {
                od_subtotal(cap, c.n0b, c.n1b, c.n1_complement, d)
            }
        }
        SeMethod::Weighted => {
            let w0 = with_unknown(p.spec.w0.as_deref().unwrap_or_default());
            let w1 = with_unknown(p.spec.w1.as_deref().unwrap_or_default());
            let wc = WeightedCounts::from_cell_weights(table, &w0, &w1)?;
            if ratio_like {
                weighted_subregion(cap, &wc, &p.b)
            } else {
                weighted_subtotal(cap, &wc, &p.b)
            }
        }
    }
}

/// Simulate every replicate and evaluate every estimator. Results are in
/// (replicate, estimator) order regardless of thread scheduling.
pub fn run_replicates(config: &ExperimentConfig) -> Result<(Vec<ReplicateResult>, u64)> {
    let s = &config.scenario;
    if s.replicates < MIN_REPLICATES {
        return validation(format!("need at least {MIN_REPLICATES} replicates, got {}", s.replicates));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return validation(format!("level must be in (0, 1), got {}", config.level));
    }
    let partition = Partition::new(s.cells.iter().map(|c| c.id.as_str()))?;
    let markets = s.markets()?;
    let prepared = prepare(config, &partition, markets.as_ref())?;
    let stream = RngStream::new(s.seed);

    let per_rep: Vec<Result<(Vec<ReplicateResult>, bool)>> = (0..s.replicates)
        .into_par_iter()
        .map(|rep| {
            let sim = s.simulate(config.model, &stream, rep)?;
            let table = sim.to_table(EstimationClass::Food, s.n1)?;
            let mut out = Vec::with_capacity(prepared.len());
            for (j, p) in prepared.iter().enumerate() {
                let r = match evaluate(p, &table, markets.as_ref()) {
                    Ok(e) => {
                        let e = e.at_level(config.level);
                        ReplicateResult {
                            replicate: rep,
                            estimator: j,
                            value: e.value,
                            se: e.se,
                            lower: e.ci.map(|c| c.0),
                            upper: e.ci.map(|c| c.1),
                            covered: e.covers(p.truth),
                            degenerate: e.is_degenerate(),
                            clamped: e.flags.radicand_clamped || e.flags.dispersion_clamped,
                        }
                    }
                    Err(Error::Estimation(_)) => ReplicateResult {
                        replicate: rep,
                        estimator: j,
                        value: f64::NAN,
                        se: None,
                        lower: None,
                        upper: None,
                        covered: None,
                        degenerate: true,
                        clamped: false,
                    },
                    Err(e) => return Err(e),
                };
                out.push(r);
            }
            Ok((out, sim.response_clamped || sim.markets_rounded))
        })
        .collect();

    let mut results = Vec::with_capacity(per_rep.len() * prepared.len());
    let mut adjusted = 0;
    for r in per_rep {
        let (rows, adj) = r?;
        adjusted += u64::from(adj);
        results.extend(rows);
    }
    Ok((results, adjusted))
}

fn summarize(config: &ExperimentConfig, results: &[ReplicateResult], adjusted: u64) -> Result<ExperimentReport> {
    let s = &config.scenario;
    let partition = Partition::new(s.cells.iter().map(|c| c.id.as_str()))?;
    let markets = s.markets()?;
    let prepared = prepare(config, &partition, markets.as_ref())?;
    let mut reports = Vec::with_capacity(prepared.len());
    for (j, p) in prepared.iter().enumerate() {
        let rows: Vec<&ReplicateResult> = results.iter().filter(|r| r.estimator == j).collect();
        let good: Vec<&&ReplicateResult> = rows.iter().filter(|r| !r.degenerate).collect();
        let n = good.len() as f64;
        let degenerate = (rows.len() - good.len()) as u64;
        let clamped = rows.iter().filter(|r| r.clamped).count() as u64;
        let (coverage, sd, mean_se, mean) = if good.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = good.iter().map(|r| r.value).sum::<f64>() / n;
            let var = good.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let mean_se = good.iter().map(|r| r.se.unwrap_or(0.0)).sum::<f64>() / n;
            let cov = good.iter().filter(|r| r.covered == Some(true)).count() as f64 / n;
            (cov, var.sqrt(), mean_se, mean)
        };
        reports.push(EstimatorReport {
            label: p.spec.label(),
            truth: p.truth,
            replicates: good.len() as u64,
            degenerate,
            clamped,
            coverage,
            empirical_sd: sd,
            mean_se,
            relative_se_error: mean_se / sd - 1.0,
            mean_estimate: mean,
            relative_bias: (mean - p.truth) / p.truth,
        });
    }
    Ok(ExperimentReport {
        model: config.model,
        seed: s.seed,
        replicates: s.replicates,
        level: config.level,
        adjusted_replicates: adjusted,
        estimators: reports,
    })
}

/// Coverage, empirical SD and mean plug-in se for every configured estimator.
pub fn run_coverage(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with_rows(config).map(|(r, _)| r)
}

/// The same experiment, also returning the per-replicate rows.
pub fn run_with_rows(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<ReplicateResult>)> {
    let (rows, adjusted) = run_replicates(config)?;
    let report = summarize(config, &rows, adjusted)?;
    Ok((report, rows))
}

/// Plug-in se accuracy is a view of the same report.
pub fn se_vs_empirical(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_coverage(config)
}

/// Flat CSV of per-replicate results.
pub fn write_replicates_csv<W: std::io::Write>(
    out: W,
    config: &ExperimentConfig,
    rows: &[ReplicateResult],
) -> Result<()> {
    let labels: Vec<String> = config.estimators.iter().map(EstimatorSpec::label).collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "estimator", "value", "se", "lower", "upper", "covered", "degenerate", "clamped"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.replicate.to_string(),
            labels[r.estimator].clone(),
            r.value.to_string(),
            opt(r.se),
            opt(r.lower),
            opt(r.upper),
            r.covered.map(|c| c.to_string()).unwrap_or_default(),
            r.degenerate.to_string(),
            r.clamped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Maximizer of the Model 1 likelihood found numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleSolution {
    pub lambda0: Vec<f64>,
    pub p: f64,
    pub q: Vec<f64>,
    pub sweeps: usize,
}

/// Golden-section maximization of `g` on `[a, b]`. `g` returns the change in
/// log-likelihood relative to a fixed reference point, which keeps rounding
/// error proportional to the change rather than to the log-likelihood.
fn golden_max(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..400 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let mid = 0.5 * (a + b);
    // Boundary maximizers: compare the interior point with the endpoints.
    [a, mid, b]
        .into_iter()
        .map(|x| (x, g(x)))
        .fold((mid, f64::NEG_INFINITY), |best, (x, v)| if v > best.1 { (x, v) } else { best })
        .0
}

/// `n ln(x / x0)`, zero when `n = 0` even at `x = 0`.
fn weighted_log_ratio(n: f64, x: f64, x0: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        n * ((x - x0) / x0).ln_1p()
    }
}

/// Numerically maximize the Model 1 log-likelihood
/// `Σ [n0_i ln(p Λ0_i) − p Λ0_i] + Σ n1_i ln(p q_i) + (N1 − n1) ln(1 − p)`
/// subject to `Σ q = 1`, by coordinate ascent in `(μ = pΛ0, p, q)`.
pub fn oracle_mle(n0: &[u64], n1: &[u64], n1_total: u64) -> Result<MleSolution> {
    let k = n0.len();
    if k == 0 || n1.len() != k {
        return validation("n0 and n1 must have the same nonzero length");
    }
    let n1a: u64 = n1.iter().sum();
    if n1a == 0 {
        return crate::error::estimation("no credentialed respondents");
    }
    if n1a > n1_total {
        return validation("credentialed respondents exceed N1");
    }
    let rest = (n1_total - n1a) as f64;
    let mut mu = vec![1.0; k];
    let mut p = 0.5;
    let mut q = vec![1.0 / k as f64; k];
    let mut sweeps = 0;
    while sweeps < 2000 {
        sweeps += 1;
        let before: Vec<f64> = mu.iter().chain(&q).copied().chain([p]).collect();

        for i in 0..k {
            let (n, m0) = (n0[i] as f64, mu[i]);
            let g = |m: f64| weighted_log_ratio(n, m, m0) - (m - m0);
            let mut hi = m0.max(1.0);
            while g(2.0 * hi) > g(hi) {
                hi *= 2.0;
            }
            mu[i] = golden_max(0.0, 2.0 * hi, g);
        }

        let n1f = n1a as f64;
        let p0 = p;
        let g = |x: f64| {
            let fail = if rest == 0.0 {
                0.0
            } else if x >= 1.0 {
                f64::NEG_INFINITY
            } else {
                rest * ((p0 - x) / (1.0 - p0)).ln_1p()
            };
            weighted_log_ratio(n1f, x, p0) + fail
        };
        p = golden_max(0.0, 1.0, g);

        let last = k - 1;
        for i in 0..last {
            let s = q[i] + q[last];
            let (ni, nk, t0) = (n1[i] as f64, n1[last] as f64, q[i]);
            let g = |t: f64| weighted_log_ratio(ni, t, t0) + weighted_log_ratio(nk, s - t, s - t0);
            q[i] = golden_max(0.0, s, g);
            q[last] = s - q[i];
        }

        let after: Vec<f64> = mu.iter().chain(&q).copied().chain([p]).collect();
        let change = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
            .fold(0.0, f64::max);
        if change < 1e-14 && sweeps > 2 {
            break;
        }
    }
    Ok(MleSolution {
        lambda0: mu.iter().map(|m| m / p).collect(),
        p,
        q,
        sweeps,
    })
}
