//! Cell-level generative models for synthetic survey counts.
//!
//! * Model 1: `n0(Bi) ~ Poisson(p Λ0(Bi))`, and given `N1(A)` the credentialed
//!   respondents per cell plus the non-respondent remainder are multinomial
//!   with probabilities `p q(Bi)` and `1 − p`.
//! * Model 2: as Model 1 with status- and cell-specific response
//!   probabilities `p_k(Bi) = p + ε_k(Bi)`.
//! * Model 3: market clustering. `n0(Bi)` is negative binomial with mean
//!   `p Λ0(Bi)` and `p M0(Bi)` required successes; credentialed counts come
//!   from a Pólya urn seeded with the responding and non-responding markets.
//!
//! Every simulated table has one slot per cell plus an empty unknown slot.

use serde::{Deserialize, Serialize};

use crate::counts::{CountTable, EstimationClass};
use crate::distributions::{apportion, draw_binomial, draw_mnh, draw_multinomial, draw_poisson, NegBinomial};
use crate::error::{validation, Result};
use crate::overdispersed::MarketModel;
use crate::rng::{RngStream, JOINT_CELL};

const STATUS_UNCREDENTIALED: u64 = 0;
const STATUS_CREDENTIALED: u64 = 1;
/// Extra stream tags for the two-stage thinning path.
const STATUS_THIN_UNCREDENTIALED: u64 = 2;
const STATUS_THIN_CREDENTIALED: u64 = 3;

/// Smallest response probability after clamping into (0, 1].
pub const MIN_RESPONSE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    lambda0: Vec<f64>,
    lambda1: Vec<f64>,
}

impl IntensityModel {
    pub fn new(lambda0: Vec<f64>, lambda1: Vec<f64>) -> Result<Self> {
        if lambda0.is_empty() || lambda0.len() != lambda1.len() {
            return validation("intensity needs matching, nonempty per-cell vectors");
        }
        if let Some(bad) = lambda0.iter().chain(&lambda1).find(|v| !(**v >= 0.0 && v.is_finite())) {
            return validation(format!("cell intensity must be finite and nonnegative, got {bad}"));
        }
        if lambda1.iter().sum::<f64>() <= 0.0 {
            return validation("credentialed intensity must be positive somewhere");
        }
        Ok(IntensityModel { lambda0, lambda1 })
    }

    pub fn cells(&self) -> usize {
        self.lambda0.len()
    }

    pub fn lambda0(&self) -> &[f64] {
        &self.lambda0
    }

    pub fn lambda1(&self) -> &[f64] {
        &self.lambda1
    }

    pub fn lambda0_total(&self) -> f64 {
        self.lambda0.iter().sum()
    }

    /// `q(Bi) = Λ1(Bi) / Λ1(A)`.
    pub fn q(&self) -> Vec<f64> {
        let t: f64 = self.lambda1.iter().sum();
        self.lambda1.iter().map(|l| l / t).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub p: f64,
    #[serde(default)]
    pub epsilon0: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon1: Option<Vec<f64>>,
}

/// Per-cell response probabilities after clamping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedResponse {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub clamped: bool,
}

impl ResponseModel {
    pub fn uniform(p: f64) -> Result<Self> {
        let r = ResponseModel {
            p,
            epsilon0: None,
            epsilon1: None,
        };
        r.check_base()?;
        Ok(r)
    }

    pub fn with_deviations(mut self, epsilon0: Option<Vec<f64>>, epsilon1: Option<Vec<f64>>) -> Self {
        self.epsilon0 = epsilon0;
        self.epsilon1 = epsilon1;
        self
    }

    fn check_base(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return validation(format!("response probability must be in (0, 1], got {}", self.p));
        }
        Ok(())
    }

    pub fn resolve(&self, cells: usize) -> Result<ResolvedResponse> {
        self.check_base()?;
        let mut clamped = false;
        let mut field = |eps: &Option<Vec<f64>>| -> Result<Vec<f64>> {
            match eps {
                None => Ok(vec![self.p; cells]),
                Some(e) if e.len() != cells => validation(format!("expected {cells} response deviations, got {}", e.len())),
                Some(e) => Ok(e
                    .iter()
                    .map(|d| {
                        let raw = self.p + d;
                        let v = raw.clamp(MIN_RESPONSE, 1.0);
                        clamped |= v != raw;
                        v
                    })
                    .collect()),
            }
        };
        let p0 = field(&self.epsilon0)?;
        let p1 = field(&self.epsilon1)?;
        if let Some(bad) = p0.iter().chain(&p1).find(|v| !v.is_finite()) {
            return validation(format!("non-finite response probability {bad}"));
        }
        Ok(ResolvedResponse { p0, p1, clamped })
    }
}

/// One replicate's counts; vectors include the trailing unknown slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedCounts {
    pub n0: Vec<u64>,
    pub n1: Vec<u64>,
    /// Some response probability was clamped into (0, 1].
    pub response_clamped: bool,
    /// Market counts were rounded to integers for the urn.
    pub markets_rounded: bool,
}

impl SimulatedCounts {
    pub fn to_table(&self, class: EstimationClass, cap: u64) -> Result<CountTable> {
        CountTable::new(class, self.n0.clone(), self.n1.clone(), cap)
    }

    fn with_unknown(mut n0: Vec<u64>, mut n1: Vec<u64>) -> (Vec<u64>, Vec<u64>) {
        n0.push(0);
        n1.push(0);
        (n0, n1)
    }
}

fn check_n1(n1: u64) -> Result<()> {
    if n1 == 0 {
        return validation("credential total must be positive");
    }
    Ok(())
}

pub fn simulate_model1(
    intensity: &IntensityModel,
    p: f64,
    n1_total: u64,
    stream: &RngStream,
    replicate: u64,
) -> Result<SimulatedCounts> {
    simulate_model2(intensity, &ResponseModel::uniform(p)?, n1_total, stream, replicate)
}

pub fn simulate_model2(
    intensity: &IntensityModel,
    response: &ResponseModel,
    n1_total: u64,
    stream: &RngStream,
    replicate: u64,
) -> Result<SimulatedCounts> {
    check_n1(n1_total)?;
    let k = intensity.cells();
    let resp = response.resolve(k)?;
    let mut n0 = Vec::with_capacity(k);
    for (i, (&l0, &p0)) in intensity.lambda0.iter().zip(&resp.p0).enumerate() {
        let mut rng = stream.substream(replicate, i as u64, STATUS_UNCREDENTIALED);
        n0.push(draw_poisson(p0 * l0, &mut rng)?);
    }
    let q = intensity.q();
    let mut probs: Vec<f64> = q.iter().zip(&resp.p1).map(|(q, p)| q * p).collect();
    let r_total: f64 = probs.iter().sum();
    if r_total > 1.0 + 1e-12 {
        return validation(format!("credentialed response probabilities sum to {r_total} > 1"));
    }
    probs.push((1.0 - r_total).max(0.0));
    let mut rng = stream.substream(replicate, JOINT_CELL, STATUS_CREDENTIALED);
    let mut n1 = draw_multinomial(n1_total, &probs, &mut rng)?;
    n1.pop();
    let (n0, n1) = SimulatedCounts::with_unknown(n0, n1);
    Ok(SimulatedCounts {
        n0,
        n1,
        response_clamped: resp.clamped,
        markets_rounded: false,
    })
}

/// Model 1 by explicit thinning: draw every vendor, then keep each one with
/// its response probability.
pub fn simulate_model1_thinned(
    intensity: &IntensityModel,
    p: f64,
    n1_total: u64,
    stream: &RngStream,
    replicate: u64,
) -> Result<SimulatedCounts> {
    check_n1(n1_total)?;
    let resp = ResponseModel::uniform(p)?.resolve(intensity.cells())?;
    let mut n0 = Vec::with_capacity(intensity.cells());
    for (i, &l0) in intensity.lambda0.iter().enumerate() {
        let mut rng = stream.substream(replicate, i as u64, STATUS_THIN_UNCREDENTIALED);
        let all = draw_poisson(l0, &mut rng)?;
        n0.push(draw_binomial(all, resp.p0[i], &mut rng)?);
    }
    let mut rng = stream.substream(replicate, JOINT_CELL, STATUS_THIN_CREDENTIALED);
    let placed = draw_multinomial(n1_total, &intensity.q(), &mut rng)?;
    let mut n1 = Vec::with_capacity(placed.len());
    for (&c, &p1) in placed.iter().zip(&resp.p1) {
        n1.push(draw_binomial(c, p1, &mut rng)?);
    }
    let (n0, n1) = SimulatedCounts::with_unknown(n0, n1);
    Ok(SimulatedCounts {
        n0,
        n1,
        response_clamped: resp.clamped,
        markets_rounded: false,
    })
}

/// Per-cell market counts, ignoring a trailing unknown slot if present.
fn cell_markets(markets: &MarketModel, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = markets.m0.len();
    if n == cells + 1 {
        if markets.m0[cells] != 0.0 || markets.m1[cells] != 0.0 {
            return validation("the unknown slot cannot hold markets");
        }
    } else if n != cells {
        return validation(format!("market model has {n} entries for {cells} cells"));
    }
    Ok((markets.m0[..cells].to_vec(), markets.m1[..cells].to_vec()))
}

pub fn simulate_model3(
    intensity: &IntensityModel,
    response: &ResponseModel,
    n1_total: u64,
    markets: &MarketModel,
    stream: &RngStream,
    replicate: u64,
) -> Result<SimulatedCounts> {
    check_n1(n1_total)?;
    let k = intensity.cells();
    let resp = response.resolve(k)?;
    let (m0, m1) = cell_markets(markets, k)?;

    let mut n0 = Vec::with_capacity(k);
    for i in 0..k {
        let (l0, m, p) = (intensity.lambda0[i], m0[i], resp.p0[i]);
        if l0 == 0.0 {
            n0.push(0);
            continue;
        }
        if !(m > 0.0 && m <= l0) {
            return validation(format!("cell {i}: markets {m} must be in (0, Λ0 = {l0}]"));
        }
        let nb = NegBinomial::from_mean_rho(p * l0, l0 / m)?;
        let mut rng = stream.substream(replicate, i as u64, STATUS_UNCREDENTIALED);
        n0.push(nb.sample(&mut rng)?);
    }

    let m1_total: f64 = m1.iter().sum();
    let seeds_total = m1_total.round() as u64;
    if seeds_total == 0 {
        return validation("credentialed markets must total at least one");
    }
    if seeds_total > n1_total {
        return validation(format!("{seeds_total} credentialed markets exceed N1 = {n1_total}"));
    }
    let mut shares: Vec<f64> = m1.iter().zip(&resp.p1).map(|(m, p)| m * p).collect();
    let selected: f64 = shares.iter().sum();
    shares.push((m1_total - selected).max(0.0));
    let (seeds, moved) = apportion(&shares, seeds_total)?;
    let mut rng = stream.substream(replicate, JOINT_CELL, STATUS_CREDENTIALED);
    let mut n1 = draw_mnh(n1_total, &seeds, &mut rng)?;
    n1.pop();
    let (n0, n1) = SimulatedCounts::with_unknown(n0, n1);
    Ok(SimulatedCounts {
        n0,
        n1,
        response_clamped: resp.clamped,
        markets_rounded: moved || (m1_total - seeds_total as f64).abs() > 1e-9,
    })
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cells: Vec<ScenarioCell>,
    pub p: f64,
    #[serde(default)]
    pub epsilon0: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon1: Option<Vec<f64>>,
    #[serde(rename = "N1")]
    pub n1: u64,
    pub replicates: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub id: String,
    pub lambda0: f64,
    pub lambda1: f64,
    #[serde(default)]
    pub markets: Option<f64>,
}

/// Which generative model a scenario is run under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenerativeModel {
    #[serde(rename = "1")]
    Model1,
    #[serde(rename = "2")]
    Model2,
    #[serde(rename = "3")]
    Model3,
}

impl Scenario {
    pub fn intensity(&self) -> Result<IntensityModel> {
        IntensityModel::new(
            self.cells.iter().map(|c| c.lambda0).collect(),
            self.cells.iter().map(|c| c.lambda1).collect(),
        )
    }

    pub fn response(&self) -> Result<ResponseModel> {
        Ok(ResponseModel::uniform(self.p)?.with_deviations(self.epsilon0.clone(), self.epsilon1.clone()))
    }

    /// Markets per cell shared by both statuses, with an empty unknown slot.
    pub fn markets(&self) -> Result<Option<MarketModel>> {
        let given: Vec<Option<f64>> = self.cells.iter().map(|c| c.markets).collect();
        if given.iter().all(Option::is_none) {
            return Ok(None);
        }
        let Some(missing) = self.cells.iter().find(|c| c.markets.is_none()) else {
            let mut m: Vec<f64> = given.into_iter().flatten().collect();
            m.push(0.0);
            return MarketModel::shared(m).map(Some);
        };
        validation(format!("cell {} has no market count", missing.id))
    }

    /// Model 3 when markets are given, Model 2 when deviations are given,
    /// Model 1 otherwise.
    pub fn default_model(&self) -> GenerativeModel {
        if self.cells.iter().any(|c| c.markets.is_some()) {
            GenerativeModel::Model3
        } else if self.epsilon0.is_some() || self.epsilon1.is_some() {
            GenerativeModel::Model2
        } else {
            GenerativeModel::Model1
        }
    }

    pub fn simulate(&self, model: GenerativeModel, stream: &RngStream, replicate: u64) -> Result<SimulatedCounts> {
        let intensity = self.intensity()?;
        match model {
            GenerativeModel::Model1 => simulate_model1(&intensity, self.p, self.n1, stream, replicate),
            GenerativeModel::Model2 => simulate_model2(&intensity, &self.response()?, self.n1, stream, replicate),
            GenerativeModel::Model3 => {
                let Some(m) = self.markets()? else {
                    return validation("model 3 needs market counts for every cell");
                };
                simulate_model3(&intensity, &self.response()?, self.n1, &m, stream, replicate)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> RngStream {
        RngStream::new(2024)
    }

    #[test]
    fn census_single_cell() {
        let i = IntensityModel::new(vec![30.0], vec![1.0]).unwrap();
        for rep in 0..20 {
            let c = simulate_model1(&i, 1.0, 50, &stream(), rep).unwrap();
            assert_eq!(c.n1, vec![50, 0]);
        }
    }

    #[test]
    fn empty_process() {
        let i = IntensityModel::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let c = simulate_model1(&i, 0.4, 100, &stream(), 0).unwrap();
        assert_eq!(c.n0, vec![0, 0, 0]);
    }

    #[test]
    fn model1_equals_model2_with_zero_deviation() {
        let i = IntensityModel::new(vec![100.0, 250.0, 40.0], vec![1.0, 3.0, 2.0]).unwrap();
        let r = ResponseModel::uniform(0.3)
            .unwrap()
            .with_deviations(Some(vec![0.0; 3]), Some(vec![0.0; 3]));
        for rep in 0..10 {
            assert_eq!(
                simulate_model1(&i, 0.3, 500, &stream(), rep).unwrap(),
                simulate_model2(&i, &r, 500, &stream(), rep).unwrap()
            );
        }
    }

    #[test]
    fn replicate_order_does_not_matter() {
        let i = IntensityModel::new(vec![100.0, 250.0], vec![1.0, 3.0]).unwrap();
        let forward: Vec<_> = (0..8).map(|r| simulate_model1(&i, 0.3, 500, &stream(), r).unwrap()).collect();
        let backward: Vec<_> = (0..8).rev().map(|r| simulate_model1(&i, 0.3, 500, &stream(), r).unwrap()).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn clamping_is_reported() {
        let r = ResponseModel::uniform(0.9).unwrap().with_deviations(Some(vec![0.3]), None);
        let res = r.resolve(1).unwrap();
        assert!(res.clamped);
        assert_eq!(res.p0, vec![1.0]);
        assert!(ResponseModel::uniform(0.0).is_err());
        assert!(r.resolve(2).is_err());
    }

    #[test]
    fn model3_validates_markets() {
        let i = IntensityModel::new(vec![100.0], vec![1.0]).unwrap();
        let r = ResponseModel::uniform(0.5).unwrap();
        let too_many = MarketModel::shared(vec![200.0]).unwrap();
        assert!(simulate_model3(&i, &r, 500, &too_many, &stream(), 0).is_err());
        let over_n1 = MarketModel::shared(vec![50.0]).unwrap();
        assert!(simulate_model3(&i, &r, 10, &over_n1, &stream(), 0).is_err());
        let ok = MarketModel::shared(vec![20.0, 0.0]).unwrap();
        let c = simulate_model3(&i, &r, 100, &ok, &stream(), 0).unwrap();
        assert!(c.n1[0] >= 10 && c.n0[0] >= 10);
    }

    #[test]
    fn scenario_json_round_trip() {
        let js = r#"{"cells":[{"id":"a","lambda0":100,"lambda1":1,"markets":20},{"id":"b","lambda0":50,"lambda1":1,"markets":10}],
                     "p":0.3,"N1":300,"replicates":100,"seed":1}"#;
        let s: Scenario = serde_json::from_str(js).unwrap();
        assert_eq!(s.default_model(), GenerativeModel::Model3);
        let c = s.simulate(GenerativeModel::Model3, &RngStream::new(s.seed), 0).unwrap();
        assert_eq!(c.n0.len(), 3);
        let one = s.simulate(GenerativeModel::Model1, &RngStream::new(s.seed), 0).unwrap();
        assert_eq!(one.n1[2], 0);
    }
}
