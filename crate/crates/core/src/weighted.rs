//! Weighted counts and the weighted ratio, subregion and subtotal estimators.
//!
//! Respondents carry a weight `w` with known mean and second moment. When the
//! mean weight is inversely proportional to the response probability, the
//! weighted counts restore the representativeness the plain ratio estimator
//! assumes. Variances come from Campbell-type moment sums:
//!
//! * `μ̂²_k(B)`: sum of `E[w²]` over status-`k` respondents in `B`;
//! * `σ̂_kl(B, C)`: sum of `Cov(w_k(x), w_l(y))` over distinct respondent
//!   pairs with `x` of status `k` in `B` and `y` of status `l` in `C`.
//!
//! With `w ≡ 1` every estimator here reduces to its unweighted counterpart.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::counts::{CountTable, EstimationClass, SurveyRecord};
use crate::error::{estimation, validation, Result};
use crate::estimate::{Estimate, Flags};
use crate::partition::{Partition, Subregion};

pub const DEFAULT_WEIGHT_BOUNDS: (f64, f64) = (1e-6, 1e6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMoments {
    pub mean: f64,
    pub second: f64,
}

impl WeightMoments {
    pub fn deterministic(w: f64) -> Self {
        WeightMoments { mean: w, second: w * w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateMode {
    /// Weight proportional to the covariate.
    Proportional,
    /// Weight proportional to the reciprocal of the covariate.
    Inverse,
}

/// Where the per-respondent weight moments come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Identity,
    /// Keyed by (cell label, status); the unknown cell uses its reserved label.
    PerCell(HashMap<(String, usize), WeightMoments>),
    /// Deterministic weight derived from a named record covariate.
    Covariate { name: String, mode: CovariateMode, scale: f64 },
}

/// Covariance of weights between distinct respondents, by cell and status.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CovarianceKernel {
    #[default]
    Zero,
    Table(HashMap<(String, usize, String, usize), f64>),
}

impl CovarianceKernel {
    /// Build a symmetric table; conflicting duplicate entries are rejected.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, usize, String, usize, f64)>,
    {
        let mut t = HashMap::new();
        for (a, sa, b, sb, c) in entries {
            if sa > 1 || sb > 1 {
                return validation("kernel status must be 0 or 1");
            }
            if !c.is_finite() {
                return validation(format!("non-finite covariance for ({a},{sa})-({b},{sb})"));
            }
            for key in [(a.clone(), sa, b.clone(), sb), (b.clone(), sb, a.clone(), sa)] {
                if let Some(prev) = t.insert(key, c) {
                    if prev != c {
                        return validation(format!("asymmetric covariance for ({a},{sa})-({b},{sb})"));
                    }
                }
            }
        }
        Ok(CovarianceKernel::Table(t))
    }

    fn get(&self, a: &str, sa: usize, b: &str, sb: usize) -> f64 {
        match self {
            CovarianceKernel::Zero => 0.0,
            CovarianceKernel::Table(t) => t
                .get(&(a.to_string(), sa, b.to_string(), sb))
                .copied()
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    pub source: WeightSource,
    pub kernel: CovarianceKernel,
    pub bounds: (f64, f64),
}

impl WeightModel {
    pub fn identity() -> Self {
        WeightModel {
            source: WeightSource::Identity,
            kernel: CovarianceKernel::Zero,
            bounds: DEFAULT_WEIGHT_BOUNDS,
        }
    }

    pub fn per_cell(table: HashMap<(String, usize), WeightMoments>) -> Self {
        WeightModel {
            source: WeightSource::PerCell(table),
            ..Self::identity()
        }
    }

    pub fn covariate(name: &str, mode: CovariateMode, scale: f64) -> Self {
        WeightModel {
            source: WeightSource::Covariate {
                name: name.to_string(),
                mode,
                scale,
            },
            ..Self::identity()
        }
    }

    pub fn with_kernel(mut self, kernel: CovarianceKernel) -> Self {
        self.kernel = kernel;
        self
    }

    fn moments_for(&self, r: &SurveyRecord, label: &str) -> Result<WeightMoments> {
        let m = match &self.source {
            WeightSource::Identity => WeightMoments::deterministic(1.0),
            WeightSource::PerCell(t) => match t.get(&(label.to_string(), r.status())) {
                Some(m) => *m,
                None => {
                    return validation(format!(
                        "record {}: no weight for cell {label} status {}",
                        r.id,
                        r.status()
                    ))
                }
            },
            WeightSource::Covariate { name, mode, scale } => {
                let Some(&x) = r.weight_inputs.get(name) else {
                    return validation(format!("record {}: missing covariate {name}", r.id));
                };
                let w = match mode {
                    CovariateMode::Proportional => scale * x,
                    CovariateMode::Inverse => scale / x,
                };
                WeightMoments::deterministic(w)
            }
        };
        self.check(m).map_err(|e| match e {
            crate::Error::Validation(msg) => crate::Error::Validation(format!("record {}: {msg}", r.id)),
            other => other,
        })
    }

    fn check(&self, m: WeightMoments) -> Result<WeightMoments> {
        let (lo, hi) = self.bounds;
        if !(m.mean >= lo && m.mean <= hi) {
            return validation(format!("mean weight {} outside [{lo}, {hi}]", m.mean));
        }
        if m.second < m.mean * m.mean * (1.0 - 1e-12) {
            return validation(format!("E[w^2] = {} is below E[w]^2 = {}", m.second, m.mean * m.mean));
        }
        Ok(m)
    }
}

/// Per-slot weighted sums plus pairwise covariance sums for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCounts {
    n0w: Vec<f64>,
    n1w: Vec<f64>,
    mu2_0: Vec<f64>,
    mu2_1: Vec<f64>,
    /// σ̂ per slot pair for status pairs (0,0), (0,1), (1,1); `None` when the
    /// kernel is identically zero.
    sigma: Option<[Vec<Vec<f64>>; 3]>,
    slots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusPair {
    S00,
    S01,
    S11,
}

impl WeightedCounts {
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn n0w(&self) -> &[f64] {
        &self.n0w
    }

    pub fn n1w(&self) -> &[f64] {
        &self.n1w
    }

    pub fn mu2_0(&self) -> &[f64] {
        &self.mu2_0
    }

    pub fn mu2_1(&self) -> &[f64] {
        &self.mu2_1
    }

    /// Deterministic per-slot weights applied to integer counts.
    pub fn from_cell_weights(table: &CountTable, w0: &[f64], w1: &[f64]) -> Result<Self> {
        let slots = table.n0().len();
        if w0.len() != slots || w1.len() != slots {
            return validation(format!("expected {slots} per-slot weights"));
        }
        let n0w = table.n0().iter().zip(w0).map(|(&n, &w)| n as f64 * w).collect();
        let n1w = table.n1().iter().zip(w1).map(|(&n, &w)| n as f64 * w).collect();
        let mu2_0 = table.n0().iter().zip(w0).map(|(&n, &w)| n as f64 * w * w).collect();
        let mu2_1 = table.n1().iter().zip(w1).map(|(&n, &w)| n as f64 * w * w).collect();
        Ok(WeightedCounts {
            n0w,
            n1w,
            mu2_0,
            mu2_1,
            sigma: None,
            slots,
        })
    }

    fn set(&self, b: &Subregion) -> Vec<usize> {
        b.indices().collect()
    }

    fn all(&self) -> Vec<usize> {
        (0..self.slots).collect()
    }

    fn complement(&self, b: &Subregion) -> Vec<usize> {
        (0..self.slots).filter(|&i| !b.contains(i)).collect()
    }

    fn sum(v: &[f64], cells: &[usize]) -> f64 {
        cells.iter().map(|&i| v[i]).sum()
    }

    pub fn sigma(&self, pair: StatusPair, left: &[usize], right: &[usize]) -> f64 {
        let Some(s) = &self.sigma else { return 0.0 };
        let m = &s[pair as usize];
        left.iter()
            .map(|&a| right.iter().map(|&b| m[a][b]).sum::<f64>())
            .sum()
    }

    pub fn ratio_moments(&self) -> RatioMoments {
        let a = self.all();
        RatioMoments {
            n0w: Self::sum(&self.n0w, &a),
            n1w: Self::sum(&self.n1w, &a),
            mu2_0: Self::sum(&self.mu2_0, &a),
            mu2_1: Self::sum(&self.mu2_1, &a),
            s00: self.sigma(StatusPair::S00, &a, &a),
            s01: self.sigma(StatusPair::S01, &a, &a),
            s11: self.sigma(StatusPair::S11, &a, &a),
        }
    }

    pub fn subregion_moments(&self, b: &Subregion) -> Result<SubregionMoments> {
        self.check_subregion(b)?;
        let (bs, a) = (self.set(b), self.all());
        Ok(SubregionMoments {
            n0w_b: Self::sum(&self.n0w, &bs),
            mu2_0_b: Self::sum(&self.mu2_0, &bs),
            s00_bb: self.sigma(StatusPair::S00, &bs, &bs),
            s01_ba: self.sigma(StatusPair::S01, &bs, &a),
            n1w_a: Self::sum(&self.n1w, &a),
            mu2_1_a: Self::sum(&self.mu2_1, &a),
            s11_aa: self.sigma(StatusPair::S11, &a, &a),
        })
    }

    pub fn subtotal_moments(&self, b: &Subregion) -> Result<SubtotalMoments> {
        self.check_subregion(b)?;
        let (bs, cs) = (self.set(b), self.complement(b));
        Ok(SubtotalMoments {
            n0w_b: Self::sum(&self.n0w, &bs),
            n1w_b: Self::sum(&self.n1w, &bs),
            n1w_c: Self::sum(&self.n1w, &cs),
            mu2_0_b: Self::sum(&self.mu2_0, &bs),
            mu2_1_b: Self::sum(&self.mu2_1, &bs),
            mu2_1_c: Self::sum(&self.mu2_1, &cs),
            s00_bb: self.sigma(StatusPair::S00, &bs, &bs),
            s01_bb: self.sigma(StatusPair::S01, &bs, &bs),
            s01_bc: self.sigma(StatusPair::S01, &bs, &cs),
            s11_bb: self.sigma(StatusPair::S11, &bs, &bs),
            s11_cc: self.sigma(StatusPair::S11, &cs, &cs),
            s11_bc: self.sigma(StatusPair::S11, &bs, &cs),
        })
    }

    fn check_subregion(&self, b: &Subregion) -> Result<()> {
        match b.indices().find(|&i| i + 1 >= self.slots) {
            Some(i) => validation(format!("subregion cell index {i} outside the weighted table")),
            None => Ok(()),
        }
    }
}

/// Accumulate weighted counts for one class.
pub fn weighted_counts(
    records: &[SurveyRecord],
    model: &WeightModel,
    partition: &Partition,
    class: EstimationClass,
) -> Result<WeightedCounts> {
    let slots = partition.slots();
    let mut n0w = vec![0.0; slots];
    let mut n1w = vec![0.0; slots];
    let mut mu2_0 = vec![0.0; slots];
    let mut mu2_1 = vec![0.0; slots];
    let mut counts = [vec![0u64; slots], vec![0u64; slots]];
    for r in records.iter().filter(|r| class.includes(r)) {
        let Some(slot) = partition.slot_of(r.cell.as_ref()) else {
            return validation(format!("record {}: cell is not in the partition", r.id));
        };
        let m = model.moments_for(r, partition.label(slot))?;
        let (nw, mu2) = if r.has_credential {
            (&mut n1w, &mut mu2_1)
        } else {
            (&mut n0w, &mut mu2_0)
        };
        nw[slot] += m.mean;
        mu2[slot] += m.second;
        counts[r.status()][slot] += 1;
    }

    let sigma = match &model.kernel {
        CovarianceKernel::Zero => None,
        kernel => {
            let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
            let mut out: [Vec<Vec<f64>>; 3] = Default::default();
            for (p, &(k, l)) in pairs.iter().enumerate() {
                let mut m = vec![vec![0.0; slots]; slots];
                for (a, row) in m.iter_mut().enumerate() {
                    for (b, cell) in row.iter_mut().enumerate() {
                        let nk = counts[k][a] as f64;
                        let nl = counts[l][b] as f64;
                        // Distinct respondents only: drop self-pairs.
                        let npairs = if k == l && a == b { nk * (nk - 1.0).max(0.0) } else { nk * nl };
                        if npairs > 0.0 {
                            *cell = npairs * kernel.get(partition.label(a), k, partition.label(b), l);
                        }
                    }
                }
                out[p] = m;
            }
            Some(out)
        }
    };
    Ok(WeightedCounts {
        n0w,
        n1w,
        mu2_0,
        mu2_1,
        sigma,
        slots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatioMoments {
    pub n0w: f64,
    pub n1w: f64,
    pub mu2_0: f64,
    pub mu2_1: f64,
    pub s00: f64,
    pub s01: f64,
    pub s11: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubregionMoments {
    pub n0w_b: f64,
    pub mu2_0_b: f64,
    pub s00_bb: f64,
    /// σ̂01(B, A)
    pub s01_ba: f64,
    pub n1w_a: f64,
    pub mu2_1_a: f64,
    pub s11_aa: f64,
}

/// Moment sums for the weighted subtotal; `c` denotes the complement `A \ B`,
/// which includes the unknown cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubtotalMoments {
    pub n0w_b: f64,
    pub n1w_b: f64,
    pub n1w_c: f64,
    pub mu2_0_b: f64,
    pub mu2_1_b: f64,
    pub mu2_1_c: f64,
    pub s00_bb: f64,
    pub s01_bb: f64,
    pub s01_bc: f64,
    pub s11_bb: f64,
    pub s11_cc: f64,
    pub s11_bc: f64,
}

fn finish(value: f64, scale: f64, radicand: f64) -> Estimate {
    let mut flags = Flags::default();
    let r = if radicand < 0.0 {
        flags.radicand_clamped = true;
        0.0
    } else {
        radicand
    };
    Estimate::with_flags(value, Some(scale * r.sqrt()), flags)
}

fn check_weighted_anchor(cap: u64, n1w_a: f64) -> Result<f64> {
    if cap == 0 {
        return validation("credential cap must be positive");
    }
    if !(n1w_a > 0.0) {
        return estimation("weighted credentialed count is zero");
    }
    Ok(cap as f64)
}

pub fn weighted_ratio(cap: u64, wc: &WeightedCounts) -> Result<Estimate> {
    weighted_ratio_from(cap, &wc.ratio_moments())
}

pub fn weighted_ratio_from(cap: u64, m: &RatioMoments) -> Result<Estimate> {
    let n = check_weighted_anchor(cap, m.n1w)?;
    let value = n * m.n0w / m.n1w;
    if m.n0w <= 0.0 {
        return Ok(Estimate::degenerate(value));
    }
    let radicand = (m.mu2_0 + m.s00) / (m.n0w * m.n0w) + m.mu2_1 / (m.n1w * m.n1w)
        + (n - 1.0) * m.s11 / (n * m.n1w * m.n1w)
        - 1.0 / n
        - 2.0 * m.s01 / (m.n0w * m.n1w);
    Ok(finish(value, value, radicand))
}

pub fn weighted_subregion(cap: u64, wc: &WeightedCounts, b: &Subregion) -> Result<Estimate> {
    weighted_subregion_from(cap, &wc.subregion_moments(b)?)
}

pub fn weighted_subregion_from(cap: u64, m: &SubregionMoments) -> Result<Estimate> {
    let n = check_weighted_anchor(cap, m.n1w_a)?;
    let value = n * m.n0w_b / m.n1w_a;
    if m.n0w_b <= 0.0 {
        return Ok(Estimate::degenerate(value));
    }
    let radicand = (m.mu2_0_b + m.s00_bb) / (m.n0w_b * m.n0w_b)
        + m.mu2_1_a / (m.n1w_a * m.n1w_a)
        + (n - 1.0) * m.s11_aa / (n * m.n1w_a * m.n1w_a)
        - 1.0 / n
        - 2.0 * m.s01_ba / (m.n0w_b * m.n1w_a);
    Ok(finish(value, value, radicand))
}

pub fn weighted_subtotal(cap: u64, wc: &WeightedCounts, b: &Subregion) -> Result<Estimate> {
    weighted_subtotal_from(cap, &wc.subtotal_moments(b)?)
}

/// Weighted subtotal `N1 (n0w(B) + n1w(B)) / (n1w(B) + n1w(A\B))`.
///
/// The standard error is the delta method applied to the three weighted
/// counts `X = n0w(B)`, `Y = n1w(B)`, `Z = n1w(A\B)`, assembled as
/// `V(X)/X² + (v1 + v2 + 2 N1 v3) / (X² N1²)` with
///
/// * `v1 = k² (Z − X)² V(Y)`
/// * `v2 = k² (X + Y)² V(Z)`
/// * `v3 = k ((Z − X) C(X,Y) − (X + Y) C(X,Z)) − k² (Z − X)(X + Y) C(Y,Z) / N1`
///
/// where `k = N1 / n1w(A)`. `C(Y,Z)` includes the multinomial term
/// `−Y Z / N1`, so that unit weights give back the unweighted subtotal
/// standard error exactly.
pub fn weighted_subtotal_from(cap: u64, m: &SubtotalMoments) -> Result<Estimate> {
    let n1a = m.n1w_b + m.n1w_c;
    let n = check_weighted_anchor(cap, n1a)?;
    let (x, y, z) = (m.n0w_b, m.n1w_b, m.n1w_c);
    let value = n * (x + y) / n1a;
    if x <= 0.0 {
        return Ok(Estimate::degenerate(value));
    }
    let var_x = m.mu2_0_b + m.s00_bb;
    let var_y = m.mu2_1_b + ((n - 1.0) * m.s11_bb - y * y) / n;
    let var_z = m.mu2_1_c + ((n - 1.0) * m.s11_cc - z * z) / n;
    let cov_yz = ((n - 1.0) * m.s11_bc - y * z) / n;
    let k = n / n1a;

    let v1 = (z - x).powi(2) * k * k * var_y;
    let v2 = (x + y).powi(2) * k * k * var_z;
    let v3 = k * ((z - x) * m.s01_bb - (x + y) * m.s01_bc) - k * k * (z - x) * (x + y) * cov_yz / n;

    let radicand = var_x / (x * x) + (v1 + v2 + 2.0 * n * v3) / (x * x * n * n);
    let lambda = n * x / n1a;
    Ok(finish(value, lambda, radicand))
}

/// Multiplicative adjustment of the unweighted total implied by the weights:
/// `((n0w + n1w) / (n0 + n1)) / (n1w / n1)`.
pub fn bias_factor(n0w: f64, n1w: f64, n0: u64, n1: u64) -> Result<f64> {
    if n1 == 0 || n0 + n1 == 0 || !(n1w > 0.0) {
        return estimation("bias factor needs positive n1, n1w and n0 + n1");
    }
    let avg_all = (n0w + n1w) / (n0 + n1) as f64;
    let avg_cred = n1w / n1 as f64;
    Ok(avg_all / avg_cred)
}
