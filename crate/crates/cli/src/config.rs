//! JSON run configurations. Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vendorest::counts::EstimationClass;
use vendorest::io::{read_covariance_path, read_markets_path, read_weights_path, Layout};
use vendorest::report::{Caps, Markets, ReportSettings, WeightScenario};
use vendorest::weighted::{CovariateMode, WeightModel};
use vendorest::{Error, Result};

fn default_add_on() -> u64 {
    vendorest::counts::VETERAN_ADD_ON
}

fn default_level() -> f64 {
    vendorest::estimate::DEFAULT_LEVEL
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub records: PathBuf,
    pub partition_map: PathBuf,
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub covariance: Option<PathBuf>,
    #[serde(default)]
    pub markets: Option<PathBuf>,
    #[serde(default)]
    pub vendors_per_market: Option<f64>,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default = "default_add_on")]
    pub veteran_add_on: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightedTotals {
    pub n0w: f64,
    pub n1w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSource {
    Identity,
    PerCell {
        weights: PathBuf,
        #[serde(default)]
        covariance: Option<PathBuf>,
    },
    Covariate {
        covariate: String,
        mode: CovariateMode,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Published weighted citywide counts per class.
    Totals {
        #[serde(default)]
        food: Option<WeightedTotals>,
        #[serde(default)]
        merchandise: Option<WeightedTotals>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: ScenarioSource,
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: RunConfig = load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.records = resolve(base, &c.records);
        c.partition_map = resolve(base, &c.partition_map);
        for p in [&mut c.weights, &mut c.covariance, &mut c.markets].into_iter().flatten() {
            *p = resolve(base, p);
        }
        for s in &mut c.scenarios {
            if let ScenarioSource::PerCell { weights, covariance } = &mut s.source {
                *weights = resolve(base, weights);
                if let Some(cv) = covariance {
                    *cv = resolve(base, cv);
                }
            }
        }
        Ok(c)
    }

    pub fn settings(&self) -> ReportSettings {
        ReportSettings {
            caps: self.caps,
            veteran_add_on: self.veteran_add_on,
            level: self.level,
        }
    }

    pub fn markets(&self, layout: &Layout, vendors_per_market: Option<f64>) -> Result<Option<Markets>> {
        match (vendors_per_market.or(self.vendors_per_market), &self.markets) {
            (Some(v), _) => Ok(Some(Markets::VendorsPerMarket(v))),
            (None, Some(path)) => Ok(Some(Markets::PerCell(read_markets_path(path, &layout.partition)?))),
            (None, None) => Ok(None),
        }
    }

    /// Scenarios from the config; a lone top-level weights file becomes a
    /// single per-cell scenario.
    pub fn scenarios(&self) -> Result<Vec<WeightScenario>> {
        let mut specs = self.scenarios.clone();
        if specs.is_empty() {
            let Some(w) = &self.weights else {
                return Err(Error::Validation("weighted runs need `scenarios` or a `weights` file".into()));
            };
            specs.push(ScenarioSpec {
                name: "weights".into(),
                source: ScenarioSource::PerCell {
                    weights: w.clone(),
                    covariance: self.covariance.clone(),
                },
            });
        }
        specs.iter().map(build_scenario).collect()
    }
}

fn build_scenario(s: &ScenarioSpec) -> Result<WeightScenario> {
    let model = |m: WeightModel| WeightScenario::Model {
        name: s.name.clone(),
        model: m,
    };
    Ok(match &s.source {
        ScenarioSource::Identity => model(WeightModel::identity()),
        ScenarioSource::PerCell { weights, covariance } => {
            let mut m = WeightModel::per_cell(read_weights_path(weights)?);
            if let Some(c) = covariance {
                m = m.with_kernel(read_covariance_path(c)?);
            }
            model(m)
        }
        ScenarioSource::Covariate { covariate, mode, scale } => model(WeightModel::covariate(covariate, *mode, *scale)),
        ScenarioSource::Totals { food, merchandise } => {
            let totals: Vec<_> = [(EstimationClass::Food, food), (EstimationClass::MerchandiseNonveteran, merchandise)]
                .into_iter()
                .filter_map(|(c, t)| t.map(|t| (c, t.n0w, t.n1w)))
                .collect();
            if totals.is_empty() {
                return Err(Error::Validation(format!("scenario {}: no class totals given", s.name)));
            }
            WeightScenario::Totals {
                name: s.name.clone(),
                totals,
            }
        }
    })
}
