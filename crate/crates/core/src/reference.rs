//! Published New York City survey totals and a per-neighborhood
//! reconstruction of the class split.
//!
//! Only citywide counts per class are published. Neighborhood rows give total
//! respondents `R` and the estimated population `P`. Every neighborhood row is
//! a sum of two subtotal estimates, `P = a f + b m` with `a = 5100/349`,
//! `b = 853/308` and `f + m = R`, so the food respondents are recovered as
//! `f = (P − b R) / (a − b)` (rounded; the residuals are below 0.05). The
//! credential split within each neighborhood is not recoverable and is
//! allocated in proportion to the citywide credential share of each class.

use serde::{Deserialize, Serialize};

use crate::counts::{CountTable, EstimationClass, FOOD_PERMIT_CAP, MERCHANDISE_LICENSE_CAP};
use crate::distributions::apportion;
use crate::error::{validation, Result};
use crate::estimators::RatioInputs;
use crate::io::{Layout, MapEntry};
use crate::partition::Partition;

pub const FOOD_RESPONDENTS: u64 = 1400;
pub const FOOD_CREDENTIALED: u64 = 349;
pub const MERCHANDISE_RESPONDENTS: u64 = 505;
pub const MERCHANDISE_CREDENTIALED: u64 = 308;

pub fn food_inputs() -> RatioInputs {
    RatioInputs {
        cap: FOOD_PERMIT_CAP,
        n0: FOOD_RESPONDENTS - FOOD_CREDENTIALED,
        n1: FOOD_CREDENTIALED,
    }
}

pub fn merchandise_inputs() -> RatioInputs {
    RatioInputs {
        cap: MERCHANDISE_LICENSE_CAP,
        n0: MERCHANDISE_RESPONDENTS - MERCHANDISE_CREDENTIALED,
        n1: MERCHANDISE_CREDENTIALED,
    }
}

/// Published weighted food counts under inverse enforcement weights.
pub const WEIGHTED_FOOD_N0W: f64 = 25.7;
pub const WEIGHTED_FOOD_N1W: f64 = 5.24;

const NEIGHBORHOODS_CSV: &str = include_str!("../data/nyc_neighborhoods.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodRow {
    pub borough: String,
    pub subregion: String,
    pub respondents: u64,
    pub population: u64,
    pub moe: u64,
}

pub fn published_rows() -> Result<Vec<NeighborhoodRow>> {
    let mut rdr = csv::Reader::from_reader(NEIGHBORHOODS_CSV.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedRow {
    pub borough: String,
    pub subregion: String,
    pub food: u64,
    pub merchandise: u64,
    /// `f` before rounding.
    pub food_exact: f64,
}

pub fn reconstruct_split(row: &NeighborhoodRow) -> Result<ReconstructedRow> {
    let a = FOOD_PERMIT_CAP as f64 / FOOD_CREDENTIALED as f64;
    let b = MERCHANDISE_LICENSE_CAP as f64 / MERCHANDISE_CREDENTIALED as f64;
    let r = row.respondents as f64;
    let f = (row.population as f64 - b * r) / (a - b);
    let food = f.round();
    if food < 0.0 || food > r {
        return validation(format!("{}: no feasible class split", row.subregion));
    }
    Ok(ReconstructedRow {
        borough: row.borough.clone(),
        subregion: row.subregion.clone(),
        food: food as u64,
        merchandise: row.respondents - food as u64,
        food_exact: f,
    })
}

/// Reconstructed per-neighborhood tables for both classes. Respondents not
/// attributed to any listed neighborhood fill the unknown slot.
#[derive(Debug, Clone)]
pub struct ReconstructedSurvey {
    pub partition: Partition,
    pub boroughs: Vec<String>,
    pub rows: Vec<ReconstructedRow>,
    pub food: CountTable,
    pub merchandise: CountTable,
}

fn split_class(per_cell: &[u64], respondents: u64, credentialed: u64, class: EstimationClass, cap: u64) -> Result<CountTable> {
    let listed: u64 = per_cell.iter().sum();
    if listed > respondents {
        return validation(format!("{class}: neighborhoods exceed the citywide respondents"));
    }
    let mut totals = per_cell.to_vec();
    totals.push(respondents - listed);
    let (n1, _) = apportion(&totals.iter().map(|&t| t as f64).collect::<Vec<_>>(), credentialed)?;
    let n0 = totals.iter().zip(&n1).map(|(t, c)| t - c).collect();
    CountTable::new(class, n0, n1, cap)
}

impl ReconstructedSurvey {
    /// One cell per neighborhood, grouped by borough.
    pub fn layout(&self) -> Result<Layout> {
        let entries: Vec<MapEntry> = self
            .rows
            .iter()
            .map(|r| MapEntry {
                cell: r.subregion.clone(),
                subregion: r.subregion.clone(),
                borough: r.borough.clone(),
            })
            .collect();
        Layout::from_entries(&entries)
    }
}

pub fn reconstructed_survey() -> Result<ReconstructedSurvey> {
    let rows: Vec<ReconstructedRow> = published_rows()?.iter().map(reconstruct_split).collect::<Result<_>>()?;
    let partition = Partition::new(rows.iter().map(|r| r.subregion.as_str()))?;
    let food: Vec<u64> = rows.iter().map(|r| r.food).collect();
    let merch: Vec<u64> = rows.iter().map(|r| r.merchandise).collect();
    Ok(ReconstructedSurvey {
        boroughs: rows.iter().map(|r| r.borough.clone()).collect(),
        food: split_class(&food, FOOD_RESPONDENTS, FOOD_CREDENTIALED, EstimationClass::Food, FOOD_PERMIT_CAP)?,
        merchandise: split_class(
            &merch,
            MERCHANDISE_RESPONDENTS,
            MERCHANDISE_CREDENTIALED,
            EstimationClass::MerchandiseNonveteran,
            MERCHANDISE_LICENSE_CAP,
        )?,
        partition,
        rows,
    })
}
