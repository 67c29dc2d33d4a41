//! Survey records and the per-cell respondent counts derived from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::partition::{CellId, Partition, Subregion};

/// Default citywide caps: food-vending permits and non-veteran merchandise licenses.
pub const FOOD_PERMIT_CAP: u64 = 5100;
pub const MERCHANDISE_LICENSE_CAP: u64 = 853;
/// Licensed veteran merchandise vendors, added to totals as a constant.
pub const VETERAN_ADD_ON: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VendorClass {
    Food,
    Merchandise,
    FirstAmendment,
    Other,
}

impl FromStr for VendorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "food" => Ok(VendorClass::Food),
            "merchandise" => Ok(VendorClass::Merchandise),
            "first_amendment" => Ok(VendorClass::FirstAmendment),
            "other" => Ok(VendorClass::Other),
            other => validation(format!("unknown vendor class {other:?}")),
        }
    }
}

/// The two populations the ratio estimator is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationClass {
    Food,
    MerchandiseNonveteran,
}

impl EstimationClass {
    pub const ALL: [EstimationClass; 2] = [EstimationClass::Food, EstimationClass::MerchandiseNonveteran];

    pub fn default_cap(self) -> u64 {
        match self {
            EstimationClass::Food => FOOD_PERMIT_CAP,
            EstimationClass::MerchandiseNonveteran => MERCHANDISE_LICENSE_CAP,
        }
    }

    pub fn includes(self, r: &SurveyRecord) -> bool {
        match self {
            EstimationClass::Food => r.vendor_class == VendorClass::Food,
            EstimationClass::MerchandiseNonveteran => r.vendor_class == VendorClass::Merchandise && !r.veteran,
        }
    }
}

impl fmt::Display for EstimationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimationClass::Food => "food",
            EstimationClass::MerchandiseNonveteran => "merchandise_nonveteran",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub id: String,
    pub vendor_class: VendorClass,
    /// Permit for food vendors, license for merchandise vendors.
    pub has_credential: bool,
    pub veteran: bool,
    /// `None` when the respondent gave no vending location.
    pub cell: Option<CellId>,
    #[serde(default)]
    pub weight_inputs: BTreeMap<String, f64>,
}

impl SurveyRecord {
    pub fn new(id: impl Into<String>, vendor_class: VendorClass, has_credential: bool, cell: Option<&str>) -> Self {
        SurveyRecord {
            id: id.into(),
            vendor_class,
            has_credential,
            veteran: false,
            cell: cell.map(CellId::from),
            weight_inputs: BTreeMap::new(),
        }
    }

    pub fn veteran(mut self) -> Self {
        self.veteran = true;
        self
    }

    pub fn with_input(mut self, name: &str, value: f64) -> Self {
        self.weight_inputs.insert(name.to_string(), value);
        self
    }

    /// 0 for no credential, 1 for credential.
    pub fn status(&self) -> usize {
        usize::from(self.has_credential)
    }
}

/// Respondent counts for one class, indexed by partition slot (user cells,
/// then the unknown cell last), plus the fixed citywide credential total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub class: EstimationClass,
    n0: Vec<u64>,
    n1: Vec<u64>,
    cap: u64,
}

impl CountTable {
    pub fn new(class: EstimationClass, n0: Vec<u64>, n1: Vec<u64>, cap: u64) -> Result<Self> {
        if n0.len() != n1.len() || n0.is_empty() {
            return validation("n0 and n1 must have the same nonzero length");
        }
        if cap == 0 {
            return validation("credential cap must be positive");
        }
        let t = CountTable { class, n0, n1, cap };
        if t.n1_total() > cap {
            return validation(format!(
                "{} credentialed respondents exceed the cap of {cap}",
                t.n1_total()
            ));
        }
        Ok(t)
    }

    pub fn zeros(class: EstimationClass, partition: &Partition, cap: u64) -> Result<Self> {
        Self::new(class, vec![0; partition.slots()], vec![0; partition.slots()], cap)
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn n0(&self) -> &[u64] {
        &self.n0
    }

    pub fn n1(&self) -> &[u64] {
        &self.n1
    }

    /// n0(A), unknown-location respondents included.
    pub fn n0_total(&self) -> u64 {
        self.n0.iter().sum()
    }

    pub fn n1_total(&self) -> u64 {
        self.n1.iter().sum()
    }

    pub fn respondents(&self) -> u64 {
        self.n0_total() + self.n1_total()
    }

    pub fn unknown_respondents(&self) -> u64 {
        let u = self.n0.len() - 1;
        self.n0[u] + self.n1[u]
    }

    pub fn subregion_counts(&self, b: &Subregion) -> Result<SubregionCounts> {
        subregion_counts(self, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubregionCounts {
    pub n0b: u64,
    pub n1b: u64,
    pub n1_complement: u64,
}

impl SubregionCounts {
    pub fn n1a(&self) -> u64 {
        self.n1b + self.n1_complement
    }
}

/// Counts over `b`, with the complement measured against n1(A) so that
/// unknown-location respondents land in the complement.
pub fn subregion_counts(table: &CountTable, b: &Subregion) -> Result<SubregionCounts> {
    let known = table.n0.len() - 1;
    if let Some(bad) = b.indices().find(|&i| i >= known) {
        return validation(format!("subregion cell index {bad} is outside the table"));
    }
    let n0b = b.sum(&table.n0);
    let n1b = b.sum(&table.n1);
    Ok(SubregionCounts {
        n0b,
        n1b,
        n1_complement: table.n1_total() - n1b,
    })
}

/// Result of filtering records into one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Aggregate {
    pub table: CountTable,
    /// Merchandise records flagged as veterans; never used for estimation.
    pub veteran_merchandise: u64,
    /// First Amendment and other-class records.
    pub excluded: u64,
}

pub fn aggregate(records: &[SurveyRecord], partition: &Partition, class: EstimationClass, cap: u64) -> Result<Aggregate> {
    let mut n0 = vec![0u64; partition.slots()];
    let mut n1 = vec![0u64; partition.slots()];
    let mut veteran_merchandise = 0;
    let mut excluded = 0;
    for r in records {
        let Some(slot) = partition.slot_of(r.cell.as_ref()) else {
            return validation(format!(
                "record {}: cell {} is not in the partition",
                r.id,
                r.cell.as_ref().map_or("", CellId::as_str)
            ));
        };
        match r.vendor_class {
            VendorClass::FirstAmendment | VendorClass::Other => excluded += 1,
            VendorClass::Merchandise if r.veteran => veteran_merchandise += 1,
            _ => {}
        }
        if class.includes(r) {
            if r.has_credential {
                n1[slot] += 1;
            } else {
                n0[slot] += 1;
            }
        }
    }
    Ok(Aggregate {
        table: CountTable::new(class, n0, n1, cap)?,
        veteran_merchandise,
        excluded,
    })
}
