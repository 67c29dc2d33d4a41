//! CSV ingestion: survey records, partition maps, weight tables, pair
//! covariances and market counts. Row numbers in errors count the header as
//! line 1.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counts::{SurveyRecord, VendorClass};
use crate::error::{validation, Error, Result};
use crate::overdispersed::MarketModel;
use crate::partition::{CellId, Partition, Subregion, UNKNOWN_LABEL};
use crate::weighted::{CovarianceKernel, WeightMoments};

const RECORD_COLUMNS: [&str; 5] = ["id", "vendor_class", "has_credential", "veteran", "cell"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn row_err<T>(file: &str, line: u64, msg: impl std::fmt::Display) -> Result<T> {
    validation(format!("{file} row {line}: {msg}"))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" | "" => Some(false),
        _ => None,
    }
}

fn column(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Validation(format!("{file}: missing column {name:?}")))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Parse survey records. Columns beyond the five required ones are numeric
/// weight covariates; empty covariate fields are left unset.
pub fn read_records<R: Read>(r: R) -> Result<Vec<SurveyRecord>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = RECORD_COLUMNS
        .iter()
        .map(|c| column(&headers, c, "records"))
        .collect::<Result<_>>()?;
    let extra: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !RECORD_COLUMNS.contains(&h.trim()))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();

    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let get = |i: usize| row.get(idx[i]).unwrap_or("");
        let id = get(0).to_string();
        if id.is_empty() {
            return row_err("records", line, "empty id");
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            return row_err("records", line, format!("duplicate id {id:?} (first on row {prev})"));
        }
        let class: VendorClass = match get(1).parse() {
            Ok(c) => c,
            Err(e) => return row_err("records", line, e),
        };
        let Some(has_credential) = parse_bool(get(2)) else {
            return row_err("records", line, format!("has_credential {:?} is not a boolean", get(2)));
        };
        let Some(veteran) = parse_bool(get(3)) else {
            return row_err("records", line, format!("veteran {:?} is not a boolean", get(3)));
        };
        let cell = get(4);
        let mut rec = SurveyRecord::new(id, class, has_credential, (!cell.is_empty()).then_some(cell));
        rec.veteran = veteran;
        for (i, name) in &extra {
            let v = row.get(*i).unwrap_or("");
            if v.is_empty() {
                continue;
            }
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => {
                    rec.weight_inputs.insert(name.clone(), x);
                }
                _ => return row_err("records", line, format!("{name} = {v:?} is not a finite number")),
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records_path(path: impl AsRef<Path>) -> Result<Vec<SurveyRecord>> {
    read_records(open(path.as_ref())?)
}

/// Check every record's cell against the partition, reporting the first
/// unmatched one with its row number.
pub fn check_cells(records: &[SurveyRecord], partition: &Partition) -> Result<()> {
    for (k, r) in records.iter().enumerate() {
        if partition.slot_of(r.cell.as_ref()).is_none() {
            let cell = r.cell.as_ref().map_or("", CellId::as_str);
            return row_err("records", k as u64 + 2, format!("cell {cell:?} is not in the partition map"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub cell: String,
    pub subregion: String,
    pub borough: String,
}

/// A named group of cells in the report layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub borough: String,
    pub cells: Subregion,
}

/// Cells grouped into subregions, and subregions into boroughs, in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub partition: Partition,
    pub subregions: Vec<Group>,
    pub boroughs: Vec<Group>,
}

impl Layout {
    pub fn from_entries(entries: &[MapEntry]) -> Result<Self> {
        let partition = Partition::new(entries.iter().map(|e| e.cell.as_str()))?;
        let mut subregions: Vec<(String, String, Vec<usize>)> = Vec::new();
        let mut boroughs: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            match subregions.iter_mut().find(|s| s.0 == e.subregion) {
                Some(s) if s.1 != e.borough => {
                    return validation(format!(
                        "subregion {:?} is mapped to boroughs {:?} and {:?}",
                        e.subregion, s.1, e.borough
                    ))
                }
                Some(s) => s.2.push(i),
                None => subregions.push((e.subregion.clone(), e.borough.clone(), vec![i])),
            }
            match boroughs.iter_mut().find(|b| b.0 == e.borough) {
                Some(b) => b.1.push(i),
                None => boroughs.push((e.borough.clone(), vec![i])),
            }
        }
        let subregions = subregions
            .into_iter()
            .map(|(name, borough, idx)| {
                Ok(Group {
                    name,
                    borough,
                    cells: partition.subregion_from_indices(idx)?,
                })
            })
            .collect::<Result<_>>()?;
        let boroughs = boroughs
            .into_iter()
            .map(|(name, idx)| {
                Ok(Group {
                    borough: name.clone(),
                    name,
                    cells: partition.subregion_from_indices(idx)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Layout {
            partition,
            subregions,
            boroughs,
        })
    }
}

pub fn read_partition_map<R: Read>(r: R) -> Result<Layout> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["cell", "subregion", "borough"]
        .iter()
        .map(|c| column(&headers, c, "partition map"))
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let get = |i: usize| row.get(idx[i]).unwrap_or("").to_string();
        let e = MapEntry {
            cell: get(0),
            subregion: get(1),
            borough: get(2),
        };
        if e.cell.is_empty() || e.cell == UNKNOWN_LABEL {
            return row_err("partition map", line, format!("cell id {:?} is reserved", e.cell));
        }
        if entries.iter().any(|p: &MapEntry| p.cell == e.cell) {
            return row_err("partition map", line, format!("duplicate cell {:?}", e.cell));
        }
        if e.subregion.is_empty() || e.borough.is_empty() {
            return row_err("partition map", line, "subregion and borough must be nonempty");
        }
        entries.push(e);
    }
    if entries.is_empty() {
        return validation("partition map has no cells");
    }
    Layout::from_entries(&entries)
}

pub fn read_partition_map_path(path: impl AsRef<Path>) -> Result<Layout> {
    read_partition_map(open(path.as_ref())?)
}

fn parse_status(s: &str, allow_both: bool) -> Option<Vec<usize>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "0" => Some(vec![0]),
        "1" => Some(vec![1]),
        "both" if allow_both => Some(vec![0, 1]),
        _ => None,
    }
}

fn parse_f64(row: &csv::StringRecord, i: usize) -> Option<f64> {
    row.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|x| x.is_finite())
}

/// Per-cell weight moments keyed by (cell label, status). The unknown cell
/// is addressed by its reserved label.
pub fn read_weights<R: Read>(r: R) -> Result<HashMap<(String, usize), WeightMoments>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["cell", "status", "w_mean", "w_second_moment"]
        .iter()
        .map(|c| column(&headers, c, "weights"))
        .collect::<Result<_>>()?;
    let mut out = HashMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let cell = row.get(idx[0]).unwrap_or("").to_string();
        let Some(statuses) = parse_status(row.get(idx[1]).unwrap_or(""), true) else {
            return row_err("weights", line, "status must be 0, 1 or both");
        };
        let (Some(mean), Some(second)) = (parse_f64(&row, idx[2]), parse_f64(&row, idx[3])) else {
            return row_err("weights", line, "w_mean and w_second_moment must be finite numbers");
        };
        if mean <= 0.0 {
            return row_err("weights", line, format!("w_mean must be positive, got {mean}"));
        }
        if second < mean * mean * (1.0 - 1e-12) {
            return row_err("weights", line, "w_second_moment is below w_mean squared");
        }
        for s in statuses {
            if out.insert((cell.clone(), s), WeightMoments { mean, second }).is_some() {
                return row_err("weights", line, format!("duplicate entry for cell {cell:?} status {s}"));
            }
        }
    }
    Ok(out)
}

pub fn read_weights_path(path: impl AsRef<Path>) -> Result<HashMap<(String, usize), WeightMoments>> {
    read_weights(open(path.as_ref())?)
}

pub fn read_covariance<R: Read>(r: R) -> Result<CovarianceKernel> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = ["cell_a", "cell_b", "status_a", "status_b", "cov"]
        .iter()
        .map(|c| column(&headers, c, "covariance"))
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let sa = parse_status(row.get(idx[2]).unwrap_or(""), false);
        let sb = parse_status(row.get(idx[3]).unwrap_or(""), false);
        let (Some(sa), Some(sb)) = (sa, sb) else {
            return row_err("covariance", line, "status_a and status_b must be 0 or 1");
        };
        let Some(cov) = parse_f64(&row, idx[4]) else {
            return row_err("covariance", line, "cov must be a finite number");
        };
        entries.push((
            row.get(idx[0]).unwrap_or("").to_string(),
            sa[0],
            row.get(idx[1]).unwrap_or("").to_string(),
            sb[0],
            cov,
        ));
    }
    CovarianceKernel::from_entries(entries)
}

pub fn read_covariance_path(path: impl AsRef<Path>) -> Result<CovarianceKernel> {
    read_covariance(open(path.as_ref())?)
}

/// Market counts per cell, shared by both statuses. Cells absent from the
/// file, including the unknown cell unless listed, get zero markets.
pub fn read_markets<R: Read>(r: R, partition: &Partition) -> Result<MarketModel> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let ci = column(&headers, "cell", "markets")?;
    let mi = column(&headers, "markets", "markets")?;
    let mut m = vec![0.0; partition.slots()];
    let mut seen = BTreeMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let cell = row.get(ci).unwrap_or("");
        let slot = if cell == UNKNOWN_LABEL {
            Some(partition.unknown_index())
        } else {
            partition.index_of(&CellId::from(cell))
        };
        let Some(slot) = slot else {
            return row_err("markets", line, format!("cell {cell:?} is not in the partition map"));
        };
        if seen.insert(slot, line).is_some() {
            return row_err("markets", line, format!("duplicate cell {cell:?}"));
        }
        match parse_f64(&row, mi) {
            Some(x) if x >= 0.0 => m[slot] = x,
            _ => return row_err("markets", line, "markets must be a nonnegative number"),
        }
    }
    MarketModel::shared(m)
}

pub fn read_markets_path(path: impl AsRef<Path>, partition: &Partition) -> Result<MarketModel> {
    read_markets(open(path.as_ref())?, partition)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = "cell,subregion,borough\n10458,Fordham,Bronx\n10468,Fordham,Bronx\n11368,Corona,Queens\n";

    #[test]
    fn records_parse_with_covariates() {
        let csv = "id,vendor_class,has_credential,veteran,cell,tickets\n\
                   1,food,true,false,10458,3\n\
                   2,merchandise,0,1,,\n\
                   3,first_amendment,no,no,11368,0.5\n";
        let recs = read_records(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs[0].has_credential && !recs[0].veteran);
        assert_eq!(recs[0].weight_inputs["tickets"], 3.0);
        assert!(recs[1].veteran && recs[1].cell.is_none());
        assert!(recs[1].weight_inputs.is_empty());
        assert_eq!(recs[2].vendor_class, VendorClass::FirstAmendment);
    }

    #[test]
    fn record_errors_carry_row_numbers() {
        let csv = "id,vendor_class,has_credential,veteran,cell\n1,food,true,false,a\n2,boats,true,false,a\n";
        let e = read_records(csv.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("row 3"), "{e}");
        let csv = "id,vendor_class,has_credential,veteran,cell\n1,food,maybe,false,a\n";
        assert!(read_records(csv.as_bytes()).unwrap_err().to_string().contains("row 2"));
        let csv = "id,vendor_class,has_credential,cell\n";
        assert!(read_records(csv.as_bytes()).unwrap_err().to_string().contains("veteran"));
    }

    #[test]
    fn unmatched_cell_is_reported() {
        let layout = read_partition_map(MAP.as_bytes()).unwrap();
        let csv = "id,vendor_class,has_credential,veteran,cell\n1,food,true,false,10458\n2,food,true,false,99999\n";
        let recs = read_records(csv.as_bytes()).unwrap();
        let e = check_cells(&recs, &layout.partition).unwrap_err().to_string();
        assert!(e.contains("row 3") && e.contains("99999"), "{e}");
    }

    #[test]
    fn partition_map_groups() {
        let layout = read_partition_map(MAP.as_bytes()).unwrap();
        assert_eq!(layout.partition.len(), 3);
        assert_eq!(layout.subregions.len(), 2);
        assert_eq!(layout.subregions[0].cells.len(), 2);
        assert_eq!(layout.boroughs[1].name, "Queens");
        let bad = "cell,subregion,borough\na,X,Bronx\nb,X,Queens\n";
        assert!(read_partition_map(bad.as_bytes()).is_err());
        let dup = "cell,subregion,borough\na,X,Bronx\na,Y,Bronx\n";
        assert!(read_partition_map(dup.as_bytes()).unwrap_err().to_string().contains("row 3"));
    }

    #[test]
    fn weights_expand_both() {
        let csv = "cell,status,w_mean,w_second_moment\na,both,2,5\nUNKNOWN,1,1,1\n";
        let w = read_weights(csv.as_bytes()).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[&("a".to_string(), 0)].second, 5.0);
        let bad = "cell,status,w_mean,w_second_moment\na,0,2,3\n";
        assert!(read_weights(bad.as_bytes()).is_err());
    }

    #[test]
    fn covariance_symmetric() {
        let csv = "cell_a,cell_b,status_a,status_b,cov\na,b,0,1,0.25\n";
        assert!(read_covariance(csv.as_bytes()).is_ok());
        let clash = "cell_a,cell_b,status_a,status_b,cov\na,b,0,1,0.25\nb,a,1,0,0.5\n";
        assert!(read_covariance(clash.as_bytes()).is_err());
    }

    #[test]
    fn markets_fill_slots() {
        let layout = read_partition_map(MAP.as_bytes()).unwrap();
        let m = read_markets("cell,markets\n10458,4\nUNKNOWN,2\n".as_bytes(), &layout.partition).unwrap();
        assert_eq!(m.m0, vec![4.0, 0.0, 0.0, 2.0]);
        assert!(read_markets("cell,markets\nzzz,4\n".as_bytes(), &layout.partition).is_err());
    }
}
