//! Table-style population reports: respondents, estimated population and
//! margin of error per subregion, borough totals and a citywide row, plus the
//! weighted sensitivity summary. Values are carried at full precision and
//! rounded only by the text renderers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::counts::{aggregate, CountTable, EstimationClass, SurveyRecord, FOOD_PERMIT_CAP, MERCHANDISE_LICENSE_CAP, VETERAN_ADD_ON};
use crate::error::{validation, Error, Result};
use crate::estimate::{Estimate, DEFAULT_LEVEL};
use crate::estimators::{subtotal_tau, total_tau, RatioInputs};
use crate::io::{Group, Layout};
use crate::overdispersed::{dispersion_citywide, dispersion_for, od_ratio, od_subtotal, MarketModel};
use crate::partition::{Partition, Subregion};
use crate::weighted::{bias_factor, weighted_counts, weighted_ratio, WeightModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub food: u64,
    pub merchandise: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            food: FOOD_PERMIT_CAP,
            merchandise: MERCHANDISE_LICENSE_CAP,
        }
    }
}

impl Caps {
    pub fn get(&self, class: EstimationClass) -> u64 {
        match class {
            EstimationClass::Food => self.food,
            EstimationClass::MerchandiseNonveteran => self.merchandise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub caps: Caps,
    pub veteran_add_on: u64,
    pub level: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            caps: Caps::default(),
            veteran_add_on: VETERAN_ADD_ON,
            level: DEFAULT_LEVEL,
        }
    }
}

impl ReportSettings {
    pub fn validate(&self) -> Result<()> {
        if self.caps.food == 0 || self.caps.merchandise == 0 {
            return validation("caps must be positive");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return validation(format!("confidence level must be in (0, 1), got {}", self.level));
        }
        Ok(())
    }
}

/// Market information for overdispersed standard errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Markets {
    /// Market counts per slot, shared by both classes and statuses.
    PerCell(MarketModel),
    /// A fixed number of vendors per market; market counts are derived per
    /// class from the estimated populations.
    VendorsPerMarket(f64),
}

impl Markets {
    fn model_for(&self, table: &CountTable) -> Result<MarketModel> {
        match self {
            Markets::PerCell(m) => Ok(m.clone()),
            Markets::VendorsPerMarket(v) => {
                if !(*v >= 1.0 && v.is_finite()) {
                    return validation(format!("vendors per market must be at least 1, got {v}"));
                }
                let n1a = table.n1_total();
                if n1a == 0 {
                    return Err(Error::Estimation("no credentialed respondents".into()));
                }
                let scale = table.cap() as f64 / n1a as f64 / v;
                let m0 = table.n0().iter().map(|&n| n as f64 * scale).collect();
                let m1 = table.n1().iter().map(|&n| n as f64 * scale).collect();
                MarketModel::new(m0, m1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Subregion,
    Borough,
    City,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEstimate {
    pub class: EstimationClass,
    pub n0: u64,
    pub n1: u64,
    /// Absent when no credentialed respondents anchor the class.
    pub estimate: Option<Estimate>,
    pub overdispersed: Option<Estimate>,
}

impl ClassEstimate {
    pub fn respondents(&self) -> u64 {
        self.n0 + self.n1
    }

    pub fn value(&self) -> f64 {
        self.estimate.map_or(0.0, |e| e.value)
    }

    pub fn se(&self) -> Option<f64> {
        self.estimate.and_then(|e| e.se)
    }

    pub fn degenerate(&self) -> bool {
        self.estimate.is_none_or(|e| e.is_degenerate())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: RowKind,
    pub borough: String,
    pub name: String,
    pub respondents: u64,
    pub population: f64,
    /// Per-class standard errors combined in quadrature.
    pub se_quadrature: Option<f64>,
    pub moe_quadrature: Option<f64>,
    /// Sum of the per-class margins of error.
    pub moe_linear: Option<f64>,
    pub moe_overdispersed: Option<f64>,
    pub food: ClassEstimate,
    pub merchandise: ClassEstimate,
    pub degenerate: bool,
}

impl ReportRow {
    fn assemble(kind: RowKind, borough: &str, name: &str, food: ClassEstimate, merchandise: ClassEstimate) -> Self {
        let classes = [&food, &merchandise];
        let ses: Option<Vec<f64>> = classes.iter().map(|c| c.se()).collect();
        let se_quadrature = ses.as_ref().map(|s| s.iter().map(|x| x * x).sum::<f64>().sqrt());
        let od: Option<Vec<f64>> = classes.iter().map(|c| c.overdispersed.and_then(|e| e.se)).collect();
        ReportRow {
            kind,
            borough: borough.to_string(),
            name: name.to_string(),
            respondents: food.respondents() + merchandise.respondents(),
            population: food.value() + merchandise.value(),
            se_quadrature,
            moe_quadrature: se_quadrature.map(|s| 2.0 * s),
            moe_linear: ses.map(|s| 2.0 * s.iter().sum::<f64>()),
            moe_overdispersed: od.map(|s| 2.0 * s.iter().map(|x| x * x).sum::<f64>().sqrt()),
            degenerate: food.degenerate() || merchandise.degenerate(),
            food,
            merchandise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub settings: ReportSettings,
    pub rows: Vec<ReportRow>,
    /// Citywide non-veteran total plus the veteran add-on.
    pub total_with_veterans: f64,
    /// `total_with_veterans` rounded to the nearest thousand.
    pub approximately: u64,
    pub unknown_location_respondents: u64,
    pub veteran_merchandise_respondents: u64,
    pub excluded_respondents: u64,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn city(&self) -> &ReportRow {
        self.rows.last().expect("report always has a city row")
    }
}

/// Per-class tables over one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTables {
    pub food: CountTable,
    pub merchandise: CountTable,
}

impl ClassTables {
    pub fn from_records(records: &[SurveyRecord], partition: &Partition, caps: Caps) -> Result<(Self, u64, u64)> {
        let food = aggregate(records, partition, EstimationClass::Food, caps.food)?;
        let merch = aggregate(records, partition, EstimationClass::MerchandiseNonveteran, caps.merchandise)?;
        Ok((
            ClassTables {
                food: food.table,
                merchandise: merch.table,
            },
            merch.veteran_merchandise,
            food.excluded,
        ))
    }

    fn get(&self, class: EstimationClass) -> &CountTable {
        match class {
            EstimationClass::Food => &self.food,
            EstimationClass::MerchandiseNonveteran => &self.merchandise,
        }
    }
}

fn undefined_as_none(r: Result<Estimate>) -> Result<Option<Estimate>> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(Error::Estimation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn group_estimate(table: &CountTable, b: &Subregion, markets: Option<&MarketModel>, level: f64) -> Result<ClassEstimate> {
    let c = table.subregion_counts(b)?;
    let estimate = undefined_as_none(subtotal_tau(table.cap(), c.n0b, c.n1b, c.n1_complement))?;
    let overdispersed = match (markets, estimate) {
        (Some(m), Some(_)) => match dispersion_for(table, m, b) {
            Ok(d) => undefined_as_none(od_subtotal(table.cap(), c.n0b, c.n1b, c.n1_complement, d))?,
            Err(Error::Validation(_)) if m.m0_over(b) <= 0.0 => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };
    Ok(ClassEstimate {
        class: table.class,
        n0: c.n0b,
        n1: c.n1b,
        estimate: estimate.map(|e| e.at_level(level)),
        overdispersed: overdispersed.map(|e| e.at_level(level)),
    })
}

fn city_estimate(table: &CountTable, markets: Option<&MarketModel>, level: f64) -> Result<ClassEstimate> {
    let inputs = RatioInputs::new(table.cap(), table.n0_total(), table.n1_total())?;
    let estimate = undefined_as_none(total_tau(&inputs))?;
    let overdispersed = match (markets, estimate) {
        (Some(m), Some(_)) if m.m0_total() > 0.0 => {
            let d = dispersion_citywide(table, m)?;
            undefined_as_none(od_ratio(table.cap(), inputs.n0, inputs.n1, d))?.map(|e| e.shifted(table.cap() as f64))
        }
        _ => None,
    };
    Ok(ClassEstimate {
        class: table.class,
        n0: inputs.n0,
        n1: inputs.n1,
        estimate: estimate.map(|e| e.at_level(level)),
        overdispersed: overdispersed.map(|e| e.at_level(level)),
    })
}

/// Build the report from per-class tables. Unknown-location respondents
/// enter only the citywide row.
pub fn estimate_report(
    tables: &ClassTables,
    layout: &Layout,
    settings: &ReportSettings,
    markets: Option<&Markets>,
) -> Result<EstimateReport> {
    settings.validate()?;
    for class in EstimationClass::ALL {
        let t = tables.get(class);
        if t.n0().len() != layout.partition.slots() {
            return validation(format!("{class} table does not match the partition"));
        }
        if t.cap() != settings.caps.get(class) {
            return validation(format!("{class} table cap differs from the configured cap"));
        }
    }
    let models = EstimationClass::ALL.map(|class| match markets {
        Some(m) => match m.model_for(tables.get(class)) {
            Ok(model) => Ok(Some(model)),
            Err(Error::Estimation(_)) => Ok(None),
            Err(e) => Err(e),
        },
        None => Ok(None),
    });
    let [food_m, merch_m] = models;
    let (food_m, merch_m) = (food_m?, merch_m?);

    let level = settings.level;
    let row_for = |kind: RowKind, g: &Group| -> Result<ReportRow> {
        Ok(ReportRow::assemble(
            kind,
            &g.borough,
            &g.name,
            group_estimate(&tables.food, &g.cells, food_m.as_ref(), level)?,
            group_estimate(&tables.merchandise, &g.cells, merch_m.as_ref(), level)?,
        ))
    };

    let mut rows = Vec::new();
    for borough in &layout.boroughs {
        for g in layout.subregions.iter().filter(|s| s.borough == borough.name) {
            rows.push(row_for(RowKind::Subregion, g)?);
        }
        rows.push(row_for(RowKind::Borough, borough)?);
    }
    let city = ReportRow::assemble(
        RowKind::City,
        "",
        "New York City",
        city_estimate(&tables.food, food_m.as_ref(), level)?,
        city_estimate(&tables.merchandise, merch_m.as_ref(), level)?,
    );
    let total_with_veterans = city.population + settings.veteran_add_on as f64;
    rows.push(city);

    let degenerate = rows.iter().any(|r| r.degenerate);
    let mut notes = vec![
        "Unknown-location respondents are included in the citywide row only.".to_string(),
        "Combined margins of error: per-class standard errors in quadrature, and the sum of per-class margins."
            .to_string(),
        format!(
            "Total including {} licensed veteran merchandise vendors (zero variance).",
            settings.veteran_add_on
        ),
    ];
    if degenerate {
        notes.push("Rows marked degenerate have a zero count in a standard-error denominator; their standard error is omitted.".into());
    }
    Ok(EstimateReport {
        settings: *settings,
        unknown_location_respondents: tables.food.unknown_respondents() + tables.merchandise.unknown_respondents(),
        veteran_merchandise_respondents: 0,
        excluded_respondents: 0,
        approximately: ((total_with_veterans / 1000.0).round() * 1000.0) as u64,
        total_with_veterans,
        degenerate,
        notes,
        rows,
    })
}

pub fn estimate_report_from_records(
    records: &[SurveyRecord],
    layout: &Layout,
    settings: &ReportSettings,
    markets: Option<&Markets>,
) -> Result<EstimateReport> {
    settings.validate()?;
    let (tables, veterans, excluded) = ClassTables::from_records(records, &layout.partition, settings.caps)?;
    let mut report = estimate_report(&tables, layout, settings, markets)?;
    report.veteran_merchandise_respondents = veterans;
    report.excluded_respondents = excluded;
    Ok(report)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.0}", v))
}

fn csv_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl EstimateReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "kind",
            "borough",
            "name",
            "respondents",
            "population",
            "moe_quadrature",
            "moe_linear",
            "moe_overdispersed",
            "food_n0",
            "food_n1",
            "food_value",
            "food_se",
            "merchandise_n0",
            "merchandise_n1",
            "merchandise_value",
            "merchandise_se",
            "degenerate",
        ])?;
        for r in &self.rows {
            let kind = serde_json::to_value(r.kind)?.as_str().unwrap_or_default().to_string();
            w.write_record([
                kind,
                r.borough.clone(),
                r.name.clone(),
                r.respondents.to_string(),
                r.population.to_string(),
                csv_opt(r.moe_quadrature),
                csv_opt(r.moe_linear),
                csv_opt(r.moe_overdispersed),
                r.food.n0.to_string(),
                r.food.n1.to_string(),
                csv_opt(r.food.estimate.map(|e| e.value)),
                csv_opt(r.food.se()),
                r.merchandise.n0.to_string(),
                r.merchandise.n1.to_string(),
                csv_opt(r.merchandise.estimate.map(|e| e.value)),
                csv_opt(r.merchandise.se()),
                r.degenerate.to_string(),
            ])?;
        }
        let city = self.city();
        w.write_record([
            "city_with_veterans".to_string(),
            String::new(),
            city.name.clone(),
            city.respondents.to_string(),
            self.total_with_veterans.to_string(),
            csv_opt(city.moe_quadrature),
            csv_opt(city.moe_linear),
            csv_opt(city.moe_overdispersed),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            city.degenerate.to_string(),
        ])?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let od = self.rows.iter().any(|r| r.moe_overdispersed.is_some());
        s.push_str("# Number of street vendors\n\n");
        s.push_str("| Borough | Area | Respondents | Population | MOE (quadrature) | MOE (linear) |");
        s.push_str(if od { " MOE (overdispersed) |\n" } else { "\n" });
        s.push_str("|---|---|---:|---:|---:|---:|");
        s.push_str(if od { "---:|\n" } else { "\n" });
        for r in &self.rows {
            let (borough, name) = match r.kind {
                RowKind::Subregion => (r.borough.clone(), r.name.clone()),
                RowKind::Borough => (format!("**{}**", r.borough), "**Total**".to_string()),
                RowKind::City => (format!("**{}**", r.name), "**Total**".to_string()),
            };
            let flag = if r.degenerate { " (degenerate)" } else { "" };
            let _ = write!(
                s,
                "| {borough} | {name}{flag} | {} | {:.0} | {} | {} |",
                r.respondents,
                r.population,
                fmt_opt(r.moe_quadrature),
                fmt_opt(r.moe_linear)
            );
            if od {
                let _ = write!(s, " {} |", fmt_opt(r.moe_overdispersed));
            }
            s.push('\n');
        }
        let city = self.city();
        s.push_str("\n## Citywide by class\n\n");
        s.push_str("| Class | Uncredentialed | Credentialed | Cap | Total | SE | MOE |\n");
        s.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        for c in [&city.food, &city.merchandise] {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                c.class,
                c.n0,
                c.n1,
                self.settings.caps.get(c.class),
                c.estimate.map_or("n/a".into(), |e| format!("{:.2}", e.value)),
                c.se().map_or("n/a".into(), |v| format!("{v:.2}")),
                c.se().map_or("n/a".into(), |v| format!("{:.2}", 2.0 * v)),
            );
        }
        let _ = writeln!(
            s,
            "\nTotal including veterans: {:.0} (approximately {})\n",
            self.total_with_veterans, self.approximately
        );
        let _ = writeln!(
            s,
            "Unknown-location respondents: {}. Veteran merchandise respondents: {}. Excluded respondents: {}.\n",
            self.unknown_location_respondents, self.veteran_merchandise_respondents, self.excluded_respondents
        );
        for n in &self.notes {
            let _ = writeln!(s, "- {n}");
        }
        s
    }
}

/// A weighting scenario: either a weight model applied to records, or
/// published weighted citywide totals per class.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScenario {
    Model { name: String, model: WeightModel },
    Totals { name: String, totals: Vec<(EstimationClass, f64, f64)> },
}

impl WeightScenario {
    pub fn name(&self) -> &str {
        match self {
            WeightScenario::Model { name, .. } | WeightScenario::Totals { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedClassResult {
    pub class: EstimationClass,
    pub n0: u64,
    pub n1: u64,
    pub n0w: f64,
    pub n1w: f64,
    pub bias_factor: f64,
    pub unweighted_total: f64,
    /// Unweighted total times the bias factor, equal to the weighted total.
    pub adjusted_total: f64,
    /// Weighted total with its standard error, when per-record weights exist.
    pub weighted: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub classes: Vec<WeightedClassResult>,
    pub combined_adjusted_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub class: String,
    pub min: f64,
    pub max: f64,
    pub min_scenario: String,
    pub max_scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedReport {
    pub settings: ReportSettings,
    pub scenarios: Vec<ScenarioResult>,
    pub ranges: Vec<RangeSummary>,
    pub degenerate: bool,
}

fn class_result(class: EstimationClass, table: &CountTable, n0w: f64, n1w: f64, weighted: Option<Estimate>) -> Result<WeightedClassResult> {
    let (n0, n1) = (table.n0_total(), table.n1_total());
    let unweighted = total_tau(&RatioInputs::new(table.cap(), n0, n1)?)?.value;
    let bias = bias_factor(n0w, n1w, n0, n1)?;
    Ok(WeightedClassResult {
        class,
        n0,
        n1,
        n0w,
        n1w,
        bias_factor: bias,
        unweighted_total: unweighted,
        adjusted_total: unweighted * bias,
        weighted,
    })
}

/// Evaluate weighting scenarios against the supplied class tables (and the
/// records behind them, for model scenarios).
pub fn weighted_report(
    records: &[SurveyRecord],
    partition: &Partition,
    tables: &ClassTables,
    scenarios: &[WeightScenario],
    settings: &ReportSettings,
) -> Result<WeightedReport> {
    settings.validate()?;
    if scenarios.is_empty() {
        return validation("at least one weighting scenario is required");
    }
    let mut out = Vec::new();
    let mut degenerate = false;
    for sc in scenarios {
        let mut classes = Vec::new();
        for class in EstimationClass::ALL {
            let table = tables.get(class);
            let computed = match sc {
                WeightScenario::Model { model, .. } => {
                    let wc = weighted_counts(records, model, partition, class)?;
                    let m = wc.ratio_moments();
                    let w = undefined_as_none(weighted_ratio(table.cap(), &wc))?
                        .map(|e| e.shifted(table.cap() as f64).at_level(settings.level));
                    Some((m.n0w, m.n1w, w))
                }
                WeightScenario::Totals { totals, .. } => totals
                    .iter()
                    .find(|t| t.0 == class)
                    .map(|&(_, n0w, n1w)| (n0w, n1w, None)),
            };
            let Some((n0w, n1w, w)) = computed else { continue };
            match class_result(class, table, n0w, n1w, w) {
                Ok(r) => {
                    degenerate |= r.weighted.is_some_and(|e| e.is_degenerate());
                    classes.push(r);
                }
                Err(Error::Estimation(_)) => degenerate = true,
                Err(e) => return Err(e),
            }
        }
        let combined = (classes.len() == 2).then(|| classes.iter().map(|c| c.adjusted_total).sum());
        out.push(ScenarioResult {
            name: sc.name().to_string(),
            classes,
            combined_adjusted_total: combined,
        });
    }

    let mut ranges = Vec::new();
    let mut push_range = |label: String, values: Vec<(String, f64)>| {
        if let (Some(lo), Some(hi)) = (
            values.iter().min_by(|a, b| a.1.total_cmp(&b.1)),
            values.iter().max_by(|a, b| a.1.total_cmp(&b.1)),
        ) {
            ranges.push(RangeSummary {
                class: label,
                min: lo.1,
                max: hi.1,
                min_scenario: lo.0.clone(),
                max_scenario: hi.0.clone(),
            });
        }
    };
    for class in EstimationClass::ALL {
        let values = out
            .iter()
            .filter_map(|s| s.classes.iter().find(|c| c.class == class).map(|c| (s.name.clone(), c.adjusted_total)))
            .collect();
        push_range(class.to_string(), values);
    }
    let combined = out
        .iter()
        .filter_map(|s| s.combined_adjusted_total.map(|t| (s.name.clone(), t)))
        .collect();
    push_range("combined".to_string(), combined);

    Ok(WeightedReport {
        settings: *settings,
        scenarios: out,
        ranges,
        degenerate,
    })
}

impl WeightedReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "class",
            "n0",
            "n1",
            "n0w",
            "n1w",
            "bias_factor",
            "unweighted_total",
            "adjusted_total",
            "weighted_se",
        ])?;
        for s in &self.scenarios {
            for c in &s.classes {
                w.write_record([
                    s.name.clone(),
                    c.class.to_string(),
                    c.n0.to_string(),
                    c.n1.to_string(),
                    c.n0w.to_string(),
                    c.n1w.to_string(),
                    c.bias_factor.to_string(),
                    c.unweighted_total.to_string(),
                    c.adjusted_total.to_string(),
                    csv_opt(c.weighted.and_then(|e| e.se)),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Weighted sensitivity scenarios\n\n");
        s.push_str("| Scenario | Class | Bias factor | Unweighted total | Adjusted total | SE |\n");
        s.push_str("|---|---|---:|---:|---:|---:|\n");
        for sc in &self.scenarios {
            for c in &sc.classes {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.3} | {:.0} | {:.0} | {} |",
                    sc.name,
                    c.class,
                    c.bias_factor,
                    c.unweighted_total,
                    c.adjusted_total,
                    fmt_opt(c.weighted.and_then(|e| e.se))
                );
            }
        }
        s.push_str("\n## Range across scenarios\n\n| Class | Min | Max |\n|---|---:|---:|\n");
        for r in &self.ranges {
            let _ = writeln!(
                s,
                "| {} | {:.0} ({}) | {:.0} ({}) |",
                r.class, r.min, r.min_scenario, r.max, r.max_scenario
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::VendorClass;
    use crate::io::MapEntry;
    use crate::weighted::CovariateMode;

    fn layout() -> Layout {
        let e = |c: &str, s: &str, b: &str| MapEntry {
            cell: c.into(),
            subregion: s.into(),
            borough: b.into(),
        };
        Layout::from_entries(&[e("a", "North", "X"), e("b", "North", "X"), e("c", "South", "Y")]).unwrap()
    }

    fn records() -> Vec<SurveyRecord> {
        let mut v = Vec::new();
        let mut id = 0;
        let mut add = |class: VendorClass, cred: bool, cell: Option<&str>, n: usize, vet: bool| {
            for _ in 0..n {
                id += 1;
                let mut r = SurveyRecord::new(id.to_string(), class, cred, cell);
                r.veteran = vet;
                v.push(r);
            }
        };
        add(VendorClass::Food, false, Some("a"), 30, false);
        add(VendorClass::Food, true, Some("a"), 10, false);
        add(VendorClass::Food, false, Some("c"), 20, false);
        add(VendorClass::Food, true, Some("c"), 5, false);
        add(VendorClass::Food, false, None, 4, false);
        add(VendorClass::Food, true, Some("b"), 3, false);
        add(VendorClass::Merchandise, false, Some("b"), 6, false);
        add(VendorClass::Merchandise, true, Some("c"), 4, false);
        add(VendorClass::Merchandise, true, Some("a"), 2, true);
        add(VendorClass::FirstAmendment, false, Some("a"), 1, false);
        v
    }

    #[test]
    fn rows_and_round_trip_counts() {
        let rep = estimate_report_from_records(&records(), &layout(), &ReportSettings::default(), None).unwrap();
        let kinds: Vec<_> = rep.rows.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            [RowKind::Subregion, RowKind::Borough, RowKind::Subregion, RowKind::Borough, RowKind::City]
        );
        let city = rep.city();
        assert_eq!((city.food.n0, city.food.n1), (54, 18));
        assert_eq!((city.merchandise.n0, city.merchandise.n1), (6, 4));
        assert_eq!(rep.veteran_merchandise_respondents, 2);
        assert_eq!(rep.excluded_respondents, 1);
        assert_eq!(rep.unknown_location_respondents, 4);
        // Subregion rows exclude the unknown cell.
        let sub: u64 = rep.rows.iter().filter(|r| r.kind == RowKind::Subregion).map(|r| r.respondents).sum();
        assert_eq!(sub + 4, city.respondents);
        assert_eq!(rep.rows[0].population, rep.rows[1].population);
    }

    #[test]
    fn combined_moe_forms() {
        let rep = estimate_report_from_records(&records(), &layout(), &ReportSettings::default(), None).unwrap();
        let city = rep.city();
        let (f, m) = (city.food.se().unwrap(), city.merchandise.se().unwrap());
        assert!((city.moe_quadrature.unwrap() - 2.0 * (f * f + m * m).sqrt()).abs() < 1e-9);
        assert!((city.moe_linear.unwrap() - 2.0 * (f + m)).abs() < 1e-9);
        assert_eq!(rep.total_with_veterans, city.population + 1000.0);
    }

    #[test]
    fn empty_records_give_degenerate_zero_report() {
        let rep = estimate_report_from_records(&[], &layout(), &ReportSettings::default(), None).unwrap();
        assert!(rep.degenerate);
        assert!(rep.rows.iter().all(|r| r.population == 0.0 && r.degenerate && r.moe_quadrature.is_none()));
        assert!(rep.to_markdown().contains("degenerate"));
        assert!(rep.to_csv().is_ok());
    }

    #[test]
    fn markets_add_overdispersed_moe() {
        let rep = estimate_report_from_records(
            &records(),
            &layout(),
            &ReportSettings::default(),
            Some(&Markets::VendorsPerMarket(5.0)),
        )
        .unwrap();
        let city = rep.city();
        assert!(city.moe_overdispersed.unwrap() > city.moe_quadrature.unwrap());
    }

    #[test]
    fn identity_weights_have_unit_bias_factor() {
        let recs = records();
        let lay = layout();
        let (tables, _, _) = ClassTables::from_records(&recs, &lay.partition, Caps::default()).unwrap();
        let scenarios = [
            WeightScenario::Model {
                name: "identity".into(),
                model: WeightModel::identity(),
            },
            WeightScenario::Totals {
                name: "published".into(),
                totals: vec![(EstimationClass::Food, 60.0, 9.0)],
            },
        ];
        let rep = weighted_report(&recs, &lay.partition, &tables, &scenarios, &ReportSettings::default()).unwrap();
        for c in &rep.scenarios[0].classes {
            assert!((c.bias_factor - 1.0).abs() < 1e-12);
            assert!((c.weighted.unwrap().value - c.unweighted_total).abs() < 1e-9);
        }
        assert_eq!(rep.scenarios[1].classes.len(), 1);
        assert!(rep.scenarios[1].combined_adjusted_total.is_none());
        let food = rep.ranges.iter().find(|r| r.class == "food").unwrap();
        assert_eq!(food.max_scenario, "published");
        assert!(rep.to_markdown().contains("identity"));
    }

    #[test]
    fn covariate_scenario_requires_values() {
        let recs = records();
        let lay = layout();
        let (tables, _, _) = ClassTables::from_records(&recs, &lay.partition, Caps::default()).unwrap();
        let sc = [WeightScenario::Model {
            name: "tickets".into(),
            model: WeightModel::covariate("tickets", CovariateMode::Inverse, 1.0),
        }];
        assert!(weighted_report(&recs, &lay.partition, &tables, &sc, &ReportSettings::default()).is_err());
    }
}
