use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use vendorest::harness::{run_with_rows, write_replicates_csv, ExperimentConfig, ExperimentReport};
use vendorest::hierarchical::{fit, summarize_values, FitConfig, FitData, HierModel, PosteriorDraws, PosteriorSummary};
use vendorest::io::{check_cells, read_partition_map_path, read_records_path};
use vendorest::partition::UNKNOWN_LABEL;
use vendorest::report::{estimate_report_from_records, weighted_report, ClassTables};
use vendorest::rng::RngStream;
use vendorest::simulator::{GenerativeModel, Scenario};
use vendorest::{Error, Result};

use crate::config::{load, RunConfig};
use crate::Format;

/// Rendered output plus whether any estimate was degenerate.
pub struct Output {
    pub body: String,
    pub degenerate: bool,
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn estimate(config: &Path, format: Format, vendors_per_market: Option<f64>) -> Result<Output> {
    let cfg = RunConfig::load(config)?;
    let layout = read_partition_map_path(&cfg.partition_map)?;
    let records = read_records_path(&cfg.records)?;
    check_cells(&records, &layout.partition)?;
    let markets = cfg.markets(&layout, vendors_per_market)?;
    let report = estimate_report_from_records(&records, &layout, &cfg.settings(), markets.as_ref())?;
    let body = match format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
        Format::Md => report.to_markdown(),
    };
    Ok(Output {
        body,
        degenerate: report.degenerate,
    })
}

pub fn weighted(config: &Path, format: Format) -> Result<Output> {
    let cfg = RunConfig::load(config)?;
    let layout = read_partition_map_path(&cfg.partition_map)?;
    let records = read_records_path(&cfg.records)?;
    check_cells(&records, &layout.partition)?;
    let settings = cfg.settings();
    let (tables, _, _) = ClassTables::from_records(&records, &layout.partition, settings.caps)?;
    let report = weighted_report(&records, &layout.partition, &tables, &cfg.scenarios()?, &settings)?;
    let body = match format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
        Format::Md => report.to_markdown(),
    };
    Ok(Output {
        body,
        degenerate: report.degenerate,
    })
}

#[derive(Serialize)]
struct SimulatedReplicate {
    replicate: u64,
    n0: Vec<u64>,
    n1: Vec<u64>,
    response_clamped: bool,
    markets_rounded: bool,
}

#[derive(Serialize)]
struct SimulationOutput {
    model: GenerativeModel,
    seed: u64,
    cells: Vec<String>,
    replicates: Vec<SimulatedReplicate>,
}

pub fn simulate(config: &Path, format: Format, seed: Option<u64>, model: Option<GenerativeModel>) -> Result<Output> {
    let mut scenario: Scenario = load(config)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if scenario.replicates == 0 {
        return Err(Error::Validation("replicates must be positive".into()));
    }
    let model = model.unwrap_or_else(|| scenario.default_model());
    let stream = RngStream::new(scenario.seed);
    let mut cells: Vec<String> = scenario.cells.iter().map(|c| c.id.clone()).collect();
    cells.push(UNKNOWN_LABEL.to_string());
    let reps = (0..scenario.replicates)
        .map(|r| {
            let c = scenario.simulate(model, &stream, r)?;
            Ok(SimulatedReplicate {
                replicate: r,
                n0: c.n0,
                n1: c.n1,
                response_clamped: c.response_clamped,
                markets_rounded: c.markets_rounded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = SimulationOutput {
        model,
        seed: scenario.seed,
        cells,
        replicates: reps,
    };
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&out)?,
        Format::Csv => csv_string(|buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["replicate", "cell", "n0", "n1"])?;
            for r in &out.replicates {
                for (i, cell) in out.cells.iter().enumerate() {
                    w.write_record([r.replicate.to_string(), cell.clone(), r.n0[i].to_string(), r.n1[i].to_string()])?;
                }
            }
            w.flush()?;
            Ok(())
        })?,
        Format::Md => {
            let n = out.replicates.len() as f64;
            let mut s = format!(
                "# Simulated counts\n\nModel {}, seed {}, {} replicates.\n\n| Cell | Mean n0 | Mean n1 |\n|---|---:|---:|\n",
                serde_json::to_value(model)?.as_str().unwrap_or_default(),
                out.seed,
                out.replicates.len()
            );
            for (i, cell) in out.cells.iter().enumerate() {
                let m0 = out.replicates.iter().map(|r| r.n0[i] as f64).sum::<f64>() / n;
                let m1 = out.replicates.iter().map(|r| r.n1[i] as f64).sum::<f64>() / n;
                let _ = writeln!(s, "| {cell} | {m0:.3} | {m1:.3} |");
            }
            s
        }
    };
    Ok(Output { body, degenerate: false })
}

fn coverage_markdown(r: &ExperimentReport) -> Result<String> {
    let mut s = format!(
        "# Coverage\n\nModel {}, seed {}, {} replicates, level {}.\n\n| Estimator | Truth | Coverage | Empirical SD | Mean se | se error | Relative bias | Degenerate |\n|---|---:|---:|---:|---:|---:|---:|---:|\n",
        serde_json::to_value(r.model)?.as_str().unwrap_or_default(),
        r.seed,
        r.replicates,
        r.level
    );
    for e in &r.estimators {
        let _ = writeln!(
            s,
            "| {} | {:.2} | {:.4} | {:.3} | {:.3} | {:+.4} | {:+.5} | {} |",
            e.label, e.truth, e.coverage, e.empirical_sd, e.mean_se, e.relative_se_error, e.relative_bias, e.degenerate
        );
    }
    Ok(s)
}

pub fn coverage(config: &Path, format: Format, seed: Option<u64>, rows_out: Option<&Path>) -> Result<Output> {
    let mut cfg: ExperimentConfig = load(config)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let (report, rows) = run_with_rows(&cfg)?;
    if let Some(path) = rows_out {
        write_replicates_csv(std::fs::File::create(path)?, &cfg, &rows)?;
    }
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report)?,
        Format::Csv => csv_string(|buf| write_replicates_csv(buf, &cfg, &rows))?,
        Format::Md => coverage_markdown(&report)?,
    };
    let degenerate = report.estimators.iter().any(|e| e.degenerate > 0);
    Ok(Output { body, degenerate })
}

#[derive(Serialize)]
struct ParameterSummary {
    name: String,
    #[serde(flatten)]
    summary: PosteriorSummary,
}

#[derive(Serialize)]
struct FitOutput {
    model: HierModel,
    config: FitConfig,
    total: PosteriorSummary,
    acceptance: Vec<f64>,
    parameters: Vec<ParameterSummary>,
}

pub struct FitOptions {
    pub model: Option<HierModel>,
    pub config: FitConfig,
    pub level: f64,
    pub draws_out: Option<std::path::PathBuf>,
}

fn fit_summary(draws: &PosteriorDraws, config: &FitConfig, level: f64) -> Result<FitOutput> {
    let parameters = draws
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = draws.draws.iter().map(|row| row[j]).collect();
            Ok(ParameterSummary {
                name: name.clone(),
                summary: summarize_values(&col, level)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FitOutput {
        model: draws.model,
        config: config.clone(),
        total: summarize_values(&draws.total, level)?,
        acceptance: draws.acceptance.clone(),
        parameters,
    })
}

pub fn fit_cmd(config: &Path, format: Format, opts: FitOptions) -> Result<Output> {
    let data: FitData = load(config)?;
    if let Some(k) = data.k {
        if k != data.n0.len() {
            return Err(Error::Validation(format!("K = {k} but n0 has {} entries", data.n0.len())));
        }
    }
    let model = opts.model.unwrap_or(if data.rho.is_some() { HierModel::Model5 } else { HierModel::Model4 });
    let draws = fit(model, &data, &opts.config)?;
    if let Some(path) = &opts.draws_out {
        draws.write_csv(std::fs::File::create(path)?)?;
    }
    let summary = fit_summary(&draws, &opts.config, opts.level)?;
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&summary)?,
        Format::Csv => csv_string(|buf| draws.write_csv(buf))?,
        Format::Md => {
            let mut s = format!(
                "# Posterior summary\n\nModel {}, {} chains, {} draws, acceptance {:?}.\n\n| Quantity | Mean | Lower | Upper |\n|---|---:|---:|---:|\n",
                serde_json::to_value(model)?.as_str().unwrap_or_default(),
                opts.config.chains,
                draws.len(),
                draws.acceptance.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
            let t = &summary.total;
            let _ = writeln!(s, "| total | {:.1} | {:.1} | {:.1} |", t.mean, t.lower, t.upper);
            for p in &summary.parameters {
                let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.4} |", p.name, p.summary.mean, p.summary.lower, p.summary.upper);
            }
            s
        }
    };
    Ok(Output { body, degenerate: false })
}
