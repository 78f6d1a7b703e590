//! CSV tables written at the end of a study, and readers for the report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{StudyResults, ToolId, N_LABEL};
use crate::error::{Error, Result};
use crate::io::{check_schema_line, csv_float, schema_line};
use crate::model::{ModelId, Param};

pub const SELECTIONS: &str = "selections";
pub const RMSE: &str = "rmse";
pub const CORRELATIONS: &str = "correlations";
pub const MARGLIK: &str = "marglik";
pub const CRITERIA: &str = "criteria";

pub const TABLES: [&str; 5] = [SELECTIONS, RMSE, CORRELATIONS, MARGLIK, CRITERIA];

fn opt(v: Option<f64>) -> String {
    v.map(csv_float).unwrap_or_else(|| "NA".into())
}

fn header(name: &str, columns: &str) -> String {
    format!("{}\n{columns}\n", schema_line(name))
}

pub fn selections_csv(r: &StudyResults) -> String {
    let models = &r.config.models;
    let score_cols: Vec<String> = models.iter().map(|m| format!("score_{m}")).collect();
    let mut out = header(SELECTIONS, &format!("scenario,replicate,tool,selected,tie,{}", score_cols.join(",")));
    for cell in r.cells.iter().filter(|c| c.is_complete()) {
        for s in &cell.selections {
            let scores: Vec<String> = s.scores.iter().map(|v| opt(*v)).collect();
            let selected = s.selected.map(|m| m.to_string()).unwrap_or_else(|| "NA".into());
            writeln!(out, "{},{},{},{},{},{}", cell.scenario, cell.replicate, s.tool, selected, s.tie, scores.join(","))
                .unwrap();
        }
    }
    out
}

fn rmse_labels() -> Vec<String> {
    let mut v: Vec<String> = Param::ALL.iter().map(|p| p.name().to_string()).collect();
    v.push(N_LABEL.into());
    v
}

pub fn rmse_csv(r: &StudyResults) -> String {
    let mut out = header(RMSE, "scenario,model,parameter,average_rmse,replicates");
    for &sc in &r.config.scenarios {
        let done = r.cells.iter().filter(|c| c.scenario == sc && c.is_complete()).count();
        for &m in &r.config.models {
            for label in rmse_labels() {
                let v = r.average_rmse(sc, m, &label);
                writeln!(out, "{sc},{m},{label},{},{done}", opt(v)).unwrap();
            }
        }
    }
    out
}

pub fn correlations_csv(r: &StudyResults) -> String {
    let mut out = header(CORRELATIONS, "scenario,replicate,model,param_a,param_b,correlation");
    for cell in r.cells.iter().filter(|c| c.is_complete()) {
        for mc in &cell.models {
            let c = &mc.correlations;
            for a in 0..c.names.len() {
                for b in a + 1..c.names.len() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        cell.scenario,
                        cell.replicate,
                        mc.model,
                        c.names[a],
                        c.names[b],
                        opt(c.values[a][b])
                    )
                    .unwrap();
                }
            }
        }
    }
    out
}

pub fn marglik_csv(r: &StudyResults) -> String {
    let mut out = header(MARGLIK, "scenario,replicate,model,method,tuning,log_marginal,mc_se,dropped,unreliable");
    for cell in r.cells.iter().filter(|c| c.is_complete()) {
        for mc in &cell.models {
            for row in &mc.marglik {
                let ToolId::Marginal { method, tuning } = row.tool else { continue };
                let tuning = tuning.map(|t| t.label()).unwrap_or_else(|| "none".into());
                writeln!(
                    out,
                    "{},{},{},{method},{tuning},{},{},{},{}",
                    cell.scenario,
                    cell.replicate,
                    mc.model,
                    opt(row.value),
                    opt(row.mc_se),
                    row.dropped,
                    row.unreliable
                )
                .unwrap();
            }
        }
    }
    out
}

pub fn criteria_csv(r: &StudyResults) -> String {
    let mut out = header(CRITERIA, "scenario,replicate,model,criterion,value,fit_term,penalty,thin,seed");
    for cell in r.cells.iter().filter(|c| c.is_complete()) {
        for mc in &cell.models {
            for c in &mc.criteria {
                let seed = c.seed.map(|s| s.to_string()).unwrap_or_else(|| "NA".into());
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{seed}",
                    cell.scenario,
                    cell.replicate,
                    mc.model,
                    c.criterion,
                    opt(c.value),
                    opt(c.fit_term),
                    opt(c.penalty),
                    c.thin
                )
                .unwrap();
            }
        }
    }
    out
}

/// Writes the five tables into `dir`; returns their file names.
pub fn write_tables(r: &StudyResults, dir: &Path) -> Result<Vec<String>> {
    let tables = [
        (SELECTIONS, selections_csv(r)),
        (RMSE, rmse_csv(r)),
        (CORRELATIONS, correlations_csv(r)),
        (MARGLIK, marglik_csv(r)),
        (CRITERIA, criteria_csv(r)),
    ];
    let mut names = Vec::new();
    for (name, text) in tables {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        names.push(file);
    }
    Ok(names)
}

/// Rows of a table as string fields, after checking its schema line.
pub fn read_table(path: &Path, name: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    check_schema_line(lines.next().unwrap_or_default(), name)?;
    let columns: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::parse(path.display().to_string(), "missing header row"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                format!("{}:{}", path.display(), n + 3),
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        rows.push(fields);
    }
    Ok((columns, rows))
}

/// Selection proportions per (tool, scenario) from a `selections.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSummary {
    pub models: Vec<ModelId>,
    /// (tool label, scenario, counts per model, denominator)
    pub rows: Vec<(String, u32, Vec<usize>, usize)>,
}

pub fn summarise_selections(path: &Path) -> Result<SelectionSummary> {
    let (columns, rows) = read_table(path, SELECTIONS)?;
    let models: Vec<ModelId> = columns
        .iter()
        .filter_map(|c| c.strip_prefix("score_"))
        .map(str::parse)
        .collect::<Result<_>>()?;
    let bad = |m: &str| Error::parse(path.display().to_string(), m.to_string());
    let mut out: Vec<(String, u32, Vec<usize>, usize)> = Vec::new();
    for row in rows {
        let scenario: u32 = row[0].parse().map_err(|_| bad("bad scenario"))?;
        let tool = row[2].clone();
        let idx = match out.iter().position(|r| r.0 == tool && r.1 == scenario) {
            Some(i) => i,
            None => {
                out.push((tool, scenario, vec![0; models.len()], 0));
                out.len() - 1
            }
        };
        if row[3] == "NA" {
            continue;
        }
        let m: ModelId = row[3].parse()?;
        let k = models.iter().position(|&x| x == m).ok_or_else(|| bad("selected model has no score column"))?;
        out[idx].2[k] += 1;
        out[idx].3 += 1;
    }
    Ok(SelectionSummary { models, rows: out })
}
