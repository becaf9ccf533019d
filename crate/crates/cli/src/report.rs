//! Report files: cells/comparisons/importance/variable-t_x CSVs, per-figure
//! plot data, and the human-readable summary. Numbers are written with
//! shortest-round-trip formatting, so identical runs produce identical
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use augur_core::eval::{CellComparison, CellResult, EvalReport, VariableTxResult};
use augur_core::span::TimeSpan;
use augur_core::{Error, Result};

pub const CELLS_FILE: &str = "cells.csv";
pub const COMPARISONS_FILE: &str = "comparisons.csv";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const VARIABLE_TX_FILE: &str = "variable_tx.csv";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// A cells.csv row; fold AUCs are kept in column order, pipe-separated.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub attack: String,
    pub filter: String,
    pub t_x: TimeSpan,
    pub t_g: TimeSpan,
    pub mean_auc: f64,
    pub positive_density: f64,
    pub folds: usize,
    pub failed_folds: usize,
    pub best: bool,
    pub fold_aucs: Vec<f64>,
}

impl From<&CellResult> for CellRow {
    fn from(cell: &CellResult) -> CellRow {
        CellRow {
            attack: cell.attack.clone(),
            filter: cell.filter.clone(),
            t_x: cell.t_x,
            t_g: cell.t_g,
            mean_auc: cell.mean_auc,
            positive_density: cell.positive_density,
            folds: cell.fold_aucs.len(),
            failed_folds: cell.failed_folds,
            best: cell.best,
            fold_aucs: cell.fold_aucs.clone(),
        }
    }
}

pub fn write_cells(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "attack,filter,t_x,t_g,mean_auc,positive_density,folds,failed_folds,best,fold_aucs\n",
    );
    for cell in &report.cells {
        let folds: Vec<String> = cell.fold_aucs.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            cell.attack,
            cell.filter,
            cell.t_x,
            cell.t_g,
            cell.mean_auc,
            cell.positive_density,
            cell.fold_aucs.len(),
            cell.failed_folds,
            cell.best,
            folds.join("|")
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_cells(path: &Path) -> Result<Vec<CellRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 10 fields, found {}", fields.len()),
            ));
        }
        let num = |raw: &str, what: &str| -> Result<f64> {
            raw.parse()
                .map_err(|_| parse_err(path, lineno, format!("bad {what} {raw:?}")))
        };
        let fold_aucs = if fields[9].is_empty() {
            Vec::new()
        } else {
            fields[9]
                .split('|')
                .map(|v| num(v, "fold auc"))
                .collect::<Result<Vec<f64>>>()?
        };
        rows.push(CellRow {
            attack: fields[0].to_string(),
            filter: fields[1].to_string(),
            t_x: fields[2].parse()?,
            t_g: fields[3].parse()?,
            mean_auc: num(fields[4], "mean_auc")?,
            positive_density: num(fields[5], "positive_density")?,
            folds: num(fields[6], "folds")? as usize,
            failed_folds: num(fields[7], "failed_folds")? as usize,
            best: fields[8] == "true",
            fold_aucs,
        });
    }
    Ok(rows)
}

pub fn write_comparisons(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("attack,t_x,t_g,filter_a,filter_b,mean_a,mean_b,t,p,significant\n");
    for c in &report.comparisons {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.attack,
            c.t_x,
            c.t_g,
            c.filter_a,
            c.filter_b,
            c.mean_a,
            c.mean_b,
            c.t,
            c.p,
            c.significant
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_comparisons(path: &Path) -> Result<Vec<CellComparison>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 10 fields, found {}", fields.len()),
            ));
        }
        let num = |raw: &str, what: &str| -> Result<f64> {
            raw.parse()
                .map_err(|_| parse_err(path, lineno, format!("bad {what} {raw:?}")))
        };
        rows.push(CellComparison {
            attack: fields[0].to_string(),
            t_x: fields[1].parse()?,
            t_g: fields[2].parse()?,
            filter_a: fields[3].to_string(),
            filter_b: fields[4].to_string(),
            mean_a: num(fields[5], "mean_a")?,
            mean_b: num(fields[6], "mean_b")?,
            t: num(fields[7], "t")?,
            p: num(fields[8], "p")?,
            significant: fields[9] == "true",
        });
    }
    Ok(rows)
}

pub fn write_importance(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "attack,t_x,t_g,signal,p_high_attack,p_low_attack,p_high_clear,p_low_clear,score,class_connected,cfs_count,cfs_folds\n",
    );
    for imp in &report.importance {
        for s in &imp.report.signals {
            let cfs = imp
                .cfs_counts
                .iter()
                .find(|(name, _)| *name == s.signal)
                .map_or(0, |(_, c)| *c);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                imp.attack,
                imp.t_x,
                imp.t_g,
                s.signal,
                s.p_high_attack,
                s.p_low_attack,
                s.p_high_clear,
                s.p_low_clear,
                s.score,
                s.class_connected,
                cfs,
                imp.cfs_folds
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Slim importance rows for the report command.
#[derive(Debug, Clone)]
pub struct ImportanceRow {
    pub attack: String,
    pub signal: String,
    pub score: f64,
    pub cfs_count: usize,
    pub cfs_folds: usize,
}

pub fn read_importance(path: &Path) -> Result<Vec<ImportanceRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 12 fields, found {}", fields.len()),
            ));
        }
        rows.push(ImportanceRow {
            attack: fields[0].to_string(),
            signal: fields[3].to_string(),
            score: fields[8]
                .parse()
                .map_err(|_| parse_err(path, lineno, "bad score"))?,
            cfs_count: fields[10]
                .parse()
                .map_err(|_| parse_err(path, lineno, "bad cfs_count"))?,
            cfs_folds: fields[11]
                .parse()
                .map_err(|_| parse_err(path, lineno, "bad cfs_folds"))?,
        });
    }
    Ok(rows)
}

pub fn write_variable_tx(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out =
        String::from("attack,t_g,base_t_x,overrides,fixed_auc,variable_auc,t,p,significant\n");
    for v in &report.variable_tx {
        let overrides: Vec<String> = v
            .overrides
            .iter()
            .map(|(name, tx)| format!("{name}={tx}"))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            v.attack,
            v.t_g,
            v.base_t_x,
            overrides.join(";"),
            v.fixed_auc,
            v.variable_auc,
            v.t,
            v.p,
            v.significant
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_variable_tx(path: &Path) -> Result<Vec<VariableTxResult>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 9 fields, found {}", fields.len()),
            ));
        }
        let num = |raw: &str, what: &str| -> Result<f64> {
            raw.parse()
                .map_err(|_| parse_err(path, lineno, format!("bad {what} {raw:?}")))
        };
        let mut overrides = Vec::new();
        if !fields[3].is_empty() {
            for part in fields[3].split(';') {
                let (name, tx) = part
                    .split_once('=')
                    .ok_or_else(|| parse_err(path, lineno, "bad override"))?;
                overrides.push((name.to_string(), tx.parse()?));
            }
        }
        rows.push(VariableTxResult {
            attack: fields[0].to_string(),
            t_g: fields[1].parse()?,
            base_t_x: fields[2].parse()?,
            overrides,
            fixed_auc: num(fields[4], "fixed_auc")?,
            variable_auc: num(fields[5], "variable_auc")?,
            t: num(fields[6], "t")?,
            p: num(fields[7], "p")?,
            significant: fields[8] == "true",
        });
    }
    Ok(rows)
}

fn file_token(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Per-figure plot data: one file per attack type with a mean-AUC column
/// per t_g (unfiltered classifier), plus one file per (attack, t_g) with a
/// column per filter. The x column is t_x in grid order.
pub fn write_plot_data(cells: &[CellRow], dir: &Path) -> Result<Vec<String>> {
    let mut attacks: Vec<&str> = Vec::new();
    let mut tx_values: Vec<TimeSpan> = Vec::new();
    let mut tg_values: Vec<TimeSpan> = Vec::new();
    let mut filters: Vec<&str> = Vec::new();
    for c in cells {
        if !attacks.contains(&c.attack.as_str()) {
            attacks.push(&c.attack);
        }
        if !tx_values.contains(&c.t_x) {
            tx_values.push(c.t_x);
        }
        if !tg_values.contains(&c.t_g) {
            tg_values.push(c.t_g);
        }
        if !filters.contains(&c.filter.as_str()) {
            filters.push(&c.filter);
        }
    }
    let lookup = |attack: &str, filter: &str, tx: TimeSpan, tg: TimeSpan| -> Option<f64> {
        cells
            .iter()
            .find(|c| c.attack == attack && c.filter == filter && c.t_x == tx && c.t_g == tg)
            .map(|c| c.mean_auc)
    };
    let fmt_cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));

    let mut written = Vec::new();
    let baseline = if filters.contains(&"none") {
        "none"
    } else {
        filters.first().copied().unwrap_or("none")
    };
    for attack in &attacks {
        let mut out = String::from("t_x");
        for tg in &tg_values {
            let _ = write!(out, ",{tg}");
        }
        out.push('\n');
        for tx in &tx_values {
            let _ = write!(out, "{tx}");
            for tg in &tg_values {
                let _ = write!(out, ",{}", fmt_cell(lookup(attack, baseline, *tx, *tg)));
            }
            out.push('\n');
        }
        let name = format!("plot_granularity_{}.csv", file_token(attack));
        fs::write(dir.join(&name), out)?;
        written.push(name);

        for tg in &tg_values {
            let mut out = String::from("t_x");
            for filter in &filters {
                let _ = write!(out, ",{filter}");
            }
            out.push('\n');
            for tx in &tx_values {
                let _ = write!(out, "{tx}");
                for filter in &filters {
                    let _ = write!(out, ",{}", fmt_cell(lookup(attack, filter, *tx, *tg)));
                }
                out.push('\n');
            }
            let name = format!(
                "plot_filters_{}_{}.csv",
                file_token(attack),
                file_token(&tg.to_string())
            );
            fs::write(dir.join(&name), out)?;
            written.push(name);
        }
    }
    Ok(written)
}

/// Human-readable run summary: best cell, filter ranking with significance
/// markers against the unfiltered baseline, importance and variable-t_x
/// notes when available.
pub fn render_summary(
    cells: &[CellRow],
    comparisons: &[CellComparison],
    importance: &[ImportanceRow],
    variable_tx: &[VariableTxResult],
) -> String {
    if cells.is_empty() {
        return "report is empty: no evaluated cells\n".to_string();
    }
    let mut attacks: Vec<&str> = Vec::new();
    for c in cells {
        if !attacks.contains(&c.attack.as_str()) {
            attacks.push(&c.attack);
        }
    }

    let mut out = String::new();
    for attack in attacks {
        let best = cells
            .iter()
            .filter(|c| c.attack == attack && c.best)
            .max_by(|a, b| a.mean_auc.total_cmp(&b.mean_auc))
            .or_else(|| {
                cells
                    .iter()
                    .filter(|c| c.attack == attack)
                    .max_by(|a, b| a.mean_auc.total_cmp(&b.mean_auc))
            });
        let Some(best) = best else { continue };
        let _ = writeln!(
            out,
            "{attack}: best granularity t_x={} t_g={} mean AUC {:.3} (positive density {:.1}%)",
            best.t_x,
            best.t_g,
            best.mean_auc,
            best.positive_density * 100.0
        );

        let mut group: Vec<&CellRow> = cells
            .iter()
            .filter(|c| c.attack == attack && c.t_x == best.t_x && c.t_g == best.t_g)
            .collect();
        group.sort_by(|a, b| b.mean_auc.total_cmp(&a.mean_auc));
        if group.len() > 1 {
            let _ = writeln!(out, "  filters at the best granularity:");
            for cell in group {
                let significant = comparisons.iter().any(|c| {
                    c.attack == attack
                        && c.t_x == best.t_x
                        && c.t_g == best.t_g
                        && c.significant
                        && ((c.filter_a == cell.filter && c.filter_b == "none")
                            || (c.filter_b == cell.filter && c.filter_a == "none"))
                });
                let marker = if significant { " *" } else { "" };
                let _ = writeln!(
                    out,
                    "    {:<10} {:.3}{}",
                    cell.filter, cell.mean_auc, marker
                );
            }
        }

        let mut ranked: Vec<&ImportanceRow> =
            importance.iter().filter(|r| r.attack == attack).collect();
        if !ranked.is_empty() {
            ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
            let scores: Vec<String> = ranked
                .iter()
                .map(|r| format!("{} ({:.2})", r.signal, r.score))
                .collect();
            let _ = writeln!(out, "  signal discriminativeness: {}", scores.join(", "));
            let cfs: Vec<String> = ranked
                .iter()
                .map(|r| format!("{} {}/{}", r.signal, r.cfs_count, r.cfs_folds))
                .collect();
            let _ = writeln!(out, "  cfs selections: {}", cfs.join(", "));
        }

        if let Some(v) = variable_tx.iter().find(|v| v.attack == attack) {
            if v.overrides.is_empty() {
                let _ = writeln!(out, "  variable t_x: no per-signal override beats the base");
            } else {
                let overrides: Vec<String> = v
                    .overrides
                    .iter()
                    .map(|(name, tx)| format!("{name}@{tx}"))
                    .collect();
                let _ = writeln!(
                    out,
                    "  variable t_x: {:.3} -> {:.3} with {}{}",
                    v.fixed_auc,
                    v.variable_auc,
                    overrides.join(", "),
                    if v.significant { " *" } else { "" }
                );
            }
        }
    }
    if comparisons.iter().any(|c| c.significant) {
        out.push_str("(* significant at p < 0.05)\n");
    }
    out
}
