//! `natmaplab report`: every `result.json` under a directory as one table.

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::result::ExperimentResult;
use crate::run::RESULT_FILE;

pub const REPORT_FILE: &str = "report.csv";

pub const COLUMNS: [&str; 11] = [
    "n",
    "experiment",
    "check",
    "measured",
    "bound",
    "relation",
    "tolerance",
    "pass",
    "anchor",
    "config_hash",
    "run",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub experiment: String,
    pub check: String,
    pub measured: Option<f64>,
    pub bound: f64,
    pub relation: String,
    pub tolerance: f64,
    pub pass: bool,
    pub anchor: String,
    pub config_hash: String,
    /// Run directory relative to the report root.
    pub run: String,
}

impl ReportRow {
    fn fields(&self) -> [String; 11] {
        [
            self.n.to_string(),
            self.experiment.clone(),
            self.check.clone(),
            self.measured.map_or_else(|| "NA".to_string(), |m| format!("{m:.6e}")),
            format!("{:.6e}", self.bound),
            self.relation.clone(),
            format!("{:e}", self.tolerance),
            if self.pass { "pass" } else { "FAIL" }.to_string(),
            self.anchor.clone(),
            self.config_hash.clone(),
            self.run.clone(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// Sorted by `n`, then run directory, then the row order of each result.
    pub rows: Vec<ReportRow>,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(format!("reading {}", dir.display()), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(format!("reading {}", dir.display()), e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path.file_name().is_some_and(|f| f == RESULT_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

/// `result.json` files below `root`, sorted by path.
pub fn find_results(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    if root.is_dir() {
        collect(root, &mut out)?;
    }
    out.sort();
    Ok(out)
}

pub fn build_report(root: &Path) -> Result<Report, CliError> {
    let files = find_results(root)?;
    if files.is_empty() {
        return Err(CliError::NoResults(root.to_path_buf()));
    }
    let mut rows = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let result: ExperimentResult = serde_json::from_str(&text).map_err(|e| CliError::BadResult {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let run = path
            .parent()
            .and_then(|p| p.strip_prefix(root).ok())
            .map(|p| p.display().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| ".".to_string());
        for r in &result.rows {
            let relation = serde_json::to_value(r.relation)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            rows.push(ReportRow {
                n: r.n,
                experiment: result.experiment.clone(),
                check: r.name.clone(),
                measured: r.measured,
                bound: r.bound,
                relation,
                tolerance: r.tolerance,
                pass: r.pass,
                anchor: r.anchor.clone(),
                config_hash: result.config_hash.clone(),
                run: run.clone(),
            });
        }
    }
    // stable: keeps run and row order within each dimension
    rows.sort_by_key(|r| r.n);
    Ok(Report { rows })
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.fields()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Aligned text table with one block per dimension.
    pub fn to_table(&self) -> String {
        let shown = [1usize, 2, 3, 4, 5, 7];
        let mut widths: Vec<usize> = shown.iter().map(|&i| COLUMNS[i].len()).collect();
        for r in &self.rows {
            let f = r.fields();
            for (w, &i) in widths.iter_mut().zip(&shown) {
                *w = (*w).max(f[i].len());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let mut s = String::new();
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(s, "{c:<w$}  ");
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        let mut current = None;
        for r in &self.rows {
            if current != Some(r.n) {
                if current.is_some() {
                    out.push('\n');
                }
                let _ = writeln!(out, "n = {}", r.n);
                let _ = writeln!(out, "{}", line(shown.iter().map(|&i| COLUMNS[i]).collect()));
                current = Some(r.n);
            }
            let f = r.fields();
            let _ = writeln!(out, "{}", line(shown.iter().map(|&i| f[i].as_str()).collect()));
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        let _ = writeln!(out, "\n{} checks, {} failed", self.rows.len(), failed);
        out
    }
}

/// Builds the report and writes `report.csv` into `root`.
pub fn report(root: &Path) -> Result<Report, CliError> {
    let rep = build_report(root)?;
    let path = root.join(REPORT_FILE);
    fs::write(&path, rep.to_csv()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(rep)
}
