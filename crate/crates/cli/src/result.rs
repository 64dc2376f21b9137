//! Result rows, the collector experiments write into, and the `result.json` document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checks::{find_spec, Relation, Slack};
use crate::config::ResolvedConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub name: String,
    pub n: usize,
    pub measured: Option<f64>,
    pub bound: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub slack: Slack,
    pub pass: bool,
    pub anchor: String,
    pub error: Option<String>,
}

impl Row {
    /// Largest deviation from `bound` the tolerance allows.
    pub fn allowance(&self) -> f64 {
        match self.slack {
            Slack::Relative => self.tolerance * self.bound.abs(),
            Slack::Absolute => self.tolerance,
        }
    }

    /// `pass` recomputed from `measured`, `bound` and the tolerance.
    pub fn evaluate(&self) -> bool {
        let Some(m) = self.measured else {
            return false;
        };
        if !m.is_finite() {
            return false;
        }
        let a = self.allowance();
        match self.relation {
            Relation::AtMost => m <= self.bound + a,
            Relation::AtLeast => m >= self.bound - a,
            Relation::Near => (m - self.bound).abs() <= a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResult {
    pub schema: u32,
    pub experiment: String,
    pub config: ResolvedConfig,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub verdict: Verdict,
}

impl ExperimentResult {
    pub fn new(config: ResolvedConfig, rows: Vec<Row>) -> Self {
        let verdict = if !rows.is_empty() && rows.iter().all(|r| r.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            schema: SCHEMA_VERSION,
            experiment: config.experiment.name().to_string(),
            config_hash: config_hash(&config),
            config,
            rows,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the compact JSON of the resolved config.
pub fn config_hash(config: &ResolvedConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Rows and plot data accumulated by one experiment.
pub struct Checks<'a> {
    cfg: &'a ResolvedConfig,
    pub rows: Vec<Row>,
    /// `(check name, csv text)`; written as `<check>.csv`.
    pub data: Vec<(String, String)>,
}

impl<'a> Checks<'a> {
    pub fn new(cfg: &'a ResolvedConfig) -> Self {
        Self {
            cfg,
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn config(&self) -> &ResolvedConfig {
        self.cfg
    }

    fn blank(&self, id: &str, label: Option<String>, bound: f64) -> Row {
        let spec = find_spec(self.cfg.experiment, id);
        let name = match label {
            Some(l) => format!("{id}[{l}]"),
            None => id.to_string(),
        };
        Row {
            name,
            n: self.cfg.n,
            measured: None,
            bound,
            relation: spec.relation,
            tolerance: self.cfg.tolerance(id),
            slack: spec.slack,
            pass: false,
            anchor: spec.anchor.to_string(),
            error: None,
        }
    }

    pub fn record(&mut self, id: &str, label: Option<String>, measured: f64, bound: f64) {
        let mut row = self.blank(id, label, bound);
        row.measured = measured.is_finite().then_some(measured);
        if !measured.is_finite() {
            row.error = Some(format!("non-finite measurement {measured}"));
        }
        row.pass = row.evaluate();
        self.rows.push(row);
    }

    /// A check that could not be measured: recorded as failed, the run continues.
    pub fn failed(&mut self, id: &str, label: Option<String>, bound: f64, err: impl std::fmt::Display) {
        let mut row = self.blank(id, label, bound);
        row.error = Some(err.to_string());
        self.rows.push(row);
    }

    pub fn data(&mut self, name: &str, csv: String) {
        self.data.push((name.to_string(), csv));
    }
}
