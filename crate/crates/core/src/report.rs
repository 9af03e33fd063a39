//! Comparison tables: one row per method, one column per program, cells
//! rendered as `rate (n=k)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evaluator::EvaluationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    KillRate,
    StatementCoverage,
    BranchCoverage,
}

impl Metric {
    pub fn title(self) -> &'static str {
        match self {
            Metric::KillRate => "Kill rate",
            Metric::StatementCoverage => "Statement coverage",
            Metric::BranchCoverage => "Branch coverage",
        }
    }

    /// Fraction in [0, 1].
    fn value(self, r: &EvaluationReport) -> Option<f64> {
        match self {
            Metric::KillRate => r.rate().ok().map(|k| k.fraction()),
            Metric::StatementCoverage => Some(r.statement_coverage),
            Metric::BranchCoverage => Some(r.branch_coverage),
        }
    }
}

impl FromStr for Metric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kill" | "kill-rate" | "kill_rate" => Ok(Metric::KillRate),
            "stmt" | "statement" | "statement-coverage" => Ok(Metric::StatementCoverage),
            "branch" | "branch-coverage" => Ok(Metric::BranchCoverage),
            other => Err(ReportError::UnknownMetric(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    /// The suite label: boundary, general, imported or random.
    Label,
    /// The report's method name.
    Method,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected markdown, csv, text or json)")]
    UnknownFormat(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("invalid report payload: {0}")]
    Payload(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Mean over the reports in this cell.
    pub value: f64,
    /// Suite sizes of those reports.
    pub n: Vec<usize>,
}

impl Cell {
    pub fn render(&self) -> String {
        let lo = self.n.iter().min().copied().unwrap_or(0);
        let hi = self.n.iter().max().copied().unwrap_or(0);
        let n = if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") };
        format!("{:.2} (n={n})", self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub group: String,
    /// Aligned with `ReportDocument::programs`.
    pub cells: Vec<Option<Cell>>,
    /// Mean of the row's cells.
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn current(config_hash: Option<String>) -> Self {
        Provenance { tool: "bvmt".into(), version: env!("CARGO_PKG_VERSION").into(), config_hash }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub title: String,
    pub metric: Metric,
    pub programs: Vec<String>,
    pub rows: Vec<Row>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Payload(e.to_string()))
    }
}

/// Groups reports into rows and programs into columns. Rows listed in
/// `row_order` come first in that order; a listed group without reports is
/// omitted with a warning. Unlisted groups follow alphabetically.
pub fn compare_table(
    reports: &[EvaluationReport],
    group_by: GroupBy,
    metric: Metric,
    row_order: &[&str],
) -> ReportDocument {
    let key = |r: &EvaluationReport| match group_by {
        GroupBy::Label => r.label.to_string(),
        GroupBy::Method => r.method.clone(),
    };
    let mut programs: Vec<String> = Vec::new();
    for r in reports {
        if !programs.contains(&r.program) {
            programs.push(r.program.clone());
        }
    }
    let present: BTreeSet<String> = reports.iter().map(key).collect();
    let mut warnings = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    for g in row_order {
        if present.contains(*g) {
            groups.push(g.to_string());
        } else {
            let w = format!("no reports for `{g}`; row omitted");
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    groups.extend(present.into_iter().filter(|g| !row_order.contains(&g.as_str())));

    let rows = groups
        .into_iter()
        .map(|g| {
            let cells: Vec<Option<Cell>> = programs
                .iter()
                .map(|prog| {
                    let rs: Vec<&EvaluationReport> =
                        reports.iter().filter(|r| key(r) == g && &r.program == prog).collect();
                    let vals: Vec<f64> = rs.iter().filter_map(|r| metric.value(r)).collect();
                    (!vals.is_empty()).then(|| Cell {
                        value: vals.iter().sum::<f64>() / vals.len() as f64,
                        n: rs.iter().map(|r| r.n).collect(),
                    })
                })
                .collect();
            let present: Vec<f64> = cells.iter().flatten().map(|c| c.value).collect();
            let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
            Row { group: g, cells, mean }
        })
        .collect();

    ReportDocument {
        title: metric.title().to_string(),
        metric,
        programs,
        rows,
        provenance: Provenance::current(None),
        warnings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Text,
    Json,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "txt" | "text" | "plain" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

fn table(doc: &ReportDocument) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["method".to_string()];
    header.extend(doc.programs.iter().cloned());
    if !doc.rows.is_empty() {
        header.push("mean".into());
    }
    let body = doc
        .rows
        .iter()
        .map(|r| {
            let mut line = vec![r.group.clone()];
            line.extend(r.cells.iter().map(|c| c.as_ref().map(Cell::render).unwrap_or_else(|| "-".into())));
            line.push(r.mean.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into()));
            line
        })
        .collect();
    (header, body)
}

fn provenance_line(p: &Provenance) -> String {
    match &p.config_hash {
        Some(h) => format!("{} {} (config {h})", p.tool, p.version),
        None => format!("{} {}", p.tool, p.version),
    }
}

pub fn render_report(doc: &ReportDocument, format: ReportFormat) -> String {
    let (header, body) = table(doc);
    let mut out = String::new();
    match format {
        ReportFormat::Json => out = doc.to_json(),
        ReportFormat::Markdown => {
            writeln!(out, "## {}\n", doc.title).unwrap();
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for line in &body {
                writeln!(out, "| {} |", line.join(" | ")).unwrap();
            }
            writeln!(out, "\n_{}_", provenance_line(&doc.provenance)).unwrap();
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).unwrap();
            for line in &body {
                w.write_record(line).unwrap();
            }
            out = String::from_utf8(w.into_inner().unwrap()).unwrap();
        }
        ReportFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| std::iter::once(&header).chain(&body).map(|l| l[c].len()).max().unwrap_or(0))
                .collect();
            writeln!(out, "{}", doc.title).unwrap();
            for line in std::iter::once(&header).chain(&body) {
                let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
                writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
            }
            writeln!(out, "{}", provenance_line(&doc.provenance)).unwrap();
        }
    }
    out
}
