//! Tracing interpreter: runs a MiniC program on one input and records
//! per-site branch arm counts, statement counts and termination status.

mod interp;
mod value;

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::minilang::{self, Program, ScalarKind, SiteTable};

pub use interp::{execute, MAX_CALL_DEPTH};
pub use value::{TestInput, Value};

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

/// Step limit per execution. A step is one statement or expression node
/// evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecBudget {
    max_steps: u64,
}

impl ExecBudget {
    pub fn new(max_steps: u64) -> Result<Self, ExecError> {
        if max_steps == 0 {
            return Err(ExecError::ZeroBudget);
        }
        Ok(ExecBudget { max_steps })
    }

    pub fn max_steps(self) -> u64 {
        self.max_steps
    }
}

impl Default for ExecBudget {
    fn default() -> Self {
        ExecBudget { max_steps: DEFAULT_MAX_STEPS }
    }
}

/// Caller errors, distinct from runtime faults of the program under test.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("input has {got} value(s), program expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("input value {index} is {got}, parameter is {expected}")]
    KindMismatch { index: usize, expected: ScalarKind, got: ScalarKind },
    #[error("execution budget must be positive")]
    ZeroBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeErrorKind {
    DivideByZero,
    ModuloByZero,
    IntegerOverflow,
    /// NaN result or argument outside a builtin's domain, e.g. `sqrt(-1)`.
    MathDomain,
    FloatOverflow,
    FloatToIntOverflow,
    MissingReturn,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuntimeErrorKind::DivideByZero => "divide-by-zero",
            RuntimeErrorKind::ModuloByZero => "modulo-by-zero",
            RuntimeErrorKind::IntegerOverflow => "integer-overflow",
            RuntimeErrorKind::MathDomain => "math-domain",
            RuntimeErrorKind::FloatOverflow => "float-overflow",
            RuntimeErrorKind::FloatToIntOverflow => "float-to-int-overflow",
            RuntimeErrorKind::MissingReturn => "missing-return",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Returned(Value),
    RuntimeError(RuntimeErrorKind),
    BudgetExhausted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Returned(v) => write!(f, "returned {v}"),
            Status::RuntimeError(k) => write!(f, "runtime error ({k})"),
            Status::BudgetExhausted => f.write_str("budget exhausted"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmCounts {
    pub taken_true: u64,
    pub taken_false: u64,
}

impl ArmCounts {
    pub fn evaluations(&self) -> u64 {
        self.taken_true + self.taken_false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub status: Status,
    /// Indexed like `SiteTable::predicate_sites`.
    pub branch_counts: Vec<ArmCounts>,
    /// Indexed like `SiteTable::statement_sites`.
    pub stmt_counts: Vec<u64>,
    pub steps_used: u64,
}

/// What kill decisions compare: termination status (including the returned
/// value) plus cumulative arm counts per predicate site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSignature {
    pub status: Status,
    pub arms: Vec<ArmCounts>,
}

pub fn signature_of(t: &Trace) -> PathSignature {
    PathSignature { status: t.status, arms: t.branch_counts.clone() }
}

/// Run and reduce to a signature in one call.
pub fn trace_signature(p: &Program, input: &TestInput, budget: ExecBudget) -> Result<PathSignature, ExecError> {
    execute(p, input, budget).map(|t| signature_of(&t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub statement_coverage: f64,
    pub branch_coverage: f64,
    pub statements_hit: usize,
    pub statements_total: usize,
    pub arms_hit: usize,
    pub arms_total: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Union coverage of a set of traces of one program. A metric with no sites
/// is reported as 1.0 with a warning; no traces at all gives zeros.
pub fn coverage_union(traces: &[Trace], site_table: &SiteTable) -> CoverageSummary {
    let statements_total = site_table.statement_count();
    let arms_total = site_table.arm_count();
    let mut stmt_hit = vec![false; statements_total];
    let mut arm_hit = vec![false; arms_total];
    for t in traces {
        for (hit, &count) in stmt_hit.iter_mut().zip(&t.stmt_counts) {
            *hit |= count > 0;
        }
        for (i, arm) in t.branch_counts.iter().enumerate() {
            arm_hit[2 * i] |= arm.taken_true > 0;
            arm_hit[2 * i + 1] |= arm.taken_false > 0;
        }
    }
    let statements_hit = stmt_hit.iter().filter(|&&h| h).count();
    let arms_hit = arm_hit.iter().filter(|&&h| h).count();
    let mut warnings = Vec::new();
    let mut ratio = |hit: usize, total: usize, what: &str| {
        if traces.is_empty() {
            0.0
        } else if total == 0 {
            let msg = format!("program has no {what} sites; {what} coverage reported as 1.0");
            log::warn!("{msg}");
            warnings.push(msg);
            1.0
        } else {
            hit as f64 / total as f64
        }
    };
    let statement_coverage = ratio(statements_hit, statements_total, "statement");
    let branch_coverage = ratio(arms_hit, arms_total, "branch");
    CoverageSummary {
        statement_coverage,
        branch_coverage,
        statements_hit,
        statements_total,
        arms_hit,
        arms_total,
        warnings,
    }
}

/// Gcov-like annotated listing of the pretty-printed program: the summed
/// execution count of the statements starting on each line, then one
/// `site <k>: taken_true <n>, taken_false <m>` line per predicate site.
pub fn gcov_style(p: &Program, traces: &[Trace]) -> String {
    let text = minilang::pretty_print(p);
    // Positions in the canonical text; node ids are identical after re-parse.
    let canonical = minilang::parse(&text).expect("canonical text re-parses");
    let sites = canonical.site_table();
    let line_count = text.lines().count();
    let mut line_counts: Vec<Option<u64>> = vec![None; line_count + 1];

    let mut starts = std::collections::HashMap::new();
    for f in canonical.functions() {
        for s in &f.body {
            minilang::walk_stmt(s, &mut |st| {
                starts.insert(st.id, st.span.line as usize);
            }, &mut |_| {});
        }
    }
    for (slot, node) in sites.statement_sites.iter().enumerate() {
        let total: u64 = traces.iter().map(|t| t.stmt_counts.get(slot).copied().unwrap_or(0)).sum();
        if let Some(&line) = starts.get(node) {
            let entry = line_counts[line].get_or_insert(0);
            *entry += total;
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "{:>9}:{:>5}:Source:{}", "-", 0, p.entry_name());
    let _ = writeln!(out, "{:>9}:{:>5}:Runs:{}", "-", 0, traces.len());
    for (i, line) in text.lines().enumerate() {
        let count = match line_counts[i + 1] {
            None => "-".to_string(),
            Some(0) => "#####".to_string(),
            Some(n) => n.to_string(),
        };
        let _ = writeln!(out, "{:>9}:{:>5}:{}", count, i + 1, line);
    }
    for (k, site) in sites.predicate_sites.iter().enumerate() {
        let (t, f) = traces.iter().fold((0u64, 0u64), |(t, f), tr| {
            let a = tr.branch_counts.get(k).copied().unwrap_or_default();
            (t + a.taken_true, f + a.taken_false)
        });
        let _ = writeln!(out, "site {k}: taken_true {t}, taken_false {f} (line {})", site.span.line);
    }
    out
}
