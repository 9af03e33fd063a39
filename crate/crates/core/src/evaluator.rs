//! Kill matrices, kill rates, suite coverage, prefix curves and the
//! coverage/kill regression.

use std::fmt;

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::minilang::Program;
use crate::mutator::{apply_mutant, Mutant, MutationError};
use crate::suitegen::{SuiteLabel, TestSuite};
use crate::tracer::{coverage_union, execute, signature_of, CoverageSummary, ExecBudget, ExecError, Status, Trace};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error("kill rate is undefined without mutants")]
    NoMutants,
    #[error("cannot evaluate an empty suite")]
    EmptySuite,
    #[error("regression needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("regression slope is undefined: all x values are equal")]
    ConstantX,
    #[error("regression input contains a non-finite value")]
    NonFinite,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub budget: ExecBudget,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { budget: ExecBudget::default(), jobs: 1 }
    }
}

/// Rows are inputs and columns mutants; a cell is set when the input's path
/// signature on the mutant differs from the one on the original.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KillMatrix {
    pub mutant_ids: Vec<String>,
    pub rows: Vec<Vec<bool>>,
    pub killed: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl KillMatrix {
    pub fn from_rows(mutant_ids: Vec<String>, rows: Vec<Vec<bool>>) -> Self {
        let killed = (0..mutant_ids.len()).map(|j| rows.iter().any(|r| r[j])).collect();
        KillMatrix { mutant_ids, rows, killed, warnings: Vec::new() }
    }

    pub fn input_count(&self) -> usize {
        self.rows.len()
    }

    pub fn mutant_count(&self) -> usize {
        self.mutant_ids.len()
    }

    pub fn cell(&self, input: usize, mutant: usize) -> bool {
        self.rows[input][mutant]
    }

    pub fn killed_count(&self) -> usize {
        self.killed.iter().filter(|&&k| k).count()
    }

    pub fn killed_ids(&self) -> Vec<String> {
        self.ids_where(true)
    }

    pub fn surviving_ids(&self) -> Vec<String> {
        self.ids_where(false)
    }

    fn ids_where(&self, flag: bool) -> Vec<String> {
        self.mutant_ids.iter().zip(&self.killed).filter(|(_, &k)| k == flag).map(|(id, _)| id.clone()).collect()
    }

    /// The matrix restricted to its first `k` inputs.
    pub fn prefix(&self, k: usize) -> KillMatrix {
        KillMatrix::from_rows(self.mutant_ids.clone(), self.rows[..k.min(self.rows.len())].to_vec())
    }

    /// 0/1 cells with an `input` column of row numbers and one column per mutant id.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("input").chain(self.mutant_ids.iter().map(String::as_str))).unwrap();
        for (i, row) in self.rows.iter().enumerate() {
            let cells = row.iter().map(|&c| if c { "1" } else { "0" });
            w.write_record(std::iter::once((i + 1).to_string()).chain(cells.map(str::to_string))).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Killed over total, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KillRate {
    pub killed: usize,
    pub total: usize,
}

impl KillRate {
    pub fn new(killed: usize, total: usize) -> Result<Self, EvalError> {
        if total == 0 {
            return Err(EvalError::NoMutants);
        }
        assert!(killed <= total, "killed {killed} exceeds total {total}");
        Ok(KillRate { killed, total })
    }

    /// Percentage in hundredths, rounded half up.
    pub fn percent_hundredths(self) -> u64 {
        round_ratio(self.killed as u128 * 10_000, self.total as u128)
    }

    /// Fraction in hundredths, rounded half up.
    pub fn fraction_hundredths(self) -> u64 {
        round_ratio(self.killed as u128 * 100, self.total as u128)
    }

    pub fn percent(self) -> f64 {
        self.percent_hundredths() as f64 / 100.0
    }

    pub fn fraction(self) -> f64 {
        self.killed as f64 / self.total as f64
    }

    /// Two-decimal fraction, as in `0.61`.
    pub fn fraction_string(self) -> String {
        hundredths_string(self.fraction_hundredths())
    }
}

fn round_ratio(num: u128, den: u128) -> u64 {
    ((2 * num + den) / (2 * den)) as u64
}

fn hundredths_string(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

/// Two-decimal percentage, as in `48.39`.
impl fmt::Display for KillRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hundredths_string(self.percent_hundredths()))
    }
}

pub fn kill_rate(m: &KillMatrix) -> Result<KillRate, EvalError> {
    KillRate::new(m.killed_count(), m.mutant_count())
}

fn original_traces(p: &Program, suite: &TestSuite, budget: ExecBudget) -> Result<Vec<Trace>, EvalError> {
    suite.inputs.iter().map(|i| execute(p, i, budget).map_err(EvalError::from)).collect()
}

fn exhausted_warning(suite: &TestSuite, traces: &[Trace]) -> Option<String> {
    let idx: Vec<String> = traces
        .iter()
        .enumerate()
        .filter(|(_, t)| t.status == Status::BudgetExhausted)
        .map(|(i, _)| suite.inputs[i].to_string())
        .collect();
    (!idx.is_empty()).then(|| format!("original program exhausted its budget on: {}", idx.join(", ")))
}

pub fn kill_matrix(p: &Program, mutants: &[Mutant], suite: &TestSuite, budget: ExecBudget) -> Result<KillMatrix, EvalError> {
    kill_matrix_with(p, mutants, suite, &EvalOptions { budget, jobs: 1 })
}

/// Original traces are computed once; mutant columns run on `opts.jobs`
/// workers and are merged in mutant order.
pub fn kill_matrix_with(
    p: &Program,
    mutants: &[Mutant],
    suite: &TestSuite,
    opts: &EvalOptions,
) -> Result<KillMatrix, EvalError> {
    let traces = original_traces(p, suite, opts.budget)?;
    kill_matrix_from_traces(p, mutants, suite, &traces, opts)
}

fn kill_matrix_from_traces(
    p: &Program,
    mutants: &[Mutant],
    suite: &TestSuite,
    traces: &[Trace],
    opts: &EvalOptions,
) -> Result<KillMatrix, EvalError> {
    let originals: Vec<_> = traces.iter().map(signature_of).collect();
    let column = |m: &Mutant| -> Result<Vec<bool>, EvalError> {
        let q = apply_mutant(p, m)?;
        suite
            .inputs
            .iter()
            .zip(&originals)
            .map(|(input, sig)| Ok(signature_of(&execute(&q, input, opts.budget)?) != *sig))
            .collect()
    };
    let columns: Vec<Vec<bool>> = if opts.jobs == 1 {
        mutants.iter().map(column).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?;
        pool.install(|| mutants.par_iter().map(column).collect::<Result<_, _>>())?
    };
    let rows = (0..suite.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let mut matrix = KillMatrix::from_rows(mutants.iter().map(|m| m.id.clone()).collect(), rows);
    if let Some(w) = exhausted_warning(suite, traces) {
        log::warn!("{w}");
        matrix.warnings.push(w);
    }
    Ok(matrix)
}

/// Statement and branch coverage of the suite on the original program.
pub fn suite_coverage(p: &Program, suite: &TestSuite, budget: ExecBudget) -> Result<CoverageSummary, EvalError> {
    Ok(coverage_union(&original_traces(p, suite, budget)?, p.site_table()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub program: String,
    pub label: SuiteLabel,
    /// Row key in comparison tables; defaults to the label.
    pub method: String,
    pub provenance: String,
    pub n: usize,
    pub mutants: usize,
    pub killed_count: usize,
    /// Percentage with two decimals.
    pub kill_rate: f64,
    pub statement_coverage: f64,
    pub branch_coverage: f64,
    pub killed: Vec<String>,
    pub surviving: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn rate(&self) -> Result<KillRate, EvalError> {
        KillRate::new(self.killed_count, self.mutants)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Kill matrix plus report for one suite.
pub fn evaluate(
    p: &Program,
    mutants: &[Mutant],
    suite: &TestSuite,
    opts: &EvalOptions,
) -> Result<(KillMatrix, EvaluationReport), EvalError> {
    let traces = original_traces(p, suite, opts.budget)?;
    let matrix = kill_matrix_from_traces(p, mutants, suite, &traces, opts)?;
    let rate = kill_rate(&matrix)?;
    let cov = coverage_union(&traces, p.site_table());
    let mut warnings = suite.warnings.clone();
    warnings.extend(matrix.warnings.iter().cloned());
    warnings.extend(cov.warnings.iter().cloned());
    let report = EvaluationReport {
        program: if suite.program.is_empty() { p.entry_name().to_string() } else { suite.program.clone() },
        label: suite.label,
        method: suite.label.to_string(),
        provenance: suite.provenance.clone(),
        n: suite.len(),
        mutants: matrix.mutant_count(),
        killed_count: matrix.killed_count(),
        kill_rate: rate.percent(),
        statement_coverage: cov.statement_coverage,
        branch_coverage: cov.branch_coverage,
        killed: matrix.killed_ids(),
        surviving: matrix.surviving_ids(),
        warnings,
    };
    Ok((matrix, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    /// Percentage; `None` without mutants.
    pub kill_rate: Option<f64>,
    pub statement_coverage: f64,
    pub branch_coverage: f64,
}

/// Metrics of each prefix `1..=k` of the suite, in suite order.
pub fn prefix_curve(p: &Program, mutants: &[Mutant], suite: &TestSuite, budget: ExecBudget) -> Result<Vec<CurvePoint>, EvalError> {
    prefix_curve_with(p, mutants, suite, &EvalOptions { budget, jobs: 1 })
}

pub fn prefix_curve_with(
    p: &Program,
    mutants: &[Mutant],
    suite: &TestSuite,
    opts: &EvalOptions,
) -> Result<Vec<CurvePoint>, EvalError> {
    if suite.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let traces = original_traces(p, suite, opts.budget)?;
    let matrix = kill_matrix_from_traces(p, mutants, suite, &traces, opts)?;
    let mut killed = vec![false; matrix.mutant_count()];
    let mut points = Vec::with_capacity(suite.len());
    for k in 1..=suite.len() {
        for (flag, &cell) in killed.iter_mut().zip(&matrix.rows[k - 1]) {
            *flag |= cell;
        }
        let cov = coverage_union(&traces[..k], p.site_table());
        let kill_rate = KillRate::new(killed.iter().filter(|&&f| f).count(), killed.len()).ok().map(KillRate::percent);
        points.push(CurvePoint {
            k,
            kill_rate,
            statement_coverage: cov.statement_coverage,
            branch_coverage: cov.branch_coverage,
        });
    }
    Ok(points)
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "kill_rate", "stmt_cov", "branch_cov"]).unwrap();
    for pt in points {
        w.write_record([
            pt.k.to_string(),
            pt.kill_rate.map(|r| format!("{r:.2}")).unwrap_or_default(),
            pt.statement_coverage.to_string(),
            pt.branch_coverage.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RegressionResult {
    pub fn fitted(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Columns `x, y, fitted`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "fitted"]).unwrap();
        for &(x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string(), self.fitted(x).to_string()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Ordinary least squares of y on x, computed in exact rational arithmetic.
/// Zero variance in y gives `r2 = 0` with a warning.
pub fn linreg_r2(points: &[(f64, f64)]) -> Result<RegressionResult, EvalError> {
    if points.len() < 2 {
        return Err(EvalError::TooFewPoints(points.len()));
    }
    let exact = |v: f64| BigRational::from_float(v).ok_or(EvalError::NonFinite);
    let xs: Vec<BigRational> = points.iter().map(|p| exact(p.0)).collect::<Result<_, _>>()?;
    let ys: Vec<BigRational> = points.iter().map(|p| exact(p.1)).collect::<Result<_, _>>()?;
    let n = BigRational::from_integer(BigInt::from(points.len()));
    let sum = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |a, b| a + b);
    let mean_x = sum(&xs) / &n;
    let mean_y = sum(&ys) / &n;
    let mut sxx = BigRational::zero();
    let mut sxy = BigRational::zero();
    let mut syy = BigRational::zero();
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - &mean_x;
        let dy = y - &mean_y;
        sxx += &dx * &dx;
        sxy += &dx * &dy;
        syy += &dy * &dy;
    }
    if sxx.is_zero() {
        return Err(EvalError::ConstantX);
    }
    let slope = &sxy / &sxx;
    let intercept = &mean_y - &slope * &mean_x;
    let mut warnings = Vec::new();
    let r2 = if syy.is_zero() {
        let w = "y has zero variance; r2 reported as 0".to_string();
        log::warn!("{w}");
        warnings.push(w);
        0.0
    } else {
        let r2 = (&sxy * &sxy) / (&sxx * &syy);
        debug_assert!(!r2.is_negative());
        r2.to_f64().unwrap_or(0.0).clamp(0.0, 1.0)
    };
    Ok(RegressionResult {
        slope: slope.to_f64().unwrap_or(f64::NAN),
        intercept: intercept.to_f64().unwrap_or(f64::NAN),
        r2,
        points: points.to_vec(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;
    use crate::mutator::{enumerate_mutants, MutationOperator};
    use crate::tracer::TestInput;

    fn suite(inputs: Vec<TestInput>) -> TestSuite {
        TestSuite::new("t", SuiteLabel::Imported, "test", inputs)
    }

    #[test]
    fn kill_rate_formatting() {
        let ids: Vec<String> = (0..31).map(|i| format!("M{i}")).collect();
        let rows = vec![(0..31).map(|j| j < 15).collect()];
        let m = KillMatrix::from_rows(ids.clone(), rows);
        assert_eq!(kill_rate(&m).unwrap().to_string(), "48.39");
        assert_eq!(KillRate::new(0, 31).unwrap().to_string(), "0.00");
        assert_eq!(KillRate::new(18, 18).unwrap().to_string(), "100.00");
        assert_eq!(KillRate::new(15, 31).unwrap().fraction_string(), "0.48");
        assert_eq!(kill_rate(&KillMatrix::from_rows(vec![], vec![vec![]])), Err(EvalError::NoMutants));
    }

    #[test]
    fn zero_mutants_gives_empty_columns() {
        let p = parse("int f(int a){ return a; }").unwrap();
        let m = kill_matrix(&p, &[], &suite(vec![TestInput::ints(&[1])]), ExecBudget::default()).unwrap();
        assert_eq!((m.input_count(), m.mutant_count()), (1, 0));
    }

    #[test]
    fn dead_code_mutant_survives() {
        let p = parse("int f(int a){ if (a > 100) { return a * 2; } return a; }").unwrap();
        let aor = enumerate_mutants(&p, &[MutationOperator::AOR]);
        let s = suite((0..10).map(|i| TestInput::ints(&[i])).collect());
        let m = kill_matrix(&p, &aor, &s, ExecBudget::default()).unwrap();
        assert_eq!(m.killed_count(), 0);
        assert_eq!(m.surviving_ids().len(), aor.len());
    }

    #[test]
    fn parallel_matches_serial() {
        let p = parse("int f(int a, int b){ int s = 0; while (a < b) { s = s + a; a = a + 1; } return s; }").unwrap();
        let ms = enumerate_mutants(&p, &MutationOperator::ALL);
        let s = suite((0..6).map(|i| TestInput::ints(&[i, 5 - i + 3])).collect());
        let serial = kill_matrix(&p, &ms, &s, ExecBudget::new(5_000).unwrap()).unwrap();
        let par = kill_matrix_with(&p, &ms, &s, &EvalOptions { budget: ExecBudget::new(5_000).unwrap(), jobs: 4 }).unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn coverage_cases() {
        let p = parse("int f(int a){ if (a > 0) return 1; return 0; }").unwrap();
        let empty = suite_coverage(&p, &suite(vec![]), ExecBudget::default()).unwrap();
        assert_eq!((empty.statement_coverage, empty.branch_coverage), (0.0, 0.0));
        let both = suite_coverage(&p, &suite(vec![TestInput::ints(&[1]), TestInput::ints(&[-1])]), ExecBudget::default())
            .unwrap();
        assert_eq!(both.branch_coverage, 1.0);
    }

    #[test]
    fn curve_steps_up_when_a_new_arm_is_reached() {
        let p = parse("int f(int a){ if (a > 0) return 1; return 0; }").unwrap();
        let s = suite(vec![TestInput::ints(&[5]), TestInput::ints(&[-5]), TestInput::ints(&[7])]);
        let ms = enumerate_mutants(&p, &[MutationOperator::ROR]);
        let c = prefix_curve(&p, &ms, &s, ExecBudget::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c[1].branch_coverage > c[0].branch_coverage);
        assert_eq!(c[1].branch_coverage, c[2].branch_coverage);

        let one = prefix_curve(&p, &ms, &s.prefix(1), ExecBudget::default()).unwrap();
        let (_, full) = evaluate(&p, &ms, &s.prefix(1), &EvalOptions::default()).unwrap();
        assert_eq!(one[0].kill_rate, Some(full.kill_rate));
        assert_eq!(one[0].branch_coverage, full.branch_coverage);
        assert_eq!(prefix_curve(&p, &ms, &s.prefix(0), ExecBudget::default()), Err(EvalError::EmptySuite));
    }

    #[test]
    fn regression_closed_forms() {
        let r = linreg_r2(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!((r.r2 - 0.75).abs() < 1e-12);
        assert!((r.slope - 0.5).abs() < 1e-12);
        assert!((r.intercept - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(linreg_r2(&[(0.0, 0.0), (1.0, 1.0)]).unwrap().r2, 1.0);
        let flat = linreg_r2(&[(0.0, 3.0), (1.0, 3.0)]).unwrap();
        assert_eq!(flat.r2, 0.0);
        assert_eq!(flat.warnings.len(), 1);
        assert_eq!(linreg_r2(&[(1.0, 2.0)]), Err(EvalError::TooFewPoints(1)));
        assert_eq!(linreg_r2(&[(1.0, 2.0), (1.0, 3.0)]), Err(EvalError::ConstantX));
    }

    #[test]
    fn csv_exports() {
        let m = KillMatrix::from_rows(vec!["ROR-1-0".into(), "LOR-2-0".into()], vec![vec![true, false]]);
        assert_eq!(m.to_csv(), "input,ROR-1-0,LOR-2-0\n1,1,0\n");
        let r = linreg_r2(&[(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert_eq!(r.to_csv(), "x,y,fitted\n0,0,0\n1,2,2\n");
    }
}
