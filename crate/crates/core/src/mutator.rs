//! First-order mutants: one atomic AST rewrite each, for the six fault types.
//!
//! Replacement sets:
//! - CR: literal `c` becomes each of `0, 1, -1, c+1, c-1` that differs from `c`.
//! - ROR: a comparison operator becomes each of the other five.
//! - AOR: `+ - * /` become each other; for int operands `* /` also become `%`
//!   and `%` becomes `/` or `*`.
//! - LOR: `&&` and `||` swap.
//! - SVR: a variable read becomes each other in-scope variable of the same kind.
//! - OBOB: an operand `e` of a comparison becomes `e + 1` or `e - 1`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::minilang::{self, *};
use crate::tracer::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    CR,
    ROR,
    AOR,
    LOR,
    SVR,
    OBOB,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 6] = [
        MutationOperator::CR,
        MutationOperator::ROR,
        MutationOperator::AOR,
        MutationOperator::LOR,
        MutationOperator::SVR,
        MutationOperator::OBOB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationOperator::CR => "CR",
            MutationOperator::ROR => "ROR",
            MutationOperator::AOR => "AOR",
            MutationOperator::LOR => "LOR",
            MutationOperator::SVR => "SVR",
            MutationOperator::OBOB => "OBOB",
        }
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MutationOperator {
    type Err = MutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutationOperator::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MutationError::UnknownOperator(s.to_string()))
    }
}

/// What replaces the mutated node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rewrite {
    Literal(Value),
    Relational(CmpOp),
    Arithmetic(ArithOp),
    Logical(LogicOp),
    Variable(String),
    /// `e` becomes `e + 1` (positive) or `e - 1` (negative).
    Offset(i8),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mutant {
    /// `<OP>-<nodeIndex>-<variant>`
    pub id: String,
    pub operator: MutationOperator,
    pub node_index: NodeId,
    pub variant: u32,
    pub description: String,
    pub span: SourceSpan,
    /// Canonical text of the node before the rewrite.
    pub original: String,
    pub rewrite: Rewrite,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("mutant `{0}` does not apply to this program")]
    NotFound(String),
    #[error("mutant `{id}` produced an invalid program: {reason}")]
    Invalid { id: String, reason: String },
    #[error("requested {requested} {operator} mutants but only {available} are available")]
    Insufficient { operator: MutationOperator, requested: usize, available: usize },
    #[error("unknown mutation operator `{0}`")]
    UnknownOperator(String),
}

/// Requested operator counts sampled with a seed, and the ids they resolved to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultManifest {
    pub counts: BTreeMap<MutationOperator, usize>,
    pub seed: u64,
    pub resolved: Vec<String>,
    #[serde(default)]
    pub mutants: Vec<Mutant>,
}

impl FaultManifest {
    pub fn total(&self) -> usize {
        self.resolved.len()
    }
}

struct Candidate {
    operator: MutationOperator,
    node: NodeId,
    span: SourceSpan,
    original: String,
    rewrites: Vec<Rewrite>,
}

/// All valid mutants for the selected operators, ordered by node pre-order,
/// then operator, then variant.
pub fn enumerate_mutants(p: &Program, op_filter: &[MutationOperator]) -> Vec<Mutant> {
    let wanted: HashSet<MutationOperator> = op_filter.iter().copied().collect();
    let baseline = minilang::pretty_print(p);

    let mut comparison_operands = HashSet::new();
    let mut exprs: Vec<&Expr> = Vec::new();
    for_each_expr(p, &mut |e| {
        if let ExprKind::Cmp { lhs, rhs, .. } = &e.kind {
            comparison_operands.insert(lhs.id);
            comparison_operands.insert(rhs.id);
        }
        exprs.push(e);
    });

    let mut out = Vec::new();
    for e in exprs {
        let mut candidates: Vec<Candidate> = Vec::new();
        let mut push = |operator: MutationOperator, rewrites: Vec<Rewrite>| {
            if wanted.contains(&operator) && !rewrites.is_empty() {
                candidates.push(Candidate {
                    operator,
                    node: e.id,
                    span: e.span,
                    original: expr_to_string(e),
                    rewrites,
                });
            }
        };
        match &e.kind {
            ExprKind::Int(c) => push(MutationOperator::CR, int_replacements(*c)),
            ExprKind::Float(c) => push(MutationOperator::CR, float_replacements(*c)),
            ExprKind::Cmp { op, .. } => push(
                MutationOperator::ROR,
                CmpOp::ALL.into_iter().filter(|o| o != op).map(Rewrite::Relational).collect(),
            ),
            ExprKind::Arith { op, lhs, rhs } => {
                let ints = p.expr_kind(lhs.id) == Some(ScalarKind::Int) && p.expr_kind(rhs.id) == Some(ScalarKind::Int);
                push(MutationOperator::AOR, arith_replacements(*op, ints).into_iter().map(Rewrite::Arithmetic).collect());
            }
            ExprKind::Logic { op, .. } => push(MutationOperator::LOR, vec![Rewrite::Logical(op.flipped())]),
            ExprKind::Var(_) => {
                if let Some(others) = p.same_kind_in_scope(e.id) {
                    push(MutationOperator::SVR, others.iter().cloned().map(Rewrite::Variable).collect());
                }
            }
            ExprKind::Unary { .. } | ExprKind::Call { .. } => {}
        }
        if comparison_operands.contains(&e.id) {
            push(MutationOperator::OBOB, vec![Rewrite::Offset(1), Rewrite::Offset(-1)]);
        }

        candidates.sort_by_key(|c| c.operator);
        for c in candidates {
            let mut variant = 0u32;
            for rewrite in c.rewrites {
                let mut m = Mutant {
                    id: format!("{}-{}-{}", c.operator, c.node, variant),
                    operator: c.operator,
                    node_index: c.node,
                    variant,
                    description: String::new(),
                    span: c.span,
                    original: c.original.clone(),
                    rewrite,
                };
                // type rules or control-flow checks can reject a rewrite
                let Ok((mutated, replacement)) = rewrite_program(p, &m) else { continue };
                if minilang::pretty_print(&mutated) == baseline {
                    continue;
                }
                m.description = format!("{}: `{}` -> `{}`", c.operator, c.original, replacement);
                out.push(m);
                variant += 1;
            }
        }
    }
    out
}

fn for_each_expr<'a>(p: &'a Program, f: &mut impl FnMut(&'a Expr)) {
    for item in p.items() {
        match item {
            Item::Const(c) => walk_expr(&c.value, f),
            Item::Function(func) => {
                for s in &func.body {
                    walk_stmt(s, &mut |_| {}, f);
                }
            }
        }
    }
}

fn int_replacements(c: i64) -> Vec<Rewrite> {
    let mut seen = Vec::new();
    for v in [Some(0), Some(1), Some(-1), c.checked_add(1), c.checked_sub(1)].into_iter().flatten() {
        if v != c && !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen.into_iter().map(|v| Rewrite::Literal(Value::Int(v))).collect()
}

fn float_replacements(c: f64) -> Vec<Rewrite> {
    let mut seen: Vec<f64> = Vec::new();
    for v in [0.0, 1.0, -1.0, c + 1.0, c - 1.0] {
        if v.is_finite() && v != c && !seen.iter().any(|s| s.to_bits() == v.to_bits()) {
            seen.push(v);
        }
    }
    seen.into_iter().map(|v| Rewrite::Literal(Value::Float(v))).collect()
}

fn arith_replacements(op: ArithOp, int_operands: bool) -> Vec<ArithOp> {
    use ArithOp::*;
    match op {
        Rem => vec![Div, Mul],
        _ => {
            let mut v: Vec<ArithOp> = [Add, Sub, Mul, Div].into_iter().filter(|o| *o != op).collect();
            if int_operands && matches!(op, Mul | Div) {
                v.push(Rem);
            }
            v
        }
    }
}

/// Applies the rewrite and re-derives the program; also returns the
/// replacement node's text.
fn rewrite_program(p: &Program, m: &Mutant) -> Result<(Program, String), MutationError> {
    let mut items = p.items_mut_clone();
    let node = ast_find(&mut items, m.node_index).ok_or_else(|| MutationError::NotFound(m.id.clone()))?;
    if expr_to_string(node) != m.original {
        return Err(MutationError::NotFound(m.id.clone()));
    }
    let mismatch = || MutationError::NotFound(m.id.clone());
    match (&m.rewrite, &mut node.kind) {
        (Rewrite::Literal(v), kind @ (ExprKind::Int(_) | ExprKind::Float(_))) => {
            *kind = match v {
                Value::Int(i) => ExprKind::Int(*i),
                Value::Float(f) => ExprKind::Float(*f),
            };
        }
        (Rewrite::Relational(new), ExprKind::Cmp { op, .. }) => *op = *new,
        (Rewrite::Arithmetic(new), ExprKind::Arith { op, .. }) => *op = *new,
        (Rewrite::Logical(new), ExprKind::Logic { op, .. }) => *op = *new,
        (Rewrite::Variable(new), ExprKind::Var(name)) => *name = new.clone(),
        (Rewrite::Offset(delta), _) => {
            let one = match p.expr_kind(m.node_index) {
                Some(ScalarKind::Float) => ExprKind::Float(1.0),
                _ => ExprKind::Int(1),
            };
            let op = if *delta > 0 { ArithOp::Add } else { ArithOp::Sub };
            let span = node.span;
            let old = std::mem::replace(node, Expr::new(ExprKind::Int(0), span));
            *node = Expr::new(
                ExprKind::Arith { op, lhs: Box::new(old), rhs: Box::new(Expr::new(one, span)) },
                span,
            );
        }
        _ => return Err(mismatch()),
    }
    let replacement = expr_to_string(node);
    let program = Program::from_items(items)
        .map_err(|e| MutationError::Invalid { id: m.id.clone(), reason: e.to_string() })?;
    Ok((program, replacement))
}

fn ast_find(items: &mut [Item], id: NodeId) -> Option<&mut Expr> {
    minilang::find_expr_mut(items, id)
}

/// A new program with the mutant's single rewrite applied; `p` is untouched.
pub fn apply_mutant(p: &Program, m: &Mutant) -> Result<Program, MutationError> {
    rewrite_program(p, m).map(|(prog, _)| prog)
}

/// Canonical source text of a mutant, for export.
pub fn mutant_source(p: &Program, m: &Mutant) -> Result<String, MutationError> {
    let mutated = apply_mutant(p, m)?;
    Ok(format!("// {} {}\n{}", m.id, m.description, minilang::pretty_print(&mutated)))
}

/// Seeded sampling without replacement of `counts[op]` mutants per operator.
pub fn sample_manifest(
    p: &Program,
    counts: &BTreeMap<MutationOperator, usize>,
    seed: u64,
) -> Result<FaultManifest, MutationError> {
    let ops: Vec<MutationOperator> = counts.iter().filter(|(_, &n)| n > 0).map(|(&op, _)| op).collect();
    let all = enumerate_mutants(p, &ops);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for op in MutationOperator::ALL {
        let requested = counts.get(&op).copied().unwrap_or(0);
        if requested == 0 {
            continue;
        }
        let pool: Vec<&Mutant> = all.iter().filter(|m| m.operator == op).collect();
        if requested > pool.len() {
            return Err(MutationError::Insufficient { operator: op, requested, available: pool.len() });
        }
        let mut picks = rand::seq::index::sample(&mut rng, pool.len(), requested).into_vec();
        picks.sort_unstable();
        chosen.extend(picks.into_iter().map(|i| pool[i].clone()));
    }
    Ok(FaultManifest {
        counts: counts.clone(),
        seed,
        resolved: chosen.iter().map(|m| m.id.clone()).collect(),
        mutants: chosen,
    })
}

/// Looks up the manifest's resolved ids among the program's mutants.
pub fn resolve_manifest(p: &Program, manifest: &FaultManifest) -> Result<Vec<Mutant>, MutationError> {
    let all = enumerate_mutants(p, &MutationOperator::ALL);
    manifest
        .resolved
        .iter()
        .map(|id| all.iter().find(|m| &m.id == id).cloned().ok_or_else(|| MutationError::NotFound(id.clone())))
        .collect()
}

/// Available mutant count per operator.
pub fn available_counts(p: &Program) -> BTreeMap<MutationOperator, usize> {
    let mut counts: BTreeMap<MutationOperator, usize> = MutationOperator::ALL.iter().map(|&op| (op, 0)).collect();
    for m in enumerate_mutants(p, &MutationOperator::ALL) {
        *counts.entry(m.operator).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::{execute, ExecBudget, Status, TestInput};

    const SIMPLE: &str = "int f(int a){if(a>0)return 1;return 0;}";

    #[test]
    fn ror_gives_five_variants() {
        let p = parse(SIMPLE).unwrap();
        let ms = enumerate_mutants(&p, &[MutationOperator::ROR]);
        assert_eq!(ms.len(), 5);
        let replaced: Vec<String> = ms.iter().map(|m| m.description.clone()).collect();
        assert_eq!(replaced[0], "ROR: `a > 0` -> `a < 0`");
        assert_eq!(ms[4].id, format!("ROR-{}-4", ms[4].node_index));
    }

    #[test]
    fn obob_gives_four_variants() {
        let p = parse(SIMPLE).unwrap();
        let ms = enumerate_mutants(&p, &[MutationOperator::OBOB]);
        let descs: Vec<&str> = ms.iter().map(|m| m.description.as_str()).collect();
        assert_eq!(descs, ["OBOB: `a` -> `a + 1`", "OBOB: `a` -> `a - 1`", "OBOB: `0` -> `0 + 1`", "OBOB: `0` -> `0 - 1`"]);
    }

    #[test]
    fn cr_replacement_set() {
        let p = parse(SIMPLE).unwrap();
        let cr = enumerate_mutants(&p, &[MutationOperator::CR]);
        // literals 0, 1, 0 in pre-order
        let first: Vec<&Rewrite> = cr.iter().filter(|m| m.node_index == cr[0].node_index).map(|m| &m.rewrite).collect();
        assert_eq!(first, [&Rewrite::Literal(Value::Int(1)), &Rewrite::Literal(Value::Int(-1))]);
        let second: Vec<&Rewrite> = cr.iter().filter(|m| m.node_index == cr[2].node_index).map(|m| &m.rewrite).collect();
        assert_eq!(
            second,
            [&Rewrite::Literal(Value::Int(0)), &Rewrite::Literal(Value::Int(-1)), &Rewrite::Literal(Value::Int(2))]
        );
        let p = parse("double f(double x){ return x * 2.5; }").unwrap();
        assert_eq!(enumerate_mutants(&p, &[MutationOperator::CR]).len(), 5);
    }

    #[test]
    fn cr_single_token_change() {
        let p = parse(SIMPLE).unwrap();
        let m = enumerate_mutants(&p, &[MutationOperator::CR])
            .into_iter()
            .find(|m| m.original == "0" && m.rewrite == Rewrite::Literal(Value::Int(1)))
            .unwrap();
        let before = pretty_print(&p);
        let after = pretty_print(&apply_mutant(&p, &m).unwrap());
        let diff: Vec<(&str, &str)> =
            before.split_whitespace().zip(after.split_whitespace()).filter(|(a, b)| a != b).collect();
        assert_eq!(diff, [("0)", "1)")]);
    }

    #[test]
    fn aor_remainder_only_for_ints() {
        let p = parse("int f(int a, int b){ return a * b; }").unwrap();
        assert_eq!(enumerate_mutants(&p, &[MutationOperator::AOR]).len(), 4);
        let p = parse("double f(double a, int b){ return a * b; }").unwrap();
        assert_eq!(enumerate_mutants(&p, &[MutationOperator::AOR]).len(), 3);
        let p = parse("int f(int a, int b){ return a % b; }").unwrap();
        assert_eq!(enumerate_mutants(&p, &[MutationOperator::AOR]).len(), 2);
    }

    #[test]
    fn svr_uses_same_kind_in_scope_reads() {
        let p = parse("int f(int a, int b, double x){ int c = a; return c + b; }").unwrap();
        let ms = enumerate_mutants(&p, &[MutationOperator::SVR]);
        // `a` in init: b (c not yet declared); `c`: a, b; `b`: a, c
        assert_eq!(ms.len(), 5);
        assert!(ms.iter().all(|m| m.rewrite != Rewrite::Variable("x".into())));
    }

    #[test]
    fn rewrites_that_break_returns_are_dropped() {
        let p = parse("int f(int a){ while (1) { if (a > 0) return a; a = a + 1; } }").unwrap();
        let ms = enumerate_mutants(&p, &[MutationOperator::CR]);
        let loop_cond: Vec<&Rewrite> = ms.iter().filter(|m| m.node_index == 1).map(|m| &m.rewrite).collect();
        assert_eq!(loop_cond, [&Rewrite::Literal(Value::Int(-1)), &Rewrite::Literal(Value::Int(2))]);
    }

    #[test]
    fn apply_is_pure_and_detects_foreign_mutants() {
        let p = parse(SIMPLE).unwrap();
        let snapshot = p.clone();
        let m = enumerate_mutants(&p, &[MutationOperator::ROR]).remove(0);
        let mutated = apply_mutant(&p, &m).unwrap();
        assert_eq!(p, snapshot);
        assert!(!mutated.structurally_eq(&p));
        let reparsed = parse(&pretty_print(&mutated)).unwrap();
        assert!(reparsed.structurally_eq(&mutated));

        let other = parse("int f(int a){ return a; }").unwrap();
        assert!(matches!(apply_mutant(&other, &m), Err(MutationError::NotFound(_))));
    }

    #[test]
    fn ror_flip_changes_find_middle_like_output() {
        let p = parse("int f(int a, int b){ if (a < b) return a; return b; }").unwrap();
        let m = enumerate_mutants(&p, &[MutationOperator::ROR])
            .into_iter()
            .find(|m| m.rewrite == Rewrite::Relational(CmpOp::Gt))
            .unwrap();
        let q = apply_mutant(&p, &m).unwrap();
        let input = TestInput::ints(&[1, 2]);
        let a = execute(&p, &input, ExecBudget::default()).unwrap();
        let b = execute(&q, &input, ExecBudget::default()).unwrap();
        assert_eq!(a.status, Status::Returned(Value::Int(1)));
        assert_eq!(b.status, Status::Returned(Value::Int(2)));
    }

    #[test]
    fn manifest_sampling() {
        let p = parse("int f(int a, int b){ if (a > 0 && b > 0 || a < b) return a; return b; }").unwrap();
        let empty = sample_manifest(&p, &BTreeMap::new(), 1).unwrap();
        assert_eq!(empty.total(), 0);

        let counts = BTreeMap::from([(MutationOperator::ROR, 7), (MutationOperator::LOR, 2)]);
        let a = sample_manifest(&p, &counts, 99).unwrap();
        let b = sample_manifest(&p, &counts, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 9);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(resolve_manifest(&p, &a).unwrap(), a.mutants);

        let too_many = BTreeMap::from([(MutationOperator::LOR, 3)]);
        assert_eq!(
            sample_manifest(&p, &too_many, 1),
            Err(MutationError::Insufficient { operator: MutationOperator::LOR, requested: 3, available: 2 })
        );
    }

    #[test]
    fn operator_names_parse() {
        assert_eq!("obob".parse::<MutationOperator>().unwrap(), MutationOperator::OBOB);
        assert!("XYZ".parse::<MutationOperator>().is_err());
    }
}
