use serde::{Deserialize, Serialize};

use super::ast::*;

const NO_SLOT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    /// A relational or equality comparison.
    Comparison,
    /// A non-comparison atom used as a condition, e.g. `if (flag)`.
    BareCondition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateSite {
    pub node: NodeId,
    pub kind: SiteKind,
    pub span: SourceSpan,
}

/// Statement and predicate sites of a program, in node pre-order.
/// Every predicate site has exactly two arms, true and false.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteTable {
    pub statement_sites: Vec<NodeId>,
    pub predicate_sites: Vec<PredicateSite>,
    #[serde(skip)]
    stmt_slot: Vec<u32>,
    #[serde(skip)]
    pred_slot: Vec<u32>,
}

impl SiteTable {
    pub fn statement_count(&self) -> usize {
        self.statement_sites.len()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicate_sites.len()
    }

    pub fn arm_count(&self) -> usize {
        2 * self.predicate_sites.len()
    }

    /// Position of `node` in `statement_sites`.
    #[inline]
    pub fn statement_slot(&self, node: NodeId) -> Option<usize> {
        match self.stmt_slot.get(node as usize) {
            Some(&s) if s != NO_SLOT => Some(s as usize),
            _ => None,
        }
    }

    /// Position of `node` in `predicate_sites`.
    #[inline]
    pub fn predicate_slot(&self, node: NodeId) -> Option<usize> {
        match self.pred_slot.get(node as usize) {
            Some(&s) if s != NO_SLOT => Some(s as usize),
            _ => None,
        }
    }
}

pub(crate) fn build_site_table(items: &[Item], node_count: u32) -> SiteTable {
    let mut table = SiteTable {
        stmt_slot: vec![NO_SLOT; node_count as usize],
        pred_slot: vec![NO_SLOT; node_count as usize],
        ..SiteTable::default()
    };
    for item in items {
        match item {
            Item::Const(c) => expr_sites(&c.value, false, &mut table),
            Item::Function(f) => {
                for s in &f.body {
                    stmt_sites(s, &mut table);
                }
            }
        }
    }
    table
}

fn stmt_sites(s: &Stmt, table: &mut SiteTable) {
    if s.is_executable() {
        table.stmt_slot[s.id as usize] = table.statement_sites.len() as u32;
        table.statement_sites.push(s.id);
    }
    match &s.kind {
        StmtKind::Declare { init, .. } => {
            if let Some(e) = init {
                expr_sites(e, false, table);
            }
        }
        StmtKind::Assign { value, .. } => expr_sites(value, false, table),
        StmtKind::If { cond, then_branch, else_branch } => {
            expr_sites(cond, true, table);
            stmt_sites(then_branch, table);
            if let Some(e) = else_branch {
                stmt_sites(e, table);
            }
        }
        StmtKind::While { cond, body } => {
            expr_sites(cond, true, table);
            stmt_sites(body, table);
        }
        StmtKind::For { init, cond, update, body } => {
            if let Some(s) = init {
                stmt_sites(s, table);
            }
            if let Some(c) = cond {
                expr_sites(c, true, table);
            }
            if let Some(s) = update {
                stmt_sites(s, table);
            }
            stmt_sites(body, table);
        }
        StmtKind::Return(e) | StmtKind::Expr(e) => expr_sites(e, false, table),
        StmtKind::Block(stmts) => {
            for s in stmts {
                stmt_sites(s, table);
            }
        }
    }
}

/// `in_condition` is true for expressions whose truth value is consumed:
/// control conditions and operands of `&&`, `||`, `!`. Those connectives are
/// never sites themselves; every comparison anywhere is one.
fn expr_sites(e: &Expr, in_condition: bool, table: &mut SiteTable) {
    let site = match &e.kind {
        ExprKind::Logic { .. } | ExprKind::Unary { op: UnaryOp::Not, .. } => None,
        ExprKind::Cmp { .. } => Some(SiteKind::Comparison),
        _ if in_condition => Some(SiteKind::BareCondition),
        _ => None,
    };
    if let Some(kind) = site {
        table.pred_slot[e.id as usize] = table.predicate_sites.len() as u32;
        table.predicate_sites.push(PredicateSite { node: e.id, kind, span: e.span });
    }
    let child_condition = matches!(e.kind, ExprKind::Logic { .. } | ExprKind::Unary { op: UnaryOp::Not, .. });
    for c in e.children() {
        expr_sites(c, child_condition, table);
    }
}
