use std::fmt;

use serde::{Deserialize, Serialize};

/// Pre-order index of a statement or expression node, dense from 0.
pub type NodeId = u32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    /// 1-based line of the first byte.
    pub line: u32,
    /// 1-based column (in chars) of the first byte.
    pub column: u32,
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { line, column, start, end }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        if other.end <= self.start {
            return self;
        }
        SourceSpan { end: other.end.max(self.end), ..self }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Int,
    Float,
}

impl ScalarKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ScalarKind::Int => "int",
            ScalarKind::Float => "double",
        }
    }

    /// Kind of a binary arithmetic result: int only when both sides are int.
    pub fn promote(self, other: ScalarKind) -> ScalarKind {
        if self == ScalarKind::Int && other == ScalarKind::Int {
            ScalarKind::Int
        } else {
            ScalarKind::Float
        }
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicOp {
    And,
    Or,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Not => "!",
        }
    }
}

impl ArithOp {
    pub const ALL: [ArithOp; 5] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Rem];

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }
}

impl CmpOp {
    /// Canonical order, also the ROR replacement order.
    pub const ALL: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

impl LogicOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LogicOp::And => "&&",
            LogicOp::Or => "||",
        }
    }

    pub fn flipped(self) -> LogicOp {
        match self {
            LogicOp::And => LogicOp::Or,
            LogicOp::Or => LogicOp::And,
        }
    }
}

/// Math builtins callable from MiniC. All return `double`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Builtin {
    Fabs,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Pow,
    Floor,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Fabs,
        Builtin::Sqrt,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sin,
        Builtin::Cos,
        Builtin::Pow,
        Builtin::Floor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Fabs => "fabs",
            Builtin::Sqrt => "sqrt",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Pow => "pow",
            Builtin::Floor => "floor",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: SourceSpan,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Var(String),
    Unary { op: UnaryOp, operand: Box<Expr> },
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Cmp { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Logic { op: LogicOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { callee: String, args: Vec<Expr> },
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Expr { id: 0, span, kind }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind, ExprKind::Int(_) | ExprKind::Float(_))
    }

    /// Direct children in evaluation (and pre-order) order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Var(_) => Vec::new(),
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Arith { lhs, rhs, .. }
            | ExprKind::Cmp { lhs, rhs, .. }
            | ExprKind::Logic { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Call { args, .. } => args.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Var(_) => Vec::new(),
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Arith { lhs, rhs, .. }
            | ExprKind::Cmp { lhs, rhs, .. }
            | ExprKind::Logic { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Call { args, .. } => args.iter_mut().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub id: NodeId,
    pub span: SourceSpan,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Declare { name: String, kind: ScalarKind, init: Option<Expr> },
    Assign { target: String, value: Expr },
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Return(Expr),
    Block(Vec<Stmt>),
    Expr(Expr),
}

impl Stmt {
    pub fn new(kind: StmtKind, span: SourceSpan) -> Self {
        Stmt { id: 0, span, kind }
    }

    /// Blocks group statements but are not themselves executable sites.
    pub fn is_executable(&self) -> bool {
        !matches!(self.kind, StmtKind::Block(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ScalarKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: ScalarKind,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

/// Top-level named constant, `const int NAME = literal;`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstDef {
    pub name: String,
    pub kind: ScalarKind,
    pub value: Expr,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Const(ConstDef),
    Function(FunctionDef),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Const(c) => &c.name,
            Item::Function(f) => &f.name,
        }
    }
}

/// Pre-order visit of every expression under `expr`, including itself.
pub fn walk_expr<'a>(expr: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(expr);
    for child in expr.children() {
        walk_expr(child, f);
    }
}

/// Pre-order visit of statements and expressions under `stmt`.
pub fn walk_stmt<'a>(stmt: &'a Stmt, on_stmt: &mut impl FnMut(&'a Stmt), on_expr: &mut impl FnMut(&'a Expr)) {
    on_stmt(stmt);
    match &stmt.kind {
        StmtKind::Declare { init, .. } => {
            if let Some(e) = init {
                walk_expr(e, on_expr);
            }
        }
        StmtKind::Assign { value, .. } => walk_expr(value, on_expr),
        StmtKind::If { cond, then_branch, else_branch } => {
            walk_expr(cond, on_expr);
            walk_stmt(then_branch, on_stmt, on_expr);
            if let Some(e) = else_branch {
                walk_stmt(e, on_stmt, on_expr);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, on_expr);
            walk_stmt(body, on_stmt, on_expr);
        }
        StmtKind::For { init, cond, update, body } => {
            if let Some(s) = init {
                walk_stmt(s, on_stmt, on_expr);
            }
            if let Some(c) = cond {
                walk_expr(c, on_expr);
            }
            if let Some(s) = update {
                walk_stmt(s, on_stmt, on_expr);
            }
            walk_stmt(body, on_stmt, on_expr);
        }
        StmtKind::Return(e) | StmtKind::Expr(e) => walk_expr(e, on_expr),
        StmtKind::Block(stmts) => {
            for s in stmts {
                walk_stmt(s, on_stmt, on_expr);
            }
        }
    }
}

/// Mutable pre-order traversal handing out every node's id slot and span.
/// Used for renumbering and span stripping.
pub(crate) fn for_each_node_mut(items: &mut [Item], f: &mut impl FnMut(&mut NodeId, &mut SourceSpan)) {
    fn expr(e: &mut Expr, f: &mut impl FnMut(&mut NodeId, &mut SourceSpan)) {
        f(&mut e.id, &mut e.span);
        for c in e.children_mut() {
            expr(c, f);
        }
    }
    fn stmt(s: &mut Stmt, f: &mut impl FnMut(&mut NodeId, &mut SourceSpan)) {
        f(&mut s.id, &mut s.span);
        match &mut s.kind {
            StmtKind::Declare { init, .. } => {
                if let Some(e) = init {
                    expr(e, f);
                }
            }
            StmtKind::Assign { value, .. } => expr(value, f),
            StmtKind::If { cond, then_branch, else_branch } => {
                expr(cond, f);
                stmt(then_branch, f);
                if let Some(e) = else_branch {
                    stmt(e, f);
                }
            }
            StmtKind::While { cond, body } => {
                expr(cond, f);
                stmt(body, f);
            }
            StmtKind::For { init, cond, update, body } => {
                if let Some(s) = init {
                    stmt(s, f);
                }
                if let Some(c) = cond {
                    expr(c, f);
                }
                if let Some(s) = update {
                    stmt(s, f);
                }
                stmt(body, f);
            }
            StmtKind::Return(e) | StmtKind::Expr(e) => expr(e, f),
            StmtKind::Block(stmts) => {
                for s in stmts {
                    stmt(s, f);
                }
            }
        }
    }
    for item in items {
        match item {
            Item::Const(c) => expr(&mut c.value, f),
            Item::Function(func) => {
                for s in &mut func.body {
                    stmt(s, f);
                }
            }
        }
    }
}

/// Find the expression with the given id, mutably.
pub(crate) fn find_expr_mut(items: &mut [Item], id: NodeId) -> Option<&mut Expr> {
    fn in_expr(e: &mut Expr, id: NodeId) -> Option<&mut Expr> {
        if e.id == id {
            return Some(e);
        }
        for c in e.children_mut() {
            if let Some(found) = in_expr(c, id) {
                return Some(found);
            }
        }
        None
    }
    fn in_stmt(s: &mut Stmt, id: NodeId) -> Option<&mut Expr> {
        match &mut s.kind {
            StmtKind::Declare { init, .. } => init.as_mut().and_then(|e| in_expr(e, id)),
            StmtKind::Assign { value, .. } => in_expr(value, id),
            StmtKind::If { cond, then_branch, else_branch } => in_expr(cond, id)
                .or_else(|| in_stmt(then_branch, id))
                .or_else(|| else_branch.as_mut().and_then(|e| in_stmt(e, id))),
            StmtKind::While { cond, body } => in_expr(cond, id).or_else(|| in_stmt(body, id)),
            StmtKind::For { init, cond, update, body } => init
                .as_mut()
                .and_then(|s| in_stmt(s, id))
                .or_else(|| cond.as_mut().and_then(|c| in_expr(c, id)))
                .or_else(|| update.as_mut().and_then(|s| in_stmt(s, id)))
                .or_else(|| in_stmt(body, id)),
            StmtKind::Return(e) | StmtKind::Expr(e) => in_expr(e, id),
            StmtKind::Block(stmts) => stmts.iter_mut().find_map(|s| in_stmt(s, id)),
        }
    }
    items.iter_mut().find_map(|item| match item {
        Item::Const(c) => in_expr(&mut c.value, id),
        Item::Function(func) => func.body.iter_mut().find_map(|s| in_stmt(s, id)),
    })
}
