use std::collections::HashMap;

use super::ast::*;
use super::ParseError;

/// Static facts derived from a checked program, indexed by node id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TypeInfo {
    pub(crate) expr_kinds: Vec<Option<ScalarKind>>,
    /// For each read of a local variable or parameter: the other in-scope
    /// variables of the same kind, in declaration order.
    pub(crate) same_kind_in_scope: HashMap<NodeId, Vec<String>>,
}

struct Signature {
    params: Vec<ScalarKind>,
    ret: ScalarKind,
}

struct Checker<'a> {
    consts: HashMap<&'a str, ScalarKind>,
    functions: HashMap<&'a str, Signature>,
    scope: Vec<(String, ScalarKind)>,
    info: TypeInfo,
}

fn semantic(span: SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError::Semantic { message: message.into(), span }
}

pub(crate) fn check_items(items: &[Item], node_count: u32) -> Result<(String, TypeInfo), ParseError> {
    let mut checker = Checker {
        consts: HashMap::new(),
        functions: HashMap::new(),
        scope: Vec::new(),
        info: TypeInfo { expr_kinds: vec![None; node_count as usize], ..TypeInfo::default() },
    };
    let mut entry = None;
    for item in items {
        let (name, span) = match item {
            Item::Const(c) => (c.name.as_str(), c.span),
            Item::Function(f) => (f.name.as_str(), f.span),
        };
        if Builtin::from_name(name).is_some() {
            return Err(semantic(span, format!("`{name}` is a builtin and cannot be redefined")));
        }
        if checker.consts.contains_key(name) || checker.functions.contains_key(name) {
            return Err(semantic(span, format!("duplicate definition of `{name}`")));
        }
        match item {
            Item::Const(c) => {
                if c.kind == ScalarKind::Int && matches!(c.value.kind, ExprKind::Float(_)) {
                    return Err(semantic(c.value.span, format!("integer constant `{name}` has a floating initializer")));
                }
                let lit_kind = match c.value.kind {
                    ExprKind::Int(_) => ScalarKind::Int,
                    _ => ScalarKind::Float,
                };
                checker.info.expr_kinds[c.value.id as usize] = Some(lit_kind);
                checker.consts.insert(name, c.kind);
            }
            Item::Function(f) => {
                checker.functions.insert(
                    name,
                    Signature { params: f.params.iter().map(|p| p.kind).collect(), ret: f.ret },
                );
                entry = Some(f.name.clone());
            }
        }
    }
    let Some(entry) = entry else {
        return Err(semantic(SourceSpan::default(), "program defines no function"));
    };
    for item in items {
        if let Item::Function(f) = item {
            checker.function(f)?;
        }
    }
    Ok((entry, checker.info))
}

impl<'a> Checker<'a> {
    fn function(&mut self, f: &FunctionDef) -> Result<(), ParseError> {
        self.scope.clear();
        for p in &f.params {
            if self.is_visible(&p.name) {
                return Err(semantic(f.span, format!("parameter `{}` is declared twice or shadows a constant", p.name)));
            }
            self.scope.push((p.name.clone(), p.kind));
        }
        self.block(&f.body)?;
        if !always_returns(&f.body) {
            return Err(semantic(f.span, format!("function `{}` can reach its end without returning", f.name)));
        }
        Ok(())
    }

    fn is_visible(&self, name: &str) -> bool {
        self.scope.iter().any(|(n, _)| n == name)
            || self.consts.contains_key(name)
            || self.functions.contains_key(name)
            || Builtin::from_name(name).is_some()
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), ParseError> {
        let mark = self.scope.len();
        for s in stmts {
            self.stmt(s)?;
        }
        self.scope.truncate(mark);
        Ok(())
    }

    fn scoped(&mut self, s: &Stmt) -> Result<(), ParseError> {
        let mark = self.scope.len();
        self.stmt(s)?;
        self.scope.truncate(mark);
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ParseError> {
        match &s.kind {
            StmtKind::Declare { name, kind, init } => {
                if let Some(e) = init {
                    self.expr(e)?;
                }
                if self.is_visible(name) {
                    return Err(semantic(s.span, format!("`{name}` is already declared")));
                }
                self.scope.push((name.clone(), *kind));
            }
            StmtKind::Assign { target, value } => {
                self.expr(value)?;
                if !self.scope.iter().any(|(n, _)| n == target) {
                    let msg = if self.consts.contains_key(target.as_str()) {
                        format!("cannot assign to constant `{target}`")
                    } else {
                        format!("assignment to undeclared variable `{target}`")
                    };
                    return Err(semantic(s.span, msg));
                }
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expr(cond)?;
                self.scoped(then_branch)?;
                if let Some(e) = else_branch {
                    self.scoped(e)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond)?;
                self.scoped(body)?;
            }
            StmtKind::For { init, cond, update, body } => {
                let mark = self.scope.len();
                if let Some(i) = init {
                    self.stmt(i)?;
                }
                if let Some(c) = cond {
                    self.expr(c)?;
                }
                if let Some(u) = update {
                    self.stmt(u)?;
                }
                self.scoped(body)?;
                self.scope.truncate(mark);
            }
            StmtKind::Return(e) | StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Block(stmts) => self.block(stmts)?,
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<ScalarKind, ParseError> {
        let kind = match &e.kind {
            ExprKind::Int(_) => ScalarKind::Int,
            ExprKind::Float(_) => ScalarKind::Float,
            ExprKind::Var(name) => {
                if let Some(&(_, kind)) = self.scope.iter().rev().find(|(n, _)| n == name) {
                    let others: Vec<String> = self
                        .scope
                        .iter()
                        .filter(|(n, k)| *k == kind && n != name)
                        .map(|(n, _)| n.clone())
                        .collect();
                    self.info.same_kind_in_scope.insert(e.id, others);
                    kind
                } else if let Some(&kind) = self.consts.get(name.as_str()) {
                    kind
                } else {
                    return Err(semantic(e.span, format!("undeclared identifier `{name}`")));
                }
            }
            ExprKind::Unary { op, operand } => {
                let k = self.expr(operand)?;
                match op {
                    UnaryOp::Neg => k,
                    UnaryOp::Not => ScalarKind::Int,
                }
            }
            ExprKind::Arith { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                if *op == ArithOp::Rem && (l != ScalarKind::Int || r != ScalarKind::Int) {
                    return Err(semantic(e.span, "`%` requires integer operands"));
                }
                l.promote(r)
            }
            ExprKind::Cmp { lhs, rhs, .. } | ExprKind::Logic { lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                ScalarKind::Int
            }
            ExprKind::Call { callee, args } => {
                for a in args {
                    self.expr(a)?;
                }
                let (arity, ret) = if let Some(b) = Builtin::from_name(callee) {
                    (b.arity(), ScalarKind::Float)
                } else if let Some(sig) = self.functions.get(callee.as_str()) {
                    (sig.params.len(), sig.ret)
                } else {
                    return Err(semantic(e.span, format!("call to undefined function `{callee}`")));
                };
                if args.len() != arity {
                    return Err(semantic(
                        e.span,
                        format!("`{callee}` expects {arity} argument(s), got {}", args.len()),
                    ));
                }
                ret
            }
        };
        self.info.expr_kinds[e.id as usize] = Some(kind);
        Ok(kind)
    }
}

fn is_truthy_literal(e: &Expr) -> bool {
    match e.kind {
        ExprKind::Int(v) => v != 0,
        ExprKind::Float(v) => v != 0.0,
        _ => false,
    }
}

/// Conservative: a statement list returns on every path if some statement in
/// it does. Loops only count when their condition is absent or a non-zero
/// literal (MiniC has no `break`).
pub(crate) fn always_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(stmt_returns)
}

fn stmt_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::Block(stmts) => always_returns(stmts),
        StmtKind::If { then_branch, else_branch: Some(else_branch), .. } => {
            stmt_returns(then_branch) && stmt_returns(else_branch)
        }
        StmtKind::While { cond, .. } => is_truthy_literal(cond),
        StmtKind::For { cond, .. } => cond.as_ref().is_none_or(is_truthy_literal),
        _ => false,
    }
}
