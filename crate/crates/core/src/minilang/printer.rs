use std::fmt::Write as _;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical MiniC text. Re-parsing the output yields the same tree with the
/// same node indices.
pub fn print_items(items: &[Item]) -> String {
    let mut p = Printer { out: String::new() };
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            // blank line between functions, consts stay grouped
            let prev_const = matches!(items[i - 1], Item::Const(_));
            if !(prev_const && matches!(item, Item::Const(_))) {
                p.out.push('\n');
            }
        }
        match item {
            Item::Const(c) => {
                let _ = writeln!(p.out, "const {} {} = {};", c.kind, c.name, expr_to_string(&c.value));
            }
            Item::Function(f) => p.function(f),
        }
    }
    p.out
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

struct Printer {
    out: String,
}

impl Printer {
    fn indent(&mut self, level: usize) {
        for _ in 0..level {
            self.out.push_str(INDENT);
        }
    }

    fn function(&mut self, f: &FunctionDef) {
        let params: Vec<String> = f.params.iter().map(|p| format!("{} {}", p.kind, p.name)).collect();
        let _ = write!(self.out, "{} {}({}) {{\n", f.ret, f.name, params.join(", "));
        for s in &f.body {
            self.stmt(s, 1);
            self.out.push('\n');
        }
        self.out.push_str("}\n");
    }

    /// Writes a statement starting with its indentation, without a trailing newline.
    fn stmt(&mut self, s: &Stmt, level: usize) {
        self.indent(level);
        self.stmt_inline(s, level);
    }

    fn stmt_inline(&mut self, s: &Stmt, level: usize) {
        match &s.kind {
            StmtKind::Declare { .. } | StmtKind::Assign { .. } => {
                self.simple(s);
                self.out.push(';');
            }
            StmtKind::Return(e) => {
                self.out.push_str("return ");
                write_expr(&mut self.out, e);
                self.out.push(';');
            }
            StmtKind::Expr(e) => {
                write_expr(&mut self.out, e);
                self.out.push(';');
            }
            StmtKind::Block(stmts) => {
                self.out.push('{');
                self.block_contents(stmts, level);
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.out.push_str("if (");
                write_expr(&mut self.out, cond);
                self.out.push(')');
                let braced = self.body(then_branch, level);
                if let Some(else_branch) = else_branch {
                    if braced {
                        self.out.push_str(" else");
                    } else {
                        self.out.push('\n');
                        self.indent(level);
                        self.out.push_str("else");
                    }
                    if matches!(else_branch.kind, StmtKind::If { .. }) {
                        self.out.push(' ');
                        self.stmt_inline(else_branch, level);
                    } else {
                        self.body(else_branch, level);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                self.out.push_str("while (");
                write_expr(&mut self.out, cond);
                self.out.push(')');
                self.body(body, level);
            }
            StmtKind::For { init, cond, update, body } => {
                self.out.push_str("for (");
                if let Some(init) = init {
                    self.simple(init);
                }
                self.out.push(';');
                if let Some(cond) = cond {
                    self.out.push(' ');
                    write_expr(&mut self.out, cond);
                }
                self.out.push(';');
                if let Some(update) = update {
                    self.out.push(' ');
                    self.simple(update);
                }
                self.out.push(')');
                self.body(body, level);
            }
        }
    }

    /// Declaration or assignment without the terminating `;`.
    fn simple(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Declare { name, kind, init } => {
                let _ = write!(self.out, "{kind} {name}");
                if let Some(init) = init {
                    self.out.push_str(" = ");
                    write_expr(&mut self.out, init);
                }
            }
            StmtKind::Assign { target, value } => {
                let _ = write!(self.out, "{target} = ");
                write_expr(&mut self.out, value);
            }
            _ => unreachable!("only declarations and assignments appear in for headers"),
        }
    }

    fn block_contents(&mut self, stmts: &[Stmt], level: usize) {
        self.out.push('\n');
        for s in stmts {
            self.stmt(s, level + 1);
            self.out.push('\n');
        }
        self.indent(level);
        self.out.push('}');
    }

    /// Body of a compound statement. Returns true when it ended with `}`.
    fn body(&mut self, s: &Stmt, level: usize) -> bool {
        if let StmtKind::Block(stmts) = &s.kind {
            self.out.push_str(" {");
            self.block_contents(stmts, level);
            true
        } else {
            self.out.push('\n');
            self.stmt(s, level + 1);
            false
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Logic { op: LogicOp::Or, .. } => 1,
        ExprKind::Logic { op: LogicOp::And, .. } => 2,
        ExprKind::Cmp { op, .. } if op.is_equality() => 3,
        ExprKind::Cmp { .. } => 4,
        ExprKind::Arith { op: ArithOp::Add | ArithOp::Sub, .. } => 5,
        ExprKind::Arith { .. } => 6,
        ExprKind::Unary { .. } => 7,
        _ => 8,
    }
}

fn write_wrapped(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Float(v) => {
            // Debug gives the shortest text that reads back to the same bits
            // and always contains `.` or `e`.
            let _ = write!(out, "{v:?}");
        }
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            let parens = match op {
                // `-(1)` must not collapse into the literal `-1`
                UnaryOp::Neg => !matches!(operand.kind, ExprKind::Var(_) | ExprKind::Call { .. }),
                UnaryOp::Not => precedence(operand) < 7,
            };
            write_wrapped(out, operand, parens);
        }
        ExprKind::Arith { op, lhs, rhs } => binary(out, e, op.symbol(), lhs, rhs),
        ExprKind::Cmp { op, lhs, rhs } => binary(out, e, op.symbol(), lhs, rhs),
        ExprKind::Logic { op, lhs, rhs } => binary(out, e, op.symbol(), lhs, rhs),
        ExprKind::Call { callee, args } => {
            out.push_str(callee);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

fn binary(out: &mut String, parent: &Expr, symbol: &str, lhs: &Expr, rhs: &Expr) {
    let prec = precedence(parent);
    write_wrapped(out, lhs, precedence(lhs) < prec);
    out.push(' ');
    out.push_str(symbol);
    out.push(' ');
    write_wrapped(out, rhs, precedence(rhs) <= prec);
}
