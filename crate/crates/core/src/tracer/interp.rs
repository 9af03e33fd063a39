use std::collections::HashMap;

use crate::minilang::*;

use super::value::{TestInput, Value};
use super::{ArmCounts, ExecBudget, ExecError, RuntimeErrorKind, Status, Trace};

/// Call depth past which an execution is treated as out of budget.
pub const MAX_CALL_DEPTH: usize = 128;

enum Halt {
    Error(RuntimeErrorKind),
    Budget,
}

enum Flow {
    Normal,
    Return(Value),
}

type Exec<T> = Result<T, Halt>;

struct Machine<'p> {
    sites: &'p SiteTable,
    functions: HashMap<&'p str, &'p FunctionDef>,
    consts: HashMap<&'p str, Value>,
    vars: Vec<(&'p str, Value)>,
    frame_base: usize,
    depth: usize,
    steps: u64,
    max_steps: u64,
    arms: Vec<ArmCounts>,
    stmt_counts: Vec<u64>,
}

pub fn execute(p: &Program, input: &TestInput, budget: ExecBudget) -> Result<Trace, ExecError> {
    let entry = p.entry();
    if input.len() != entry.params.len() {
        return Err(ExecError::ArityMismatch { expected: entry.params.len(), got: input.len() });
    }
    for (index, (param, value)) in entry.params.iter().zip(input.values()).enumerate() {
        if param.kind != value.kind() {
            return Err(ExecError::KindMismatch { index, expected: param.kind, got: value.kind() });
        }
    }

    let sites = p.site_table();
    let mut m = Machine {
        sites,
        functions: p.functions().map(|f| (f.name.as_str(), f)).collect(),
        consts: p
            .constants()
            .map(|c| {
                let v = match c.value.kind {
                    ExprKind::Int(v) if c.kind == ScalarKind::Int => Value::Int(v),
                    ExprKind::Int(v) => Value::Float(v as f64),
                    ExprKind::Float(v) => Value::Float(v),
                    _ => unreachable!("constant initializers are literals"),
                };
                (c.name.as_str(), v)
            })
            .collect(),
        vars: Vec::with_capacity(16),
        frame_base: 0,
        depth: 0,
        steps: 0,
        max_steps: budget.max_steps(),
        arms: vec![ArmCounts::default(); sites.predicate_count()],
        stmt_counts: vec![0; sites.statement_count()],
    };

    let status = match m.call(entry, input.values().to_vec()) {
        Ok(v) => Status::Returned(v),
        Err(Halt::Error(kind)) => Status::RuntimeError(kind),
        Err(Halt::Budget) => Status::BudgetExhausted,
    };
    Ok(Trace { status, branch_counts: m.arms, stmt_counts: m.stmt_counts, steps_used: m.steps })
}

fn convert(v: Value, kind: ScalarKind) -> Exec<Value> {
    match (v, kind) {
        (Value::Int(i), ScalarKind::Float) => Ok(Value::Float(i as f64)),
        (Value::Float(f), ScalarKind::Int) => {
            // C truncation; the range check keeps the cast exact
            let t = f.trunc();
            if t >= -9.223_372_036_854_776e18 && t < 9.223_372_036_854_776e18 {
                Ok(Value::Int(t as i64))
            } else {
                Err(Halt::Error(RuntimeErrorKind::FloatToIntOverflow))
            }
        }
        (v, _) => Ok(v),
    }
}

fn finite(x: f64) -> Exec<Value> {
    if x.is_nan() {
        Err(Halt::Error(RuntimeErrorKind::MathDomain))
    } else if x.is_infinite() {
        Err(Halt::Error(RuntimeErrorKind::FloatOverflow))
    } else {
        Ok(Value::Float(x))
    }
}

fn int_result(r: Option<i64>) -> Exec<Value> {
    r.map(Value::Int).ok_or(Halt::Error(RuntimeErrorKind::IntegerOverflow))
}

fn arith(op: ArithOp, l: Value, r: Value) -> Exec<Value> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => match op {
            ArithOp::Add => int_result(a.checked_add(b)),
            ArithOp::Sub => int_result(a.checked_sub(b)),
            ArithOp::Mul => int_result(a.checked_mul(b)),
            ArithOp::Div if b == 0 => Err(Halt::Error(RuntimeErrorKind::DivideByZero)),
            ArithOp::Div => int_result(a.checked_div(b)),
            ArithOp::Rem if b == 0 => Err(Halt::Error(RuntimeErrorKind::ModuloByZero)),
            ArithOp::Rem => int_result(a.checked_rem(b)),
        },
        _ => {
            let (a, b) = (l.as_f64(), r.as_f64());
            match op {
                ArithOp::Add => finite(a + b),
                ArithOp::Sub => finite(a - b),
                ArithOp::Mul => finite(a * b),
                ArithOp::Div if b == 0.0 => Err(Halt::Error(RuntimeErrorKind::DivideByZero)),
                ArithOp::Div => finite(a / b),
                // rejected statically; kept total for mutated programs
                ArithOp::Rem if b == 0.0 => Err(Halt::Error(RuntimeErrorKind::ModuloByZero)),
                ArithOp::Rem => finite(a % b),
            }
        }
    }
}

fn compare(op: CmpOp, l: Value, r: Value) -> bool {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        },
        _ => {
            let (a, b) = (l.as_f64(), r.as_f64());
            match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
            }
        }
    }
}

fn builtin(b: Builtin, args: &[Value]) -> Exec<Value> {
    let x = args[0].as_f64();
    match b {
        Builtin::Fabs => finite(x.abs()),
        Builtin::Sqrt if x < 0.0 => Err(Halt::Error(RuntimeErrorKind::MathDomain)),
        Builtin::Sqrt => finite(x.sqrt()),
        Builtin::Exp => finite(x.exp()),
        Builtin::Log if x <= 0.0 => Err(Halt::Error(RuntimeErrorKind::MathDomain)),
        Builtin::Log => finite(x.ln()),
        Builtin::Sin => finite(x.sin()),
        Builtin::Cos => finite(x.cos()),
        Builtin::Pow => finite(x.powf(args[1].as_f64())),
        Builtin::Floor => finite(x.floor()),
    }
}

impl<'p> Machine<'p> {
    #[inline]
    fn step(&mut self) -> Exec<()> {
        if self.steps >= self.max_steps {
            return Err(Halt::Budget);
        }
        self.steps += 1;
        Ok(())
    }

    fn call(&mut self, f: &'p FunctionDef, args: Vec<Value>) -> Exec<Value> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Budget);
        }
        let saved_base = self.frame_base;
        let saved_len = self.vars.len();
        self.frame_base = saved_len;
        self.depth += 1;
        let mut result = Ok(Flow::Normal);
        for (param, arg) in f.params.iter().zip(args) {
            match convert(arg, param.kind) {
                Ok(v) => self.vars.push((param.name.as_str(), v)),
                Err(h) => {
                    result = Err(h);
                    break;
                }
            }
        }
        if result.is_ok() {
            result = self.block(&f.body);
        }
        self.vars.truncate(saved_len);
        self.frame_base = saved_base;
        self.depth -= 1;
        match result? {
            Flow::Return(v) => convert(v, f.ret),
            Flow::Normal => Err(Halt::Error(RuntimeErrorKind::MissingReturn)),
        }
    }

    fn block(&mut self, stmts: &'p [Stmt]) -> Exec<Flow> {
        let mark = self.vars.len();
        let mut flow = Ok(Flow::Normal);
        for s in stmts {
            match self.stmt(s) {
                Ok(Flow::Normal) => {}
                other => {
                    flow = other;
                    break;
                }
            }
        }
        self.vars.truncate(mark);
        flow
    }

    fn scoped(&mut self, s: &'p Stmt) -> Exec<Flow> {
        let mark = self.vars.len();
        let flow = self.stmt(s);
        self.vars.truncate(mark);
        flow
    }

    fn lookup_mut(&mut self, name: &str) -> &mut Value {
        let base = self.frame_base;
        let slot = self.vars[base..]
            .iter_mut()
            .rev()
            .find(|(n, _)| *n == name)
            .expect("assignment targets are checked statically");
        &mut slot.1
    }

    fn stmt(&mut self, s: &'p Stmt) -> Exec<Flow> {
        self.step()?;
        if let Some(slot) = self.sites.statement_slot(s.id) {
            self.stmt_counts[slot] += 1;
        }
        match &s.kind {
            StmtKind::Declare { name, kind, init } => {
                let v = match init {
                    Some(e) => convert(self.expr(e)?, *kind)?,
                    None => match kind {
                        ScalarKind::Int => Value::Int(0),
                        ScalarKind::Float => Value::Float(0.0),
                    },
                };
                self.vars.push((name.as_str(), v));
                Ok(Flow::Normal)
            }
            StmtKind::Assign { target, value } => {
                let v = self.expr(value)?;
                let slot = self.lookup_mut(target);
                let kind = slot.kind();
                *slot = convert(v, kind)?;
                Ok(Flow::Normal)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                if self.expr(cond)?.truthy() {
                    self.scoped(then_branch)
                } else if let Some(e) = else_branch {
                    self.scoped(e)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => {
                while self.expr(cond)?.truthy() {
                    if let Flow::Return(v) = self.scoped(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::For { init, cond, update, body } => {
                let mark = self.vars.len();
                let flow = self.for_loop(init.as_deref(), cond.as_ref(), update.as_deref(), body);
                self.vars.truncate(mark);
                flow
            }
            StmtKind::Return(e) => Ok(Flow::Return(self.expr(e)?)),
            StmtKind::Block(stmts) => self.block(stmts),
            StmtKind::Expr(e) => {
                self.expr(e)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn for_loop(
        &mut self,
        init: Option<&'p Stmt>,
        cond: Option<&'p Expr>,
        update: Option<&'p Stmt>,
        body: &'p Stmt,
    ) -> Exec<Flow> {
        if let Some(i) = init {
            self.stmt(i)?;
        }
        loop {
            if let Some(c) = cond {
                if !self.expr(c)?.truthy() {
                    return Ok(Flow::Normal);
                }
            }
            if let Flow::Return(v) = self.scoped(body)? {
                return Ok(Flow::Return(v));
            }
            if let Some(u) = update {
                self.stmt(u)?;
            }
        }
    }

    fn expr(&mut self, e: &'p Expr) -> Exec<Value> {
        self.step()?;
        let v = match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Float(v) => Value::Float(*v),
            ExprKind::Var(name) => {
                let local = self.vars[self.frame_base..].iter().rev().find(|(n, _)| n == name);
                match local {
                    Some((_, v)) => *v,
                    None => *self.consts.get(name.as_str()).expect("identifiers are checked statically"),
                }
            }
            ExprKind::Unary { op: UnaryOp::Neg, operand } => match self.expr(operand)? {
                Value::Int(i) => int_result(i.checked_neg())?,
                Value::Float(f) => Value::Float(-f),
            },
            ExprKind::Unary { op: UnaryOp::Not, operand } => Value::from_bool(!self.expr(operand)?.truthy()),
            ExprKind::Arith { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                arith(*op, l, r)?
            }
            ExprKind::Cmp { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                Value::from_bool(compare(*op, l, r))
            }
            ExprKind::Logic { op, lhs, rhs } => {
                let l = self.expr(lhs)?.truthy();
                let result = match op {
                    LogicOp::And => l && self.expr(rhs)?.truthy(),
                    LogicOp::Or => l || self.expr(rhs)?.truthy(),
                };
                Value::from_bool(result)
            }
            ExprKind::Call { callee, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.expr(a)?);
                }
                match Builtin::from_name(callee) {
                    Some(b) => builtin(b, &values)?,
                    None => {
                        let f = *self.functions.get(callee.as_str()).expect("callees are checked statically");
                        self.call(f, values)?
                    }
                }
            }
        };
        if let Some(slot) = self.sites.predicate_slot(e.id) {
            let arm = &mut self.arms[slot];
            if v.truthy() {
                arm.taken_true += 1;
            } else {
                arm.taken_false += 1;
            }
        }
        Ok(v)
    }
}
