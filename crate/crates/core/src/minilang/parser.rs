use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Nesting limit for expressions and statements; deeper input is rejected
/// rather than risking the native stack.
const MAX_DEPTH: usize = 256;

pub(crate) fn parse_items(src: &str) -> Result<Vec<Item>, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser { tokens, pos: 0, depth: 0 };
    let mut items = Vec::new();
    while parser.peek() != &Tok::Eof {
        items.push(parser.item()?);
    }
    Ok(items)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &str) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError::Syntax {
            message: format!("expected {expected}, found {}", t.tok.describe()),
            line: t.span.line,
            column: t.span.column,
            offset: t.span.start,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.error_here(what))
        }
    }

    fn ident(&mut self) -> Result<(String, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = self.bump();
                Ok((name, t.span))
            }
            _ => Err(self.error_here("identifier")),
        }
    }

    fn scalar_kind(&mut self) -> Result<ScalarKind, ParseError> {
        match self.peek() {
            Tok::KwInt => {
                self.bump();
                Ok(ScalarKind::Int)
            }
            Tok::KwDouble => {
                self.bump();
                Ok(ScalarKind::Float)
            }
            _ => Err(self.error_here("type `int` or `double`")),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let t = &self.tokens[self.pos];
            return Err(ParseError::Syntax {
                message: "nesting too deep".into(),
                line: t.span.line,
                column: t.span.column,
                offset: t.span.start,
            });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let start = self.span();
        if *self.peek() == Tok::KwConst {
            self.bump();
            let kind = self.scalar_kind()?;
            let (name, _) = self.ident()?;
            self.expect(Tok::Assign, "`=`")?;
            let lit_start = self.span();
            let value = match self.unary()? {
                e if e.is_literal() => e,
                _ => {
                    return Err(ParseError::Syntax {
                        message: "constant initializer must be a numeric literal".into(),
                        line: lit_start.line,
                        column: lit_start.column,
                        offset: lit_start.start,
                    })
                }
            };
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Item::Const(ConstDef { name, kind, value, span: start.to(self.prev_span()) }));
        }
        let ret = self.scalar_kind()?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let kind = self.scalar_kind()?;
                let (pname, _) = self.ident()?;
                params.push(Param { name: pname, kind });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block_body()?;
        Ok(Item::Function(FunctionDef { name, params, ret, body, span: start.to(self.prev_span()) }))
    }

    fn block_body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        self.enter()?;
        let s = self.stmt_inner();
        self.leave();
        s
    }

    fn stmt_inner(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span();
        let kind = match self.peek() {
            Tok::KwInt | Tok::KwDouble => {
                let s = self.declaration()?;
                self.expect(Tok::Semi, "`;`")?;
                return Ok(Stmt { span: start.to(self.prev_span()), ..s });
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Assign => {
                let s = self.assignment()?;
                self.expect(Tok::Semi, "`;`")?;
                return Ok(Stmt { span: start.to(self.prev_span()), ..s });
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then_branch = Box::new(self.stmt()?);
                let else_branch = if *self.peek() == Tok::KwElse {
                    self.bump();
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                StmtKind::If { cond, then_branch, else_branch }
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                StmtKind::While { cond, body: Box::new(self.stmt()?) }
            }
            Tok::KwFor => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let init = match self.peek() {
                    Tok::Semi => None,
                    Tok::KwInt | Tok::KwDouble => Some(Box::new(self.declaration()?)),
                    _ => Some(Box::new(self.assignment()?)),
                };
                self.expect(Tok::Semi, "`;`")?;
                let cond = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "`;`")?;
                let update = if *self.peek() == Tok::RParen { None } else { Some(Box::new(self.assignment()?)) };
                self.expect(Tok::RParen, "`)`")?;
                StmtKind::For { init, cond, update, body: Box::new(self.stmt()?) }
            }
            Tok::KwReturn => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(e)
            }
            Tok::LBrace => StmtKind::Block(self.block_body()?),
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt::new(kind, start.to(self.prev_span())))
    }

    fn declaration(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span();
        let kind = self.scalar_kind()?;
        let (name, _) = self.ident()?;
        let init = if *self.peek() == Tok::Assign {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Stmt::new(StmtKind::Declare { name, kind, init }, start.to(self.prev_span())))
    }

    fn assignment(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span();
        let (target, _) = self.ident()?;
        self.expect(Tok::Assign, "`=`")?;
        let value = self.expr()?;
        Ok(Stmt::new(StmtKind::Assign { target, value }, start.to(self.prev_span())))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let e = self.binary(0);
        self.leave();
        e
    }

    /// Precedence climbing over the binary levels, loosest first:
    /// `||`, `&&`, `== !=`, `< <= > >=`, `+ -`, `* / %`.
    fn binary(&mut self, level: u8) -> Result<Expr, ParseError> {
        if level == 6 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let make: Option<fn(Box<Expr>, Box<Expr>) -> ExprKind> = match (level, self.peek()) {
                (0, Tok::OrOr) => Some(|l, r| ExprKind::Logic { op: LogicOp::Or, lhs: l, rhs: r }),
                (1, Tok::AndAnd) => Some(|l, r| ExprKind::Logic { op: LogicOp::And, lhs: l, rhs: r }),
                (2, Tok::EqEq) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Eq, lhs: l, rhs: r }),
                (2, Tok::Ne) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Ne, lhs: l, rhs: r }),
                (3, Tok::Lt) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Lt, lhs: l, rhs: r }),
                (3, Tok::Le) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Le, lhs: l, rhs: r }),
                (3, Tok::Gt) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Gt, lhs: l, rhs: r }),
                (3, Tok::Ge) => Some(|l, r| ExprKind::Cmp { op: CmpOp::Ge, lhs: l, rhs: r }),
                (4, Tok::Plus) => Some(|l, r| ExprKind::Arith { op: ArithOp::Add, lhs: l, rhs: r }),
                (4, Tok::Minus) => Some(|l, r| ExprKind::Arith { op: ArithOp::Sub, lhs: l, rhs: r }),
                (5, Tok::Star) => Some(|l, r| ExprKind::Arith { op: ArithOp::Mul, lhs: l, rhs: r }),
                (5, Tok::Slash) => Some(|l, r| ExprKind::Arith { op: ArithOp::Div, lhs: l, rhs: r }),
                (5, Tok::Percent) => Some(|l, r| ExprKind::Arith { op: ArithOp::Rem, lhs: l, rhs: r }),
                _ => None,
            };
            let Some(make) = make else { return Ok(lhs) };
            self.bump();
            self.enter()?;
            let rhs = self.binary(level + 1);
            self.leave();
            let rhs = rhs?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(make(Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                // `-` directly on a numeric token is a negative literal.
                match self.peek().clone() {
                    Tok::Int(mag) => {
                        let t = self.bump();
                        let value = if mag == 1u64 << 63 {
                            i64::MIN
                        } else {
                            i64::try_from(mag).map(|v| -v).map_err(|_| self.literal_range(&t))?
                        };
                        Ok(Expr::new(ExprKind::Int(value), start.to(t.span)))
                    }
                    Tok::Float(v) => {
                        let t = self.bump();
                        Ok(Expr::new(ExprKind::Float(-v), start.to(t.span)))
                    }
                    _ => {
                        self.enter()?;
                        let operand = self.unary();
                        self.leave();
                        let operand = operand?;
                        let span = start.to(operand.span);
                        Ok(Expr::new(ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(operand) }, span))
                    }
                }
            }
            Tok::Bang => {
                self.bump();
                self.enter()?;
                let operand = self.unary();
                self.leave();
                let operand = operand?;
                let span = start.to(operand.span);
                Ok(Expr::new(ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand) }, span))
            }
            _ => self.primary(),
        }
    }

    fn literal_range(&self, t: &Token) -> ParseError {
        ParseError::Syntax {
            message: "integer literal out of range".into(),
            line: t.span.line,
            column: t.span.column,
            offset: t.span.start,
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(mag) => {
                let t = self.bump();
                let v = i64::try_from(mag).map_err(|_| self.literal_range(&t))?;
                Ok(Expr::new(ExprKind::Int(v), t.span))
            }
            Tok::Float(v) => {
                let t = self.bump();
                Ok(Expr::new(ExprKind::Float(v), t.span))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::new(ExprKind::Call { callee: name, args }, start.to(self.prev_span())))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), start))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.error_here("expression")),
        }
    }
}
