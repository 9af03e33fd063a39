//! MiniC: the C subset subject programs are written in.
//!
//! Grammar (EBNF, also in `docs/grammar.md`):
//!
//! ```text
//! program    = { const_def | function } ;
//! const_def  = "const" type IDENT "=" [ "-" ] NUMBER ";" ;
//! function   = type IDENT "(" [ param { "," param } ] ")" block ;
//! param      = type IDENT ;
//! type       = "int" | "double" ;
//! block      = "{" { stmt } "}" ;
//! stmt       = decl ";" | assign ";" | "return" expr ";" | expr ";" | block
//!            | "if" "(" expr ")" stmt [ "else" stmt ]
//!            | "while" "(" expr ")" stmt
//!            | "for" "(" [ decl | assign ] ";" [ expr ] ";" [ assign ] ")" stmt ;
//! decl       = type IDENT [ "=" expr ] ;
//! assign     = IDENT "=" expr ;
//! expr       = or ;
//! or         = and { "||" and } ;
//! and        = equality { "&&" equality } ;
//! equality   = relational { ( "==" | "!=" ) relational } ;
//! relational = additive { ( "<" | "<=" | ">" | ">=" ) additive } ;
//! additive   = term { ( "+" | "-" ) term } ;
//! term       = unary { ( "*" | "/" | "%" ) unary } ;
//! unary      = ( "-" | "!" ) unary | primary ;
//! primary    = NUMBER | IDENT [ "(" [ expr { "," expr } ] ")" ] | "(" expr ")" ;
//! ```
//!
//! The last function in the file is the entry point; its parameters are the
//! test-input dimensions. `-` applied directly to a numeric token is folded
//! into a negative literal.

mod ast;
mod check;
mod lexer;
mod parser;
mod printer;
mod sites;

use std::fmt;

pub use ast::*;
pub use printer::expr_to_string;
pub use sites::{PredicateSite, SiteKind, SiteTable};

pub(crate) use check::TypeInfo;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { message: String, line: u32, column: u32, offset: usize },
    #[error("{span}: semantic error: {message}")]
    Semantic { message: String, span: SourceSpan },
}

impl ParseError {
    pub fn line_column(&self) -> (u32, u32) {
        match self {
            ParseError::Syntax { line, column, .. } => (*line, *column),
            ParseError::Semantic { span, .. } => (span.line, span.column),
        }
    }
}

/// A checked MiniC program with its derived site table.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    items: Vec<Item>,
    entry: String,
    site_table: SiteTable,
    node_count: u32,
    info: TypeInfo,
}

pub fn parse(source: &str) -> Result<Program, ParseError> {
    Program::from_items(parser::parse_items(source)?)
}

pub fn pretty_print(p: &Program) -> String {
    printer::print_items(&p.items)
}

pub fn enumerate_sites(p: &Program) -> SiteTable {
    sites::build_site_table(&p.items, p.node_count)
}

impl Program {
    /// Number nodes in pre-order, type-check, and derive the site table.
    pub fn from_items(mut items: Vec<Item>) -> Result<Program, ParseError> {
        let mut next: NodeId = 0;
        ast::for_each_node_mut(&mut items, &mut |id, _| {
            *id = next;
            next += 1;
        });
        let (entry, info) = check::check_items(&items, next)?;
        let site_table = sites::build_site_table(&items, next);
        Ok(Program { items, entry, site_table, node_count: next, info })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn entry_name(&self) -> &str {
        &self.entry
    }

    pub fn entry(&self) -> &FunctionDef {
        self.function(&self.entry).expect("entry function exists after checking")
    }

    pub fn params(&self) -> &[Param] {
        &self.entry().params
    }

    /// Input arity.
    pub fn dim(&self) -> usize {
        self.entry().params.len()
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            Item::Const(_) => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions().find(|f| f.name == name)
    }

    pub fn constants(&self) -> impl Iterator<Item = &ConstDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Const(c) => Some(c),
            Item::Function(_) => None,
        })
    }

    pub fn site_table(&self) -> &SiteTable {
        &self.site_table
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    /// Static kind of an expression node.
    pub fn expr_kind(&self, id: NodeId) -> Option<ScalarKind> {
        self.info.expr_kinds.get(id as usize).copied().flatten()
    }

    /// Other same-kind variables in scope at a variable read. `None` for
    /// constant reads and non-variable nodes.
    pub fn same_kind_in_scope(&self, id: NodeId) -> Option<&[String]> {
        self.info.same_kind_in_scope.get(&id).map(Vec::as_slice)
    }

    pub(crate) fn items_mut_clone(&self) -> Vec<Item> {
        self.items.clone()
    }

    /// Equality of the trees and node indices, ignoring source positions.
    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.entry == other.entry && strip_spans(&self.items) == strip_spans(&other.items)
    }
}

fn strip_spans(items: &[Item]) -> Vec<Item> {
    let mut items = items.to_vec();
    ast::for_each_node_mut(&mut items, &mut |_, span| *span = SourceSpan::default());
    for item in &mut items {
        match item {
            Item::Const(c) => c.span = SourceSpan::default(),
            Item::Function(f) => f.span = SourceSpan::default(),
        }
    }
    items
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NESTED: &str = "int f(int a, int b) {
        int r = 0;
        if (a > 0) { if (b > 0) { r = 1; } else { r = 2; } } else if (a < -5) r = 3; else { r = 4; }
        return r;
    }";

    #[test]
    fn minimal_program() {
        let p = parse("int f(int a){return a;}").unwrap();
        assert_eq!(p.functions().count(), 1);
        assert_eq!(p.dim(), 1);
        assert_eq!(p.site_table().predicate_count(), 0);
        assert_eq!(p.site_table().statement_count(), 1);
    }

    #[test]
    fn truncated_input_is_a_syntax_error_at_end() {
        let err = parse("int f(int a){ if(a>").unwrap_err();
        match err {
            ParseError::Syntax { message, line, column, .. } => {
                assert!(message.contains("end of input"), "{message}");
                assert_eq!((line, column), (1, 20));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let cases = [
            ("int f(int a){return b;}", "undeclared identifier `b`"),
            ("int g(int x){return x;} int f(int a){return g(a, a);}", "expects 1 argument"),
            ("int f(double a){return a % 2;}", "`%` requires integer operands"),
            ("int f(int a){ if (a > 0) return 1; }", "without returning"),
            ("int f(int a){ int a = 1; return a; }", "already declared"),
            ("const int K = 1; int f(int a){ K = 2; return a; }", "cannot assign to constant"),
            ("int f(int a){ return h(a); }", "undefined function"),
            ("int f(int a){ return sqrt(a, a); }", "expects 1 argument"),
        ];
        for (src, needle) in cases {
            let err = parse(src).unwrap_err();
            assert!(err.to_string().contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn undeclared_span_points_into_source() {
        let src = "int f(int a){\n  return a + zz;\n}";
        let ParseError::Semantic { span, .. } = parse(src).unwrap_err() else { panic!() };
        assert_eq!(&src[span.start..span.end], "zz");
        assert_eq!((span.line, span.column), (2, 14));
    }

    #[test]
    fn negative_literals_fold() {
        let p = parse("int f(int a){ return a - -3 * -(2); }").unwrap();
        let text = pretty_print(&p);
        assert!(text.contains("return a - -3 * -(2);"), "{text}");
    }

    #[test]
    fn nested_if_round_trips() {
        let p = parse(NESTED).unwrap();
        let text = pretty_print(&p);
        let again = parse(&text).unwrap();
        assert!(p.structurally_eq(&again), "{text}");
        assert_eq!(pretty_print(&again), text);
        assert!(text.contains("} else if (a < -5)\n        r = 3;\n    else {"), "{text}");
    }

    #[test]
    fn sites_of_conjunction_and_loop() {
        let p = parse("int f(int a, int b){ if(a>0 && b>0) return 1; return 0; }").unwrap();
        assert_eq!(p.site_table().predicate_count(), 2);
        assert_eq!(p.site_table().arm_count(), 4);

        let p = parse("int f(int n){ int i = 0; while(i<n){ i = i + 1; } return i; }").unwrap();
        assert_eq!(p.site_table().predicate_count(), 1);
        assert_eq!(p.site_table().predicate_sites[0].kind, SiteKind::Comparison);
    }

    #[test]
    fn bare_conditions_are_sites() {
        let p = parse("int f(int flag, int b){ if(flag) return 1; if(!(b) || b+1) return 2; return 0; }").unwrap();
        let kinds: Vec<SiteKind> = p.site_table().predicate_sites.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SiteKind::BareCondition; 3]);
        // comparison outside a condition still counts
        let p = parse("int f(int a){ int c = a < 3; return c; }").unwrap();
        assert_eq!(p.site_table().predicate_count(), 1);
    }

    #[test]
    fn entry_is_last_function() {
        let p = parse("int helper(int x){return x;} double main2(double y, int z){return helper(z) + y;}").unwrap();
        assert_eq!(p.entry_name(), "main2");
        assert_eq!(p.params()[0].kind, ScalarKind::Float);
    }

    #[test]
    fn node_indices_are_dense_preorder() {
        let p = parse("int f(int a){ int b = a + 1; return b; }").unwrap();
        // Declare(0) Arith(1) Var a(2) Int 1(3) Return(4) Var b(5)
        assert_eq!(p.node_count(), 6);
        assert_eq!(p.site_table().statement_sites, vec![0, 4]);
        assert_eq!(p.expr_kind(1), Some(ScalarKind::Int));
    }
}
