use std::collections::{BTreeMap, BTreeSet};

use bvmt_core::evaluator::{kill_matrix, kill_matrix_with, linreg_r2, suite_coverage, EvalOptions, KillRate};
use bvmt_core::minilang::{
    enumerate_sites, expr_to_string, parse, ParseError, pretty_print, walk_stmt, Expr, ExprKind, Item, Program, Stmt, StmtKind,
};
use bvmt_core::mutator::{apply_mutant, enumerate_mutants, sample_manifest, MutationOperator};
use bvmt_core::subjects::{list_subjects, load_subject};
use bvmt_core::suitegen::{emit_prompt, extract_suite, gen_boundary, gen_random, DomainSpec, ParamRange, SuiteLabel, TestSuite};
use bvmt_core::tracer::{execute, trace_signature, ExecBudget, Status, TestInput, Value};
use num::{BigInt, BigRational, ToPrimitive};
use proptest::prelude::*;

/// Source text plus the number of comparison and bare-condition atoms it has.
#[derive(Clone, Debug)]
struct Gen {
    text: String,
    cmps: usize,
    bare: usize,
}

fn int_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("i".to_string()),
        (-20i64..20).prop_map(|v| v.to_string()),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), prop::sample::select(vec!["+", "-", "*"]), inner).prop_map(|(l, op, r)| format!("({l} {op} {r})"))
    })
}

fn cond() -> impl Strategy<Value = Gen> {
    let cmp = (int_expr(), prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]), int_expr())
        .prop_map(|(l, op, r)| Gen { text: format!("({l} {op} {r})"), cmps: 1, bare: 0 });
    let bare = prop::sample::select(vec!["a", "b"]).prop_map(|v| Gen { text: v.to_string(), cmps: 0, bare: 1 });
    prop_oneof![3 => cmp, 1 => bare].prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["&&", "||"]), inner.clone()).prop_map(|(l, op, r)| Gen {
                text: format!("({} {op} {})", l.text, r.text),
                cmps: l.cmps + r.cmps,
                bare: l.bare + r.bare,
            }),
            inner.prop_map(|c| Gen { text: format!("!{}", c.text), ..c }),
        ]
    })
}

fn join(v: &[Gen]) -> Gen {
    Gen {
        text: v.iter().map(|g| g.text.as_str()).collect::<Vec<_>>().join(" "),
        cmps: v.iter().map(|g| g.cmps).sum(),
        bare: v.iter().map(|g| g.bare).sum(),
    }
}

/// Loop-free statements.
fn straight() -> impl Strategy<Value = Gen> {
    let assign = int_expr().prop_map(|e| Gen { text: format!("i = {e};"), cmps: 0, bare: 0 });
    assign.prop_recursive(2, 6, 3, |inner| {
        let block = prop::collection::vec(inner, 1..3).prop_map(|v| join(&v));
        (cond(), block.clone(), block).prop_map(|(c, t, e)| Gen {
            text: format!("if {} {{ {} }} else {{ {} }}", paren(&c.text), t.text, e.text),
            cmps: c.cmps + t.cmps + e.cmps,
            bare: c.bare + t.bare + e.bare,
        })
    })
}

fn stmts() -> impl Strategy<Value = Gen> {
    let looped = (1i64..5, prop::collection::vec(straight(), 1..3)).prop_map(|(k, body)| {
        let b = join(&body);
        Gen { text: format!("j = 0; while (j < {k}) {{ j = j + 1; {} }}", b.text), cmps: 1 + b.cmps, bare: b.bare }
    });
    prop_oneof![2 => straight(), 1 => looped]
}

fn paren(c: &str) -> String {
    if c.starts_with('(') && c.ends_with(')') {
        c.to_string()
    } else {
        format!("({c})")
    }
}

fn program() -> impl Strategy<Value = Gen> {
    (prop::collection::vec(stmts(), 1..4), int_expr()).prop_map(|(body, ret)| Gen {
        text: format!(
            "int f(int a, int b) {{ int i = 0; int j = 0; {} return {ret}; }}",
            body.iter().map(|g| g.text.as_str()).collect::<Vec<_>>().join(" ")
        ),
        cmps: body.iter().map(|g| g.cmps).sum(),
        bare: body.iter().map(|g| g.bare).sum(),
    })
}

fn node_labels(p: &Program) -> Vec<(u32, String)> {
    let mut out = Vec::new();
    for item in p.items() {
        if let Item::Function(f) = item {
            for s in &f.body {
                let mut exprs = Vec::new();
                walk_stmt(s, &mut |st: &Stmt| out.push((st.id, "stmt".to_string())), &mut |e: &Expr| exprs.push((e.id, expr_to_string(e))));
                out.extend(exprs);
            }
        }
    }
    out.sort();
    out
}

fn shallow(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) => format!("int {v}"),
        ExprKind::Float(v) => format!("float {v:?}"),
        ExprKind::Var(n) => format!("var {n}"),
        ExprKind::Unary { op, .. } => format!("unary {op:?}"),
        ExprKind::Arith { op, .. } => format!("arith {op:?}"),
        ExprKind::Cmp { op, .. } => format!("cmp {op:?}"),
        ExprKind::Logic { op, .. } => format!("logic {op:?}"),
        ExprKind::Call { callee, args } => format!("call {callee}/{}", args.len()),
    }
}

/// Number of maximal subtrees that differ between two expressions.
/// Wrapping `a` as `a + 1` or `a - 1` counts as one changed node.
fn expr_diff(a: &Expr, b: &Expr) -> usize {
    if let ExprKind::Arith { lhs, rhs, .. } = &b.kind {
        if matches!(rhs.kind, ExprKind::Int(1)) && expr_diff(a, lhs) == 0 {
            return 1;
        }
    }
    if shallow(a) != shallow(b) {
        return 1;
    }
    a.children().into_iter().zip(b.children()).map(|(x, y)| expr_diff(x, y)).sum()
}

const MISMATCH: usize = 1000;

fn opt_expr_diff(a: &Option<Expr>, b: &Option<Expr>) -> usize {
    match (a, b) {
        (Some(x), Some(y)) => expr_diff(x, y),
        (None, None) => 0,
        _ => MISMATCH,
    }
}

fn opt_stmt_diff(a: &Option<Box<Stmt>>, b: &Option<Box<Stmt>>) -> usize {
    match (a, b) {
        (Some(x), Some(y)) => stmt_diff(x, y),
        (None, None) => 0,
        _ => MISMATCH,
    }
}

fn stmts_diff(a: &[Stmt], b: &[Stmt]) -> usize {
    if a.len() != b.len() {
        return MISMATCH;
    }
    a.iter().zip(b).map(|(x, y)| stmt_diff(x, y)).sum()
}

fn stmt_diff(a: &Stmt, b: &Stmt) -> usize {
    use StmtKind::*;
    match (&a.kind, &b.kind) {
        (Declare { name: n1, kind: k1, init: i1 }, Declare { name: n2, kind: k2, init: i2 }) if n1 == n2 && k1 == k2 => {
            opt_expr_diff(i1, i2)
        }
        (Assign { target: t1, value: v1 }, Assign { target: t2, value: v2 }) if t1 == t2 => expr_diff(v1, v2),
        (If { cond: c1, then_branch: t1, else_branch: e1 }, If { cond: c2, then_branch: t2, else_branch: e2 }) => {
            expr_diff(c1, c2) + stmt_diff(t1, t2) + opt_stmt_diff(e1, e2)
        }
        (While { cond: c1, body: b1 }, While { cond: c2, body: b2 }) => expr_diff(c1, c2) + stmt_diff(b1, b2),
        (For { init: i1, cond: c1, update: u1, body: b1 }, For { init: i2, cond: c2, update: u2, body: b2 }) => {
            opt_stmt_diff(i1, i2) + opt_expr_diff(c1, c2) + opt_stmt_diff(u1, u2) + stmt_diff(b1, b2)
        }
        (Return(x), Return(y)) | (Expr(x), Expr(y)) => expr_diff(x, y),
        (Block(x), Block(y)) => stmts_diff(x, y),
        _ => MISMATCH,
    }
}

fn program_diff(a: &Program, b: &Program) -> usize {
    if a.items().len() != b.items().len() {
        return MISMATCH;
    }
    a.items()
        .iter()
        .zip(b.items())
        .map(|(x, y)| match (x, y) {
            (Item::Function(f), Item::Function(g)) if f.name == g.name && f.params == g.params => stmts_diff(&f.body, &g.body),
            (Item::Const(c), Item::Const(d)) if c.name == d.name => expr_diff(&c.value, &d.value),
            _ => MISMATCH,
        })
        .sum()
}

fn toy() -> Program {
    parse("int f(int a, int b, double x) { if (a > b) { if (x < 0.5) return 1; return 2; } if (a + b == 7 || x >= 2.0) return 3; return 0; }").unwrap()
}

fn toy_domain() -> impl Strategy<Value = DomainSpec> {
    ((-50i64..50, 0i64..60), (-50i64..50, 0i64..60), (-5.0f64..5.0, 0.0f64..5.0)).prop_map(|((a, da), (b, db), (x, dx))| {
        DomainSpec::new(
            "f",
            vec![ParamRange::int("a", a, a + da), ParamRange::int("b", b, b + db), ParamRange::float("x", x, x + dx)],
        )
        .unwrap()
    })
}

fn budget() -> ExecBudget {
    ExecBudget::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn print_parse_round_trip(g in program()) {
        let p = parse(&g.text).unwrap();
        let printed = pretty_print(&p);
        let q = parse(&printed).unwrap();
        prop_assert!(p.structurally_eq(&q));
        prop_assert_eq!(pretty_print(&q), printed);
        prop_assert_eq!(node_labels(&p), node_labels(&q));
    }

    #[test]
    fn undeclared_identifiers_are_rejected_in_span(g in program(), which in 0usize..3) {
        let text = g.text.replacen(["i = ", "return ", "int j = 0; "][which], ["i = zz + ", "return zz + ", "int j = zz; "][which], 1);
        let span = match parse(&text) {
            Err(ParseError::Semantic { span, .. }) => span,
            other => return Err(TestCaseError::fail(format!("{other:?}"))),
        };
        prop_assert!(span.start < span.end && span.end <= text.len());
        prop_assert_eq!(&text[span.start..span.end], "zz");
    }

    #[test]
    fn site_count_matches_token_scan(g in program()) {
        let p = parse(&g.text).unwrap();
        prop_assert_eq!(enumerate_sites(&p).predicate_sites.len(), g.cmps + g.bare);
    }

    #[test]
    fn execution_is_deterministic_and_budget_monotone(g in program(), a in -30i64..30, b in -30i64..30, small in 1u64..200) {
        let p = parse(&g.text).unwrap();
        let input = TestInput::ints(&[a, b]);
        let first = execute(&p, &input, budget()).unwrap();
        prop_assert_eq!(&first, &execute(&p, &input, budget()).unwrap());
        let tight = execute(&p, &input, ExecBudget::new(small).unwrap()).unwrap();
        if matches!(tight.status, Status::Returned(_)) {
            prop_assert_eq!(&tight, &execute(&p, &input, ExecBudget::new(small * 10).unwrap()).unwrap());
            prop_assert_eq!(&tight, &first);
        }
    }

    #[test]
    fn arm_counts_match_recount(n in -5i64..60) {
        let p = parse("int f(int n) { int i = 0; int c = 0; while (i < n) { i = i + 1; if (i % 3 == 0) { c = c + 1; } } return c; }").unwrap();
        let t = execute(&p, &TestInput::ints(&[n]), budget()).unwrap();
        let iterations = n.max(0) as u64;
        prop_assert_eq!(t.status, Status::Returned(Value::Int(n.max(0) / 3)));
        prop_assert_eq!((t.branch_counts[0].taken_true, t.branch_counts[0].taken_false), (iterations, 1));
        prop_assert_eq!(t.branch_counts[1].taken_true, iterations / 3);
        prop_assert_eq!(t.branch_counts[1].evaluations(), iterations);
    }

    #[test]
    fn short_circuit_skips_right_operand(a in -20i64..=0, b in -20i64..20) {
        let p = parse("int f(int a, int b) { if (a > 0 && b > 0) return 1; return 0; }").unwrap();
        let t = execute(&p, &TestInput::ints(&[a, b]), budget()).unwrap();
        prop_assert_eq!(t.branch_counts[1].evaluations(), 0);
        prop_assert_eq!(t.branch_counts[0].taken_false, 1);
    }

    #[test]
    fn mutants_are_valid_single_node_changes(g in program()) {
        let p = parse(&g.text).unwrap();
        let printed = pretty_print(&p);
        let mutants = enumerate_mutants(&p, &MutationOperator::ALL);
        let ror = mutants.iter().filter(|m| m.operator == MutationOperator::ROR).count();
        let lor = mutants.iter().filter(|m| m.operator == MutationOperator::LOR).count();
        let logic_ops = g.text.matches("&&").count() + g.text.matches("||").count();
        prop_assert_eq!(ror, 5 * g.cmps);
        prop_assert_eq!(lor, logic_ops);
        prop_assert!(mutants.iter().filter(|m| m.operator == MutationOperator::OBOB).count() <= 4 * g.cmps);
        for m in &mutants {
            let q = apply_mutant(&p, m).unwrap();
            let text = pretty_print(&q);
            prop_assert_ne!(&text, &printed);
            prop_assert!(parse(&text).is_ok());
            prop_assert_eq!(program_diff(&p, &q), 1, "{}", m.id);
        }
    }

    #[test]
    fn manifest_sampling_is_seed_pure(seed in any::<u64>(), ror in 0usize..=40, svr in 0usize..=59) {
        let (p, _, _) = load_subject("findMiddle").unwrap();
        let counts = BTreeMap::from([(MutationOperator::ROR, ror), (MutationOperator::SVR, svr)]);
        let a = sample_manifest(&p, &counts, seed).unwrap();
        let b = sample_manifest(&p, &counts, seed).unwrap();
        prop_assert_eq!(&a.resolved, &b.resolved);
        prop_assert_eq!(a.resolved.len(), ror + svr);
        prop_assert_eq!(a.resolved.iter().collect::<BTreeSet<_>>().len(), ror + svr);
    }

    #[test]
    fn generated_inputs_stay_in_domain(spec in toy_domain(), n in 1usize..40, seed in any::<u64>()) {
        let p = toy();
        let r = gen_random(&spec, n, seed).unwrap();
        prop_assert_eq!(r.len(), n);
        prop_assert!(r.inputs.iter().all(|i| spec.contains(i)));
        let b = gen_boundary(&p, &spec, n.max(2), seed, 1e-6).unwrap();
        prop_assert!(b.len() <= n.max(2));
        prop_assert!(b.inputs.iter().all(|i| spec.contains(i)));
    }

    #[test]
    fn boundary_pairs_path_differ(spec in toy_domain(), n in 2usize..30, seed in any::<u64>()) {
        let p = toy();
        let s = gen_boundary(&p, &spec, n, seed, 1e-6).unwrap();
        for pair in s.inputs.chunks_exact(2) {
            prop_assert_ne!(trace_signature(&p, &pair[0], budget()).unwrap(), trace_signature(&p, &pair[1], budget()).unwrap());
        }
    }

    #[test]
    fn generators_are_seed_pure(spec in toy_domain(), n in 1usize..30, seed in any::<u64>()) {
        let p = toy();
        prop_assert_eq!(gen_random(&spec, n, seed).unwrap().inputs, gen_random(&spec, n, seed).unwrap().inputs);
        let m = n.max(2);
        prop_assert_eq!(gen_boundary(&p, &spec, m, seed, 1e-6).unwrap().inputs, gen_boundary(&p, &spec, m, seed, 1e-6).unwrap().inputs);
    }

    #[test]
    fn extracted_tuples_appear_in_text(rows in prop::collection::vec((-999i64..999, -999i64..999, -999i64..999), 1..12), style in 0usize..3) {
        let spec = DomainSpec::new("f", vec![ParamRange::int("a", -999, 999), ParamRange::int("b", -999, 999), ParamRange::int("c", -999, 999)]).unwrap();
        let mut text = String::from("Here are some test inputs:\n\n");
        for (k, (a, b, c)) in rows.iter().enumerate() {
            text += &match style {
                0 => format!("{}. ({a}, {b}, {c})\n", k + 1),
                1 => format!("Test {}: a = {a}, b = {b}, c = {c}\n", k + 1),
                _ => format!("- [{a}, {b}, {c}]  // case\n"),
            };
        }
        let s = extract_suite(&text, &spec).unwrap();
        let expected: Vec<TestInput> = rows.iter().map(|&(a, b, c)| TestInput::ints(&[a, b, c])).collect();
        prop_assert_eq!(&s.inputs, &expected);
        for input in &s.inputs {
            for v in input.values() {
                prop_assert!(text.contains(&v.to_string()));
            }
        }
    }

    #[test]
    fn kill_rate_matches_rational_oracle(total in 1usize..5000, frac in 0.0f64..=1.0) {
        let killed = ((total as f64) * frac).floor() as usize;
        let r = KillRate::new(killed, total).unwrap();
        let exact = BigRational::new(BigInt::from(killed * 10000), BigInt::from(total));
        let hundredths = exact.round().to_integer().to_u64().unwrap();
        prop_assert_eq!(r.to_string(), format!("{}.{:02}", hundredths / 100, hundredths % 100));
        prop_assert_eq!(r.percent(), hundredths as f64 / 100.0);
    }

    #[test]
    fn regression_matches_closed_form(pts in prop::collection::vec((-40i32..40, -40i32..40), 2..12)) {
        let points: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x as f64 / 4.0, y as f64 / 8.0)).collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        prop_assume!(sxx > 0.0);
        let r = linreg_r2(&points).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.r2));
        let expected = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
        prop_assert!((r.r2 - expected).abs() <= 1e-12, "{} vs {}", r.r2, expected);
        prop_assert!((r.slope - sxy / sxx).abs() <= 1e-12);
    }

    #[test]
    fn evaluation_is_monotone_and_schedule_free(which in 0usize..7, seed in any::<u64>(), n in 2usize..24, cut in 1usize..24) {
        let name = &list_subjects()[which].name;
        let (p, spec, m) = load_subject(name).unwrap();
        let mutants = bvmt_core::mutator::resolve_manifest(&p, &m).unwrap();
        let suite = gen_random(&spec, n, seed).unwrap();
        let serial = kill_matrix(&p, &mutants, &suite, budget()).unwrap();
        let parallel = kill_matrix_with(&p, &mutants, &suite, &EvalOptions { jobs: 4, ..EvalOptions::default() }).unwrap();
        prop_assert_eq!(&serial, &parallel);

        let k = cut.min(n);
        let prefix = TestSuite::new(name, SuiteLabel::Random, "prefix", suite.inputs[..k].to_vec());
        let small = kill_matrix(&p, &mutants, &prefix, budget()).unwrap();
        let small_killed: BTreeSet<_> = small.killed_ids().into_iter().collect();
        let full_killed: BTreeSet<_> = serial.killed_ids().into_iter().collect();
        prop_assert!(small_killed.is_subset(&full_killed));
        let cs = suite_coverage(&p, &prefix, budget()).unwrap();
        let cf = suite_coverage(&p, &suite, budget()).unwrap();
        prop_assert!(cs.statement_coverage <= cf.statement_coverage);
        prop_assert!(cs.branch_coverage <= cf.branch_coverage);
    }
}

#[test]
fn subject_mutants_are_valid_single_node_changes() {
    for s in list_subjects() {
        let p = s.program();
        let printed = pretty_print(&p);
        for m in enumerate_mutants(&p, &MutationOperator::ALL) {
            let q = apply_mutant(&p, &m).unwrap();
            assert_ne!(pretty_print(&q), printed, "{} {}", s.name, m.id);
            assert_eq!(program_diff(&p, &q), 1, "{} {}", s.name, m.id);
        }
    }
}

#[test]
fn manifest_sampling_is_pinned() {
    let (p, _, _) = load_subject("findMiddle").unwrap();
    let counts = BTreeMap::from([(MutationOperator::ROR, 3), (MutationOperator::SVR, 2)]);
    let m = sample_manifest(&p, &counts, 3).unwrap();
    assert_eq!(m.resolved, PINNED_FIND_MIDDLE);
}

const PINNED_FIND_MIDDLE: [&str; 5] = ["ROR-5-4", "ROR-24-4", "ROR-27-0", "SVR-6-2", "SVR-39-1"];

#[test]
fn prompts_are_stable() {
    for id in 1..=4 {
        assert_eq!(emit_prompt(id, "int f(int a) { return a; }\n"), emit_prompt(id, "int f(int a) { return a; }\n"));
    }
}
