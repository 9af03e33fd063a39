use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_input, DomainSpec, SuiteError, SuiteLabel, TestSuite};
use crate::minilang::Program;
use crate::tracer::{trace_signature, ExecBudget, PathSignature, TestInput, Value};

const MAX_BISECTION_STEPS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryOptions {
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub budget: ExecBudget,
    /// Sampled pairs before giving up; `None` means `200 * n`.
    pub max_attempts: Option<usize>,
}

impl BoundaryOptions {
    pub fn new(n: usize, seed: u64, eps: f64) -> Self {
        BoundaryOptions { n, seed, eps, budget: ExecBudget::default(), max_attempts: None }
    }
}

/// Boundary pairs found by bisecting between randomly sampled inputs whose
/// path signatures differ. Inputs come in pairs: positions `2i` and `2i+1`
/// path-differ.
pub fn gen_boundary(p: &Program, spec: &DomainSpec, n: usize, seed: u64, eps: f64) -> Result<TestSuite, SuiteError> {
    gen_boundary_with(p, spec, &BoundaryOptions::new(n, seed, eps))
}

pub fn gen_boundary_with(p: &Program, spec: &DomainSpec, opts: &BoundaryOptions) -> Result<TestSuite, SuiteError> {
    if opts.n < 2 || !(opts.eps > 0.0) {
        return Err(SuiteError::BadBoundaryRequest);
    }
    spec.check_against(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sig = |i: &TestInput| trace_signature(p, i, opts.budget);
    let attempts = opts.max_attempts.unwrap_or(200 * opts.n);

    let mut seen = HashSet::new();
    let mut inputs = Vec::with_capacity(opts.n);
    for _ in 0..attempts {
        if inputs.len() >= opts.n {
            break;
        }
        let a = sample_input(spec, &mut rng);
        let b = sample_input(spec, &mut rng);
        let (sa, sb) = (sig(&a)?, sig(&b)?);
        if sa == sb {
            continue;
        }
        let (a, b) = bisect(spec, opts.eps, (a, sa), b, &sig)?;
        if seen.insert((a.clone(), b.clone())) {
            inputs.push(a);
            inputs.push(b);
        }
    }
    inputs.truncate(opts.n);

    let mut suite = TestSuite::new(
        &spec.program,
        SuiteLabel::Boundary,
        &format!("gen-boundary seed={} n={} eps={:e}", opts.seed, opts.n, opts.eps),
        inputs,
    );
    if suite.len() < opts.n {
        let w = format!(
            "boundary sampling found {} of {} inputs within {} attempts",
            suite.len(),
            opts.n,
            attempts
        );
        log::warn!("{w}");
        suite.warnings.push(w);
    }
    Ok(suite)
}

fn bisect(
    spec: &DomainSpec,
    eps: f64,
    (mut a, mut sa): (TestInput, PathSignature),
    mut b: TestInput,
    sig: &impl Fn(&TestInput) -> Result<PathSignature, crate::tracer::ExecError>,
) -> Result<(TestInput, TestInput), SuiteError> {
    for _ in 0..MAX_BISECTION_STEPS {
        if close(&a, &b, eps) {
            break;
        }
        let m = midpoint(spec, &a, &b);
        if m == a || m == b {
            break;
        }
        let sm = sig(&m)?;
        if sm != sa {
            b = m;
        } else {
            a = m;
            sa = sm;
        }
    }
    Ok((a, b))
}

fn close(a: &TestInput, b: &TestInput, eps: f64) -> bool {
    a.values().iter().zip(b.values()).all(|(x, y)| match (x, y) {
        (Value::Int(x), Value::Int(y)) => (*x as i128 - *y as i128).abs() <= 1,
        _ => (x.as_f64() - y.as_f64()).abs() <= eps,
    })
}

/// Per coordinate; integer midpoints truncate toward the first endpoint.
fn midpoint(spec: &DomainSpec, a: &TestInput, b: &TestInput) -> TestInput {
    TestInput::new(
        a.values()
            .iter()
            .zip(b.values())
            .zip(&spec.params)
            .map(|((x, y), range)| match (x, y) {
                (Value::Int(x), Value::Int(y)) => {
                    let (x, y) = (*x as i128, *y as i128);
                    Value::Int((x + (y - x) / 2) as i64)
                }
                _ => {
                    let (x, y) = (x.as_f64(), y.as_f64());
                    let mut m = x + (y - x) / 2.0;
                    if !m.is_finite() {
                        m = x / 2.0 + y / 2.0;
                    }
                    Value::Float(m.clamp(range.min.as_f64(), range.max.as_f64()))
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;
    use crate::suitegen::ParamRange;

    #[test]
    fn threshold_is_found() {
        let p = parse("int f(int a){if(a>10)return 1;return 0;}").unwrap();
        let spec = DomainSpec::new("f", vec![ParamRange::int("a", 0, 20)]).unwrap();
        let s = gen_boundary(&p, &spec, 10, 3, 1e-6).unwrap();
        let vals: Vec<TestInput> = s.inputs.clone();
        assert!(vals.contains(&TestInput::ints(&[10])));
        assert!(vals.contains(&TestInput::ints(&[11])));
        assert_eq!(s.label, SuiteLabel::Boundary);
    }

    #[test]
    fn float_boundary_within_eps() {
        let p = parse("int f(double x){ if (x < 0.3) return 0; return 1; }").unwrap();
        let spec = DomainSpec::new("f", vec![ParamRange::float("x", 0.0, 1.0)]).unwrap();
        let s = gen_boundary(&p, &spec, 2, 11, 1e-9).unwrap();
        let (a, b) = (s.inputs[0].values()[0].as_f64(), s.inputs[1].values()[0].as_f64());
        assert!((a - b).abs() <= 1e-9 && (a - 0.3).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn straight_line_program_warns() {
        let p = parse("int f(int a){ return a * 2; }").unwrap();
        let spec = DomainSpec::new("f", vec![ParamRange::int("a", 0, 5)]).unwrap();
        let mut opts = BoundaryOptions::new(4, 1, 1e-6);
        opts.max_attempts = Some(30);
        let s = gen_boundary_with(&p, &spec, &opts).unwrap();
        // distinct return values still differ in signature
        assert!(!s.is_empty());

        let p = parse("int f(int a){ return 0; }").unwrap();
        let s = gen_boundary_with(&p, &spec, &opts).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn pairs_path_differ_and_stay_in_domain() {
        let p = parse("int f(int a, int b){ if (a + b > 7) return 1; if (a == b) return 2; return 0; }").unwrap();
        let spec = DomainSpec::new("f", vec![ParamRange::int("a", -5, 9), ParamRange::int("b", -5, 9)]).unwrap();
        let s = gen_boundary(&p, &spec, 11, 5, 1e-6).unwrap();
        assert!(s.len() <= 11);
        for pair in s.inputs.chunks_exact(2) {
            let sa = trace_signature(&p, &pair[0], ExecBudget::default()).unwrap();
            let sb = trace_signature(&p, &pair[1], ExecBudget::default()).unwrap();
            assert_ne!(sa, sb);
        }
        assert!(s.inputs.iter().all(|i| spec.contains(i)));
    }

    #[test]
    fn invalid_requests() {
        let p = parse("int f(int a){ return a; }").unwrap();
        let spec = DomainSpec::new("f", vec![ParamRange::int("a", 0, 5)]).unwrap();
        assert_eq!(gen_boundary(&p, &spec, 1, 1, 1e-6), Err(SuiteError::BadBoundaryRequest));
        assert_eq!(gen_boundary(&p, &spec, 4, 1, 0.0), Err(SuiteError::BadBoundaryRequest));
    }
}
