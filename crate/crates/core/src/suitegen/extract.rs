use super::{DomainSpec, SuiteError, SuiteLabel, TestSuite};
use crate::minilang::ScalarKind;
use crate::tracer::{TestInput, Value};

#[derive(Clone, Copy, Debug)]
struct Numeral<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

/// Parses externally produced text into an imported suite. A JSON array of
/// arrays is tried first, then a line scan for tuples of the right arity.
/// Inputs outside `spec` are kept and their indices recorded.
pub fn extract_suite(text: &str, spec: &DomainSpec) -> Result<TestSuite, SuiteError> {
    let kinds = spec.kinds();
    let (inputs, how) = match strict(text, &kinds) {
        Some(inputs) if !inputs.is_empty() => (inputs, "strict"),
        _ => (lenient(text, &kinds), "lenient"),
    };
    if inputs.is_empty() {
        return Err(SuiteError::NothingExtracted {
            dim: kinds.len(),
            lines: text.lines().count(),
            numerals: text.lines().map(|l| numerals(l).len()).sum(),
        });
    }
    let mut suite = TestSuite::new(&spec.program, SuiteLabel::Imported, &format!("extracted ({how})"), inputs);
    suite.out_of_domain = suite.inputs.iter().enumerate().filter(|(_, i)| !spec.contains(i)).map(|(k, _)| k).collect();
    if !suite.out_of_domain.is_empty() {
        let w = format!("{} imported input(s) lie outside the domain", suite.out_of_domain.len());
        log::warn!("{w}");
        suite.warnings.push(w);
    }
    Ok(suite)
}

fn strict(text: &str, kinds: &[ScalarKind]) -> Option<Vec<TestInput>> {
    let json: serde_json::Value = serde_json::from_str(text.trim()).ok()?;
    json.as_array()?
        .iter()
        .map(|row| {
            let row = row.as_array()?;
            if row.len() != kinds.len() {
                return None;
            }
            row.iter()
                .zip(kinds)
                .map(|(v, k)| convert(&v.as_number()?.to_string(), *k))
                .collect::<Option<Vec<Value>>>()
                .map(TestInput::new)
        })
        .collect()
}

fn lenient(text: &str, kinds: &[ScalarKind]) -> Vec<TestInput> {
    let dim = kinds.len();
    let mut out = Vec::new();
    for line in text.lines() {
        let nums = numerals(line);
        if nums.len() < dim || dim == 0 {
            continue;
        }
        let groups: Vec<Vec<Numeral>> = bracket_groups(line)
            .into_iter()
            .map(|(s, e)| nums.iter().copied().filter(|n| n.start > s && n.end <= e).collect::<Vec<_>>())
            .filter(|g| g.len() == dim)
            .collect();
        let candidates: Vec<Vec<Numeral>> = if !groups.is_empty() {
            groups
        } else {
            let assigned: Vec<Numeral> =
                nums.iter().copied().filter(|n| line[..n.start].trim_end().ends_with('=')).collect();
            if assigned.len() == dim {
                vec![assigned]
            } else if nums.len() == dim {
                vec![nums]
            } else if nums.len() == dim + 1 && is_label(line, nums[0]) {
                vec![nums[1..].to_vec()]
            } else {
                Vec::new()
            }
        };
        for tuple in candidates {
            let values: Option<Vec<Value>> = tuple.iter().zip(kinds).map(|(n, k)| convert(n.text, *k)).collect();
            if let Some(values) = values {
                out.push(TestInput::new(values));
            }
        }
    }
    out
}

/// A leading enumeration number such as `1.`, `1:`, `1)` or `Test 1`.
fn is_label(line: &str, n: Numeral) -> bool {
    let after = line[n.end..].trim_start().chars().next();
    let before = line[..n.start].trim_end();
    !n.text.contains(['.', 'e', 'E', '-'])
        && (matches!(after, Some(':' | '.' | ')' | '-'))
            || before.ends_with(|c: char| c.is_alphabetic() || c == '#'))
}

/// Innermost `(...)` or `[...]` spans.
fn bracket_groups(line: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, c) in line.char_indices() {
        match c {
            '(' | '[' => open = Some(i),
            ')' | ']' => {
                if let Some(s) = open.take() {
                    out.push((s, i));
                }
            }
            _ => {}
        }
    }
    out
}

fn numerals(line: &str) -> Vec<Numeral<'_>> {
    let b = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let is_word = |c: u8| c.is_ascii_alphanumeric() || c == b'_';
    while i < b.len() {
        let c = b[i];
        if is_word(c) && !c.is_ascii_digit() {
            while i < b.len() && is_word(b[i]) {
                i += 1;
            }
            continue;
        }
        let signed = (c == b'-' || c == b'+') && i + 1 < b.len() && (b[i + 1].is_ascii_digit() || b[i + 1] == b'.');
        let prev_ok = i == 0 || !(is_word(b[i - 1]) || b[i - 1] == b'.');
        if !(c.is_ascii_digit() || signed || (c == b'.' && i + 1 < b.len() && b[i + 1].is_ascii_digit())) || !prev_ok {
            i += 1;
            continue;
        }
        let start = i;
        if signed {
            i += 1;
        }
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        if i < b.len() && is_word(b[i]) {
            // a numeral glued to letters, e.g. `3rd`
            while i < b.len() && is_word(b[i]) {
                i += 1;
            }
            continue;
        }
        if line[start..i].bytes().any(|c| c.is_ascii_digit()) {
            out.push(Numeral { text: &line[start..i], start, end: i });
        }
    }
    out
}

fn convert(text: &str, kind: ScalarKind) -> Option<Value> {
    let text = text.strip_prefix('+').unwrap_or(text);
    match kind {
        ScalarKind::Int => text.parse::<i64>().ok().map(Value::Int).or_else(|| {
            let f: f64 = text.parse().ok()?;
            (f.fract() == 0.0 && f.abs() < 9.0e15).then(|| Value::Int(f as i64))
        }),
        ScalarKind::Float => text.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::Float),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suitegen::ParamRange;

    fn spec3() -> DomainSpec {
        DomainSpec::new("t", vec![ParamRange::int("a", 0, 10), ParamRange::int("b", 0, 10), ParamRange::int("c", 0, 10)])
            .unwrap()
    }

    #[test]
    fn strict_json() {
        let s = extract_suite("[[1,2,3],[4,5,6]]", &spec3()).unwrap();
        assert_eq!(s.inputs, vec![TestInput::ints(&[1, 2, 3]), TestInput::ints(&[4, 5, 6])]);
        assert_eq!(s.provenance, "extracted (strict)");
        assert_eq!(s.label, SuiteLabel::Imported);
    }

    #[test]
    fn lenient_assignments() {
        let s = extract_suite("Test 1: a=1, b=2, c=3", &spec3()).unwrap();
        assert_eq!(s.inputs, vec![TestInput::ints(&[1, 2, 3])]);
    }

    #[test]
    fn lenient_mixed_llm_output() {
        let text = "Here are some inputs:\n\
                    1. (0, 0, 0) - all zero\n\
                    2. (10, 10, 11) - just outside\n\
                    Input #3: 5 -1 7\n\
                    `triType(3, 4, 5)` and `triType(1, 1, 2)`\n\
                    The 3rd case is tricky.";
        let s = extract_suite(text, &spec3()).unwrap();
        assert_eq!(
            s.inputs,
            vec![
                TestInput::ints(&[0, 0, 0]),
                TestInput::ints(&[10, 10, 11]),
                TestInput::ints(&[5, -1, 7]),
                TestInput::ints(&[3, 4, 5]),
                TestInput::ints(&[1, 1, 2]),
            ]
        );
        assert_eq!(s.out_of_domain, vec![1, 2]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn floats_and_identifiers() {
        let spec = DomainSpec::new("t", vec![ParamRange::int("n", 0, 10), ParamRange::float("x", -1.0, 1.0)]).unwrap();
        let s = extract_suite("n1 = 3, x2 = -0.5e-1\n[2, 1e400]\n(4, .25)", &spec).unwrap();
        assert_eq!(
            s.inputs,
            vec![
                TestInput::new(vec![Value::Int(3), Value::Float(-0.05)]),
                TestInput::new(vec![Value::Int(4), Value::Float(0.25)]),
            ]
        );
    }

    #[test]
    fn no_numbers_is_an_error() {
        let err = extract_suite("I cannot help with that.", &spec3()).unwrap_err();
        assert!(matches!(err, SuiteError::NothingExtracted { dim: 3, numerals: 0, .. }));
    }

    #[test]
    fn extracted_numerals_appear_in_text() {
        let text = "case (7, 8, 9)\nx=1 y=2 z=3";
        let s = extract_suite(text, &spec3()).unwrap();
        for input in &s.inputs {
            for v in input.values() {
                assert!(text.contains(&v.to_string()));
            }
        }
    }
}
