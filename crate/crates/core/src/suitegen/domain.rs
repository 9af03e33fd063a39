use serde::{Deserialize, Serialize};

use super::SuiteError;
use crate::minilang::{Program, ScalarKind};
use crate::tracer::{TestInput, Value};

/// Inclusive range for one entry parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub kind: ScalarKind,
    pub min: Value,
    pub max: Value,
}

impl ParamRange {
    pub fn int(name: &str, min: i64, max: i64) -> Self {
        ParamRange { name: name.to_string(), kind: ScalarKind::Int, min: Value::Int(min), max: Value::Int(max) }
    }

    pub fn float(name: &str, min: f64, max: f64) -> Self {
        ParamRange { name: name.to_string(), kind: ScalarKind::Float, min: Value::Float(min), max: Value::Float(max) }
    }

    pub fn contains(&self, v: Value) -> bool {
        match (self.kind, v) {
            (ScalarKind::Int, Value::Int(x)) => {
                let (Value::Int(lo), Value::Int(hi)) = (self.min, self.max) else { return false };
                lo <= x && x <= hi
            }
            (ScalarKind::Float, Value::Float(x)) => self.min.as_f64() <= x && x <= self.max.as_f64(),
            _ => false,
        }
    }
}

/// Input domain of a program: one range per entry parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(default)]
    pub program: String,
    pub params: Vec<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DomainSpec {
    pub fn new(program: &str, params: Vec<ParamRange>) -> Result<Self, SuiteError> {
        let mut spec = DomainSpec { program: program.to_string(), params, note: None };
        spec.normalize()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, SuiteError> {
        let mut spec: DomainSpec = serde_json::from_str(text).map_err(|e| SuiteError::Domain(e.to_string()))?;
        spec.normalize()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain specs serialize") + "\n"
    }

    /// Float bounds written as integers become floats; int bounds must be integers.
    fn normalize(&mut self) -> Result<(), SuiteError> {
        for r in &mut self.params {
            match r.kind {
                ScalarKind::Float => {
                    r.min = Value::Float(r.min.as_f64());
                    r.max = Value::Float(r.max.as_f64());
                    if !r.min.as_f64().is_finite() || !r.max.as_f64().is_finite() {
                        return Err(SuiteError::Domain(format!("`{}`: bounds must be finite", r.name)));
                    }
                }
                ScalarKind::Int => {
                    if r.min.kind() != ScalarKind::Int || r.max.kind() != ScalarKind::Int {
                        return Err(SuiteError::Domain(format!("`{}`: int bounds must be integers", r.name)));
                    }
                }
            }
            if r.min.as_f64() > r.max.as_f64() {
                return Err(SuiteError::Domain(format!("`{}`: min {} exceeds max {}", r.name, r.min, r.max)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn kinds(&self) -> Vec<ScalarKind> {
        self.params.iter().map(|r| r.kind).collect()
    }

    /// Arity and kinds must match the entry function.
    pub fn check_against(&self, p: &Program) -> Result<(), SuiteError> {
        if self.dim() != p.dim() {
            return Err(SuiteError::Domain(format!(
                "domain has {} parameters but `{}` takes {}",
                self.dim(),
                p.entry_name(),
                p.dim()
            )));
        }
        for (r, param) in self.params.iter().zip(p.params()) {
            if r.kind != param.kind {
                return Err(SuiteError::Domain(format!(
                    "parameter `{}` is {} but the domain says {}",
                    param.name,
                    param.kind.keyword(),
                    r.kind.keyword()
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, input: &TestInput) -> bool {
        input.len() == self.dim() && self.params.iter().zip(input.values()).all(|(r, v)| r.contains(*v))
    }
}

/// Converts int values to float where a float is expected.
pub fn coerce_input(input: &TestInput, kinds: &[ScalarKind]) -> TestInput {
    TestInput::new(
        input
            .values()
            .iter()
            .zip(kinds.iter().copied().map(Some).chain(std::iter::repeat(None)))
            .map(|(v, k)| match (v, k) {
                (Value::Int(i), Some(ScalarKind::Float)) => Value::Float(*i as f64),
                _ => *v,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_bounds_are_normalized() {
        let spec = DomainSpec::from_json(
            r#"{"program":"p","params":[{"name":"n","kind":"int","min":2,"max":15},{"name":"x","kind":"float","min":-20,"max":20}]}"#,
        )
        .unwrap();
        assert_eq!(spec.params[1].min, Value::Float(-20.0));
        assert!(spec.contains(&TestInput::new(vec![Value::Int(2), Value::Float(20.0)])));
        assert!(!spec.contains(&TestInput::new(vec![Value::Int(1), Value::Float(0.0)])));
        assert!(!spec.contains(&TestInput::new(vec![Value::Int(2), Value::Int(0)])));
    }

    #[test]
    fn bad_ranges_are_rejected() {
        assert!(DomainSpec::from_json(r#"{"params":[{"name":"a","kind":"int","min":3,"max":1}]}"#).is_err());
        assert!(DomainSpec::from_json(r#"{"params":[{"name":"a","kind":"int","min":0.5,"max":1}]}"#).is_err());
    }

    #[test]
    fn arity_is_checked_against_program() {
        let p = crate::minilang::parse("int f(int a, double b){ return a; }").unwrap();
        let ok = DomainSpec::new("f", vec![ParamRange::int("a", 0, 1), ParamRange::float("b", 0.0, 1.0)]).unwrap();
        assert!(ok.check_against(&p).is_ok());
        let short = DomainSpec::new("f", vec![ParamRange::int("a", 0, 1)]).unwrap();
        assert!(short.check_against(&p).is_err());
        let wrong = DomainSpec::new("f", vec![ParamRange::int("a", 0, 1), ParamRange::int("b", 0, 1)]).unwrap();
        assert!(wrong.check_against(&p).is_err());
    }
}
