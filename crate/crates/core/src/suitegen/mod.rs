//! Test suite production: seeded random sampling, boundary sampling with the
//! program as its own oracle, prompt text for external LLMs, and import of
//! externally produced suites.

mod boundary;
mod domain;
mod extract;
mod llm;
mod prompt;

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::minilang::ScalarKind;
use crate::tracer::{ExecError, TestInput, Value};

pub use boundary::{gen_boundary, gen_boundary_with, BoundaryOptions};
pub use domain::{coerce_input, DomainSpec, ParamRange};
pub use extract::extract_suite;
pub use llm::{llm_fetch, llm_fetch_logged, EndpointConfig, LlmError};
pub use prompt::{emit_prompt, PromptTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteLabel {
    Boundary,
    General,
    Imported,
    Random,
}

impl fmt::Display for SuiteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteLabel::Boundary => "boundary",
            SuiteLabel::General => "general",
            SuiteLabel::Imported => "imported",
            SuiteLabel::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub program: String,
    pub label: SuiteLabel,
    pub provenance: String,
    pub inputs: Vec<TestInput>,
    /// Indices of inputs outside the domain (imported suites only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub out_of_domain: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestSuite {
    pub fn new(program: &str, label: SuiteLabel, provenance: &str, inputs: Vec<TestInput>) -> Self {
        TestSuite {
            program: program.to_string(),
            label,
            provenance: provenance.to_string(),
            inputs,
            out_of_domain: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suites serialize") + "\n"
    }

    /// Parses a suite file, converting integer numerals for float parameters.
    pub fn from_json(text: &str, kinds: &[ScalarKind]) -> Result<Self, SuiteError> {
        let mut suite: TestSuite = serde_json::from_str(text).map_err(|e| SuiteError::Format(e.to_string()))?;
        suite.inputs = suite.inputs.iter().map(|i| coerce_input(i, kinds)).collect();
        Ok(suite)
    }

    /// The first `k` inputs.
    pub fn prefix(&self, k: usize) -> TestSuite {
        let mut s = self.clone();
        s.inputs.truncate(k);
        s.out_of_domain.retain(|&i| i < k);
        s
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SuiteError {
    #[error("suite size must be positive")]
    EmptyRequest,
    #[error("boundary sampling needs n >= 2 and eps > 0")]
    BadBoundaryRequest,
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid suite file: {0}")]
    Format(String),
    #[error("no test inputs of arity {dim} found ({lines} lines, {numerals} numerals scanned)")]
    NothingExtracted { dim: usize, lines: usize, numerals: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

fn sample_input(spec: &DomainSpec, rng: &mut ChaCha8Rng) -> TestInput {
    TestInput::new(
        spec.params
            .iter()
            .map(|r| match (r.min, r.max) {
                (Value::Int(lo), Value::Int(hi)) => Value::Int(rng.gen_range(lo..=hi)),
                (lo, hi) => {
                    let (lo, hi) = (lo.as_f64(), hi.as_f64());
                    Value::Float(if lo == hi { lo } else { rng.gen_range(lo..=hi) })
                }
            })
            .collect(),
    )
}

/// `n` inputs drawn uniformly and independently per parameter.
pub fn gen_random(spec: &DomainSpec, n: usize, seed: u64) -> Result<TestSuite, SuiteError> {
    if n == 0 {
        return Err(SuiteError::EmptyRequest);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..n).map(|_| sample_input(spec, &mut rng)).collect();
    Ok(TestSuite::new(&spec.program, SuiteLabel::Random, &format!("gen-random seed={seed} n={n}"), inputs))
}
