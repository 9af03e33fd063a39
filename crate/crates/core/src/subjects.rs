//! Bundled subject programs.
//!
//! A subject bundle is three files sharing a stem:
//! - `<name>.mc`: MiniC source, entry function last;
//! - `<name>.domain`: JSON [`DomainSpec`];
//! - `<name>.manifest`: JSON [`SubjectManifest`] with the fault counts to sample
//!   and the seed to sample them with.
//!
//! The same layout is accepted from any directory via [`load_subject_from`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::minilang::{parse, ParseError, Program};
use crate::mutator::{sample_manifest, FaultManifest, MutationError, MutationOperator};
use crate::suitegen::{DomainSpec, SuiteError};

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(($name,
            include_str!(concat!("../subjects/", $name, ".mc")),
            include_str!(concat!("../subjects/", $name, ".domain")),
            include_str!(concat!("../subjects/", $name, ".manifest")))),*]
    };
}

const BUNDLE: &[(&str, &str, &str, &str)] =
    bundle!["triType", "nextDate", "findMiddle", "bessj", "expint", "plgndr", "tcas"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectManifest {
    pub description: String,
    pub seed: u64,
    pub counts: BTreeMap<MutationOperator, usize>,
    /// Counts the manifest aims for; may exceed `counts` where the port has
    /// too few applicable nodes.
    #[serde(default)]
    pub reference_counts: BTreeMap<MutationOperator, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SubjectManifest {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectEntry {
    pub name: String,
    pub description: String,
    pub dim: usize,
    pub source: String,
    pub domain: DomainSpec,
    pub manifest: SubjectManifest,
}

#[derive(Debug, thiserror::Error)]
pub enum SubjectError {
    #[error("unknown subject `{0}`")]
    Unknown(String),
    #[error("subject `{name}`: {source}")]
    Parse { name: String, source: ParseError },
    #[error("subject `{name}`: {source}")]
    Domain { name: String, source: SuiteError },
    #[error("subject `{name}`: bad manifest: {message}")]
    Manifest { name: String, message: String },
    #[error("subject `{name}`: {source}")]
    Mutation { name: String, source: MutationError },
    #[error("subject `{name}`: {source}")]
    Io { name: String, source: std::io::Error },
}

fn entry_from_parts(name: &str, source: &str, domain: &str, manifest: &str) -> Result<SubjectEntry, SubjectError> {
    let p = parse(source).map_err(|source| SubjectError::Parse { name: name.into(), source })?;
    let domain = DomainSpec::from_json(domain).map_err(|source| SubjectError::Domain { name: name.into(), source })?;
    domain.check_against(&p).map_err(|source| SubjectError::Domain { name: name.into(), source })?;
    let manifest: SubjectManifest = serde_json::from_str(manifest)
        .map_err(|e| SubjectError::Manifest { name: name.into(), message: e.to_string() })?;
    Ok(SubjectEntry {
        name: name.to_string(),
        description: manifest.description.clone(),
        dim: p.dim(),
        source: source.to_string(),
        domain,
        manifest,
    })
}

/// The bundled subjects in their fixed order.
pub fn list_subjects() -> Vec<SubjectEntry> {
    BUNDLE
        .iter()
        .map(|(n, s, d, m)| entry_from_parts(n, s, d, m).expect("bundled subjects are valid"))
        .collect()
}

pub fn subject_names() -> Vec<&'static str> {
    BUNDLE.iter().map(|b| b.0).collect()
}

pub fn subject_entry(name: &str) -> Result<SubjectEntry, SubjectError> {
    let (n, s, d, m) = BUNDLE.iter().find(|b| b.0 == name).ok_or_else(|| SubjectError::Unknown(name.into()))?;
    entry_from_parts(n, s, d, m)
}

impl SubjectEntry {
    pub fn program(&self) -> Program {
        parse(&self.source).expect("subject entries hold checked sources")
    }

    /// Samples the manifest counts with the bundled seed.
    pub fn fault_manifest(&self, p: &Program) -> Result<FaultManifest, SubjectError> {
        sample_manifest(p, &self.manifest.counts, self.manifest.seed)
            .map_err(|source| SubjectError::Mutation { name: self.name.clone(), source })
    }

    pub fn load(&self) -> Result<(Program, DomainSpec, FaultManifest), SubjectError> {
        let p = self.program();
        let m = self.fault_manifest(&p)?;
        Ok((p, self.domain.clone(), m))
    }
}

pub fn load_subject(name: &str) -> Result<(Program, DomainSpec, FaultManifest), SubjectError> {
    subject_entry(name)?.load()
}

/// Loads `<dir>/<name>.{mc,domain,manifest}`.
pub fn load_subject_from(dir: &Path, name: &str) -> Result<SubjectEntry, SubjectError> {
    let read = |ext: &str| {
        std::fs::read_to_string(dir.join(format!("{name}.{ext}")))
            .map_err(|source| SubjectError::Io { name: name.into(), source })
    };
    entry_from_parts(name, &read("mc")?, &read("domain")?, &read("manifest")?)
}
