use serde::{Deserialize, Serialize};

/// The four instruction variants: boundary or general, with or without a
/// requested count of 50.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptTemplate {
    Boundary,
    General,
    Boundary50,
    General50,
}

impl PromptTemplate {
    pub const ALL: [PromptTemplate; 4] =
        [PromptTemplate::Boundary, PromptTemplate::General, PromptTemplate::Boundary50, PromptTemplate::General50];

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&t| t == self).unwrap() as u8 + 1
    }

    pub fn instruction(self) -> &'static str {
        match self {
            PromptTemplate::Boundary => "Generate boundary value test inputs for c code delimited by triple backticks.",
            PromptTemplate::General => "Generate test inputs for c code delimited by triple backticks.",
            PromptTemplate::Boundary50 => "Generate 50 boundary value test inputs for c code delimited by triple backticks.",
            PromptTemplate::General50 => "Generate 50 test inputs for c code delimited by triple backticks.",
        }
    }

    /// Whether suites answering this prompt are labelled boundary.
    pub fn is_boundary(self) -> bool {
        matches!(self, PromptTemplate::Boundary | PromptTemplate::Boundary50)
    }

    pub fn render(self, source: &str) -> String {
        format!("{}\n```\n{}\n```\n", self.instruction(), source.trim_end_matches(['\n', '\r']))
    }
}

/// Prompt text for template 1 to 4; `None` for any other id.
pub fn emit_prompt(template_id: u8, source: &str) -> Option<String> {
    PromptTemplate::from_id(template_id).map(|t| t.render(source))
}
