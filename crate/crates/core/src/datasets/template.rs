use std::ops::Range;

use super::DatasetError;
use crate::trace::VerifierKind;

/// Prompt text with one `{name}` placeholder per constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    names: Vec<String>,
    verifiers: Vec<VerifierKind>,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>, constraints: &[(&str, VerifierKind)]) -> Result<Self, DatasetError> {
        let text = text.into();
        let placeholders = placeholders(&text)?;
        if placeholders.len() != constraints.len() {
            return Err(DatasetError::Invalid(format!(
                "template has {} placeholders for {} constraints",
                placeholders.len(),
                constraints.len()
            )));
        }
        for (name, _) in constraints {
            if placeholders.iter().filter(|p| p == name).count() != 1 {
                return Err(DatasetError::Invalid(format!("placeholder {{{name}}} must appear exactly once")));
            }
        }
        Ok(Self {
            text,
            names: constraints.iter().map(|(n, _)| n.to_string()).collect(),
            verifiers: constraints.iter().map(|(_, v)| *v).collect(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn verifiers(&self) -> &[VerifierKind] {
        &self.verifiers
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    /// Substitutes `values` (in constraint order) and returns the text plus
    /// the byte range each value occupies in it.
    pub fn render(&self, values: &[&str]) -> Result<(String, Vec<Range<usize>>), DatasetError> {
        if values.len() != self.names.len() {
            return Err(DatasetError::Invalid(format!("expected {} values, got {}", self.names.len(), values.len())));
        }
        let mut out = String::with_capacity(self.text.len() + values.iter().map(|v| v.len()).sum::<usize>());
        let mut ranges = vec![0..0; values.len()];
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("validated at construction");
            let name = &rest[open + 1..close];
            let k = self.names.iter().position(|n| n == name).expect("validated at construction");
            let start = out.len();
            out.push_str(values[k]);
            ranges[k] = start..out.len();
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        Ok((out, ranges))
    }
}

fn placeholders(text: &str) -> Result<Vec<String>, DatasetError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| DatasetError::Invalid("unterminated placeholder".into()))?;
        out.push(rest[open + 1..open + close].to_string());
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return Err(DatasetError::Invalid("unmatched '}' in template".into()));
    }
    Ok(out)
}
