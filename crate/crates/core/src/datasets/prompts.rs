//! JSONL prompt files shared with the trace exporter:
//! `{id, prompt, constraints: [{name, substring, verifier, target}]}`.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{ConstraintDraft, DatasetError, QueryPrompt};
use crate::trace::VerifierKind;

#[derive(Deserialize)]
struct PromptLine {
    id: String,
    prompt: String,
    constraints: Vec<ConstraintLine>,
    #[serde(default)]
    popularity: Option<u64>,
    #[serde(default)]
    constrainedness: Option<u64>,
}

#[derive(Deserialize)]
struct ConstraintLine {
    name: String,
    substring: String,
    verifier: VerifierKind,
    target: String,
}

/// Parses prompt lines. A constraint substring that does not occur in its
/// prompt drops the prompt with a warning naming its id.
pub fn parse_prompt_lines(text: &str, path: &Path) -> Result<Vec<QueryPrompt>, DatasetError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PromptLine = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        let mut constraints = Vec::with_capacity(parsed.constraints.len());
        for c in parsed.constraints {
            let Some(start) = parsed.prompt.find(&c.substring).filter(|_| !c.substring.is_empty()) else {
                log::warn!("prompt {}: constraint substring {:?} not found; skipping", parsed.id, c.substring);
                constraints.clear();
                break;
            };
            constraints.push(ConstraintDraft {
                name: c.name,
                verifier: c.verifier,
                target: c.target,
                char_range: start..start + c.substring.len(),
            });
        }
        if constraints.is_empty() {
            continue;
        }
        out.push(QueryPrompt {
            id: parsed.id,
            text: parsed.prompt,
            constraints,
            popularity: parsed.popularity,
            constrainedness: parsed.constrainedness,
        });
    }
    Ok(out)
}

pub fn load_prompts(path: impl AsRef<Path>) -> Result<Vec<QueryPrompt>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    parse_prompt_lines(&text, path)
}
