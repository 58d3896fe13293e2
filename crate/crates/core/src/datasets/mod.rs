//! Constraint-satisfaction query datasets and completion verifiers.

mod kb;
mod prompts;
mod template;
mod tokenize;
mod verify;
mod words;

use std::ops::Range;
use std::path::PathBuf;

pub use kb::{build_single_constraint_dataset, KnowledgeBase, SingleConstraintOptions};
pub use prompts::{load_prompts, parse_prompt_lines};
pub use template::PromptTemplate;
pub use tokenize::{detokenize, resolve_span, tokenize, Token, Vocab, UNK};
pub use verify::{
    first_word, truncate_at_newline, verify_char, verify_constraint, verify_exact_match, verify_kb, CharCheck,
};
pub use words::{build_words_dataset, constrainedness, WordCorpus, ENGLISH_ALPHABET};

use crate::trace::VerifierKind;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dataset is empty: {0}")]
    Empty(String),
}

/// A constraint located by character range inside a prompt's text.
///
/// Token spans are resolved later, once the prompt has been tokenized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintDraft {
    pub name: String,
    pub verifier: VerifierKind,
    pub target: String,
    pub char_range: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryPrompt {
    pub id: String,
    pub text: String,
    pub constraints: Vec<ConstraintDraft>,
    pub popularity: Option<u64>,
    pub constrainedness: Option<u64>,
}

impl QueryPrompt {
    pub fn constraint_text(&self, k: usize) -> &str {
        &self.text[self.constraints[k].char_range.clone()]
    }
}
