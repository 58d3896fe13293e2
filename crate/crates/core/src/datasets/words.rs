use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::{ConstraintDraft, DatasetError, PromptTemplate, QueryPrompt};
use crate::trace::VerifierKind;

pub const ENGLISH_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";

const STARTS_FIRST: &str =
    "User: Is there a word that starts with the letter {starts_with} and ends with the letter {ends_with}\nAssistant: Yes, one such word is";
const ENDS_FIRST: &str =
    "User: Is there a word that ends with the letter {ends_with} and starts with the letter {starts_with}\nAssistant: Yes, one such word is";

/// Starts-with / ends-with prompts for every ordered letter pair, each pair
/// phrased in both constraint orders: `2·|alphabet|²` prompts in total.
pub fn build_words_dataset(alphabet: &str) -> Result<Vec<QueryPrompt>, DatasetError> {
    let letters: Vec<char> = alphabet.chars().collect();
    if letters.is_empty() {
        return Err(DatasetError::Invalid("alphabet is empty".into()));
    }
    if letters.iter().collect::<BTreeSet<_>>().len() != letters.len() {
        return Err(DatasetError::Invalid("alphabet has repeated characters".into()));
    }
    let constraints = [("starts_with", VerifierKind::CharStartsWith), ("ends_with", VerifierKind::CharEndsWith)];
    let templates = [
        ("se", PromptTemplate::new(STARTS_FIRST, &constraints)?),
        ("es", PromptTemplate::new(ENDS_FIRST, &constraints)?),
    ];
    let mut out = Vec::with_capacity(2 * letters.len() * letters.len());
    for &s in &letters {
        for &e in &letters {
            let (s_str, e_str) = (s.to_string(), e.to_string());
            for (order, template) in &templates {
                let (text, ranges) = template.render(&[&s_str, &e_str])?;
                let constraints = template
                    .names()
                    .iter()
                    .zip(template.verifiers())
                    .zip(ranges)
                    .zip([&s_str, &e_str])
                    .map(|(((name, &verifier), char_range), target)| ConstraintDraft {
                        name: name.clone(),
                        verifier,
                        target: target.clone(),
                        char_range,
                    })
                    .collect();
                out.push(QueryPrompt {
                    id: format!("words-{s}{e}-{order}"),
                    text,
                    constraints,
                    popularity: None,
                    constrainedness: None,
                });
            }
        }
    }
    Ok(out)
}

/// Lowercase, deduplicated word list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordCorpus {
    words: Vec<String>,
}

impl WordCorpus {
    pub fn new<I, T>(words: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let set: BTreeSet<String> =
            words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
        if set.is_empty() {
            return Err(DatasetError::Invalid("word corpus is empty".into()));
        }
        Ok(Self { words: set.into_iter().collect() })
    }

    /// Plain text, one word per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
        Self::new(text.lines())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Number of corpus words starting with `starts` and ending with `ends`.
pub fn constrainedness(corpus: &WordCorpus, starts: char, ends: char) -> u64 {
    corpus.words.iter().filter(|w| w.starts_with(starts) && w.ends_with(ends)).count() as u64
}
