//! Completion verifiers: exact token match, first-word character match and
//! knowledge-base list membership.

use super::kb::normalize;
use super::{detokenize, tokenize, DatasetError, KnowledgeBase};
use crate::trace::{ConstraintSpec, VerifierKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharCheck {
    StartsWith,
    EndsWith,
}

/// True iff the first `truth.len()` completion tokens equal `truth`.
pub fn verify_exact_match<T: AsRef<str>, U: AsRef<str>>(truth: &[T], completion: &[U]) -> bool {
    !truth.is_empty()
        && completion.len() >= truth.len()
        && truth.iter().zip(completion).all(|(a, b)| a.as_ref() == b.as_ref())
}

/// The first maximal run of alphabetic characters, lowercased.
pub fn first_word(text: &str) -> Option<String> {
    let start = text.find(char::is_alphabetic)?;
    let rest = &text[start..];
    let end = rest.find(|c: char| !c.is_alphabetic()).unwrap_or(rest.len());
    Some(rest[..end].to_lowercase())
}

pub fn verify_char(check: CharCheck, letter: char, completion_text: &str) -> bool {
    let Some(word) = first_word(completion_text) else { return false };
    let letter = letter.to_lowercase().next().unwrap_or(letter);
    match check {
        CharCheck::StartsWith => word.starts_with(letter),
        CharCheck::EndsWith => word.ends_with(letter),
    }
}

pub fn truncate_at_newline(text: &str) -> &str {
    text.split('\n').next().unwrap_or("")
}

/// True iff `entity` exists, carries `field`, and `value` matches one of the
/// accepted values after trimming and lowercasing.
pub fn verify_kb(kb: &KnowledgeBase, entity: &str, field: &str, value: &str) -> bool {
    let wanted = normalize(value);
    kb.values(entity, field).is_some_and(|vals| vals.iter().any(|v| normalize(v) == wanted))
}

/// Labels one constraint against a completion.
///
/// Exact-match targets and the completion are both run through [`tokenize`]
/// so that word-level and subword completions compare on the same footing.
pub fn verify_constraint<T: AsRef<str>>(
    spec: &ConstraintSpec,
    completion_tokens: &[T],
    kb: Option<&KnowledgeBase>,
) -> Result<bool, DatasetError> {
    let text = detokenize(completion_tokens);
    let letter = || {
        let mut chars = spec.target.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(DatasetError::Invalid(format!("constraint {}: target must be a single letter", spec.name))),
        }
    };
    match spec.verifier {
        VerifierKind::ExactMatch => {
            let completion: Vec<String> = tokenize(&text).into_iter().map(|t| t.text).collect();
            Ok(spec.targets().any(|target| {
                let truth: Vec<String> = tokenize(target).into_iter().map(|t| t.text).collect();
                verify_exact_match(&truth, &completion)
            }))
        }
        VerifierKind::CharStartsWith => Ok(verify_char(CharCheck::StartsWith, letter()?, &text)),
        VerifierKind::CharEndsWith => Ok(verify_char(CharCheck::EndsWith, letter()?, &text)),
        VerifierKind::KbLookup => {
            let kb = kb.ok_or_else(|| DatasetError::Invalid("knowledge-base constraint without a knowledge base".into()))?;
            let (field, value) = spec.target.split_once('=').ok_or_else(|| {
                DatasetError::Invalid(format!("constraint {}: KbLookup target must be field=value", spec.name))
            })?;
            let entity = truncate_at_newline(&text).trim();
            Ok(verify_kb(kb, entity, field, value))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    #[test]
    fn exact_match_prefix_semantics() {
        assert!(verify_exact_match(&["19", "63"], &["19", "63", ".", "He"]));
        assert!(!verify_exact_match(&["19", "63"], &["19", "64"]));
        assert!(!verify_exact_match(&["19", "63"], &["19"]));
        assert!(verify_exact_match(&["1963"], &["1963"]));
        assert!(!verify_exact_match::<&str, &str>(&[], &["x"]));
    }

    #[test]
    fn char_match_uses_first_word() {
        assert!(verify_char(CharCheck::StartsWith, 'u', "unbound is one"));
        assert!(verify_char(CharCheck::EndsWith, 'd', "unbound is one"));
        assert!(!verify_char(CharCheck::EndsWith, 'x', "unbound"));
        assert!(verify_char(CharCheck::StartsWith, 'u', "  \"Unbound\", a word"));
        assert!(!verify_char(CharCheck::StartsWith, 'a', "123 ..."));
        assert_eq!(first_word("  --hello-world"), Some("hello".into()));
    }

    fn books() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        let mut fields = BTreeMap::new();
        fields.insert("author".to_string(), vec!["ernest hemingway".to_string()]);
        fields.insert("year".to_string(), vec!["1952".to_string()]);
        kb.insert("The Old Man and the Sea", fields, None).unwrap();
        kb
    }

    #[test]
    fn kb_membership() {
        let kb = books();
        assert!(!verify_kb(&kb, "Moby Dick", "author", "Herman Melville"));
        assert!(verify_kb(&kb, "The Old Man and the Sea", "author", " Ernest Hemingway "));
        assert!(!verify_kb(&kb, "The Old Man and the Sea", "genre", "novel"));
        assert!(!verify_kb(&kb, "The Old Man and the Sea", "year", "1953"));
    }

    fn spec(verifier: VerifierKind, target: &str) -> ConstraintSpec {
        ConstraintSpec {
            name: "c".into(),
            token_start: 0,
            token_end: 1,
            verifier,
            target: target.into(),
            satisfied: None,
        }
    }

    #[test]
    fn constraint_dispatch() {
        let kb = books();
        assert!(verify_constraint(&spec(VerifierKind::ExactMatch, "1963|1964"), &["1964", "."], None).unwrap());
        assert!(verify_constraint(&spec(VerifierKind::ExactMatch, "1963"), &["Ġ19", "63"], None).unwrap());
        assert!(!verify_constraint(&spec(VerifierKind::ExactMatch, "1963"), &["in", "1963"], None).unwrap());
        assert!(verify_constraint(&spec(VerifierKind::CharStartsWith, "u"), &["unbound"], None).unwrap());
        assert!(verify_constraint(&spec(VerifierKind::CharEndsWith, "d"), &["unbound"], None).unwrap());
        assert!(verify_constraint(&spec(VerifierKind::CharEndsWith, "dd"), &["unbound"], None).is_err());
        let toks = ["The", "Old", "Man", "and", "the", "Sea", "\n", "It"];
        assert!(verify_constraint(&spec(VerifierKind::KbLookup, "author=Ernest Hemingway"), &toks, Some(&kb)).unwrap());
        assert!(!verify_constraint(&spec(VerifierKind::KbLookup, "year=1999"), &toks, Some(&kb)).unwrap());
        assert!(verify_constraint(&spec(VerifierKind::KbLookup, "year=1952"), &toks, None).is_err());
    }
}
