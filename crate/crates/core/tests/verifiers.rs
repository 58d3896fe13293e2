use std::collections::BTreeMap;

use proptest::prelude::*;
use satprobe_core::datasets::{first_word, verify_char, verify_exact_match, verify_kb, CharCheck, KnowledgeBase};

fn kb() -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let fields = BTreeMap::from([("director".to_string(), vec!["Jane Campion".to_string(), "Ang Lee".to_string()])]);
    kb.insert("The Piano", fields, Some(10)).unwrap();
    kb
}

fn recase(s: &str, mask: &[bool]) -> String {
    s.chars()
        .zip(mask.iter().cycle())
        .map(|(c, &up)| if up { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
        .collect()
}

proptest! {
    #[test]
    fn kb_match_ignores_case_and_outer_whitespace(
        mask in proptest::collection::vec(any::<bool>(), 1..8),
        left in "[ \t]{0,3}",
        right in "[ \t\n]{0,3}",
        pick in 0usize..2,
    ) {
        let value = ["Jane Campion", "Ang Lee"][pick];
        let probe = format!("{left}{}{right}", recase(value, &mask));
        prop_assert!(verify_kb(&kb(), "The Piano", "director", &probe));
    }

    #[test]
    fn kb_rejects_other_values(s in "[a-z]{1,10}") {
        prop_assert!(!verify_kb(&kb(), "The Piano", "director", &s));
    }

    #[test]
    fn char_checks_use_the_first_word(
        word in "[a-z]{1,8}",
        tail in "[ .,][a-z ]{0,8}",
        pad in "[ \"']{0,2}",
    ) {
        let text = format!("{pad}{}{tail}", word.to_uppercase());
        prop_assert_eq!(first_word(&text), Some(word.clone()));
        let first = word.chars().next().unwrap();
        let last = word.chars().last().unwrap();
        prop_assert!(verify_char(CharCheck::StartsWith, first, &text));
        prop_assert!(verify_char(CharCheck::EndsWith, last.to_ascii_uppercase(), &text));
    }

    #[test]
    fn exact_match_is_prefix_equality(
        truth in proptest::collection::vec("[a-c]", 1..4),
        extra in proptest::collection::vec("[a-c]", 0..3),
    ) {
        let mut completion = truth.clone();
        completion.extend(extra);
        prop_assert!(verify_exact_match(&truth, &completion));
        prop_assert!(!verify_exact_match(&truth, &completion[..truth.len() - 1]));
    }
}

#[test]
fn unknown_entity_or_field_fails() {
    assert!(!verify_kb(&kb(), "Heat", "director", "Michael Mann"));
    assert!(!verify_kb(&kb(), "The Piano", "year", "1993"));
    assert!(!verify_char(CharCheck::StartsWith, 'a', "123 ..."));
}
