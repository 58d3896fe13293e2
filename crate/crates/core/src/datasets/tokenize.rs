//! Word-level tokenizer used to feed prompts into the tiny model.
//!
//! Runs of alphanumeric characters form one token, every other
//! non-whitespace character is its own token, and `\n` is kept as a token.

use std::collections::HashMap;
use std::ops::Range;

pub const UNK: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Byte range in the source text.
    pub range: Range<usize>,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = word_start.take() {
            out.push(Token { text: text[s..i].to_string(), range: s..i });
        }
        if ch == '\n' || !ch.is_whitespace() {
            out.push(Token { text: ch.to_string(), range: i..i + ch.len_utf8() });
        }
    }
    if let Some(s) = word_start {
        out.push(Token { text: text[s..].to_string(), range: s..text.len() });
    }
    out
}

/// Indices of the tokens overlapping `chars`, or `None` if there are none.
pub fn resolve_span(tokens: &[Token], chars: &Range<usize>) -> Option<Range<usize>> {
    let first = tokens.iter().position(|t| t.range.start < chars.end && chars.start < t.range.end)?;
    let last = tokens.iter().rposition(|t| t.range.start < chars.end && chars.start < t.range.end)?;
    Some(first..last + 1)
}

/// Rebuilds text from completion pieces.
///
/// Pieces carrying sentencepiece (`▁`) or byte-BPE (`Ġ`) space markers are
/// concatenated with the markers turned into spaces; plain word pieces are
/// joined with single spaces.
pub fn detokenize<T: AsRef<str>>(pieces: &[T]) -> String {
    let marked = pieces.iter().any(|p| p.as_ref().contains(['▁', 'Ġ']));
    if marked {
        pieces.iter().map(|p| p.as_ref().replace(['▁', 'Ġ'], " ")).collect::<String>().trim().to_string()
    } else {
        pieces.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
    }
}

/// Token-string vocabulary. Id 0 is always [`UNK`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from token strings; order of first appearance fixes ids.
    pub fn new<I, T>(tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut v = Vocab { tokens: vec![UNK.to_string()], index: HashMap::from([(UNK.to_string(), 0)]) };
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK, String::as_str)
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(&t.text)).collect()
    }
}
