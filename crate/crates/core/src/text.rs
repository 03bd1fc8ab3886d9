//! Shared normalization and tokenization.
//!
//! Every component that compares strings (registry dedup, exclusivity checks,
//! Jaccard, BLEU, TF-IDF, coverage judging) goes through these two functions so
//! that "the same word" means the same thing everywhere.

use unicode_normalization::UnicodeNormalization;

/// Canonical token string: NFKC, lower-cased, every non-alphanumeric run
/// replaced by a single space, trimmed.
///
/// ```
/// use llull_core::text::normalize;
/// assert_eq!(normalize("Mixture-of-Experts"), "mixture of experts");
/// ```
pub fn normalize(surface: &str) -> String {
    let mut out = String::with_capacity(surface.len());
    let mut pending_space = false;
    for ch in surface.nfkc().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Ordered list of normalized tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl AsRef<[String]> for TokenList {
    fn as_ref(&self) -> &[String] {
        &self.0
    }
}

/// Split text into normalized tokens; empty input yields an empty list.
pub fn tokenize(text: &str) -> TokenList {
    TokenList(normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect())
}

/// Collapse internal whitespace runs to one space and trim.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
