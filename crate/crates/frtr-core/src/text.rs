//! Shared text tokenization.
//!
//! The lexical index and the reference embedder must agree on tokens, so
//! both call this one function: lowercase, split on non-alphanumeric
//! characters, keep digit runs as tokens.

/// Tokenize text for indexing and hashing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(
            tokenize("ROW_42 [Sales_Q4]: Revenue=12,450"),
            vec!["row", "42", "sales", "q4", "revenue", "12", "450"]
        );
    }

    #[test]
    fn digit_runs_survive() {
        assert_eq!(tokenize("FY2024 q4"), vec!["fy2024", "q4"]);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert!(tokenize("--- !!! ---").is_empty());
    }
}
