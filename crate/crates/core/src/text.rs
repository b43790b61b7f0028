//! Question and cell tokenization used for value grounding.
//!
//! Tokens are maximal runs of alphanumeric characters after lowercasing. A
//! `.` or `,` sitting between two ASCII digits stays inside the token, so
//! `"3.5"` and `"1,000"` survive as single numeric tokens while `"bob's"`
//! splits into `["bob", "s"]`.

/// Lowercased alphanumeric tokens of `s`.
pub fn tokenize(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.to_lowercase().chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        let joins_digits = (c == '.' || c == ',')
            && current.chars().last().is_some_and(|p| p.is_ascii_digit())
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if joins_digits {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// True iff `needle` is non-empty and occurs contiguously in `haystack`.
pub fn contains_tokens(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Parses a token made only of digits and separators as a number.
pub fn token_number(token: &str) -> Option<f64> {
    if !token.starts_with(|c: char| c.is_ascii_digit())
        || !token
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
    {
        return None;
    }
    let x: f64 = token.replace(',', "").parse().ok()?;
    x.is_finite().then_some(x)
}

/// A question tokenized once for repeated grounding checks.
#[derive(Debug, Clone)]
pub struct Question {
    tokens: Vec<String>,
    numbers: Vec<f64>,
}

impl Question {
    pub fn new(question: &str) -> Self {
        let tokens = tokenize(question);
        let mut numbers: Vec<f64> = tokens.iter().filter_map(|t| token_number(t)).collect();
        numbers.sort_by(f64::total_cmp);
        numbers.dedup();
        Question { tokens, numbers }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Distinct numbers mentioned in the question, ascending.
    pub fn numbers(&self) -> &[f64] {
        &self.numbers
    }

    pub fn mentions_text(&self, text: &str) -> bool {
        contains_tokens(&self.tokens, &tokenize(text))
    }

    pub fn mentions_number(&self, x: f64) -> bool {
        self.numbers
            .iter()
            .any(|&n| (n - x).abs() <= crate::value::REAL_TOLERANCE)
    }
}
