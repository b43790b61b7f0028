//! Normalized cell and answer values.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde_json::Value as Json;

/// Absolute tolerance for comparing reals.
pub const REAL_TOLERANCE: f64 = 1e-9;

/// A normalized cell, condition value, or answer element.
///
/// Text is always stored trimmed and lowercased; reals are finite with
/// negative zero folded into zero. Equality, ordering and hashing are
/// structural (bitwise for reals), which is what canonical query ordering
/// needs. Semantic comparison with numeric coercion and tolerance lives in
/// [`Value::matches`].
#[derive(Debug, Clone)]
pub enum Value {
    Text(String),
    Real(f64),
    Null,
}

pub fn normalize_text(s: &str) -> String {
    s.trim().to_lowercase()
}

impl Value {
    /// Normalized text; empty after trimming becomes `Null`.
    pub fn text(s: &str) -> Value {
        let s = normalize_text(s);
        if s.is_empty() {
            Value::Null
        } else {
            Value::Text(s)
        }
    }

    /// Panics on non-finite input.
    pub fn real(x: f64) -> Value {
        assert!(x.is_finite(), "real values must be finite, got {x}");
        Value::Real(if x == 0.0 { 0.0 } else { x })
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// The numeric reading of this value: reals directly, text when it
    /// parses as a finite number.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Text(s) => parse_number(s),
            Value::Null => None,
        }
    }

    /// Text that does not read as a number.
    pub fn is_non_numeric_text(&self) -> bool {
        matches!(self, Value::Text(s) if parse_number(s).is_none())
    }

    /// Semantic equality: numbers (including numeric-looking text) within
    /// [`REAL_TOLERANCE`], other text exactly, `Null` only with `Null`.
    pub fn matches(&self, other: &Value) -> bool {
        match_order(self, other) == Ordering::Equal
    }

    /// Plain-text rendering; integral reals print without a fraction.
    pub fn render(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Real(x) => format!("{x}"),
            Value::Null => String::new(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Text(s) => Json::String(s.clone()),
            Value::Real(x) => {
                if x.fract() == 0.0 && x.abs() < 9.0e15 {
                    Json::from(*x as i64)
                } else {
                    Json::from(*x)
                }
            }
            Value::Null => Json::Null,
        }
    }

    /// Strings become normalized text, numbers become reals, `null` is `Null`.
    pub fn from_json(v: &Json) -> Option<Value> {
        match v {
            Json::String(s) => Some(Value::text(s)),
            Json::Number(n) => n.as_f64().filter(|x| x.is_finite()).map(Value::real),
            Json::Null => Some(Value::Null),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Real(_) => 1,
            Value::Text(_) => 2,
        }
    }
}

pub(crate) fn parse_number(s: &str) -> Option<f64> {
    let x: f64 = s.trim().parse().ok()?;
    x.is_finite().then_some(x)
}

/// Ordering used for semantic matching: `Null` < numbers < text, numbers
/// within tolerance compare equal. Not transitive across the tolerance band,
/// which is fine for the sorted greedy matching done by callers.
pub(crate) fn match_order(a: &Value, b: &Value) -> Ordering {
    match (a.as_number(), b.as_number()) {
        (Some(x), Some(y)) => {
            if (x - y).abs() <= REAL_TOLERANCE {
                Ordering::Equal
            } else {
                x.total_cmp(&y)
            }
        }
        (Some(_), None) => {
            if b.is_null() {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        (None, Some(_)) => {
            if a.is_null() {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        (None, None) => match (a, b) {
            (Value::Text(x), Value::Text(y)) => x.cmp(y),
            _ => a.rank().cmp(&b.rank()),
        },
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Real(x), Value::Real(y)) => x.total_cmp(y),
            (Value::Text(x), Value::Text(y)) => x.cmp(y),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Text(s) => s.hash(state),
            Value::Real(x) => x.to_bits().hash(state),
            Value::Null => {}
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Null => f.write_str("NULL"),
        }
    }
}
