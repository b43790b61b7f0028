//! Query execution over a single table and answer comparison.

use std::cmp::Ordering;

use serde_json::Value as Json;
use thiserror::Error;

use crate::sql::{AggOp, CondOp, Condition, SqlQuery};
use crate::table::{ColumnType, Table};
use crate::value::{match_order, Value, REAL_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("column {col} out of range for table with {arity} columns")]
    ColumnOutOfRange { col: usize, arity: usize },
    #[error("{op:?} comparison on text column {col}")]
    OrderingOnText { col: usize, op: CondOp },
    #[error("{agg:?} over non-numeric value {value}")]
    NumericAggOverText { agg: AggOp, value: String },
    #[error("value {value} is not compatible with real column {col}")]
    ValueKind { col: usize, value: String },
}

/// The result of executing a query: a multiset of values.
///
/// `scalar` marks aggregate output; it never takes part in comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub values: Vec<Value>,
    pub scalar: bool,
}

impl Answer {
    pub fn list(values: Vec<Value>) -> Answer {
        Answer {
            values,
            scalar: false,
        }
    }

    pub fn scalar(value: Value) -> Answer {
        Answer {
            values: vec![value],
            scalar: true,
        }
    }

    pub fn empty() -> Answer {
        Answer::list(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The single value, when there is exactly one.
    pub fn single(&self) -> Option<&Value> {
        match self.values.as_slice() {
            [v] => Some(v),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Json {
        Json::Array(self.values.iter().map(Value::to_json).collect())
    }

    pub fn from_json(json: &Json) -> Option<Answer> {
        match json {
            Json::Array(items) => items
                .iter()
                .map(Value::from_json)
                .collect::<Option<Vec<_>>>()
                .map(Answer::list),
            scalar => Value::from_json(scalar).map(|v| Answer::list(vec![v])),
        }
    }

    fn sorted(&self) -> Vec<&Value> {
        let mut v: Vec<&Value> = self.values.iter().collect();
        v.sort_by(|a, b| match_order(a, b));
        v
    }
}

fn check_col(t: &Table, col: usize) -> Result<ColumnType, ExecError> {
    t.column_type(col).ok_or(ExecError::ColumnOutOfRange {
        col,
        arity: t.arity(),
    })
}

fn cond_holds(cell: &Value, cond: &Condition, threshold: Option<f64>) -> bool {
    if cell.is_null() || cond.value.is_null() {
        return false;
    }
    match cond.op {
        CondOp::Equal => cell.matches(&cond.value),
        CondOp::Greater => {
            matches!((cell.as_number(), threshold), (Some(c), Some(v)) if c > v + REAL_TOLERANCE)
        }
        CondOp::Less => {
            matches!((cell.as_number(), threshold), (Some(c), Some(v)) if c < v - REAL_TOLERANCE)
        }
    }
}

/// Indices of the rows satisfying every condition.
pub fn filter_rows(t: &Table, conds: &[Condition]) -> Result<Vec<usize>, ExecError> {
    let mut thresholds = Vec::with_capacity(conds.len());
    for c in conds {
        let kind = check_col(t, c.col)?;
        if c.op == CondOp::Equal {
            thresholds.push(None);
            continue;
        }
        if kind == ColumnType::Text {
            return Err(ExecError::OrderingOnText {
                col: c.col,
                op: c.op,
            });
        }
        match (&c.value, c.value.as_number()) {
            (Value::Null, _) => thresholds.push(None),
            (_, Some(x)) => thresholds.push(Some(x)),
            (v, None) => {
                return Err(ExecError::ValueKind {
                    col: c.col,
                    value: v.to_string(),
                })
            }
        }
    }
    Ok((0..t.num_rows())
        .filter(|&r| {
            conds
                .iter()
                .zip(&thresholds)
                .all(|(c, &th)| cond_holds(t.cell(r, c.col), c, th))
        })
        .collect())
}

/// Applies an aggregate to projected values.
///
/// Numeric aggregates skip `Null` and return an empty answer when nothing
/// is left; `COUNT` counts every row, `Null` included.
pub fn aggregate(vals: &[Value], agg: AggOp) -> Result<Answer, ExecError> {
    match agg {
        AggOp::None => return Ok(Answer::list(vals.to_vec())),
        AggOp::Count => return Ok(Answer::scalar(Value::real(vals.len() as f64))),
        _ => {}
    }
    let mut nums = Vec::with_capacity(vals.len());
    for v in vals {
        match v {
            Value::Real(x) => nums.push(*x),
            Value::Null => {}
            Value::Text(_) => {
                return Err(ExecError::NumericAggOverText {
                    agg,
                    value: v.to_string(),
                })
            }
        }
    }
    if nums.is_empty() {
        return Ok(Answer::empty());
    }
    let x = match agg {
        AggOp::Max => nums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AggOp::Min => nums.iter().copied().fold(f64::INFINITY, f64::min),
        AggOp::Sum => nums.iter().sum(),
        AggOp::Avg => nums.iter().sum::<f64>() / nums.len() as f64,
        AggOp::None | AggOp::Count => unreachable!(),
    };
    Ok(Answer::scalar(Value::real(x)))
}

pub fn execute(q: &SqlQuery, t: &Table) -> Result<Answer, ExecError> {
    let sel_kind = check_col(t, q.sel)?;
    let rows = filter_rows(t, &q.conds)?;
    if q.agg.is_numeric() && sel_kind == ColumnType::Text {
        return Err(ExecError::NumericAggOverText {
            agg: q.agg,
            value: format!("text column {}", q.sel),
        });
    }
    let vals: Vec<Value> = rows.iter().map(|&r| t.cell(r, q.sel).clone()).collect();
    aggregate(&vals, q.agg)
}

/// Types condition values by their column: numeric-looking text becomes a
/// real on real columns, reals become text on text columns.
pub fn bind_query(q: &SqlQuery, t: &Table) -> Result<SqlQuery, ExecError> {
    check_col(t, q.sel)?;
    let conds = q
        .conds
        .iter()
        .map(|c| {
            let value = match (check_col(t, c.col)?, &c.value) {
                (_, Value::Null) => Value::Null,
                (ColumnType::Real, v) => {
                    Value::real(v.as_number().ok_or_else(|| ExecError::ValueKind {
                        col: c.col,
                        value: v.to_string(),
                    })?)
                }
                (ColumnType::Text, Value::Real(_)) => Value::text(&c.value.render()),
                (ColumnType::Text, v) => v.clone(),
            };
            Ok(Condition::new(c.col, c.op, value))
        })
        .collect::<Result<Vec<_>, ExecError>>()?;
    Ok(SqlQuery::new(q.sel, q.agg, conds))
}

/// Multiset equality under value matching; scalar flags are ignored.
pub fn answers_equal(a: &Answer, b: &Answer) -> bool {
    a.len() == b.len()
        && a.sorted()
            .iter()
            .zip(b.sorted())
            .all(|(x, y)| match_order(x, y) == Ordering::Equal)
}

/// Whether `needle` is a sub-multiset of `haystack`.
pub fn answer_contains(haystack: &Answer, needle: &Answer) -> bool {
    if needle.len() > haystack.len() {
        return false;
    }
    let hay = haystack.sorted();
    let mut i = 0;
    for n in needle.sorted() {
        while i < hay.len() && match_order(hay[i], n) == Ordering::Less {
            i += 1;
        }
        if i < hay.len() && match_order(hay[i], n) == Ordering::Equal {
            i += 1;
        } else {
            return false;
        }
    }
    true
}
