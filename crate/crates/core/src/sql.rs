//! WikiSQL-shaped queries: one selected column, one aggregate, and a
//! conjunction of at most four conditions.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::value::Value;

/// Maximum number of WHERE conditions in a query.
pub const MAX_CONDS: usize = 4;

/// Aggregates, numbered as in the public WikiSQL encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggOp {
    None = 0,
    Max = 1,
    Min = 2,
    Count = 3,
    Sum = 4,
    Avg = 5,
}

impl AggOp {
    pub const ALL: [AggOp; 6] = [
        AggOp::None,
        AggOp::Max,
        AggOp::Min,
        AggOp::Count,
        AggOp::Sum,
        AggOp::Avg,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<AggOp, SqlError> {
        usize::try_from(code)
            .ok()
            .and_then(|i| AggOp::ALL.get(i).copied())
            .ok_or(SqlError::AggCode(code))
    }

    /// Aggregates that only apply to real columns.
    pub fn is_numeric(self) -> bool {
        matches!(self, AggOp::Max | AggOp::Min | AggOp::Sum | AggOp::Avg)
    }

    pub fn name(self) -> &'static str {
        match self {
            AggOp::None => "",
            AggOp::Max => "MAX",
            AggOp::Min => "MIN",
            AggOp::Count => "COUNT",
            AggOp::Sum => "SUM",
            AggOp::Avg => "AVG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CondOp {
    Equal = 0,
    Greater = 1,
    Less = 2,
}

impl CondOp {
    pub const ALL: [CondOp; 3] = [CondOp::Equal, CondOp::Greater, CondOp::Less];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<CondOp, SqlError> {
        usize::try_from(code)
            .ok()
            .and_then(|i| CondOp::ALL.get(i).copied())
            .ok_or(SqlError::OpCode(code))
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CondOp::Equal => "=",
            CondOp::Greater => ">",
            CondOp::Less => "<",
        }
    }
}

/// Field order gives the canonical sort key `(col, op, value)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub col: usize,
    pub op: CondOp,
    pub value: Value,
}

impl Condition {
    pub fn new(col: usize, op: CondOp, value: Value) -> Self {
        Condition { col, op, value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SqlQuery {
    pub sel: usize,
    pub agg: AggOp,
    pub conds: Vec<Condition>,
}

impl SqlQuery {
    pub fn new(sel: usize, agg: AggOp, conds: Vec<Condition>) -> Self {
        SqlQuery { sel, agg, conds }
    }

    /// Conditions sorted by `(col, op, value)` with duplicates removed.
    pub fn canonicalize(&self) -> SqlQuery {
        let mut conds = self.conds.clone();
        conds.sort();
        conds.dedup();
        SqlQuery {
            sel: self.sel,
            agg: self.agg,
            conds,
        }
    }

    pub fn to_wire(&self) -> WireSql {
        WireSql {
            sel: self.sel as i64,
            agg: i64::from(self.agg.code()),
            conds: self
                .conds
                .iter()
                .map(|c| (c.col as i64, i64::from(c.op.code()), c.value.to_json()))
                .collect(),
        }
    }

    pub fn from_wire(wire: &WireSql) -> Result<SqlQuery, SqlError> {
        let sel = column_index(wire.sel)?;
        let agg = AggOp::from_code(wire.agg)?;
        if wire.conds.len() > MAX_CONDS {
            return Err(SqlError::TooManyConds(wire.conds.len()));
        }
        let mut conds: Vec<Condition> = Vec::with_capacity(wire.conds.len());
        for (col, op, value) in &wire.conds {
            let cond = Condition {
                col: column_index(*col)?,
                op: CondOp::from_code(*op)?,
                value: Value::from_json(value).ok_or_else(|| SqlError::Value(value.to_string()))?,
            };
            if conds.contains(&cond) {
                return Err(SqlError::DuplicateCondition(cond.to_string()));
            }
            conds.push(cond);
        }
        Ok(SqlQuery { sel, agg, conds })
    }

    pub fn from_json(json: &Json) -> Result<SqlQuery, SqlError> {
        let wire: WireSql =
            serde_json::from_value(json.clone()).map_err(|e| SqlError::Malformed(e.to_string()))?;
        SqlQuery::from_wire(&wire)
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self.to_wire()).expect("wire sql serializes")
    }

    /// Human-readable SQL using the given header names.
    pub fn display_with<'a>(&'a self, header: &'a [String]) -> impl fmt::Display + 'a {
        DisplayWith { q: self, header }
    }
}

/// Condition-order-insensitive structural equality.
pub fn logic_form_equal(a: &SqlQuery, b: &SqlQuery) -> bool {
    a.canonicalize() == b.canonicalize()
}

fn column_index(raw: i64) -> Result<usize, SqlError> {
    usize::try_from(raw).map_err(|_| SqlError::ColumnIndex(raw))
}

/// The WikiSQL `"sql"` object: `{"sel": int, "agg": int, "conds": [[col, op, value]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSql {
    pub sel: i64,
    pub agg: i64,
    #[serde(default)]
    pub conds: Vec<(i64, i64, Json)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqlError {
    #[error("aggregate code {0} out of range 0..=5")]
    AggCode(i64),
    #[error("condition operator code {0} out of range 0..=2")]
    OpCode(i64),
    #[error("invalid column index {0}")]
    ColumnIndex(i64),
    #[error("{0} conditions exceeds the maximum of 4")]
    TooManyConds(usize),
    #[error("unsupported condition value {0}")]
    Value(String),
    #[error("duplicate condition {0}")]
    DuplicateCondition(String),
    #[error("malformed sql record: {0}")]
    Malformed(String),
}

impl Serialize for SqlQuery {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SqlQuery {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireSql::deserialize(d)?;
        SqlQuery::from_wire(&wire).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "col{} {} {}", self.col, self.op.symbol(), self.value)
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..=self.max_col()).map(|i| format!("col{i}")).collect();
        let shown = self.display_with(&names).to_string();
        f.write_str(&shown)
    }
}

impl SqlQuery {
    fn max_col(&self) -> usize {
        self.conds
            .iter()
            .map(|c| c.col)
            .chain([self.sel])
            .max()
            .unwrap_or(0)
    }
}

struct DisplayWith<'a> {
    q: &'a SqlQuery,
    header: &'a [String],
}

impl fmt::Display for DisplayWith<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |i: usize| -> String {
            self.header
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("col{i}"))
        };
        let sel = name(self.q.sel);
        match self.q.agg {
            AggOp::None => write!(f, "SELECT {sel}")?,
            agg => write!(f, "SELECT {}({sel})", agg.name())?,
        }
        for (i, c) in self.q.conds.iter().enumerate() {
            let kw = if i == 0 { "WHERE" } else { "AND" };
            write!(f, " {kw} {} {} {}", name(c.col), c.op.symbol(), c.value)?;
        }
        Ok(())
    }
}
