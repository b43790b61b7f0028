//! The seven disambiguation rules applied to answer-matching candidates.
//!
//! | id | check |
//! |----|-------|
//! | 1 | no aggregate: every gold value occurs in the selected column |
//! | 2 | no aggregate: every gold value occurs in some row surviving the WHERE clause |
//! | 3 | every condition value is mentioned in the question |
//! | 4 | no aggregate: each EQUAL condition value shares a row with a gold value in the selected column |
//! | 5 | text-valued conditions use EQUAL |
//! | 6 | a non-numeric text gold answer forbids aggregates |
//! | 7 | a single numeric gold answer found nowhere in the table requires COUNT, SUM or AVG |
//!
//! A rule whose guard does not hold reports [`Verdict::NotApplicable`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{filter_rows, Answer};
use crate::sql::{AggOp, CondOp, SqlQuery};
use crate::table::Table;
use crate::text::Question;
use crate::value::Value;

pub const NUM_RULES: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    fn check(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// A set of enabled rule ids in `1..=7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleSet(u8);

#[derive(Debug, Error, PartialEq)]
pub enum RuleSetError {
    #[error("rule id {0:?} is not one of 1..7")]
    BadId(String),
}

impl RuleSet {
    pub fn all() -> RuleSet {
        RuleSet(0b111_1111)
    }

    pub fn none() -> RuleSet {
        RuleSet(0)
    }

    pub fn contains(self, id: u8) -> bool {
        (1..=NUM_RULES).contains(&id) && self.0 & (1 << (id - 1)) != 0
    }

    pub fn with(self, id: u8) -> RuleSet {
        assert!((1..=NUM_RULES).contains(&id));
        RuleSet(self.0 | (1 << (id - 1)))
    }

    pub fn without(self, id: u8) -> RuleSet {
        assert!((1..=NUM_RULES).contains(&id));
        RuleSet(self.0 & !(1 << (id - 1)))
    }

    pub fn ids(self) -> impl Iterator<Item = u8> {
        (1..=NUM_RULES).filter(move |&id| self.contains(id))
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::all()
    }
}

impl FromStr for RuleSet {
    type Err = RuleSetError;

    /// `"all"`, `"none"`, or a comma-separated list such as `"1,2,6,7"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => return Ok(RuleSet::all()),
            "none" | "" => return Ok(RuleSet::none()),
            _ => {}
        }
        s.split(',').try_fold(RuleSet::none(), |set, part| {
            match part.trim().parse::<u8>() {
                Ok(id) if (1..=NUM_RULES).contains(&id) => Ok(set.with(id)),
                _ => Err(RuleSetError::BadId(part.trim().to_string())),
            }
        })
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.ids().map(|i| i.to_string()).collect();
        f.write_str(&ids.join(","))
    }
}

impl Serialize for RuleSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.ids())
    }
}

/// Per-rule verdicts plus their conjunction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    verdicts: [Verdict; NUM_RULES as usize],
    overall: bool,
}

impl RuleReport {
    fn new(verdicts: [Verdict; NUM_RULES as usize]) -> RuleReport {
        let overall = !verdicts.contains(&Verdict::Fail);
        RuleReport { verdicts, overall }
    }

    /// Verdict for rule `id` in `1..=7`.
    pub fn verdict(&self, id: u8) -> Verdict {
        self.verdicts[usize::from(id - 1)]
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn overall(&self) -> bool {
        self.overall
    }

    pub fn failed(&self) -> Vec<u8> {
        (1..=NUM_RULES)
            .filter(|&id| self.verdict(id) == Verdict::Fail)
            .collect()
    }
}

fn row_has(row: &[Value], v: &Value) -> bool {
    row.iter().any(|cell| cell.matches(v))
}

/// Rules 1 and 2.
pub fn rule_column_consistency(q: &SqlQuery, t: &Table, gold: &Answer) -> (Verdict, Verdict) {
    if q.agg != AggOp::None {
        return (Verdict::NotApplicable, Verdict::NotApplicable);
    }
    let rule1 = match t.column_values(q.sel) {
        Ok(col) => Verdict::check(gold.values.iter().all(|g| row_has(&col, g))),
        Err(_) => Verdict::Fail,
    };
    let rule2 = match filter_rows(t, &q.conds) {
        Ok(rows) => Verdict::check(
            gold.values
                .iter()
                .all(|g| rows.iter().any(|&r| row_has(&t.rows()[r], g))),
        ),
        Err(_) => Verdict::Fail,
    };
    (rule1, rule2)
}

/// Rule 3.
pub fn rule_question_grounding(q: &SqlQuery, question: &str) -> Verdict {
    grounding(q, &Question::new(question))
}

pub(crate) fn grounding(q: &SqlQuery, question: &Question) -> Verdict {
    if q.conds.is_empty() {
        return Verdict::NotApplicable;
    }
    Verdict::check(q.conds.iter().all(|c| value_grounded(&c.value, question)))
}

/// Whether a condition value is mentioned in the question: reals as a
/// numeric token, text as a contiguous token run.
pub fn value_grounded(v: &Value, question: &Question) -> bool {
    match v {
        Value::Real(x) => question.mentions_number(*x),
        Value::Text(s) => question.mentions_text(s),
        Value::Null => false,
    }
}

/// Rules 4 and 5.
pub fn rule_row_alignment(q: &SqlQuery, t: &Table, gold: &Answer) -> (Verdict, Verdict) {
    let equal_conds: Vec<_> = q.conds.iter().filter(|c| c.op == CondOp::Equal).collect();
    let rule4 = if q.agg != AggOp::None || equal_conds.is_empty() {
        Verdict::NotApplicable
    } else if q.sel >= t.arity() || equal_conds.iter().any(|c| c.col >= t.arity()) {
        Verdict::Fail
    } else {
        Verdict::check(equal_conds.iter().all(|c| {
            t.rows().iter().any(|row| {
                !row[c.col].is_null()
                    && row[c.col].matches(&c.value)
                    && gold.values.iter().any(|g| row[q.sel].matches(g))
            })
        }))
    };
    let text_conds: Vec<_> = q
        .conds
        .iter()
        .filter(|c| matches!(c.value, Value::Text(_)))
        .collect();
    let rule5 = if text_conds.is_empty() {
        Verdict::NotApplicable
    } else {
        Verdict::check(text_conds.iter().all(|c| c.op == CondOp::Equal))
    };
    (rule4, rule5)
}

/// Rules 6 and 7.
pub fn rule_answer_type(q: &SqlQuery, t: &Table, gold: &Answer) -> (Verdict, Verdict) {
    let rule6 = if gold.values.iter().any(Value::is_non_numeric_text) {
        Verdict::check(q.agg == AggOp::None)
    } else {
        Verdict::NotApplicable
    };
    let absent_number = gold
        .single()
        .filter(|v| v.as_number().is_some())
        .is_some_and(|v| !t.contains_value(v));
    let rule7 = if absent_number {
        Verdict::check(matches!(q.agg, AggOp::Count | AggOp::Sum | AggOp::Avg))
    } else {
        Verdict::NotApplicable
    };
    (rule6, rule7)
}

/// Runs all seven rules.
pub fn check_rules(q: &SqlQuery, t: &Table, question: &str, gold: &Answer) -> RuleReport {
    check_rules_with(q, t, &Question::new(question), gold, RuleSet::all())
}

/// Runs the enabled rules; disabled rules report `NotApplicable`.
pub fn check_rules_with(
    q: &SqlQuery,
    t: &Table,
    question: &Question,
    gold: &Answer,
    enabled: RuleSet,
) -> RuleReport {
    let (r1, r2) = rule_column_consistency(q, t, gold);
    let r3 = grounding(q, question);
    let (r4, r5) = rule_row_alignment(q, t, gold);
    let (r6, r7) = rule_answer_type(q, t, gold);
    let mut verdicts = [r1, r2, r3, r4, r5, r6, r7];
    for (i, v) in verdicts.iter_mut().enumerate() {
        if !enabled.contains(i as u8 + 1) {
            *v = Verdict::NotApplicable;
        }
    }
    RuleReport::new(verdicts)
}
