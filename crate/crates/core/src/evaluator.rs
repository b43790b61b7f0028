//! Logic-form and execution accuracy of mined labels, stratified by the
//! gold query's condition count.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::executor::{answers_equal, execute, ExecError};
use crate::explorer::LabelSet;
use crate::question::QuestionRecord;
use crate::sql::{logic_form_equal, SqlQuery};
use crate::table::TableMap;

/// Cumulative strata: a gold query with `k` conditions counts in every
/// stratum whose bound is at least `k`.
pub const STRATA: [(&str, usize); 3] = [("1", 1), ("1-2", 2), ("1-4", 4)];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub logic_form_acc: f64,
    pub execution_acc: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumReport {
    pub name: String,
    pub max_gold_conds: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub strata: Vec<StratumReport>,
    pub overall: Metrics,
    /// Fraction of questions that received a label.
    pub coverage: f64,
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("label for unknown qid {0:?}")]
    UnknownQid(String),
    #[error("qid {0:?} labeled more than once")]
    DuplicateLabel(String),
    #[error("question {0:?} has no gold sql")]
    MissingGold(String),
    #[error("question {qid:?} references unknown table {table_id:?}")]
    UnknownTable { qid: String, table_id: String },
    #[error("gold sql for {qid:?} does not execute: {source}")]
    Gold { qid: String, source: ExecError },
}

#[derive(Default)]
struct Tally {
    logic_form: usize,
    execution: usize,
    n: usize,
}

impl Tally {
    fn add(&mut self, lf: bool, ex: bool) {
        self.n += 1;
        self.logic_form += usize::from(lf);
        self.execution += usize::from(ex);
    }

    fn metrics(&self) -> Metrics {
        let frac = |k: usize| {
            if self.n == 0 {
                0.0
            } else {
                k as f64 / self.n as f64
            }
        };
        Metrics {
            logic_form_acc: frac(self.logic_form),
            execution_acc: frac(self.execution),
            n: self.n,
        }
    }
}

/// Scores labels against gold SQL. Unlabeled questions count as wrong on
/// both metrics.
pub fn evaluate(
    labels: &LabelSet,
    records: &[QuestionRecord],
    tables: &TableMap,
) -> Result<EvalReport, EvalError> {
    let known: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.qid.as_str(), r)).collect();
    let mut by_qid: HashMap<&str, &SqlQuery> = HashMap::new();
    for entry in &labels.entries {
        if !known.contains_key(entry.qid.as_str()) {
            return Err(EvalError::UnknownQid(entry.qid.clone()));
        }
    }
    for (qid, q) in labels.labels() {
        if by_qid.insert(qid, q).is_some() {
            return Err(EvalError::DuplicateLabel(qid.to_string()));
        }
    }

    let mut strata: Vec<Tally> = STRATA.iter().map(|_| Tally::default()).collect();
    let mut overall = Tally::default();
    let mut labeled = 0;
    for rec in records {
        let gold = rec
            .gold_sql
            .as_ref()
            .ok_or_else(|| EvalError::MissingGold(rec.qid.clone()))?;
        let table = tables
            .get(&rec.table_id)
            .ok_or_else(|| EvalError::UnknownTable {
                qid: rec.qid.clone(),
                table_id: rec.table_id.clone(),
            })?;
        let gold_answer = execute(gold, table).map_err(|source| EvalError::Gold {
            qid: rec.qid.clone(),
            source,
        })?;
        let (lf, ex) = match by_qid.get(rec.qid.as_str()) {
            Some(label) => {
                labeled += 1;
                let ex = execute(label, table)
                    .map(|a| answers_equal(&a, &gold_answer))
                    .unwrap_or(false);
                (logic_form_equal(label, gold), ex)
            }
            None => (false, false),
        };
        overall.add(lf, ex);
        for (tally, &(_, bound)) in strata.iter_mut().zip(&STRATA) {
            if gold.conds.len() <= bound {
                tally.add(lf, ex);
            }
        }
    }

    Ok(EvalReport {
        strata: strata
            .iter()
            .zip(&STRATA)
            .map(|(t, &(name, bound))| StratumReport {
                name: name.to_string(),
                max_gold_conds: bound,
                metrics: t.metrics(),
            })
            .collect(),
        overall: overall.metrics(),
        coverage: if records.is_empty() {
            0.0
        } else {
            labeled as f64 / records.len() as f64
        },
        labeled,
        total: records.len(),
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("question {0:?} has no gold sql")]
    MissingSql(String),
    #[error("question {qid:?} references unknown table {table_id:?}")]
    UnknownTable { qid: String, table_id: String },
    #[error("gold sql for {qid:?} does not execute: {source}")]
    Exec { qid: String, source: ExecError },
}

/// Fills each record's gold answer by executing its gold SQL. Failures are
/// reported per record.
pub fn oracle_answers(
    records: &[QuestionRecord],
    tables: &TableMap,
) -> Vec<Result<QuestionRecord, OracleError>> {
    records
        .iter()
        .map(|rec| {
            let sql = rec
                .gold_sql
                .as_ref()
                .ok_or_else(|| OracleError::MissingSql(rec.qid.clone()))?;
            let table = tables
                .get(&rec.table_id)
                .ok_or_else(|| OracleError::UnknownTable {
                    qid: rec.qid.clone(),
                    table_id: rec.table_id.clone(),
                })?;
            let answer = execute(sql, table).map_err(|source| OracleError::Exec {
                qid: rec.qid.clone(),
                source,
            })?;
            Ok(QuestionRecord {
                gold_answer: Some(answer),
                ..rec.clone()
            })
        })
        .collect()
}

impl EvalReport {
    /// Fixed-width table, one row per stratum.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let rule = format!(
            "+{}+{}+{}+{}+\n",
            "-".repeat(22),
            "-".repeat(16),
            "-".repeat(16),
            "-".repeat(8)
        );
        out.push_str("Exploration quality of mined labels\n");
        out.push_str(&rule);
        let _ = writeln!(
            out,
            "| {:<20} | {:>14} | {:>14} | {:>6} |",
            "Gold conditions", "Logic Form Acc", "Execution Acc", "N"
        );
        out.push_str(&rule);
        let rows = self
            .strata
            .iter()
            .map(|s| (format!("{} condition", s.name), &s.metrics))
            .chain([("all".to_string(), &self.overall)]);
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "| {:<20} | {:>13.1}% | {:>13.1}% | {:>6} |",
                name,
                100.0 * m.logic_form_acc,
                100.0 * m.execution_acc,
                m.n
            );
        }
        out.push_str(&rule);
        let _ = writeln!(
            out,
            "coverage: {:.1}% ({}/{} questions labeled)",
            100.0 * self.coverage,
            self.labeled,
            self.total
        );
        out
    }

    pub fn stratum(&self, name: &str) -> Option<&Metrics> {
        self.strata
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.metrics)
    }
}
