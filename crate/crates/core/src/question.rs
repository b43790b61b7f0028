//! Question records and the data JSONL format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::executor::Answer;
use crate::sql::{SqlError, SqlQuery};
use crate::table::TableMap;

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRecord {
    pub qid: String,
    pub question: String,
    pub table_id: String,
    pub gold_sql: Option<SqlQuery>,
    pub gold_answer: Option<Answer>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: question {qid:?}: {source}")]
    Sql {
        line: usize,
        qid: String,
        source: SqlError,
    },
    #[error("line {line}: question {qid:?} has neither sql nor answer")]
    NoSupervision { line: usize, qid: String },
    #[error("duplicate qid {0:?}")]
    DuplicateQid(String),
    #[error("question {qid:?} references unknown table {table_id:?}")]
    UnknownTable { qid: String, table_id: String },
}

#[derive(Serialize, Deserialize)]
struct DataLine {
    qid: String,
    question: String,
    table_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sql: Option<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<Json>,
}

impl QuestionRecord {
    pub fn to_json(&self) -> Json {
        let line = DataLine {
            qid: self.qid.clone(),
            question: self.question.clone(),
            table_id: self.table_id.clone(),
            sql: self.gold_sql.as_ref().map(SqlQuery::to_json),
            answer: self.gold_answer.as_ref().map(Answer::to_json),
        };
        serde_json::to_value(line).expect("data line serializes")
    }
}

/// Reads a data JSONL stream; qids must be unique.
pub fn read_questions(reader: impl BufRead) -> Result<Vec<QuestionRecord>, DataError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DataLine = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        let gold_sql = raw
            .sql
            .as_ref()
            .map(SqlQuery::from_json)
            .transpose()
            .map_err(|source| DataError::Sql {
                line: line_no,
                qid: raw.qid.clone(),
                source,
            })?;
        let gold_answer = match &raw.answer {
            None => None,
            Some(json) => Some(Answer::from_json(json).ok_or_else(|| DataError::Malformed {
                line: line_no,
                msg: format!("unsupported answer {json}"),
            })?),
        };
        if gold_sql.is_none() && gold_answer.is_none() {
            return Err(DataError::NoSupervision {
                line: line_no,
                qid: raw.qid,
            });
        }
        if !seen.insert(raw.qid.clone()) {
            return Err(DataError::DuplicateQid(raw.qid));
        }
        out.push(QuestionRecord {
            qid: raw.qid,
            question: raw.question,
            table_id: raw.table_id,
            gold_sql,
            gold_answer,
        });
    }
    Ok(out)
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<QuestionRecord>, DataError> {
    read_questions(BufReader::new(File::open(path)?))
}

pub fn write_questions(mut w: impl Write, records: &[QuestionRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &r.to_json())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Checks that every record's table is loaded.
pub fn check_tables(records: &[QuestionRecord], tables: &TableMap) -> Result<(), DataError> {
    match records.iter().find(|r| !tables.contains_key(&r.table_id)) {
        Some(r) => Err(DataError::UnknownTable {
            qid: r.qid.clone(),
            table_id: r.table_id.clone(),
        }),
        None => Ok(()),
    }
}
