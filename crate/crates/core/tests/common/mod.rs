#![allow(dead_code)]

pub mod reference;

use std::path::PathBuf;

use sqlminer::question::QuestionRecord;
use sqlminer::{load_questions, load_tables, oracle_answers, TableMap};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn tables() -> TableMap {
    load_tables(fixture("tables.jsonl")).expect("fixture tables load")
}

/// Fixture questions with gold answers filled in from their gold sql.
pub fn questions(tables: &TableMap) -> Vec<QuestionRecord> {
    let raw = load_questions(fixture("questions.jsonl")).expect("fixture questions load");
    oracle_answers(&raw, tables)
        .into_iter()
        .map(|r| r.expect("gold sql executes"))
        .collect()
}

/// Same records with gold sql withheld, as the miner sees them.
pub fn answer_only(records: &[QuestionRecord]) -> Vec<QuestionRecord> {
    records
        .iter()
        .map(|r| QuestionRecord {
            gold_sql: None,
            ..r.clone()
        })
        .collect()
}
