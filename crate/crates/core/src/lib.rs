//! Weakly supervised SQL label mining over WikiSQL-style tables.
//!
//! Given a table, a question and the question's answer (but no SQL), the
//! [`explorer`] searches the WikiSQL query space by execution, keeps queries
//! whose answer matches and that pass the disambiguation [`rules`], and
//! emits one label per question. The [`evaluator`] scores labels against
//! gold SQL when it is available.

pub mod cli;
pub mod evaluator;
pub mod executor;
pub mod explorer;
pub mod question;
pub mod rules;
pub mod sql;
pub mod table;
pub mod text;
pub mod value;

pub use evaluator::{evaluate, oracle_answers, EvalReport, Metrics};
pub use executor::{answers_equal, execute, filter_rows, Answer, ExecError};
pub use explorer::{
    explore, explore_question, mine_corpus, ExplorationRecord, LabelSet, SearchConfig, Status,
};
pub use question::{load_questions, QuestionRecord};
pub use rules::{check_rules, RuleReport, RuleSet, Verdict};
pub use sql::{logic_form_equal, AggOp, CondOp, Condition, SqlQuery};
pub use table::{load_tables, ColumnType, Table, TableMap};
pub use value::Value;
