//! Execution-guided search for SQL labels.
//!
//! For each question the explorer enumerates candidate queries from the
//! simplest upward, executes each against the question's table, and keeps a
//! candidate only when its answer equals the gold answer and it passes the
//! enabled rules. Enumeration order:
//!
//! 1. number of conditions, ascending (`0..=max_conds`);
//! 2. aggregate code, then selected column;
//! 3. conditions as index combinations over the sorted candidate list.
//!
//! This order equals the tie-break key `(conds, agg, sel, conds lexicographic)`,
//! so the first survivor is also the preferred one when several exist.
//!
//! With pruning on, multi-condition queries without an aggregate only extend
//! condition sets whose rows already contain every gold value. Adding a
//! condition can only shrink the row set, so nothing reachable is lost.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{answer_contains, answers_equal, execute, Answer};
use crate::question::QuestionRecord;
use crate::rules::{check_rules_with, value_grounded, RuleReport, RuleSet};
use crate::sql::{AggOp, CondOp, Condition, SqlQuery, MAX_CONDS};
use crate::table::{ColumnType, Table, TableMap};
use crate::text::Question;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub max_conds: usize,
    /// Maximum number of query executions per question.
    pub budget: u64,
    pub enabled_rules: RuleSet,
    pub pruning: bool,
    pub keep_all_survivors: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_conds: MAX_CONDS,
            budget: 100_000,
            enabled_rules: RuleSet::all(),
            pruning: true,
            keep_all_survivors: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("max_conds {0} exceeds {MAX_CONDS}")]
    MaxConds(usize),
    #[error("budget must be positive")]
    Budget,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_conds > MAX_CONDS {
            return Err(ConfigError::MaxConds(self.max_conds));
        }
        if self.budget == 0 {
            return Err(ConfigError::Budget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Found,
    AmbiguousResolved,
    NotFound,
    BudgetExhausted,
}

impl Status {
    pub fn is_labeled(self) -> bool {
        matches!(self, Status::Found | Status::AmbiguousResolved)
    }
}

/// Rule verdicts for one answer-matching candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleAudit {
    pub query: SqlQuery,
    pub report: RuleReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationRecord {
    pub qid: String,
    pub status: Status,
    pub chosen: Option<SqlQuery>,
    pub survivors: Vec<SqlQuery>,
    /// Number of executions performed.
    pub trials: u64,
    pub rule_audits: Vec<RuleAudit>,
    /// Set when the question could not be explored at all.
    pub error: Option<String>,
}

impl ExplorationRecord {
    fn failed(qid: &str, error: String) -> Self {
        ExplorationRecord {
            qid: qid.to_string(),
            status: Status::NotFound,
            chosen: None,
            survivors: Vec::new(),
            trials: 0,
            rule_audits: Vec::new(),
            error: Some(error),
        }
    }

    /// Distinct ids of rules that rejected some answer-matching candidate.
    pub fn rules_failed(&self) -> Vec<u8> {
        self.rule_audits
            .iter()
            .flat_map(|a| a.report.failed())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Every type-compatible `(column, aggregate)` pair, columns ascending then
/// aggregate code ascending. Text columns only take `NONE` and `COUNT`.
pub fn generate_select_candidates(t: &Table) -> Vec<(usize, AggOp)> {
    t.types()
        .iter()
        .enumerate()
        .flat_map(|(col, &kind)| {
            AggOp::ALL
                .into_iter()
                .filter(move |agg| kind == ColumnType::Real || !agg.is_numeric())
                .map(move |agg| (col, agg))
        })
        .collect()
}

fn distinct_cells(t: &Table, col: usize) -> BTreeSet<Value> {
    t.rows()
        .iter()
        .map(|row| row[col].clone())
        .filter(|v| !v.is_null())
        .collect()
}

/// Conditions whose values are grounded in the question, sorted by
/// `(col, op, value)`.
pub fn generate_condition_candidates(t: &Table, question: &str) -> Vec<Condition> {
    grounded_conditions(t, &Question::new(question))
}

fn grounded_conditions(t: &Table, question: &Question) -> Vec<Condition> {
    let mut out = BTreeSet::new();
    for (col, &kind) in t.types().iter().enumerate() {
        if kind == ColumnType::Real {
            for &x in question.numbers() {
                for op in CondOp::ALL {
                    out.insert(Condition::new(col, op, Value::real(x)));
                }
            }
        }
        for v in distinct_cells(t, col) {
            if value_grounded(&v, question) {
                out.insert(Condition::new(col, CondOp::Equal, v));
            }
        }
    }
    out.into_iter().collect()
}

/// Every type-valid condition over table cells and question numbers:
/// text cells with EQUAL, real cells and question numbers with all three
/// operators. This is the space searched when grounding (rule 3) is off.
pub fn condition_space(t: &Table, question: &str) -> Vec<Condition> {
    full_conditions(t, &Question::new(question))
}

fn full_conditions(t: &Table, question: &Question) -> Vec<Condition> {
    let mut out = BTreeSet::new();
    for (col, &kind) in t.types().iter().enumerate() {
        let cells = distinct_cells(t, col);
        match kind {
            ColumnType::Text => {
                out.extend(
                    cells
                        .into_iter()
                        .map(|v| Condition::new(col, CondOp::Equal, v)),
                );
            }
            ColumnType::Real => {
                let values = cells
                    .into_iter()
                    .chain(question.numbers().iter().map(|&x| Value::real(x)));
                for v in values {
                    for op in CondOp::ALL {
                        out.insert(Condition::new(col, op, v.clone()));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Preference order among surviving queries: fewer conditions, lower
/// aggregate code, lower selected column, then conditions lexicographically.
pub fn tie_break_key(q: &SqlQuery) -> (usize, u8, usize, &[Condition]) {
    (q.conds.len(), q.agg.code(), q.sel, &q.conds)
}

enum Step {
    Stop,
    Executed(Option<Answer>),
}

struct Search<'a> {
    table: &'a Table,
    question: Question,
    gold: &'a Answer,
    cfg: &'a SearchConfig,
    trials: u64,
    exhausted: bool,
    survivors: Vec<SqlQuery>,
    audits: Vec<RuleAudit>,
}

impl Search<'_> {
    fn try_query(&mut self, q: SqlQuery) -> Step {
        if self.trials >= self.cfg.budget {
            self.exhausted = true;
            return Step::Stop;
        }
        self.trials += 1;
        let Ok(answer) = execute(&q, self.table) else {
            return Step::Executed(None);
        };
        if answers_equal(&answer, self.gold) {
            let report = check_rules_with(
                &q,
                self.table,
                &self.question,
                self.gold,
                self.cfg.enabled_rules,
            );
            let pass = report.overall();
            self.audits.push(RuleAudit {
                query: q.clone(),
                report,
            });
            if pass {
                self.survivors.push(q);
                if !self.cfg.keep_all_survivors {
                    return Step::Stop;
                }
            }
        }
        Step::Executed(Some(answer))
    }

    fn run(&mut self) {
        let conds = if self.cfg.enabled_rules.contains(3) {
            grounded_conditions(self.table, &self.question)
        } else {
            full_conditions(self.table, &self.question)
        };
        let mut selects = generate_select_candidates(self.table);
        selects.sort_by_key(|&(sel, agg)| (agg, sel));

        // Condition-index combinations (per selected column, no aggregate)
        // whose rows contain the gold answer, for the previous level.
        let mut viable: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
        let mut viable_singles: HashMap<usize, Vec<usize>> = HashMap::new();

        for n in 0..=self.cfg.max_conds.min(conds.len()) {
            let mut next: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
            for &(sel, agg) in &selects {
                let prune = self.cfg.pruning && agg == AggOp::None;
                let combos: Box<dyn Iterator<Item = Vec<usize>>> = if prune && n >= 2 {
                    let singles = viable_singles.get(&sel).cloned().unwrap_or_default();
                    let prefixes = viable.remove(&sel).unwrap_or_default();
                    Box::new(prefixes.into_iter().flat_map(move |prefix| {
                        let last = *prefix.last().expect("non-empty prefix");
                        singles
                            .iter()
                            .filter(move |&&j| j > last)
                            .map(move |&j| {
                                let mut c = prefix.clone();
                                c.push(j);
                                c
                            })
                            .collect::<Vec<_>>()
                    }))
                } else {
                    Box::new((0..conds.len()).combinations(n))
                };
                for combo in combos {
                    let q =
                        SqlQuery::new(sel, agg, combo.iter().map(|&i| conds[i].clone()).collect());
                    match self.try_query(q) {
                        Step::Stop => return,
                        Step::Executed(Some(answer))
                            if prune && n >= 1 && answer_contains(&answer, self.gold) =>
                        {
                            next.entry(sel).or_default().push(combo);
                        }
                        Step::Executed(_) => {}
                    }
                }
            }
            if n == 1 {
                viable_singles = next
                    .iter()
                    .map(|(&sel, combos)| (sel, combos.iter().map(|c| c[0]).collect()))
                    .collect();
            }
            viable = next;
        }
    }
}

/// Explores one question against its gold answer. Gold SQL is never
/// consulted.
pub fn explore(
    qid: &str,
    question: &str,
    gold: &Answer,
    t: &Table,
    cfg: &SearchConfig,
) -> ExplorationRecord {
    if let Err(e) = cfg.validate() {
        return ExplorationRecord::failed(qid, e.to_string());
    }
    let mut search = Search {
        table: t,
        question: Question::new(question),
        gold,
        cfg,
        trials: 0,
        exhausted: false,
        survivors: Vec::new(),
        audits: Vec::new(),
    };
    search.run();

    let chosen = search
        .survivors
        .iter()
        .min_by(|a, b| tie_break_key(a).cmp(&tie_break_key(b)))
        .cloned();
    let status = match search.survivors.len() {
        0 if search.exhausted => Status::BudgetExhausted,
        0 => Status::NotFound,
        1 => Status::Found,
        _ => Status::AmbiguousResolved,
    };
    ExplorationRecord {
        qid: qid.to_string(),
        status,
        chosen,
        survivors: search.survivors,
        trials: search.trials,
        rule_audits: search.audits,
        error: None,
    }
}

pub fn explore_question(rec: &QuestionRecord, t: &Table, cfg: &SearchConfig) -> ExplorationRecord {
    match &rec.gold_answer {
        Some(gold) => explore(&rec.qid, &rec.question, gold, t, cfg),
        None => ExplorationRecord::failed(&rec.qid, "no gold answer".into()),
    }
}

fn explore_one(rec: &QuestionRecord, tables: &TableMap, cfg: &SearchConfig) -> ExplorationRecord {
    match tables.get(&rec.table_id) {
        Some(t) => explore_question(rec, t, cfg),
        None => ExplorationRecord::failed(&rec.qid, format!("unknown table {:?}", rec.table_id)),
    }
}

/// Explores every record, `threads` at a time. Output order follows input
/// order whatever the thread count.
pub fn explore_corpus(
    records: &[QuestionRecord],
    tables: &TableMap,
    cfg: &SearchConfig,
    threads: usize,
) -> Vec<ExplorationRecord> {
    if threads <= 1 {
        return records
            .iter()
            .map(|r| explore_one(r, tables, cfg))
            .collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| {
            records
                .par_iter()
                .map(|r| explore_one(r, tables, cfg))
                .collect()
        }),
        Err(_) => records
            .iter()
            .map(|r| explore_one(r, tables, cfg))
            .collect(),
    }
}

pub fn mine_corpus(
    records: &[QuestionRecord],
    tables: &TableMap,
    cfg: &SearchConfig,
    threads: usize,
) -> LabelSet {
    LabelSet::from_records(
        &explore_corpus(records, tables, cfg, threads),
        cfg.keep_all_survivors,
    )
}

/// One line of the label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub qid: String,
    pub status: Status,
    pub sql: Option<SqlQuery>,
    pub trials: u64,
    pub rules_failed: Vec<u8>,
    /// Every surviving query, only written when all survivors are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survivors: Option<Vec<SqlQuery>>,
}

/// Mined labels, one entry per question in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    pub entries: Vec<LabelEntry>,
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed label: {msg}")]
    Malformed { line: usize, msg: String },
}

impl LabelSet {
    pub fn from_records(records: &[ExplorationRecord], with_survivors: bool) -> LabelSet {
        let entries = records
            .iter()
            .map(|r| LabelEntry {
                qid: r.qid.clone(),
                status: r.status,
                sql: r.chosen.clone(),
                trials: r.trials,
                rules_failed: r.rules_failed(),
                survivors: with_survivors.then(|| r.survivors.clone()),
            })
            .collect();
        LabelSet { entries }
    }

    /// `(qid, query)` for every labeled question.
    pub fn labels(&self) -> impl Iterator<Item = (&str, &SqlQuery)> {
        self.entries
            .iter()
            .filter(|e| e.status.is_labeled())
            .filter_map(|e| e.sql.as_ref().map(|q| (e.qid.as_str(), q)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<LabelSet, LabelError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line).map_err(|e| LabelError::Malformed {
                    line: i + 1,
                    msg: e.to_string(),
                })?,
            );
        }
        Ok(LabelSet { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LabelSet, LabelError> {
        LabelSet::read_jsonl(BufReader::new(File::open(path)?))
    }
}
