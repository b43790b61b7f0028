//! A deliberately naive reimplementation of table loading, execution,
//! enumeration and the rules, sharing no code with the library.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::Value as Json;

const TOL: f64 = 1e-9;
pub const AGGS: [&str; 6] = ["none", "max", "min", "count", "sum", "avg"];
pub const OPS: [&str; 3] = ["=", ">", "<"];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Num(f64),
    Str(String),
}

impl Cell {
    fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Str(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
            Cell::Null => None,
        }
    }

    pub fn same(&self, other: &Cell) -> bool {
        match (self.num(), other.num()) {
            (Some(a), Some(b)) => (a - b).abs() <= TOL,
            (None, None) => match (self, other) {
                (Cell::Str(a), Cell::Str(b)) => a == b,
                (Cell::Null, Cell::Null) => true,
                _ => false,
            },
            _ => false,
        }
    }

    /// Canonical text used to compare query values across implementations.
    pub fn key(&self) -> String {
        match self {
            Cell::Null => "null".into(),
            Cell::Num(x) => format!("n:{x}"),
            Cell::Str(s) => format!("s:{s}"),
        }
    }
}

pub struct RefTable {
    pub id: String,
    pub numeric: Vec<bool>,
    pub rows: Vec<Vec<Cell>>,
}

impl RefTable {
    pub fn arity(&self) -> usize {
        self.numeric.len()
    }
}

fn parse_cell(raw: &Json, numeric: bool) -> Cell {
    let text = match raw {
        Json::Null => return Cell::Null,
        Json::String(s) => s.trim().to_lowercase(),
        other => other.to_string(),
    };
    if text.is_empty() {
        return Cell::Null;
    }
    if numeric {
        Cell::Num(text.replace(',', "").parse().expect("numeric cell"))
    } else {
        Cell::Str(text)
    }
}

pub fn load_tables(path: &Path) -> Vec<RefTable> {
    fs::read_to_string(path)
        .expect("read tables")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let j: Json = serde_json::from_str(line).expect("table json");
            let numeric: Vec<bool> = j["types"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| t.as_str() == Some("real"))
                .collect();
            let rows = j["rows"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| {
                    r.as_array()
                        .unwrap()
                        .iter()
                        .zip(&numeric)
                        .map(|(c, &n)| parse_cell(c, n))
                        .collect()
                })
                .collect();
            RefTable {
                id: j["id"].as_str().unwrap().to_string(),
                numeric,
                rows,
            }
        })
        .collect()
}

/// Lowercased alphanumeric runs; `.` or `,` between digits stays inside.
pub fn tokens(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.to_lowercase().chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        let joins_digits = (c == '.' || c == ',')
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_alphanumeric() || joins_digits {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn question_numbers(q: &str) -> Vec<f64> {
    let mut xs: Vec<f64> = tokens(q)
        .iter()
        .filter_map(|t| t.replace(',', "").parse::<f64>().ok())
        .filter(|x| x.is_finite())
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

pub fn grounded(v: &Cell, question: &str) -> bool {
    match v {
        Cell::Null => false,
        Cell::Num(x) => question_numbers(question)
            .iter()
            .any(|y| (x - y).abs() <= TOL),
        Cell::Str(s) => {
            let hay = tokens(question);
            let needle = tokens(s);
            !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cond {
    pub col: usize,
    pub op: usize,
    pub value: Cell,
}

#[derive(Debug, Clone)]
pub struct Query {
    pub sel: usize,
    pub agg: usize,
    pub conds: Vec<Cond>,
}

impl Query {
    /// Order-insensitive identity of a query.
    pub fn key(&self) -> String {
        let conds: BTreeSet<String> = self
            .conds
            .iter()
            .map(|c| format!("{}{}{}", c.col, OPS[c.op], c.value.key()))
            .collect();
        format!("{}({}) {:?}", AGGS[self.agg], self.sel, conds)
    }
}

fn rows_matching(t: &RefTable, conds: &[Cond]) -> Option<Vec<usize>> {
    for c in conds {
        if c.op != 0 && !t.numeric[c.col] {
            return None;
        }
    }
    Some(
        (0..t.rows.len())
            .filter(|&r| {
                conds.iter().all(|c| {
                    let cell = &t.rows[r][c.col];
                    if *cell == Cell::Null {
                        return false;
                    }
                    match c.op {
                        0 => cell.same(&c.value),
                        1 => cell.num().unwrap() > c.value.num().unwrap() + TOL,
                        _ => cell.num().unwrap() < c.value.num().unwrap() - TOL,
                    }
                })
            })
            .collect(),
    )
}

/// `None` when the query is ill-typed.
pub fn run(t: &RefTable, q: &Query) -> Option<Vec<Cell>> {
    let rows = rows_matching(t, &q.conds)?;
    let vals: Vec<Cell> = rows.iter().map(|&r| t.rows[r][q.sel].clone()).collect();
    match q.agg {
        0 => Some(vals),
        3 => Some(vec![Cell::Num(vals.len() as f64)]),
        agg => {
            if !t.numeric[q.sel] {
                return None;
            }
            let xs: Vec<f64> = vals.iter().filter_map(|v| v.num()).collect();
            if xs.is_empty() {
                return Some(vec![]);
            }
            let x = match agg {
                1 => xs.iter().cloned().fold(f64::MIN, f64::max),
                2 => xs.iter().cloned().fold(f64::MAX, f64::min),
                4 => xs.iter().sum(),
                _ => xs.iter().sum::<f64>() / xs.len() as f64,
            };
            Some(vec![Cell::Num(x)])
        }
    }
}

/// Multiset equality by greedy pairing.
pub fn same_multiset(a: &[Cell], b: &[Cell]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(
        |x| match (0..b.len()).find(|&i| !used[i] && x.same(&b[i])) {
            Some(i) => {
                used[i] = true;
                true
            }
            None => false,
        },
    )
}

/// Rule ids that reject an answer-matching query.
pub fn failed_rules(t: &RefTable, q: &Query, question: &str, gold: &[Cell]) -> Vec<u8> {
    let mut failed = Vec::new();
    let in_row = |row: &[Cell], g: &Cell| row.iter().any(|c| c.same(g));
    if q.agg == 0 {
        if !gold
            .iter()
            .all(|g| t.rows.iter().any(|row| row[q.sel].same(g)))
        {
            failed.push(1);
        }
        let rows = rows_matching(t, &q.conds).unwrap_or_default();
        if !gold
            .iter()
            .all(|g| rows.iter().any(|&r| in_row(&t.rows[r], g)))
        {
            failed.push(2);
        }
    }
    if !q.conds.iter().all(|c| grounded(&c.value, question)) {
        failed.push(3);
    }
    if q.agg == 0 {
        let aligned = q.conds.iter().filter(|c| c.op == 0).all(|c| {
            t.rows.iter().any(|row| {
                row[c.col] != Cell::Null
                    && row[c.col].same(&c.value)
                    && gold.iter().any(|g| row[q.sel].same(g))
            })
        });
        if !aligned {
            failed.push(4);
        }
    }
    if q.conds
        .iter()
        .any(|c| matches!(c.value, Cell::Str(_)) && c.op != 0)
    {
        failed.push(5);
    }
    let text_gold = gold
        .iter()
        .any(|g| matches!(g, Cell::Str(_)) && g.num().is_none());
    if text_gold && q.agg != 0 {
        failed.push(6);
    }
    if gold.len() == 1 && gold[0].num().is_some() {
        let anywhere = t.rows.iter().any(|row| in_row(row, &gold[0]));
        if !anywhere && !matches!(q.agg, 3..=5) {
            failed.push(7);
        }
    }
    failed
}

/// Every condition over table cells and question numbers, all operators.
pub fn all_conditions(t: &RefTable, question: &str) -> Vec<Cond> {
    let mut out = Vec::new();
    for col in 0..t.arity() {
        let mut values: Vec<Cell> = Vec::new();
        let mut push = |v: Cell| {
            if v != Cell::Null && !values.iter().any(|u| u.key() == v.key()) {
                values.push(v);
            }
        };
        for row in &t.rows {
            push(row[col].clone());
        }
        for x in question_numbers(question) {
            push(if t.numeric[col] {
                Cell::Num(x)
            } else {
                Cell::Str(format!("{x}"))
            });
        }
        for v in values {
            for op in 0..3 {
                out.push(Cond {
                    col,
                    op,
                    value: v.clone(),
                });
            }
        }
    }
    out
}

/// Keys of every query with at most one condition that reproduces the gold
/// answer and passes all rules.
pub fn surviving_keys(t: &RefTable, question: &str, gold: &[Cell]) -> BTreeSet<String> {
    let conds = all_conditions(t, question);
    let mut cond_sets: Vec<Vec<Cond>> = vec![vec![]];
    cond_sets.extend(conds.into_iter().map(|c| vec![c]));
    let mut out = BTreeSet::new();
    for sel in 0..t.arity() {
        for agg in 0..AGGS.len() {
            for conds in &cond_sets {
                let q = Query {
                    sel,
                    agg,
                    conds: conds.clone(),
                };
                let Some(ans) = run(t, &q) else { continue };
                if same_multiset(&ans, gold) && failed_rules(t, &q, question, gold).is_empty() {
                    out.insert(q.key());
                }
            }
        }
    }
    out
}

pub fn gold_cells(answer: &Json) -> Vec<Cell> {
    let items = match answer {
        Json::Array(xs) => xs.clone(),
        other => vec![other.clone()],
    };
    items
        .iter()
        .map(|v| match v {
            Json::Null => Cell::Null,
            Json::Number(n) => Cell::Num(n.as_f64().unwrap()),
            Json::String(s) => Cell::Str(s.clone()),
            other => panic!("unexpected answer value {other}"),
        })
        .collect()
}

/// Converts a library query into the reference form via its JSON wire shape.
pub fn from_wire(json: &Json, t: &RefTable) -> Query {
    let conds = json["conds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let col = c[0].as_u64().unwrap() as usize;
            let value = match &c[2] {
                Json::Number(n) => Cell::Num(n.as_f64().unwrap()),
                Json::String(s) if t.numeric[col] => Cell::Num(s.parse().unwrap()),
                Json::String(s) => Cell::Str(s.clone()),
                other => panic!("unexpected condition value {other}"),
            };
            Cond {
                col,
                op: c[1].as_u64().unwrap() as usize,
                value,
            }
        })
        .collect();
    Query {
        sel: json["sel"].as_u64().unwrap() as usize,
        agg: json["agg"].as_u64().unwrap() as usize,
        conds,
    }
}
