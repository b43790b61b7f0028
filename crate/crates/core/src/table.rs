//! Immutable WikiSQL-format tables and their JSONL loader.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::value::{parse_number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Real,
}

#[derive(Debug, Error, PartialEq)]
pub enum CellError {
    #[error("non-numeric value {0:?} in real column")]
    NotNumeric(String),
    #[error("unsupported cell {0}")]
    Unsupported(String),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed table record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: table {id:?}: {msg}")]
    Arity {
        line: usize,
        id: String,
        msg: String,
    },
    #[error("line {line}: duplicate table id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: table {id:?} row {row} column {col}: {source}")]
    Cell {
        line: usize,
        id: String,
        row: usize,
        col: usize,
        source: CellError,
    },
    #[error("column index {col} out of range for table {id:?} with {arity} columns")]
    ColumnOutOfRange {
        id: String,
        col: usize,
        arity: usize,
    },
}

/// Normalizes a raw JSON cell under its declared column type.
pub fn normalize_cell(raw: &Json, kind: ColumnType) -> Result<Value, CellError> {
    match (raw, kind) {
        (Json::Null, _) => Ok(Value::Null),
        (Json::String(s), ColumnType::Text) => Ok(Value::text(s)),
        (Json::Number(n), ColumnType::Text) => Ok(Value::text(&n.to_string())),
        (Json::String(s), ColumnType::Real) => {
            if s.trim().is_empty() {
                Ok(Value::Null)
            } else {
                parse_number(s)
                    .map(Value::real)
                    .ok_or_else(|| CellError::NotNumeric(s.clone()))
            }
        }
        (Json::Number(n), ColumnType::Real) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Value::real)
            .ok_or_else(|| CellError::NotNumeric(n.to_string())),
        (other, _) => Err(CellError::Unsupported(other.to_string())),
    }
}

/// Serialized table record. Unknown fields (WikiSQL's `page_title`,
/// `caption`, ...) are ignored on read and never written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRecord {
    pub id: String,
    pub header: Vec<String>,
    pub types: Vec<ColumnType>,
    pub rows: Vec<Vec<Json>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    id: String,
    header: Vec<String>,
    types: Vec<ColumnType>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    /// Builds a table from a record, type-checking every cell. `line` is only
    /// used for diagnostics.
    pub fn from_record(rec: TableRecord, line: usize) -> Result<Table, TableError> {
        let arity = rec.header.len();
        if rec.types.len() != arity {
            return Err(TableError::Arity {
                line,
                id: rec.id,
                msg: format!("{} types for {} header columns", rec.types.len(), arity),
            });
        }
        let mut rows = Vec::with_capacity(rec.rows.len());
        for (r, raw_row) in rec.rows.iter().enumerate() {
            if raw_row.len() != arity {
                return Err(TableError::Arity {
                    line,
                    id: rec.id,
                    msg: format!("row {r} has {} cells, header has {arity}", raw_row.len()),
                });
            }
            let row = raw_row
                .iter()
                .zip(&rec.types)
                .enumerate()
                .map(|(c, (cell, &kind))| {
                    normalize_cell(cell, kind).map_err(|source| TableError::Cell {
                        line,
                        id: rec.id.clone(),
                        row: r,
                        col: c,
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table {
            id: rec.id,
            header: rec.header,
            types: rec.types,
            rows,
        })
    }

    pub fn to_record(&self) -> TableRecord {
        TableRecord {
            id: self.id.clone(),
            header: self.header.clone(),
            types: self.types.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(Value::to_json).collect())
                .collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn types(&self) -> &[ColumnType] {
        &self.types
    }

    pub fn column_type(&self, col: usize) -> Option<ColumnType> {
        self.types.get(col).copied()
    }

    pub fn arity(&self) -> usize {
        self.header.len()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Value {
        &self.rows[row][col]
    }

    /// Normalized values of one column in row order.
    pub fn column_values(&self, col: usize) -> Result<Vec<Value>, TableError> {
        if col >= self.arity() {
            return Err(TableError::ColumnOutOfRange {
                id: self.id.clone(),
                col,
                arity: self.arity(),
            });
        }
        Ok(self.rows.iter().map(|row| row[col].clone()).collect())
    }

    /// Whether `v` matches any cell of the table.
    pub fn contains_value(&self, v: &Value) -> bool {
        self.rows.iter().flatten().any(|cell| cell.matches(v))
    }
}

pub type TableMap = BTreeMap<String, Table>;

/// Reads a tables JSONL stream. Blank lines are skipped.
pub fn read_tables(reader: impl BufRead) -> Result<TableMap, TableError> {
    let mut tables = TableMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TableRecord = serde_json::from_str(&line).map_err(|e| TableError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        if tables.contains_key(&rec.id) {
            return Err(TableError::DuplicateId {
                line: line_no,
                id: rec.id,
            });
        }
        let table = Table::from_record(rec, line_no)?;
        tables.insert(table.id.clone(), table);
    }
    Ok(tables)
}

pub fn load_tables(path: impl AsRef<Path>) -> Result<TableMap, TableError> {
    read_tables(BufReader::new(File::open(path)?))
}

/// Writes tables as JSONL, one record per line, in id order.
pub fn write_tables<'a>(
    mut w: impl Write,
    tables: impl IntoIterator<Item = &'a Table>,
) -> io::Result<()> {
    for t in tables {
        serde_json::to_writer(&mut w, &t.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    const T1: &str = r#"{"id":"t1","header":["Player","Team","Score"],"types":["text","text","real"],"rows":[["Alice","Red",10],["Bob","Red",20],["Carol","Blue",20]]}"#;

    fn t1() -> Table {
        read_tables(T1.as_bytes()).unwrap().remove("t1").unwrap()
    }

    #[test]
    fn loads_fixture() {
        let tables = read_tables(T1.as_bytes()).unwrap();
        assert_eq!(tables.len(), 1);
        let t = &tables["t1"];
        assert_eq!(t.arity(), 3);
        assert_eq!(t.num_rows(), 3);
    }

    #[test]
    fn empty_input_is_empty_map() {
        assert!(read_tables("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn arity_mismatch_names_line() {
        let src = format!(
            "{T1}\n{}",
            r#"{"id":"t2","header":["Player","Team","Score"],"types":["text","text","real"],"rows":[["Alice","Red"]]}"#
        );
        match read_tables(src.as_bytes()) {
            Err(TableError::Arity { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_and_bad_cells_abort() {
        let src = format!("{T1}\n{T1}");
        assert!(matches!(
            read_tables(src.as_bytes()),
            Err(TableError::DuplicateId { line: 2, .. })
        ));
        let bad = r#"{"id":"x","header":["a"],"types":["real"],"rows":[["ten"]]}"#;
        assert!(matches!(
            read_tables(bad.as_bytes()),
            Err(TableError::Cell {
                line: 1,
                row: 0,
                col: 0,
                ..
            })
        ));
        assert!(matches!(
            read_tables("{not json".as_bytes()),
            Err(TableError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn normalize_cell_rules() {
        assert_eq!(
            normalize_cell(&json!("  Bob "), ColumnType::Text),
            Ok(Value::text("bob"))
        );
        assert_eq!(
            normalize_cell(&json!("20"), ColumnType::Real),
            Ok(Value::real(20.0))
        );
        assert_eq!(
            normalize_cell(&json!(""), ColumnType::Text),
            Ok(Value::Null)
        );
        assert_eq!(
            normalize_cell(&json!(""), ColumnType::Real),
            Ok(Value::Null)
        );
        assert_eq!(
            normalize_cell(&json!(7), ColumnType::Text),
            Ok(Value::text("7"))
        );
        assert!(normalize_cell(&json!("abc"), ColumnType::Real).is_err());
    }

    #[test]
    fn column_projection() {
        let t = t1();
        assert_eq!(
            t.column_values(0).unwrap(),
            vec![
                Value::text("alice"),
                Value::text("bob"),
                Value::text("carol")
            ]
        );
        assert_eq!(
            t.column_values(2).unwrap(),
            vec![Value::real(10.0), Value::real(20.0), Value::real(20.0)]
        );
        assert!(matches!(
            t.column_values(5),
            Err(TableError::ColumnOutOfRange {
                col: 5,
                arity: 3,
                ..
            })
        ));
    }

    fn arb_table() -> impl Strategy<Value = Table> {
        (1usize..5, 0usize..6).prop_flat_map(|(arity, nrows)| {
            let types = proptest::collection::vec(prop::bool::ANY, arity);
            types.prop_flat_map(move |is_real| {
                let cells = is_real
                    .iter()
                    .map(|&real| {
                        if real {
                            prop_oneof![
                                (-1000i64..1000).prop_map(|x| json!(x)),
                                (-1.0e6f64..1.0e6).prop_map(|x| json!(x)),
                                Just(json!("")),
                            ]
                            .boxed()
                        } else {
                            prop_oneof![
                                "[ A-Za-z0-9.]{0,8}".prop_map(|s| json!(s)),
                                (0i64..100).prop_map(|x| json!(x)),
                            ]
                            .boxed()
                        }
                    })
                    .collect::<Vec<_>>();
                let types: Vec<ColumnType> = is_real
                    .iter()
                    .map(|&r| {
                        if r {
                            ColumnType::Real
                        } else {
                            ColumnType::Text
                        }
                    })
                    .collect();
                proptest::collection::vec(cells, nrows).prop_map(move |rows| {
                    let rec = TableRecord {
                        id: "p".into(),
                        header: (0..types.len()).map(|i| format!("c{i}")).collect(),
                        types: types.clone(),
                        rows,
                    };
                    Table::from_record(rec, 1).unwrap()
                })
            })
        })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(t in arb_table()) {
            let mut buf = Vec::new();
            write_tables(&mut buf, [&t]).unwrap();
            let back = read_tables(buf.as_slice()).unwrap();
            prop_assert_eq!(&back["p"], &t);
        }

        #[test]
        fn column_lengths_match_rows(t in arb_table()) {
            for c in 0..t.arity() {
                prop_assert_eq!(t.column_values(c).unwrap().len(), t.num_rows());
            }
        }
    }
}
