use std::fs;
use std::path::Path;

use super::{ColumnKind, ColumnSpec, Dataset, Schema, Value};
use crate::error::{Error, Result};

/// Cell contents treated as missing.
pub const MISSING_TOKENS: &[&str] = &["", "?", "NA", "N/A", "NaN", "nan", "null", "NULL"];

fn is_missing_token(s: &str) -> bool {
    MISSING_TOKENS.contains(&s)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses one cell for a column of the given kind.
pub fn parse_value(raw: &str, kind: ColumnKind) -> Option<Value> {
    let s = raw.trim();
    if is_missing_token(s) {
        return Some(Value::Missing);
    }
    match kind {
        ColumnKind::Numeric => parse_number(s).map(Value::Number),
        ColumnKind::Categorical => Some(Value::Text(s.to_string())),
    }
}

/// Reads a sidecar schema document from disk.
pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schema::from_sidecar(&text)
}

/// Loads a headed CSV file.
///
/// Without a hint, the last column is the class column and every other
/// column is numeric iff all of its non-missing cells parse as finite
/// numbers. A hint fixes kinds and names the class column (or none).
pub fn load_csv(path: impl AsRef<Path>, hint: Option<&Schema>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_csv_str(&text, hint)
}

pub fn load_csv_str(text: &str, hint: Option<&Schema>) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyDataset);
    }

    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let class_idx =
        match hint {
            Some(h) => match &h.class_column {
                Some(name) => Some(header.iter().position(|c| c == name).ok_or_else(|| {
                    Error::Schema(format!("class column {name:?} not in header"))
                })?),
                None => None,
            },
            None => Some(header.len() - 1),
        };

    let mut columns = Vec::new();
    let mut feature_positions = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if Some(j) == class_idx {
            continue;
        }
        let kind = match hint {
            Some(h) => {
                h.columns
                    .iter()
                    .find(|c| &c.name == name)
                    .ok_or_else(|| Error::Schema(format!("column {name:?} missing from schema")))?
                    .kind
            }
            None => infer_kind(records.iter().map(|r| r[j].as_str())),
        };
        columns.push(ColumnSpec::new(name.clone(), kind));
        feature_positions.push(j);
    }
    let schema = Schema::new(columns, class_idx.map(|j| header[j].clone()))?;

    let mut rows = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(feature_positions.len());
        for (spec, &j) in schema.columns.iter().zip(&feature_positions) {
            let v = parse_value(&rec[j], spec.kind).ok_or_else(|| Error::Parse {
                // header is line 1
                line: r as u64 + 2,
                message: format!("{:?} is not numeric in column {:?}", rec[j], spec.name),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    let labels = class_idx.map(|j| records.iter().map(|r| r[j].clone()).collect());
    Dataset::new(schema, rows, labels)
}

fn infer_kind<'a>(cells: impl Iterator<Item = &'a str>) -> ColumnKind {
    let mut numeric = true;
    for c in cells {
        let c = c.trim();
        if is_missing_token(c) {
            continue;
        }
        if parse_number(c).is_none() {
            numeric = false;
            break;
        }
    }
    if numeric {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_kinds_and_class_column() {
        let d = load_csv_str("a,level,class\n1.5,low,x\n2,high,y\n,med,x\n", None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.schema().columns[0].kind, ColumnKind::Numeric);
        assert_eq!(d.schema().columns[1].kind, ColumnKind::Categorical);
        assert_eq!(d.schema().class_column.as_deref(), Some("class"));
        assert_eq!(d.row(2)[0], Value::Missing);
        assert_eq!(d.labels().unwrap(), ["x", "y", "x"]);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(
            load_csv_str("a,b,class\n", None),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn ragged_row_names_line() {
        let err = load_csv_str("a,b,class\n1,2,x\n1,2\n", None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quoted_fields() {
        let d = load_csv_str("name,v,class\n\"a, b\",1,x\n", None).unwrap();
        assert_eq!(d.row(0)[0], Value::Text("a, b".into()));
    }

    #[test]
    fn hint_controls_kinds_and_class() {
        let hint = Schema::from_sidecar(
            r#"{"columns":[{"name":"code","kind":"categorical"},{"name":"v","kind":"numeric"}],"class_column":null}"#,
        )
        .unwrap();
        let d = load_csv_str("code,v\n1,2\n3,4\n", Some(&hint)).unwrap();
        assert!(d.labels().is_none());
        assert_eq!(d.row(0)[0], Value::Text("1".into()));
        let bad = load_csv_str("code,v\n1,x\n", Some(&hint)).unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(
            load_csv("/definitely/not/here.csv", None),
            Err(Error::Io { .. })
        ));
    }
}
