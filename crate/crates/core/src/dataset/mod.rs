//! Tabular data: schema, raw rows, interpretable bins and train/test splits.
//!
//! Rows always keep their RAW values; the model is queried on raw values and
//! the binned view exists only for the rule representation.

mod binning;
mod csv;
mod split;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) use self::binning::render_numeric_union;
pub use self::binning::{
    apply_bins, fit_entropy_bins, BinnedDataset, BinningMap, Code, ColumnBins, MISSING_CODE,
};
pub use self::csv::{load_csv, load_csv_str, load_schema, parse_value, MISSING_TOKENS};
pub use self::split::{split, Split, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
        }
    }
}

/// Column layout of a dataset.
///
/// `columns` lists the feature columns in file order. The sidecar JSON form
/// may also list the class column among `columns`; [`Schema::from_sidecar`]
/// strips it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub class_column: Option<String>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, class_column: Option<String>) -> Result<Self> {
        let schema = Schema {
            columns,
            class_column,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if c.name.trim().is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", c.name)));
            }
            if Some(&c.name) == self.class_column.as_ref() {
                return Err(Error::Schema(format!(
                    "class column {:?} listed as a feature",
                    c.name
                )));
            }
        }
        if self.columns.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Parses the sidecar document
    /// `{"columns":[{"name":..,"kind":..}],"class_column":..}`.
    pub fn from_sidecar(json: &str) -> Result<Self> {
        let mut schema: Schema = serde_json::from_str(json)?;
        if let Some(class) = &schema.class_column {
            schema.columns.retain(|c| &c.name != class);
        }
        schema.validate()?;
        Ok(schema)
    }
}

/// One raw cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
            Value::Missing => f.write_str("?"),
        }
    }
}

pub type Instance = Vec<Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Instance>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Instance>, labels: Option<Vec<String>>) -> Result<Self> {
        schema.validate()?;
        let p = schema.feature_count();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::SchemaMismatch(format!(
                    "row {i} has {} values, schema has {p}",
                    row.len()
                )));
            }
            for (value, col) in row.iter().zip(&schema.columns) {
                if col.kind == ColumnKind::Numeric {
                    if let Value::Text(s) = value {
                        return Err(Error::SchemaMismatch(format!(
                            "row {i}: non-numeric value {s:?} in numeric column {:?}",
                            col.name
                        )));
                    }
                }
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::SchemaMismatch(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Instance {
        &self.rows[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.schema.feature_count()
    }

    /// Distinct ground-truth labels in sorted order.
    pub fn label_set(&self) -> Vec<String> {
        self.labels
            .as_ref()
            .map(|l| {
                l.iter()
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub fn without_labels(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows.clone(),
            labels: None,
        }
    }

    /// Numeric view of column `j` (missing and text values skipped).
    pub fn numeric_column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(move |(i, r)| r[j].as_f64().map(|v| (i, v)))
    }

    /// SHA-256 over a canonical rendering of schema, rows and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.schema.columns {
            h.update(c.name.as_bytes());
            h.update([0u8, c.kind as u8]);
        }
        for (i, row) in self.rows.iter().enumerate() {
            for v in row {
                match v {
                    Value::Number(x) => {
                        h.update([1u8]);
                        h.update(x.to_bits().to_le_bytes());
                    }
                    Value::Text(s) => {
                        h.update([2u8]);
                        h.update(s.as_bytes());
                        h.update([0u8]);
                    }
                    Value::Missing => h.update([3u8]),
                }
            }
            if let Some(l) = &self.labels {
                h.update([4u8]);
                h.update(l[i].as_bytes());
                h.update([0u8]);
            }
        }
        hex::encode(h.finalize())
    }
}
