use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::blackbox::ModelKind;
use crate::dataset::BinningMap;
use crate::error::{Error, Result};
use crate::fidelity::ImitationCurve;
use crate::rules::{Condition, Rule, RuleStats, ScoredRule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub attribute: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub class: String,
    pub conditions: Vec<ConditionReport>,
    pub precision: f64,
    pub coverage: f64,
    pub rmi: f64,
    pub test_precision: Option<f64>,
    pub length: usize,
    pub cover_count: usize,
    pub correct_cover_count: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    /// Share of test rows the model assigns to this class.
    pub baseline: f64,
    /// Conditions mined for this class before the search.
    pub condition_count: usize,
    /// Distinct rules in the final population before refinement.
    pub evolved_count: usize,
    pub rules: Vec<RuleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    /// Derived per-stage seeds, keyed `stage` or `stage/class`.
    pub seeds: BTreeMap<String, u64>,
    pub config: Json,
    pub dataset_fingerprint: String,
    pub class_order: Vec<String>,
    pub model_kind: ModelKind,
    /// Saved model file name, relative to the report, when one was written.
    pub model_file: Option<String>,
    /// Agreement of model predictions with dataset labels on the test split.
    pub model_accuracy: Option<f64>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub out_of_range_values: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub classes: Vec<ClassReport>,
    pub imitation: ImitationCurve,
    pub binning: BinningMap,
    pub metadata: Metadata,
}

impl RuleReport {
    pub fn from_scored(rule: &ScoredRule, bins: &BinningMap, class_order: &[String]) -> Self {
        let conditions = rule
            .rule
            .conditions()
            .iter()
            .map(|c| ConditionReport {
                attribute: bins.name(c.attribute).to_string(),
                values: c
                    .values
                    .iter()
                    .map(|&v| bins.label(c.attribute, v).unwrap_or("?").to_string())
                    .collect(),
            })
            .collect();
        RuleReport {
            class: class_order[rule.rule.target()].clone(),
            conditions,
            precision: rule.stats.precision,
            coverage: rule.stats.coverage,
            rmi: rule.stats.rmi,
            test_precision: rule.test_precision,
            length: rule.stats.length,
            cover_count: rule.stats.cover,
            correct_cover_count: rule.stats.correct,
            text: rule.text.clone(),
        }
    }

    /// Rebuilds the rule against a binning map and class order.
    pub fn to_scored(&self, bins: &BinningMap, class_order: &[String]) -> Result<ScoredRule> {
        let target = class_order
            .iter()
            .position(|c| c == &self.class)
            .ok_or_else(|| Error::UnknownClass(self.class.clone()))?;
        let conditions = self
            .conditions
            .iter()
            .map(|c| {
                let col = bins.index_of(&c.attribute).ok_or_else(|| {
                    Error::SchemaMismatch(format!("unknown attribute {:?} in report", c.attribute))
                })?;
                let codes = c
                    .values
                    .iter()
                    .map(|v| {
                        bins.code_of_label(col, v).ok_or_else(|| {
                            Error::SchemaMismatch(format!("unknown bin {v:?} of {:?}", c.attribute))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Condition::new(col, codes)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoredRule {
            rule: Rule::new(conditions, target)?,
            stats: RuleStats {
                cover: self.cover_count,
                correct: self.correct_cover_count,
                precision: self.precision,
                coverage: self.coverage,
                rmi: self.rmi,
                length: self.length,
            },
            text: self.text.clone(),
            test_precision: self.test_precision,
        })
    }
}

impl Report {
    /// Rules of every class, in class order, rebuilt for scoring.
    pub fn scored_rules(&self) -> Result<Vec<Vec<ScoredRule>>> {
        let order = &self.metadata.class_order;
        self.classes
            .iter()
            .map(|c| {
                c.rules
                    .iter()
                    .map(|r| r.to_scored(&self.binning, order))
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "report schema_version {} is not supported (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Report::from_json(&text)
    }

    pub fn rule_count(&self) -> usize {
        self.classes.iter().map(|c| c.rules.len()).sum()
    }
}
