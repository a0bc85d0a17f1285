//! Conditions, rules and every per-rule statistic.
//!
//! A [`Condition`] constrains one attribute to a set of bin codes; a [`Rule`]
//! is a conjunction of conditions on distinct attributes plus a target class.
//! Statistics are always computed against the MODEL's predicted classes.

mod cover;
mod stats;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{BinningMap, Code};
use crate::error::{Error, Result};

pub use self::cover::{jaccard, CoverIndex, RowSet};
pub use self::stats::{rmi, rule_set_stats, ContingencyTable, RuleEvaluator, RuleStats, RMI_BOUND};

/// `attribute ∈ values`, with attribute as a feature index and values as bin
/// codes of that attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: usize,
    pub values: BTreeSet<Code>,
}

impl Condition {
    pub fn single(attribute: usize, value: Code) -> Self {
        Condition {
            attribute,
            values: BTreeSet::from([value]),
        }
    }

    pub fn new(attribute: usize, values: impl IntoIterator<Item = Code>) -> Result<Self> {
        let values: BTreeSet<Code> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::Config(format!(
                "condition on attribute {attribute} has no allowed values"
            )));
        }
        Ok(Condition { attribute, values })
    }

    pub fn matches(&self, code: Code) -> bool {
        self.values.contains(&code)
    }

    pub fn render(&self, bins: &BinningMap) -> String {
        let col = self.attribute;
        if col >= bins.len() {
            return format!("#{col} ∈ {:?}", self.values);
        }
        let codes: Vec<Code> = self.values.iter().copied().collect();
        if bins.is_numeric(col) {
            return crate::dataset::render_numeric_union(bins, col, &codes);
        }
        let labels: Vec<&str> = codes
            .iter()
            .map(|&c| bins.label(col, c).unwrap_or("?"))
            .collect();
        if labels.len() == 1 {
            format!("{} = {}", bins.name(col), labels[0])
        } else {
            format!("{} ∈ {{{}}}", bins.name(col), labels.join(", "))
        }
    }
}

/// A conjunction of conditions (one per attribute) predicting `target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    conditions: Vec<Condition>,
    target: usize,
}

impl Rule {
    pub fn new(mut conditions: Vec<Condition>, target: usize) -> Result<Self> {
        if conditions.is_empty() {
            return Err(Error::Config("a rule needs at least one condition".into()));
        }
        conditions.sort();
        for w in conditions.windows(2) {
            if w[0].attribute == w[1].attribute {
                return Err(Error::Config(format!(
                    "two conditions on attribute {}",
                    w[0].attribute
                )));
            }
        }
        if conditions.iter().any(|c| c.values.is_empty()) {
            return Err(Error::Config("condition without allowed values".into()));
        }
        Ok(Rule { conditions, target })
    }

    /// Builds a rule from possibly repeated attributes, OR-ing the allowed
    /// values of conditions that share an attribute.
    pub fn merged(conditions: impl IntoIterator<Item = Condition>, target: usize) -> Result<Self> {
        let mut merged: Vec<Condition> = Vec::new();
        let mut all: Vec<Condition> = conditions.into_iter().collect();
        all.sort();
        for c in all {
            match merged.last_mut() {
                Some(last) if last.attribute == c.attribute => last.values.extend(c.values),
                _ => merged.push(c),
            }
        }
        Rule::new(merged, target)
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Whether a binned instance satisfies every condition.
    pub fn matches(&self, codes: &[Code]) -> bool {
        self.conditions
            .iter()
            .all(|c| codes.get(c.attribute).is_some_and(|&v| c.matches(v)))
    }

    /// `IF a AND b THEN Predict class: y`
    pub fn render(&self, bins: &BinningMap, class_order: &[String]) -> String {
        let body: Vec<String> = self.conditions.iter().map(|c| c.render(bins)).collect();
        let class = class_order
            .get(self.target)
            .map_or_else(|| format!("#{}", self.target), Clone::clone);
        format!("IF {} THEN Predict class: {class}", body.join(" AND "))
    }
}

/// A rule with its train statistics and, once tested, its test precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRule {
    pub rule: Rule,
    pub stats: RuleStats,
    pub text: String,
    #[serde(default)]
    pub test_precision: Option<f64>,
}

/// Ranking used for RMI ordering: descending RMI, then higher precision,
/// then shorter rule, then rendering.
pub fn rank_cmp(a: &ScoredRule, b: &ScoredRule) -> Ordering {
    b.stats
        .rmi
        .total_cmp(&a.stats.rmi)
        .then(b.stats.precision.total_cmp(&a.stats.precision))
        .then(a.stats.length.cmp(&b.stats.length))
        .then_with(|| a.text.cmp(&b.text))
}
