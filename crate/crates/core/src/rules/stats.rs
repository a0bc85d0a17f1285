use serde::{Deserialize, Serialize};

use super::{CoverIndex, RowSet, Rule, ScoredRule};
use crate::dataset::{BinnedDataset, BinningMap};
use crate::error::{Error, Result};

/// Largest possible |RMI| for a 2x2 table, in nats.
pub const RMI_BOUND: f64 = std::f64::consts::LN_2;

/// Rule/class contingency counts.
///
/// `n11` rule and class, `n12` rule and other class, `n13` not rule and
/// class, `n14` neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub n11: u64,
    pub n12: u64,
    pub n13: u64,
    pub n14: u64,
}

impl ContingencyTable {
    pub fn new(n11: u64, n12: u64, n13: u64, n14: u64) -> Self {
        ContingencyTable { n11, n12, n13, n14 }
    }

    pub fn from_sets(cover: &RowSet, class_mask: &RowSet) -> Self {
        let n = cover.len() as u64;
        let covered = cover.count_ones(..) as u64;
        let in_class = class_mask.count_ones(..) as u64;
        let n11 = cover.intersection_count(class_mask) as u64;
        let n12 = covered - n11;
        let n13 = in_class - n11;
        ContingencyTable {
            n11,
            n12,
            n13,
            n14: n - n11 - n12 - n13,
        }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n12 + self.n13 + self.n14
    }

    /// `n11 / (n11 + n12)`, zero for an empty cover.
    pub fn precision(&self) -> f64 {
        ratio(self.n11, self.n11 + self.n12)
    }

    /// `n11 / (n11 + n13)`, zero when the class is absent.
    pub fn class_coverage(&self) -> f64 {
        ratio(self.n11, self.n11 + self.n13)
    }

    pub fn rmi(&self) -> Result<f64> {
        rmi(self)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Signed mutual information (natural log) between "rule fires" and
/// "instance is predicted as the target class". Positive when the rule is
/// positively associated with the class.
pub fn rmi(t: &ContingencyTable) -> Result<f64> {
    let n = t.total();
    if n == 0 {
        return Err(Error::EmptyContingency);
    }
    let n = n as f64;
    let rule = (t.n11 + t.n12) as f64;
    let not_rule = (t.n13 + t.n14) as f64;
    let class = (t.n11 + t.n13) as f64;
    let other = (t.n12 + t.n14) as f64;
    let term = |nij: u64, row: f64, col: f64| -> f64 {
        if nij == 0 {
            0.0
        } else {
            let nij = nij as f64;
            nij / n * (nij * n / (row * col)).ln()
        }
    };
    let mi = term(t.n11, rule, class)
        + term(t.n12, rule, other)
        + term(t.n13, not_rule, class)
        + term(t.n14, not_rule, other);
    // rounding can leave a tiny negative value for independent tables
    let mi = mi.max(0.0);
    let positive = (t.n11 as u128) * (t.n14 as u128) >= (t.n12 as u128) * (t.n13 as u128);
    Ok(if positive { mi } else { -mi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    /// Rows satisfying the rule.
    pub cover: usize,
    /// Covered rows predicted as the target.
    pub correct: usize,
    pub precision: f64,
    pub coverage: f64,
    pub rmi: f64,
    pub length: usize,
}

impl RuleStats {
    pub fn from_table(table: &ContingencyTable, length: usize) -> Result<Self> {
        Ok(RuleStats {
            cover: (table.n11 + table.n12) as usize,
            correct: table.n11 as usize,
            precision: table.precision(),
            coverage: table.class_coverage(),
            rmi: table.rmi()?,
            length,
        })
    }
}

/// Evaluates rules against one binned dataset and the model's predicted
/// class of each row.
#[derive(Debug, Clone)]
pub struct RuleEvaluator {
    index: CoverIndex,
    labels: Vec<usize>,
    class_masks: Vec<RowSet>,
    bins: BinningMap,
    class_order: Vec<String>,
}

impl RuleEvaluator {
    pub fn new(
        data: &BinnedDataset,
        labels: &[usize],
        bins: &BinningMap,
        class_order: &[String],
    ) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.len()
            )));
        }
        if data.feature_count() != bins.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} binned columns, binning map has {}",
                data.feature_count(),
                bins.len()
            )));
        }
        let k = class_order.len();
        let mut class_masks = vec![RowSet::with_capacity(data.len()); k];
        for (row, &c) in labels.iter().enumerate() {
            let mask = class_masks
                .get_mut(c)
                .ok_or_else(|| Error::UnknownClass(format!("#{c}")))?;
            mask.insert(row);
        }
        Ok(RuleEvaluator {
            index: CoverIndex::new(data),
            labels: labels.to_vec(),
            class_masks,
            bins: bins.clone(),
            class_order: class_order.to_vec(),
        })
    }

    pub fn index(&self) -> &CoverIndex {
        &self.index
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn bins(&self) -> &BinningMap {
        &self.bins
    }

    pub fn class_order(&self) -> &[String] {
        &self.class_order
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_mask(&self, class: usize) -> Result<&RowSet> {
        self.class_masks
            .get(class)
            .ok_or_else(|| Error::UnknownClass(format!("#{class}")))
    }

    /// Share of rows predicted as `class`.
    pub fn class_frequency(&self, class: usize) -> Result<f64> {
        let n = self.len();
        let c = self.class_mask(class)?.count_ones(..);
        Ok(if n == 0 { 0.0 } else { c as f64 / n as f64 })
    }

    pub fn cover(&self, rule: &Rule) -> Result<RowSet> {
        self.index.cover(rule)
    }

    /// Covered rows whose prediction equals the rule's target.
    pub fn correct_cover(&self, rule: &Rule) -> Result<RowSet> {
        let mut cover = self.cover(rule)?;
        cover.intersect_with(self.class_mask(rule.target())?);
        Ok(cover)
    }

    pub fn table_for(&self, cover: &RowSet, class: usize) -> Result<ContingencyTable> {
        Ok(ContingencyTable::from_sets(cover, self.class_mask(class)?))
    }

    pub fn contingency(&self, rule: &Rule) -> Result<ContingencyTable> {
        self.table_for(&self.cover(rule)?, rule.target())
    }

    pub fn stats(&self, rule: &Rule) -> Result<RuleStats> {
        RuleStats::from_table(&self.contingency(rule)?, rule.len())
    }

    pub fn render(&self, rule: &Rule) -> String {
        rule.render(&self.bins, &self.class_order)
    }

    pub fn score(&self, rule: Rule) -> Result<ScoredRule> {
        let stats = self.stats(&rule)?;
        let text = self.render(&rule);
        Ok(ScoredRule {
            rule,
            stats,
            text,
            test_precision: None,
        })
    }

    /// Precision of `rule` on this data, used as test precision.
    pub fn precision(&self, rule: &Rule) -> Result<f64> {
        Ok(self.contingency(rule)?.precision())
    }
}

/// Precision and class coverage of a rule set under union semantics: a row
/// is covered when at least one rule fires.
pub fn rule_set_stats(evaluator: &RuleEvaluator, rules: &[Rule]) -> Result<(f64, f64)> {
    let Some(first) = rules.first() else {
        return Ok((0.0, 0.0));
    };
    let target = first.target();
    let mut union = evaluator.index().empty_set();
    for r in rules {
        if r.target() != target {
            return Err(Error::MixedClasses(target, r.target()));
        }
        union.union_with(&evaluator.cover(r)?);
    }
    let t = evaluator.table_for(&union, target)?;
    Ok((t.precision(), t.class_coverage()))
}
