use fixedbitset::FixedBitSet;

use super::{Condition, Rule};
use crate::dataset::{BinnedDataset, Code, MISSING_CODE};
use crate::error::{Error, Result};

/// A set of row indices.
pub type RowSet = FixedBitSet;

/// `|a ∩ b| / |a ∪ b|`; two empty sets count as identical.
pub fn jaccard(a: &RowSet, b: &RowSet) -> f64 {
    let inter = a.intersection_count(b);
    let union = a.union_count(b);
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Per-(attribute, code) row bitsets of a binned dataset.
#[derive(Debug, Clone)]
pub struct CoverIndex {
    n_rows: usize,
    by_value: Vec<Vec<RowSet>>,
}

impl CoverIndex {
    pub fn new(data: &BinnedDataset) -> Self {
        let n = data.len();
        let by_value = (0..data.feature_count())
            .map(|c| {
                let col = data.column(c);
                let width = col
                    .iter()
                    .filter(|&&v| v != MISSING_CODE)
                    .max()
                    .map_or(0, |&m| m as usize + 1);
                let mut sets = vec![RowSet::with_capacity(n); width];
                for (row, &code) in col.iter().enumerate() {
                    if code != MISSING_CODE {
                        sets[code as usize].insert(row);
                    }
                }
                sets
            })
            .collect();
        CoverIndex {
            n_rows: n,
            by_value,
        }
    }

    pub fn len(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn feature_count(&self) -> usize {
        self.by_value.len()
    }

    pub fn empty_set(&self) -> RowSet {
        RowSet::with_capacity(self.n_rows)
    }

    pub fn full_set(&self) -> RowSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    /// Rows whose value in `attribute` is `code`.
    pub fn value_rows(&self, attribute: usize, code: Code) -> Result<RowSet> {
        let sets = self
            .by_value
            .get(attribute)
            .ok_or(Error::UnknownAttribute(attribute))?;
        Ok(sets
            .get(code as usize)
            .cloned()
            .unwrap_or_else(|| self.empty_set()))
    }

    /// OR of `value_rows` into `acc`.
    pub(crate) fn union_value_into(&self, attribute: usize, code: Code, acc: &mut RowSet) {
        if let Some(s) = self.by_value[attribute].get(code as usize) {
            acc.union_with(s);
        }
    }

    pub fn condition_cover(&self, condition: &Condition) -> Result<RowSet> {
        if condition.attribute >= self.by_value.len() {
            return Err(Error::UnknownAttribute(condition.attribute));
        }
        let mut acc = self.empty_set();
        for &code in &condition.values {
            self.union_value_into(condition.attribute, code, &mut acc);
        }
        Ok(acc)
    }

    /// Rows satisfying every condition of `rule`.
    pub fn cover(&self, rule: &Rule) -> Result<RowSet> {
        let mut iter = rule.conditions().iter();
        let first = iter.next().expect("rules are non-empty");
        let mut acc = self.condition_cover(first)?;
        for c in iter {
            acc.intersect_with(&self.condition_cover(c)?);
        }
        Ok(acc)
    }
}
