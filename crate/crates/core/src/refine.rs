//! Post-processing of a class's evolved rules: domination pruning, the
//! held-out baseline test, and RMI ranking with overlap deduplication.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::{jaccard, rank_cmp, RowSet, RuleEvaluator, ScoredRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub jaccard_threshold: f64,
    pub max_rules_per_class: usize,
    pub require_above_baseline: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            jaccard_threshold: 0.5,
            max_rules_per_class: 20,
            require_above_baseline: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "refine.jaccard_threshold must lie in (0, 1], got {}",
                self.jaccard_threshold
            )));
        }
        if self.max_rules_per_class == 0 {
            return Err(Error::Config(
                "refine.max_rules_per_class must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Removes every rule whose correct-cover is contained in the correct-cover
/// of an already retained rule that is at least as precise.
///
/// Rules are visited by descending precision (then larger correct-cover,
/// shorter length, rendering), so of two identical rules the first survives.
/// Only retained rules can dominate.
pub fn drop_dominated(rules: Vec<ScoredRule>, train: &RuleEvaluator) -> Result<Vec<ScoredRule>> {
    let mut rules = rules;
    rules.sort_by(|a, b| {
        b.stats
            .precision
            .total_cmp(&a.stats.precision)
            .then(b.stats.correct.cmp(&a.stats.correct))
            .then(a.stats.length.cmp(&b.stats.length))
            .then_with(|| a.text.cmp(&b.text))
    });
    let mut kept: Vec<(ScoredRule, RowSet)> = Vec::with_capacity(rules.len());
    for rule in rules {
        let cc = train.correct_cover(&rule.rule)?;
        let dominated = kept.iter().any(|(k, kcc)| {
            k.rule.target() == rule.rule.target()
                && rule.stats.precision <= k.stats.precision
                && cc.is_subset(kcc)
        });
        if !dominated {
            kept.push((rule, cc));
        }
    }
    Ok(kept.into_iter().map(|(r, _)| r).collect())
}

/// Annotates each rule with its precision on the test data and, when
/// `cfg.require_above_baseline` is set, drops rules whose test precision is
/// below the test-set frequency of their class under the model.
pub fn baseline_filter(
    rules: Vec<ScoredRule>,
    test: &RuleEvaluator,
    cfg: &RefineConfig,
) -> Result<Vec<ScoredRule>> {
    let mut out = Vec::with_capacity(rules.len());
    for mut rule in rules {
        let t = test.contingency(&rule.rule)?;
        rule.test_precision = Some(t.precision());
        // precision >= baseline, compared exactly:
        // n11 / (n11 + n12) >= (n11 + n13) / N
        let lhs = u128::from(t.n11) * u128::from(t.total());
        let rhs = u128::from(t.n11 + t.n13) * u128::from(t.n11 + t.n12);
        let passes = if t.n11 + t.n12 == 0 {
            t.n11 + t.n13 == 0
        } else {
            lhs >= rhs
        };
        if !cfg.require_above_baseline || passes {
            out.push(rule);
        }
    }
    Ok(out)
}

/// Ranks rules by RMI (ties: precision, length, rendering) and keeps a rule
/// only if its train cover overlaps every kept rule's cover by at most the
/// Jaccard threshold, up to `max_rules_per_class` rules.
pub fn sort_and_dedup(
    rules: Vec<ScoredRule>,
    train: &RuleEvaluator,
    cfg: &RefineConfig,
) -> Result<Vec<ScoredRule>> {
    let mut rules = rules;
    rules.sort_by(rank_cmp);
    let mut kept: Vec<(ScoredRule, RowSet)> = Vec::new();
    for rule in rules {
        if kept.len() == cfg.max_rules_per_class {
            break;
        }
        let cover = train.cover(&rule.rule)?;
        if kept
            .iter()
            .all(|(_, k)| jaccard(&cover, k) <= cfg.jaccard_threshold)
        {
            kept.push((rule, cover));
        }
    }
    Ok(kept.into_iter().map(|(r, _)| r).collect())
}

/// The three passes in order.
pub fn refine_class(
    rules: Vec<ScoredRule>,
    train: &RuleEvaluator,
    test: &RuleEvaluator,
    cfg: &RefineConfig,
) -> Result<Vec<ScoredRule>> {
    let rules = drop_dominated(rules, train)?;
    let rules = baseline_filter(rules, test, cfg)?;
    sort_and_dedup(rules, train, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fit_entropy_bins, load_csv_str, BinnedDataset};
    use crate::rules::{Condition, Rule};

    /// One categorical column whose code equals the row index, so a rule's
    /// cover is exactly the set of codes it allows.
    fn evaluator(labels: &[usize]) -> RuleEvaluator {
        let n = labels.len();
        let data = BinnedDataset::from_columns(vec![(0..n as u32).collect()]);
        let mut text = String::from("id,class\n");
        for i in 0..n {
            text.push_str(&format!("r{i:02},k\n"));
        }
        let d = load_csv_str(&text, None).unwrap();
        let bins = fit_entropy_bins(&d, &vec![0; n], 4).unwrap();
        RuleEvaluator::new(&data, labels, &bins, &["a".into(), "b".into()]).unwrap()
    }

    fn rule(ev: &RuleEvaluator, rows: &[u32], target: usize) -> ScoredRule {
        ev.score(
            Rule::new(
                vec![Condition::new(0, rows.iter().copied()).unwrap()],
                target,
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn labels_with(class_rows: &[usize], n: usize) -> Vec<usize> {
        (0..n)
            .map(|i| usize::from(!class_rows.contains(&i)))
            .collect()
    }

    #[test]
    fn subset_with_lower_precision_is_dropped() {
        let ev = evaluator(&labels_with(&[1, 2, 3, 9], 12));
        let a = rule(&ev, &[1, 2, 3], 0);
        let b = rule(&ev, &[2, 3, 4], 0);
        assert!(b.stats.precision < a.stats.precision);
        let out = drop_dominated(vec![b, a.clone()], &ev).unwrap();
        assert_eq!(out, vec![a.clone()]);

        let c = rule(&ev, &[2, 3, 9, 10], 0);
        let out = drop_dominated(vec![a.clone(), c.clone()], &ev).unwrap();
        assert_eq!(out.len(), 2);

        let out = drop_dominated(vec![a.clone(), a.clone()], &ev).unwrap();
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn baseline_is_strict_less_than() {
        // class a is predicted on 4 of 12 rows: baseline 1/3
        let ev = evaluator(&labels_with(&[0, 1, 2, 3], 12));
        let high = rule(&ev, &[0, 1, 2], 0);
        let equal = rule(&ev, &[3, 4, 5], 0);
        let low = rule(&ev, &[3, 4, 5, 6, 7], 0);
        let cfg = RefineConfig::default();
        let out = baseline_filter(vec![high, equal, low.clone()], &ev, &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].test_precision, Some(1.0));
        assert!((out[1].test_precision.unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let off = RefineConfig {
            require_above_baseline: false,
            ..cfg
        };
        assert_eq!(baseline_filter(vec![low], &ev, &off).unwrap().len(), 1);
    }

    #[test]
    fn empty_test_cover_is_dropped() {
        let ev = evaluator(&labels_with(&[0, 1], 6));
        let none = ev
            .score(Rule::new(vec![Condition::single(0, 40)], 0).unwrap())
            .unwrap();
        let out = baseline_filter(vec![none], &ev, &RefineConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn jaccard_dedup_examples() {
        let ev = evaluator(&labels_with(&(1..=10).collect::<Vec<_>>(), 14));
        let cfg = RefineConfig::default();
        let a = rule(&ev, &[1, 2, 3, 4, 5, 6], 0);
        let b = rule(&ev, &[5, 6, 7, 8, 9, 10], 0);
        assert_eq!(sort_and_dedup(vec![a, b], &ev, &cfg).unwrap().len(), 2);

        let big = rule(&ev, &(1..=10).collect::<Vec<_>>(), 0);
        let small = rule(&ev, &(1..=7).collect::<Vec<_>>(), 0);
        let out = sort_and_dedup(vec![small, big.clone()], &ev, &cfg).unwrap();
        assert_eq!(out, vec![big.clone()]);

        let out = sort_and_dedup(vec![big.clone(), big.clone()], &ev, &cfg).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn ranking_and_cap() {
        let ev = evaluator(&labels_with(&(0..10).collect::<Vec<_>>(), 40));
        let rules: Vec<ScoredRule> = (0..10).map(|i| rule(&ev, &[i], 0)).collect();
        let cfg = RefineConfig {
            max_rules_per_class: 3,
            ..Default::default()
        };
        let out = sort_and_dedup(rules, &ev, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        // equal RMI, precision and length: rendering order decides
        let texts: Vec<&str> = out.iter().map(|r| r.text.as_str()).collect();
        let mut sorted = texts.clone();
        sorted.sort();
        assert_eq!(texts, sorted);
        assert!(out.windows(2).all(|w| w[0].stats.rmi >= w[1].stats.rmi));
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig {
            jaccard_threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RefineConfig {
            jaccard_threshold: 1.0,
            ..Default::default()
        }
        .validate()
        .is_ok());
        assert!(RefineConfig {
            max_rules_per_class: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
