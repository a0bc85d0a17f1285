mod common;

use common::{exhaustive_best, jaccard_rows, mi_oracle, random_rule, scan, synthetic};
use magix_core::evolve::{encode, evolve_class, FitnessEvaluator, GaConfig};
use magix_core::refine::{baseline_filter, drop_dominated, sort_and_dedup, RefineConfig};
use magix_core::rules::{rmi, Condition, ContingencyTable, Rule, ScoredRule, RMI_BOUND};
use magix_core::seed;
use proptest::prelude::*;
use rand::Rng as _;

fn table() -> impl Strategy<Value = [u64; 4]> {
    let cell = prop_oneof![Just(0u64), 1u64..20, 0u64..5000];
    [cell.clone(), cell.clone(), cell.clone(), cell]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rmi_matches_four_term_sum(t in table()) {
        let ct = ContingencyTable::new(t[0], t[1], t[2], t[3]);
        if t.iter().all(|&v| v == 0) {
            prop_assert!(rmi(&ct).is_err());
        } else {
            let got = rmi(&ct).unwrap();
            let want = mi_oracle(t);
            prop_assert!((got - want).abs() <= 1e-12, "{t:?}: {got} vs {want}");
            prop_assert!(got.abs() <= RMI_BOUND + 1e-12);
            if want.abs() > 1e-12 {
                prop_assert_eq!(got > 0.0, (t[0] as u128) * (t[3] as u128) >= (t[1] as u128) * (t[2] as u128));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cover_and_stats_match_row_scan(data_seed in any::<u64>(), rule_seed in any::<u64>()) {
        let s = synthetic(500, 6, 4, 3, false, data_seed);
        let ev = s.evaluator();
        let mut rng = seed::rng(rule_seed);
        for _ in 0..50 {
            let rule = random_rule(&s, 4, &mut rng);
            let want = scan(&s, &rule);
            let cover: Vec<usize> = ev.cover(&rule).unwrap().ones().collect();
            let correct: Vec<usize> = ev.correct_cover(&rule).unwrap().ones().collect();
            prop_assert_eq!(&cover, &want.cover);
            prop_assert_eq!(&correct, &want.correct);
            let stats = ev.stats(&rule).unwrap();
            prop_assert_eq!(stats.precision, want.precision);
            prop_assert_eq!(stats.coverage, want.coverage);
            prop_assert!((stats.rmi - mi_oracle(want.table)).abs() <= 1e-12);
        }
    }

    #[test]
    fn adding_a_condition_never_grows_the_cover(data_seed in any::<u64>(), rule_seed in any::<u64>()) {
        let s = synthetic(300, 5, 4, 2, false, data_seed);
        let ev = s.evaluator();
        let mut rng = seed::rng(rule_seed);
        for _ in 0..30 {
            let base = random_rule(&s, 3, &mut rng);
            let used: Vec<usize> = base.conditions().iter().map(|c| c.attribute).collect();
            let Some(extra) = (0..5).find(|a| !used.contains(a)) else { continue };
            let mut conds = base.conditions().to_vec();
            conds.push(Condition::single(extra, rng.gen_range(0..s.cardinality(extra))));
            let longer = Rule::new(conds, base.target()).unwrap();
            prop_assert!(ev.cover(&longer).unwrap().is_subset(&ev.cover(&base).unwrap()));
            prop_assert!(ev.correct_cover(&longer).unwrap().is_subset(&ev.correct_cover(&base).unwrap()));
        }
    }

    #[test]
    fn drop_dominated_keeps_the_correct_cover_union(data_seed in any::<u64>(), rule_seed in any::<u64>()) {
        let s = synthetic(200, 5, 3, 2, false, data_seed);
        let ev = s.evaluator();
        let mut rng = seed::rng(rule_seed);
        let rules: Vec<ScoredRule> = (0..40)
            .map(|_| {
                let r = random_rule(&s, 3, &mut rng);
                let r = Rule::new(r.conditions().to_vec(), 0).unwrap();
                ev.score(r).unwrap()
            })
            .collect();
        let union = |rs: &[ScoredRule]| {
            let mut rows: Vec<usize> = rs.iter().flat_map(|r| scan(&s, &r.rule).correct).collect();
            rows.sort_unstable();
            rows.dedup();
            rows
        };
        let kept = drop_dominated(rules.clone(), &ev).unwrap();
        prop_assert!(kept.len() <= rules.len());
        prop_assert_eq!(union(&kept), union(&rules));
    }

    #[test]
    fn dedup_output_overlaps_at_most_threshold(data_seed in any::<u64>(), rule_seed in any::<u64>()) {
        let s = synthetic(200, 5, 3, 2, false, data_seed);
        let ev = s.evaluator();
        let mut rng = seed::rng(rule_seed);
        let rules: Vec<ScoredRule> = (0..40)
            .map(|_| ev.score(random_rule(&s, 2, &mut rng)).unwrap())
            .collect();
        let cfg = RefineConfig::default();
        let kept = sort_and_dedup(rules, &ev, &cfg).unwrap();
        prop_assert!(kept.len() <= cfg.max_rules_per_class);
        let covers: Vec<Vec<usize>> = kept.iter().map(|r| scan(&s, &r.rule).cover).collect();
        for i in 0..covers.len() {
            for j in i + 1..covers.len() {
                prop_assert!(jaccard_rows(&covers[i], &covers[j]) <= cfg.jaccard_threshold);
            }
        }
        prop_assert!(kept.windows(2).all(|w| w[0].stats.rmi >= w[1].stats.rmi));
    }

    #[test]
    fn baseline_filter_keeps_only_rules_at_or_above_baseline(data_seed in any::<u64>(), rule_seed in any::<u64>()) {
        let s = synthetic(200, 4, 3, 3, false, data_seed);
        let ev = s.evaluator();
        let mut rng = seed::rng(rule_seed);
        let rules: Vec<ScoredRule> = (0..40)
            .map(|_| ev.score(random_rule(&s, 2, &mut rng)).unwrap())
            .collect();
        for r in baseline_filter(rules, &ev, &RefineConfig::default()).unwrap() {
            let base = ev.class_frequency(r.rule.target()).unwrap();
            prop_assert!(r.test_precision.unwrap() >= base - 1e-12);
        }
    }
}

/// Every single-value condition over all attributes.
fn all_single_conditions(s: &common::Synthetic) -> Vec<Condition> {
    (0..s.binned.feature_count())
        .flat_map(|a| (0..s.cardinality(a)).map(move |v| Condition::single(a, v)))
        .collect()
}

#[test]
fn ga_recovers_planted_separator() {
    for data_seed in 0..4 {
        let s = synthetic(400, 5, 4, 2, true, data_seed);
        let ev = s.evaluator();
        let conditions = all_single_conditions(&s);
        let cfg = GaConfig {
            population_size: 80,
            generations: 40,
            seed: data_seed,
            ..GaConfig::full()
        };
        let (best, active) = exhaustive_best(&s, &conditions, 0, cfg.length_weight);
        assert_eq!(active.len(), 1);
        assert_eq!(conditions[active[0]], Condition::single(0, 0));

        let evo = evolve_class(&conditions, 0, &ev, &cfg).unwrap();
        let top = &evo.rules[0];
        let fitness = FitnessEvaluator::new(&conditions, 0, &ev, &cfg)
            .unwrap()
            .compute(&encode(&top.rule, &conditions));
        assert!(
            (fitness - best).abs() <= 1e-12,
            "seed {data_seed}: {fitness} vs {best}"
        );
        assert_eq!(top.rule.conditions(), &[Condition::single(0, 0)]);
        assert!((evo.history.last().unwrap().best - best).abs() <= 1e-12);
    }
}

#[test]
fn ga_history_best_never_decreases() {
    let s = synthetic(300, 6, 4, 3, false, 9);
    let ev = s.evaluator();
    let conditions = all_single_conditions(&s);
    let cfg = GaConfig {
        population_size: 40,
        generations: 25,
        ..GaConfig::full()
    };
    let evo = evolve_class(&conditions, 1, &ev, &cfg).unwrap();
    assert_eq!(evo.history.len(), cfg.generations + 1);
    assert!(evo.history.windows(2).all(|w| w[1].best >= w[0].best));
}
