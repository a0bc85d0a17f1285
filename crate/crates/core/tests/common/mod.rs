//! Synthetic data and brute-force oracles shared by the property and
//! acceptance targets. Nothing here calls the library's cover or RMI code.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fixedbitset::FixedBitSet;
use magix_core::dataset::{apply_bins, fit_entropy_bins, load_csv_str, BinnedDataset, BinningMap};
use magix_core::rules::{Condition, Rule, RuleEvaluator};
use magix_core::seed;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// Categorical table with its binning and model labels.
pub struct Synthetic {
    pub binned: BinnedDataset,
    pub bins: BinningMap,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl Synthetic {
    pub fn evaluator(&self) -> RuleEvaluator {
        RuleEvaluator::new(&self.binned, &self.labels, &self.bins, &self.classes).unwrap()
    }

    pub fn codes(&self, row: usize) -> Vec<u32> {
        (0..self.binned.feature_count())
            .map(|c| self.binned.code(row, c))
            .collect()
    }

    pub fn cardinality(&self, col: usize) -> u32 {
        self.bins.bin_count(col) as u32
    }
}

/// `rows` rows of `features` categorical columns with `card` values each and
/// `classes` labels. With `planted`, feature 0 value 0 marks exactly the rows
/// of class 0.
pub fn synthetic(
    rows: usize,
    features: usize,
    card: u32,
    classes: usize,
    planted: bool,
    seed_value: u64,
) -> Synthetic {
    assert!(card <= 10 && classes >= 2);
    let mut rng = seed::rng(seed_value);
    let mut labels = Vec::with_capacity(rows);
    let mut cells: Vec<Vec<u32>> = Vec::with_capacity(rows);
    for i in 0..rows {
        // every value and class shows up at least once
        let mut row: Vec<u32> = (0..features)
            .map(|_| {
                if (i as u32) < card {
                    i as u32
                } else {
                    rng.gen_range(0..card)
                }
            })
            .collect();
        let mut label = if i < classes {
            i
        } else {
            rng.gen_range(0..classes)
        };
        if planted {
            if i < card as usize {
                label = usize::from(row[0] != 0);
            } else {
                row[0] = if label == 0 {
                    0
                } else {
                    rng.gen_range(1..card)
                };
            }
        }
        labels.push(label);
        cells.push(row);
    }
    let header: Vec<String> = (0..features).map(|j| format!("f{j}")).collect();
    let mut text = format!("{},class\n", header.join(","));
    for (row, label) in cells.iter().zip(&labels) {
        let vals: Vec<String> = row.iter().map(|v| format!("c{v}")).collect();
        text.push_str(&format!("{},k{label}\n", vals.join(",")));
    }
    let data = load_csv_str(&text, None).unwrap();
    let bins = fit_entropy_bins(&data, &labels, 8).unwrap();
    let binned = apply_bins(&data, &bins).unwrap();
    Synthetic {
        binned,
        bins,
        labels,
        classes: (0..classes).map(|c| format!("k{c}")).collect(),
    }
}

/// A rule over 1 to `max_len` distinct attributes with random value subsets.
pub fn random_rule(s: &Synthetic, max_len: usize, rng: &mut impl Rng) -> Rule {
    let p = s.binned.feature_count();
    let mut attrs: Vec<usize> = (0..p).collect();
    attrs.shuffle(rng);
    let len = rng.gen_range(1..=max_len.min(p));
    let conditions = attrs[..len]
        .iter()
        .map(|&a| {
            let card = s.cardinality(a);
            let mut values: Vec<u32> = (0..card).filter(|_| rng.gen_bool(0.4)).collect();
            if values.is_empty() {
                values.push(rng.gen_range(0..card));
            }
            Condition::new(a, values).unwrap()
        })
        .collect();
    Rule::new(conditions, rng.gen_range(0..s.classes.len())).unwrap()
}

/// Row-scan statistics of a rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanStats {
    pub cover: Vec<usize>,
    pub correct: Vec<usize>,
    pub precision: f64,
    pub coverage: f64,
    pub table: [u64; 4],
}

pub fn scan(s: &Synthetic, rule: &Rule) -> ScanStats {
    let n = s.binned.len();
    let target = rule.target();
    let fires = |row: usize| {
        rule.conditions()
            .iter()
            .all(|c| c.values.contains(&s.binned.code(row, c.attribute)))
    };
    let cover: Vec<usize> = (0..n).filter(|&r| fires(r)).collect();
    let correct: Vec<usize> = cover
        .iter()
        .copied()
        .filter(|&r| s.labels[r] == target)
        .collect();
    let in_class = s.labels.iter().filter(|&&l| l == target).count();
    let n11 = correct.len() as u64;
    let n12 = (cover.len() - correct.len()) as u64;
    let n13 = in_class as u64 - n11;
    let n14 = n as u64 - n11 - n12 - n13;
    ScanStats {
        precision: if cover.is_empty() {
            0.0
        } else {
            n11 as f64 / cover.len() as f64
        },
        coverage: if in_class == 0 {
            0.0
        } else {
            n11 as f64 / in_class as f64
        },
        cover,
        correct,
        table: [n11, n12, n13, n14],
    }
}

/// Mutual information of a 2x2 table as the four-term sum, signed by the
/// cross-product test.
pub fn mi_oracle(t: [u64; 4]) -> f64 {
    let [a, b, c, d] = t.map(|v| v as f64);
    let n = a + b + c + d;
    let term = |nij: f64, row: f64, col: f64| {
        if nij == 0.0 {
            0.0
        } else {
            nij / n * (nij * n / (row * col)).ln()
        }
    };
    let mi = term(a, a + b, a + c)
        + term(b, a + b, b + d)
        + term(c, c + d, a + c)
        + term(d, c + d, b + d);
    let positive = (t[0] as u128) * (t[3] as u128) >= (t[1] as u128) * (t[2] as u128);
    if positive {
        mi
    } else {
        -mi
    }
}

/// Exhaustive best fitness over every individual with one or two active bits.
/// Same-attribute bits are OR-ed, as the bit-string decoding does.
pub fn exhaustive_best(
    s: &Synthetic,
    conditions: &[Condition],
    target: usize,
    length_weight: f64,
) -> (f64, Vec<usize>) {
    let n = conditions.len();
    let fitness = |active: &[usize]| {
        let mut merged: Vec<Condition> = Vec::new();
        for &i in active {
            let c = &conditions[i];
            match merged.iter_mut().find(|m| m.attribute == c.attribute) {
                Some(m) => m.values.extend(c.values.iter().copied()),
                None => merged.push(c.clone()),
            }
        }
        let rule = Rule::new(merged, target).unwrap();
        mi_oracle(scan(s, &rule).table) - length_weight * active.len() as f64 / n as f64
    };
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for i in 0..n {
        let f = fitness(&[i]);
        if f > best.0 {
            best = (f, vec![i]);
        }
        for j in i + 1..n {
            let f = fitness(&[i, j]);
            if f > best.0 {
                best = (f, vec![i, j]);
            }
        }
    }
    best
}

pub fn rows_to_set(rows: &[usize], n: usize) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(n);
    for &r in rows {
        s.insert(r);
    }
    s
}

pub fn jaccard_rows(a: &[usize], b: &[usize]) -> f64 {
    let inter = a.iter().filter(|r| b.contains(r)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
