//! Built-in random forest: bootstrap samples, Gini splits over `sqrt(p)`
//! candidate features per node, leaf class frequencies averaged across trees.
//!
//! Categorical columns are ordinal-encoded against the sorted training
//! vocabulary. Missing and unseen values encode as NaN and always take the
//! right branch.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::dataset::{ColumnKind, ColumnSpec, Dataset, Instance, Value};
use crate::error::{Error, Result};
use crate::seed;

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 500,
            min_samples_split: 2,
            min_samples_leaf: 1,
            seed: 0,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count < 1 {
            return Err(Error::Config("tree_count must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { distribution } => return distribution,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    format_version: u32,
    class_order: Vec<String>,
    features: Vec<ColumnSpec>,
    /// Ordinal vocabulary per feature (empty for numeric features).
    categories: Vec<Vec<String>>,
    config: ForestConfig,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn features(&self) -> &[ColumnSpec] {
        &self.features
    }

    fn encode(&self, x: &Instance) -> Result<Vec<f64>> {
        x.iter()
            .zip(&self.features)
            .zip(&self.categories)
            .map(|((v, spec), vocab)| match (spec.kind, v) {
                (_, Value::Missing) => Ok(f64::NAN),
                (ColumnKind::Numeric, Value::Number(n)) => Ok(*n),
                (ColumnKind::Numeric, Value::Text(s)) => s.trim().parse::<f64>().map_err(|_| {
                    Error::SchemaMismatch(format!(
                        "non-numeric {s:?} for numeric feature {:?}",
                        spec.name
                    ))
                }),
                (ColumnKind::Categorical, v) => {
                    let s = match v {
                        Value::Text(s) => s.clone(),
                        other => other.to_string(),
                    };
                    Ok(vocab.binary_search(&s).map_or(f64::NAN, |i| i as f64))
                }
            })
            .collect()
    }

    fn proba_encoded(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.class_order.len()];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf(x)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let forest: RandomForest = serde_json::from_str(json)?;
        if forest.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                forest.format_version
            )));
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Classifier for RandomForest {
    fn class_order(&self) -> &[String] {
        &self.class_order
    }

    fn feature_count(&self) -> usize {
        self.features.len()
    }

    fn predict_proba_raw(&self, instances: &[Instance]) -> Result<Vec<Vec<f64>>> {
        let encoded: Vec<Vec<f64>> = instances
            .iter()
            .map(|x| self.encode(x))
            .collect::<Result<_>>()?;
        let out = if encoded.len() >= 64 {
            encoded.par_iter().map(|x| self.proba_encoded(x)).collect()
        } else {
            encoded.iter().map(|x| self.proba_encoded(x)).collect()
        };
        Ok(out)
    }
}

struct TreeBuilder<'a> {
    // column-major encoded features
    columns: &'a [Vec<f64>],
    labels: &'a [usize],
    classes: usize,
    cfg: &'a ForestConfig,
    max_features: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn distribution(&self, samples: &[usize]) -> Vec<f64> {
        let mut d = vec![0.0; self.classes];
        for &s in samples {
            d[self.labels[s]] += 1.0;
        }
        let n = samples.len() as f64;
        d.iter_mut().for_each(|v| *v /= n);
        d
    }

    /// Best split on one feature as (score, threshold), where larger score
    /// means lower weighted Gini impurity.
    fn best_on_feature(&self, f: usize, samples: &[usize]) -> Option<(f64, f64)> {
        let col = &self.columns[f];
        let mut present: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        let mut nan_counts = vec![0usize; self.classes];
        for &s in samples {
            if col[s].is_nan() {
                nan_counts[self.labels[s]] += 1;
            } else {
                present.push((col[s], self.labels[s]));
            }
        }
        if present.len() < 2 {
            return None;
        }
        present.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = samples.len();
        let mut right = nan_counts;
        for &(_, y) in &present {
            right[y] += 1;
        }
        let mut left = vec![0usize; self.classes];
        let mut left_sq = 0.0f64;
        let mut right_sq: f64 = right.iter().map(|&c| (c * c) as f64).sum();
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..present.len() - 1 {
            let y = present[i].1;
            left_sq += (2 * left[y] + 1) as f64;
            right_sq -= (2 * right[y] - 1) as f64;
            left[y] += 1;
            right[y] -= 1;
            let (a, b) = (present[i].0, present[i + 1].0);
            if a >= b {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let score = left_sq / nl as f64 + right_sq / nr as f64;
            if best.is_none_or(|(s, _)| score > s + 1e-12) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((score, threshold));
            }
        }
        best
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize, rng: &mut impl Rng) -> usize {
        let id = self.nodes.len();
        let dist = self.distribution(&samples);
        let pure = dist.iter().filter(|&&p| p > 0.0).count() <= 1;
        let depth_reached = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure
            || depth_reached
            || samples.len() < self.cfg.min_samples_split
            || samples.len() < 2 * self.cfg.min_samples_leaf
        {
            self.nodes.push(Node::Leaf { distribution: dist });
            return id;
        }
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            if let Some((score, threshold)) = self.best_on_feature(f, &samples) {
                if best.is_none_or(|(s, _, _)| score > s + 1e-12) {
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            self.nodes.push(Node::Leaf { distribution: dist });
            return id;
        };
        let col = &self.columns[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&s| col[s] <= threshold);
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Trains a forest on `train` with class labels `labels`.
pub fn train_forest(
    train: &Dataset,
    labels: &[String],
    cfg: &ForestConfig,
) -> Result<RandomForest> {
    cfg.validate()?;
    if labels.len() != train.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            train.len()
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let class_order: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_order.len() < 2 {
        return Err(Error::SingleClass);
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| class_order.binary_search(l).expect("label in class order"))
        .collect();

    let features = train.schema().columns.clone();
    let categories: Vec<Vec<String>> = features
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec.kind {
            ColumnKind::Numeric => Vec::new(),
            ColumnKind::Categorical => train
                .rows()
                .iter()
                .filter(|r| !r[j].is_missing())
                .map(|r| match &r[j] {
                    Value::Text(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();

    let mut forest = RandomForest {
        format_version: FOREST_FORMAT_VERSION,
        class_order,
        features,
        categories,
        config: cfg.clone(),
        trees: Vec::new(),
    };
    let rows: Vec<Vec<f64>> = train
        .rows()
        .iter()
        .map(|r| forest.encode(r))
        .collect::<Result<_>>()?;
    let p = forest.features.len();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let max_features = ((p as f64).sqrt().floor() as usize).max(1);
    let n = train.len();
    let classes = forest.class_order.len();

    forest.trees = (0..cfg.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(cfg.seed, "tree", t as u64));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                columns: &columns,
                labels: &y,
                classes,
                cfg,
                max_features,
                nodes: Vec::new(),
            };
            builder.build(samples, 0, &mut rng);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{predict_class, predict_proba};
    use crate::dataset::{load_csv_str, Schema};

    fn toy() -> (Dataset, Vec<String>) {
        let mut csv = String::from("x,c,class\n");
        for i in 0..40 {
            let cls = if i < 20 { "lo" } else { "hi" };
            let c = if i % 2 == 0 { "red" } else { "blue" };
            csv.push_str(&format!("{i},{c},{cls}\n"));
        }
        let d = load_csv_str(&csv, None).unwrap();
        let labels = d.labels().unwrap().to_vec();
        (d, labels)
    }

    #[test]
    fn learns_threshold_and_is_deterministic() {
        let (d, labels) = toy();
        let cfg = ForestConfig {
            tree_count: 20,
            seed: 3,
            ..Default::default()
        };
        let a = train_forest(&d, &labels, &cfg).unwrap();
        let b = train_forest(&d, &labels, &cfg).unwrap();
        assert_eq!(a, b);
        let pred = predict_class(&a, d.rows()).unwrap();
        let truth: Vec<usize> = labels
            .iter()
            .map(|l| a.class_order().iter().position(|c| c == l).unwrap())
            .collect();
        assert_eq!(pred, truth);
        let x = vec![vec![Value::Number(5.0), Value::Text("red".into())]];
        assert_eq!(
            predict_proba(&a, &x).unwrap(),
            predict_proba(&a, &x).unwrap()
        );
    }

    #[test]
    fn depth_zero_single_tree_is_the_prior() {
        let mut csv = String::from("x,class\n");
        for i in 0..10 {
            csv.push_str(&format!("{i},{}\n", if i < 8 { "maj" } else { "min" }));
        }
        let d = load_csv_str(&csv, None).unwrap();
        let labels = d.labels().unwrap().to_vec();
        let cfg = ForestConfig {
            tree_count: 1,
            max_depth: Some(0),
            bootstrap: false,
            ..Default::default()
        };
        let f = train_forest(&d, &labels, &cfg).unwrap();
        let probs = predict_proba(&f, d.rows()).unwrap();
        let maj = f.class_order().iter().position(|c| c == "maj").unwrap();
        for p in probs {
            assert!((p[maj] - 0.8).abs() < 1e-12);
        }
        // with bootstrap the leaf is a resampled prior, identical for every row
        let cfg = ForestConfig {
            bootstrap: true,
            ..cfg
        };
        let f = train_forest(&d, &labels, &cfg).unwrap();
        let probs = predict_proba(&f, d.rows()).unwrap();
        assert!(probs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_class_is_an_error() {
        let d = load_csv_str("x,class\n1,a\n2,a\n", None).unwrap();
        let labels = d.labels().unwrap().to_vec();
        assert!(matches!(
            train_forest(&d, &labels, &ForestConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (d, labels) = toy();
        let cfg = ForestConfig {
            tree_count: 5,
            seed: 1,
            ..Default::default()
        };
        let f = train_forest(&d, &labels, &cfg).unwrap();
        let back = RandomForest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(
            predict_proba(&f, d.rows()).unwrap(),
            predict_proba(&back, d.rows()).unwrap()
        );
        let bad = f
            .to_json()
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":9");
        assert!(RandomForest::from_json(&bad).is_err());
    }

    #[test]
    fn missing_and_unseen_values_predict() {
        let (d, labels) = toy();
        let f = train_forest(
            &d,
            &labels,
            &ForestConfig {
                tree_count: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let x = vec![vec![Value::Missing, Value::Text("green".into())]];
        assert_eq!(predict_proba(&f, &x).unwrap().len(), 1);
        let _ = Schema::new(d.schema().columns.clone(), None).unwrap();
    }

    #[test]
    fn rejects_invalid_config() {
        let (d, labels) = toy();
        for cfg in [
            ForestConfig {
                tree_count: 0,
                ..Default::default()
            },
            ForestConfig {
                min_samples_split: 1,
                ..Default::default()
            },
            ForestConfig {
                min_samples_leaf: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                train_forest(&d, &labels, &cfg),
                Err(Error::Config(_))
            ));
        }
    }
}
