use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Row indices of a train/test partition (each sorted ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Split {
    pub fn datasets(&self, data: &Dataset) -> (Dataset, Dataset) {
        (data.subset(&self.train), data.subset(&self.test))
    }
}

fn take_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) + 0.5 - 1e-9).floor() as usize
}

/// Seeded, stratified train/test split.
///
/// Strata are `strata` when given (model predictions), otherwise the
/// dataset's labels, otherwise none. A stratum with fewer than two rows goes
/// entirely to train with a warning; when every stratum is a singleton the
/// split falls back to an unstratified shuffle.
pub fn split(data: &Dataset, spec: &SplitSpec, strata: Option<&[String]>) -> Result<Split> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let strata = strata.or(data.labels());
    if let Some(s) = strata {
        if s.len() != data.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} strata for {} rows",
                s.len(),
                data.len()
            )));
        }
    }
    let mut rng = seed::rng(seed::mix(spec.seed, 0x5e11));
    let mut warnings = Vec::new();

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    match strata {
        Some(s) => {
            for (i, class) in s.iter().enumerate() {
                groups.entry(class.as_str()).or_default().push(i);
            }
        }
        None => {
            groups.insert("", (0..data.len()).collect());
        }
    }
    if groups.len() > 1 && groups.values().all(|g| g.len() < 2) {
        groups = BTreeMap::from([("", (0..data.len()).collect())]);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in groups {
        if members.len() < 2 && !class.is_empty() {
            let msg = format!("class {class:?} has fewer than 2 rows; placed entirely in train");
            log::warn!("{msg}");
            warnings.push(msg);
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let k = take_count(members.len(), spec.train_fraction);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnSpec, Schema, Value};

    fn data(labels: Vec<&str>) -> Dataset {
        let schema = Schema::new(vec![ColumnSpec::new("x", ColumnKind::Numeric)], None).unwrap();
        let rows = (0..labels.len())
            .map(|i| vec![Value::Number(i as f64)])
            .collect();
        Dataset::new(
            schema,
            rows,
            Some(labels.into_iter().map(String::from).collect()),
        )
        .unwrap()
    }

    fn iris_like() -> Dataset {
        let mut labels = Vec::new();
        for c in ["a", "b", "c"] {
            labels.extend(std::iter::repeat_n(c, 50));
        }
        data(labels)
    }

    #[test]
    fn cardinality_and_determinism() {
        let d = iris_like();
        let spec = SplitSpec {
            train_fraction: 0.7,
            seed: 7,
        };
        let a = split(&d, &spec, None).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (105, 45));
        assert_eq!(a, split(&d, &spec, None).unwrap());
        let labels = d.labels().unwrap();
        for class in ["a", "b", "c"] {
            assert_eq!(a.train.iter().filter(|&&i| labels[i] == class).count(), 35);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let d = iris_like();
        let a = split(
            &d,
            &SplitSpec {
                train_fraction: 0.7,
                seed: 1,
            },
            None,
        )
        .unwrap();
        let b = split(
            &d,
            &SplitSpec {
                train_fraction: 0.7,
                seed: 2,
            },
            None,
        )
        .unwrap();
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn two_singleton_classes_split_evenly() {
        let d = data(vec!["a", "b"]);
        let s = split(
            &d,
            &SplitSpec {
                train_fraction: 0.5,
                seed: 3,
            },
            None,
        )
        .unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let d = data(vec!["a", "a", "a", "a", "b"]);
        let s = split(
            &d,
            &SplitSpec {
                train_fraction: 0.5,
                seed: 3,
            },
            None,
        )
        .unwrap();
        assert!(s.train.contains(&4));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn strata_override_labels() {
        let d = iris_like();
        let strata: Vec<String> = (0..150)
            .map(|i| if i < 75 { "x" } else { "y" }.to_string())
            .collect();
        let s = split(
            &d,
            &SplitSpec {
                train_fraction: 0.6,
                seed: 1,
            },
            Some(&strata),
        )
        .unwrap();
        assert_eq!(s.train.iter().filter(|&&i| i < 75).count(), 45);
    }

    #[test]
    fn rejects_bad_fraction() {
        let d = iris_like();
        assert!(split(
            &d,
            &SplitSpec {
                train_fraction: 1.0,
                seed: 0
            },
            None
        )
        .is_err());
        assert!(split(
            &d,
            &SplitSpec {
                train_fraction: 0.0,
                seed: 0
            },
            None
        )
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_a_partition(
                classes in proptest::collection::vec(0u8..4, 1..200),
                frac in 0.05f64..0.95,
                seed in any::<u64>(),
            ) {
                let labels: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
                let d = data(labels.iter().map(String::as_str).collect());
                let s = split(&d, &SplitSpec { train_fraction: frac, seed }, None).unwrap();
                let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
            }
        }
    }
}
