//! The classifier contract the pipeline depends on.
//!
//! Everything downstream talks to a model only through
//! [`Classifier::predict_proba_raw`] on RAW instances, wrapped by
//! [`predict_proba`] which validates every returned vector.

mod bridge;
mod forest;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{Error, Result};

pub use self::bridge::{BridgeClient, BridgeOptions, BRIDGE_BATCH_SIZE};
pub use self::forest::{train_forest, ForestConfig, RandomForest};

/// Tolerance on `sum(p) == 1`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

pub trait Classifier: Send + Sync {
    /// Fixed class ordering of every probability vector.
    fn class_order(&self) -> &[String];

    fn feature_count(&self) -> usize;

    /// One probability vector per instance. Use [`predict_proba`], which
    /// checks the contract, rather than calling this directly.
    fn predict_proba_raw(&self, instances: &[Instance]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BuiltinForest,
    ExternalBridge,
    Custom,
}

/// A trained model of any supported kind.
#[derive(Clone)]
pub enum ModelHandle {
    Forest(Arc<RandomForest>),
    Bridge(Arc<BridgeClient>),
    Custom(Arc<dyn Classifier>),
}

impl ModelHandle {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelHandle::Forest(_) => ModelKind::BuiltinForest,
            ModelHandle::Bridge(_) => ModelKind::ExternalBridge,
            ModelHandle::Custom(_) => ModelKind::Custom,
        }
    }

    pub fn load_forest(path: impl AsRef<Path>) -> Result<Self> {
        Ok(ModelHandle::Forest(Arc::new(RandomForest::load(path)?)))
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            ModelHandle::Forest(m) => m.as_ref(),
            ModelHandle::Bridge(m) => m.as_ref(),
            ModelHandle::Custom(m) => m.as_ref(),
        }
    }
}

impl std::fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelHandle")
            .field("kind", &self.kind())
            .field("class_order", &self.class_order())
            .finish()
    }
}

impl Classifier for ModelHandle {
    fn class_order(&self) -> &[String] {
        self.inner().class_order()
    }

    fn feature_count(&self) -> usize {
        self.inner().feature_count()
    }

    fn predict_proba_raw(&self, instances: &[Instance]) -> Result<Vec<Vec<f64>>> {
        self.inner().predict_proba_raw(instances)
    }
}

pub(crate) fn check_probabilities(row: &[f64], k: usize) -> Result<()> {
    if row.len() != k {
        return Err(Error::InvalidProbabilities(format!(
            "expected {k} entries, got {}",
            row.len()
        )));
    }
    if row
        .iter()
        .any(|p| !(0.0..=1.0 + PROBABILITY_TOLERANCE).contains(p))
    {
        return Err(Error::InvalidProbabilities(format!(
            "entry outside [0, 1]: {row:?}"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Validated probability vectors, one per instance.
pub fn predict_proba(model: &dyn Classifier, instances: &[Instance]) -> Result<Vec<Vec<f64>>> {
    let p = model.feature_count();
    if let Some(bad) = instances.iter().position(|x| x.len() != p) {
        return Err(Error::SchemaMismatch(format!(
            "instance {bad} has {} values, model expects {p}",
            instances[bad].len()
        )));
    }
    let out = model.predict_proba_raw(instances)?;
    if out.len() != instances.len() {
        return Err(Error::InvalidProbabilities(format!(
            "{} vectors for {} instances",
            out.len(),
            instances.len()
        )));
    }
    let k = model.class_order().len();
    for row in &out {
        check_probabilities(row, k)?;
    }
    Ok(out)
}

/// Index of the largest entry; exact ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Predicted class indices into `model.class_order()`.
pub fn predict_class(model: &dyn Classifier, instances: &[Instance]) -> Result<Vec<usize>> {
    Ok(predict_proba(model, instances)?
        .iter()
        .map(|p| argmax(p))
        .collect())
}
