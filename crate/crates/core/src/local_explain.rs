//! Instance-level conditions from local linear surrogates.
//!
//! For an instance `x` we draw perturbed instances by resampling every
//! feature independently from the training data, map each sample to the
//! binary vector `z` (`z_j = 1` iff the sample's bin in column `j` equals
//! `x`'s bin), weight it by `exp(-d^2 / w^2)` with `d` the number of zeros in
//! `z`, and fit a weighted ridge regression of the model's probability for
//! `x`'s predicted class on `z`. Features with the largest positive
//! coefficients become single-valued conditions.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::{argmax, predict_proba, Classifier};
use crate::dataset::{BinnedDataset, BinningMap, Code, Dataset, Instance, MISSING_CODE};
use crate::error::{Error, Result};
use crate::rules::{Condition, CoverIndex, RowSet};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub sample_count: usize,
    /// `None` means `0.75 * sqrt(p)`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub top_m: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            sample_count: 1000,
            kernel_width: None,
            ridge_lambda: 1.0,
            top_m: 5,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 100 {
            return Err(Error::Config(format!(
                "lime.sample_count must be at least 100, got {}",
                self.sample_count
            )));
        }
        if self.top_m == 0 {
            return Err(Error::Config("lime.top_m must be at least 1".into()));
        }
        if let Some(w) = self.kernel_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!(
                    "lime.kernel_width must be positive, got {w}"
                )));
            }
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lime.ridge_lambda must be non-negative, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }

    pub fn width_for(&self, p: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (p as f64).sqrt())
    }
}

/// Surrogate coefficients for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributions {
    /// Class whose probability was regressed (the model's prediction for x).
    pub class: usize,
    /// One coefficient per feature.
    pub coefficients: Vec<f64>,
}

/// Everything the surrogate fits need besides the instance itself.
pub struct LocalExplainer<'a> {
    model: &'a dyn Classifier,
    train: &'a Dataset,
    bins: &'a BinningMap,
    cfg: &'a LimeConfig,
}

impl<'a> LocalExplainer<'a> {
    pub fn new(
        model: &'a dyn Classifier,
        train: &'a Dataset,
        bins: &'a BinningMap,
        cfg: &'a LimeConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if train.feature_count() != bins.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} training columns, binning map has {}",
                train.feature_count(),
                bins.len()
            )));
        }
        Ok(LocalExplainer {
            model,
            train,
            bins,
            cfg,
        })
    }

    fn codes_of(&self, x: &Instance) -> Vec<Code> {
        x.iter()
            .enumerate()
            .map(|(j, v)| self.bins.code(j, v).0)
            .collect()
    }

    /// Per-feature surrogate coefficients for `x`, drawn from the stream
    /// `stream_seed`.
    pub fn marginal_contributions(&self, x: &Instance, stream_seed: u64) -> Result<Contributions> {
        let p = self.bins.len();
        if x.len() != p {
            return Err(Error::SchemaMismatch(format!(
                "instance has {} values, expected {p}",
                x.len()
            )));
        }
        let x_codes = self.codes_of(x);
        let mut rng = seed::rng(stream_seed);
        let n_train = self.train.len();
        let rows = self.train.rows();
        let mut batch: Vec<Instance> = Vec::with_capacity(self.cfg.sample_count + 1);
        batch.push(x.clone());
        let mut z = DMatrix::<f64>::zeros(self.cfg.sample_count, p);
        for i in 0..self.cfg.sample_count {
            let sample: Instance = (0..p)
                .map(|j| rows[rng.gen_range(0..n_train)][j].clone())
                .collect();
            for (j, v) in sample.iter().enumerate() {
                if self.bins.code(j, v).0 == x_codes[j] {
                    z[(i, j)] = 1.0;
                }
            }
            batch.push(sample);
        }
        let probs = predict_proba(self.model, &batch)?;
        let class = argmax(&probs[0]);
        let y = DVector::from_iterator(
            self.cfg.sample_count,
            probs[1..].iter().map(|row| row[class]),
        );

        let mut width = self.cfg.width_for(p);
        for attempt in 0..2 {
            let weights = kernel_weights(&z, width);
            if weights.sum() > 1e-12 * self.cfg.sample_count as f64 {
                let coefficients = weighted_ridge(&z, &y, &weights, self.cfg.ridge_lambda)?;
                return Ok(Contributions {
                    class,
                    coefficients,
                });
            }
            if attempt == 0 {
                warn!(
                    "kernel weights vanished at width {width}; retrying at {}",
                    2.0 * width
                );
                width *= 2.0;
            }
        }
        Err(Error::DegenerateWeights(format!(
            "all sample weights are ~0 even at kernel width {width}"
        )))
    }

    /// Single-valued conditions on the top positive features of `x`.
    pub fn conditions_for_instance(
        &self,
        x: &Instance,
        stream_seed: u64,
    ) -> Result<Vec<Condition>> {
        let contrib = self.marginal_contributions(x, stream_seed)?;
        let codes = self.codes_of(x);
        Ok(top_conditions(
            &contrib.coefficients,
            &codes,
            self.cfg.top_m,
        ))
    }
}

/// Coefficients at or below this are treated as zero (round-off of an exact
/// zero fit).
pub const POSITIVE_EPSILON: f64 = 1e-10;

/// The `top_m` strictly positive coefficients, largest first (ties to the
/// lower feature index), as conditions on the instance's own bins. Features
/// whose value is missing yield no condition.
pub fn top_conditions(coefficients: &[f64], codes: &[Code], top_m: usize) -> Vec<Condition> {
    let mut ranked: Vec<usize> = (0..coefficients.len())
        .filter(|&j| coefficients[j] > POSITIVE_EPSILON && codes[j] != MISSING_CODE)
        .collect();
    ranked.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]).then(a.cmp(&b)));
    ranked
        .into_iter()
        .take(top_m)
        .map(|j| Condition::single(j, codes[j]))
        .collect()
}

fn kernel_weights(z: &DMatrix<f64>, width: f64) -> DVector<f64> {
    let p = z.ncols() as f64;
    DVector::from_iterator(
        z.nrows(),
        z.row_iter().map(|row| {
            let d = p - row.sum();
            (-(d * d) / (width * width)).exp()
        }),
    )
}

/// Ridge regression on weighted-centred data; the intercept is left
/// unpenalised by centring.
fn weighted_ridge(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
) -> Result<Vec<f64>> {
    let total = w.sum();
    let p = z.ncols();
    let z_mean = DVector::from_iterator(p, (0..p).map(|j| z.column(j).dot(w) / total));
    let y_mean = y.dot(w) / total;
    let mut zc = z.clone();
    for j in 0..p {
        zc.column_mut(j).add_scalar_mut(-z_mean[j]);
    }
    let yc = y.add_scalar(-y_mean);
    let sqrt_w = w.map(f64::sqrt);
    for (i, s) in sqrt_w.iter().enumerate() {
        zc.row_mut(i).scale_mut(*s);
    }
    let yw = yc.component_mul(&sqrt_w);
    let mut gram = zc.transpose() * &zc;
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = zc.transpose() * yw;
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::DegenerateWeights(format!("surrogate fit failed: {e}")))?,
    };
    Ok(beta.iter().copied().collect())
}

/// Output of the condition-mining loop for one class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceConditions {
    /// Deduplicated, ordered by (attribute, value).
    pub conditions: Vec<Condition>,
    /// Instances whose surrogates were folded in before the loop stopped.
    pub explained: usize,
    pub warnings: Vec<String>,
}

/// Mines conditions for `target` from training instances the model predicts
/// as `target`, visiting them in a seeded shuffled order and stopping once
/// every such instance satisfies at least one mined condition.
///
/// `train_binned` and `predicted` must be aligned with `explainer`'s training
/// rows. Surrogates are fitted in parallel chunks; the coverage bookkeeping is
/// an in-order fold, so the output does not depend on the thread count.
pub fn gen_inst_conds(
    explainer: &LocalExplainer<'_>,
    train_binned: &BinnedDataset,
    predicted: &[usize],
    target: usize,
) -> Result<InstanceConditions> {
    let n = explainer.train.len();
    if train_binned.len() != n || predicted.len() != n {
        return Err(Error::SchemaMismatch(
            "binned rows, predictions and training rows differ in length".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| predicted[i] == target).collect();
    let mut out = InstanceConditions::default();
    if order.is_empty() {
        let name = explainer
            .model
            .class_order()
            .get(target)
            .cloned()
            .unwrap_or_else(|| format!("#{target}"));
        let msg = format!("no training instance is predicted as {name}; no conditions mined");
        warn!("{msg}");
        out.warnings.push(msg);
        return Ok(out);
    }
    let base = seed::derive(explainer.cfg.seed, "lime-order", target as u64);
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seed::rng(base));

    let index = CoverIndex::new(train_binned);
    let mut not_yet_covered = RowSet::with_capacity(n);
    for &i in &order {
        not_yet_covered.insert(i);
    }
    let mut found: std::collections::BTreeSet<Condition> = Default::default();
    let chunk = rayon::current_num_threads().max(1) * 2;
    'outer: for block in order.chunks(chunk) {
        let results: Vec<Result<Vec<Condition>>> = block
            .par_iter()
            .map(|&i| {
                let s = seed::derive(explainer.cfg.seed, "lime", i as u64);
                explainer.conditions_for_instance(explainer.train.row(i), s)
            })
            .collect();
        for conds in results {
            out.explained += 1;
            for c in conds? {
                if found.insert(c.clone()) {
                    let covered = index.condition_cover(&c)?;
                    not_yet_covered.difference_with(&covered);
                }
            }
            if not_yet_covered.is_clear() {
                break 'outer;
            }
        }
    }
    out.conditions = found.into_iter().collect();
    Ok(out)
}
