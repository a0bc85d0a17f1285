//! Rule-based proxy classifier and the Imitation@K fidelity score.
//!
//! The proxy pools the top K rules of all classes (K counts rules in total,
//! not per class), predicts with the most precise covering rule, and
//! abstains when nothing covers an instance. Abstentions count as mismatches.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BinnedDataset, Code};
use crate::error::{Error, Result};
use crate::rules::{rank_cmp, ScoredRule};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyModel {
    rules: Vec<ScoredRule>,
    requested_k: usize,
    seed: u64,
}

impl ProxyModel {
    pub fn rules(&self) -> &[ScoredRule] {
        &self.rules
    }

    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    /// Rules actually used (fewer than K when fewer exist).
    pub fn effective_k(&self) -> usize {
        self.rules.len()
    }

    /// Class of the most precise rule covering `codes`; exact precision ties
    /// are settled by a draw seeded from `(seed, row)`.
    pub fn predict(&self, codes: &[Code], row: usize) -> Option<usize> {
        let mut best = f64::NEG_INFINITY;
        let mut tied: Vec<usize> = Vec::new();
        for r in &self.rules {
            if !r.rule.matches(codes) {
                continue;
            }
            let p = r.stats.precision;
            if p > best {
                best = p;
                tied.clear();
            }
            if p == best {
                tied.push(r.rule.target());
            }
        }
        match tied.len() {
            0 => None,
            1 => Some(tied[0]),
            n => {
                let mut rng = seed::rng(seed::mix(self.seed, row as u64));
                Some(tied[rng.gen_range(0..n)])
            }
        }
    }
}

/// Pools every class's rules, orders them by RMI with the refine tie-break,
/// and keeps the first `k`.
pub fn build_proxy(per_class: &[Vec<ScoredRule>], k: usize, seed: u64) -> Result<ProxyModel> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut pooled: Vec<ScoredRule> = per_class.iter().flatten().cloned().collect();
    pooled.sort_by(rank_cmp);
    pooled.truncate(k);
    Ok(ProxyModel {
        rules: pooled,
        requested_k: k,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationPoint {
    pub k: usize,
    pub imitation: f64,
    /// Rules available for this K.
    pub effective_k: usize,
    /// Share of test instances covered by at least one of the K rules.
    pub covered: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImitationCurve {
    pub points: Vec<ImitationPoint>,
}

impl ImitationCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.imitation)
    }

    /// Two-row table: `Im@K` headers over percentages.
    pub fn to_table(&self) -> String {
        let cells: Vec<(String, String)> = self
            .points
            .iter()
            .map(|p| (format!("Im@{}", p.k), format!("{:.2}", 100.0 * p.imitation)))
            .collect();
        let mut out = String::new();
        for (h, v) in &cells {
            let w = h.len().max(v.len());
            let _ = write!(out, "{h:>w$}  ");
        }
        let mut out = out.trim_end().to_string();
        out.push('\n');
        let mut row = String::new();
        for (h, v) in &cells {
            let w = h.len().max(v.len());
            let _ = write!(row, "{v:>w$}  ");
        }
        out.push_str(row.trim_end());
        out.push('\n');
        out
    }
}

/// Sorted, deduplicated K values; errors on an empty list or K = 0.
pub fn normalize_ks(ks: &[usize]) -> Result<Vec<usize>> {
    if ks.is_empty() {
        return Err(Error::Config("at least one K is required".into()));
    }
    if ks.contains(&0) {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// Imitation@K of the pooled rules on binned test rows against the model's
/// predicted classes for the same rows.
pub fn imitation_at_k(
    per_class: &[Vec<ScoredRule>],
    test: &BinnedDataset,
    model_predictions: &[usize],
    ks: &[usize],
    seed: u64,
) -> Result<ImitationCurve> {
    let ks = normalize_ks(ks)?;
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if model_predictions.len() != test.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} predictions for {} test rows",
            model_predictions.len(),
            test.len()
        )));
    }
    let rows: Vec<Vec<Code>> = (0..test.len()).map(|i| test.row_codes(i)).collect();
    let n = test.len() as f64;
    let mut points = Vec::with_capacity(ks.len());
    for k in ks {
        let proxy = build_proxy(per_class, k, seed)?;
        let (matches, covered) = rows
            .par_iter()
            .enumerate()
            .map(|(i, codes)| match proxy.predict(codes, i) {
                Some(c) => (usize::from(c == model_predictions[i]), 1usize),
                None => (0, 0),
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        points.push(ImitationPoint {
            k,
            imitation: matches as f64 / n,
            effective_k: proxy.effective_k(),
            covered: covered as f64 / n,
        });
    }
    Ok(ImitationCurve { points })
}
