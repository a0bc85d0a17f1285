//! Per-class genetic search over combinations of mined conditions.
//!
//! An individual is a bit string over the class's condition list. Active
//! conditions on the same attribute are OR-ed, different attributes are
//! AND-ed. Fitness is `rmi_weight * RMI - length_weight * active / N`; the
//! all-zero individual decodes to nothing and scores -1.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use itertools::Itertools;
use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::{Condition, ContingencyTable, RowSet, Rule, RuleEvaluator, ScoredRule};
use crate::seed;

/// Score of an individual with no active bit.
pub const INVALID_FITNESS: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_expected_bits: f64,
    pub rmi_weight: f64,
    pub length_weight: f64,
    pub seed: u64,
    pub tournament_size: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig::full()
    }
}

impl GaConfig {
    /// 1200 individuals, 600 generations.
    pub fn full() -> Self {
        GaConfig {
            population_size: 1200,
            generations: 600,
            crossover_prob: 0.5,
            mutation_expected_bits: 2.0,
            rmi_weight: 1.0,
            length_weight: 1.0,
            seed: 0,
            tournament_size: 2,
        }
    }

    /// Smaller profile for quick runs: 300 individuals, 100 generations.
    pub fn desk() -> Self {
        GaConfig {
            population_size: 300,
            generations: 100,
            ..GaConfig::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size < 2 {
            return bad(format!(
                "ga.population_size must be at least 2, got {}",
                self.population_size
            ));
        }
        if self.generations == 0 {
            return bad("ga.generations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad(format!(
                "ga.crossover_prob must lie in [0, 1], got {}",
                self.crossover_prob
            ));
        }
        if !(self.mutation_expected_bits.is_finite() && self.mutation_expected_bits > 0.0) {
            return bad(format!(
                "ga.mutation_expected_bits must be positive, got {}",
                self.mutation_expected_bits
            ));
        }
        for (name, w) in [
            ("rmi_weight", self.rmi_weight),
            ("length_weight", self.length_weight),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("ga.{name} must be non-negative, got {w}"));
            }
        }
        if self.tournament_size == 0 {
            return bad("ga.tournament_size must be positive".into());
        }
        Ok(())
    }
}

/// A bit string over the condition list with a fitness slot that is cleared
/// whenever a bit changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    bits: FixedBitSet,
    fitness: Option<f64>,
}

impl Individual {
    pub fn new(bits: FixedBitSet) -> Self {
        Individual {
            bits,
            fitness: None,
        }
    }

    pub fn from_indices(n: usize, active: &[usize]) -> Self {
        let mut bits = FixedBitSet::with_capacity(n);
        for &i in active {
            bits.insert(i);
        }
        Individual::new(bits)
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn flip(&mut self, i: usize) {
        self.bits.toggle(i);
        self.fitness = None;
    }

    /// `"100100"` style rendering.
    pub fn to_bit_string(&self) -> String {
        (0..self.len())
            .map(|i| if self.bits[i] { '1' } else { '0' })
            .collect()
    }
}

/// The rule an individual stands for, or `None` when no bit is set.
pub fn decode(bits: &FixedBitSet, conditions: &[Condition], target: usize) -> Option<Rule> {
    let active: Vec<Condition> = bits.ones().map(|i| conditions[i].clone()).collect();
    if active.is_empty() {
        return None;
    }
    Some(Rule::merged(active, target).expect("merged conditions are non-empty and distinct"))
}

/// Inverse of [`decode`] for rules built from the list: bit `i` is set iff
/// condition `i` is implied by the rule.
pub fn encode(rule: &Rule, conditions: &[Condition]) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(conditions.len());
    for (i, c) in conditions.iter().enumerate() {
        let implied = rule
            .conditions()
            .iter()
            .any(|rc| rc.attribute == c.attribute && c.values.is_subset(&rc.values));
        if implied {
            bits.insert(i);
        }
    }
    bits
}

/// Starting population: every one-bit individual, then every two-bit one in
/// lexicographic order, and so on, truncated at the population size. If all
/// non-empty subsets are used up first, the rest is random with density 2/N.
pub fn initial_population(n: usize, cfg: &GaConfig) -> Vec<Individual> {
    let size = cfg.population_size;
    let mut pop = Vec::with_capacity(size);
    'fill: for k in 1..=n {
        for combo in (0..n).combinations(k) {
            if pop.len() == size {
                break 'fill;
            }
            pop.push(Individual::from_indices(n, &combo));
        }
    }
    if pop.len() < size {
        let mut rng = seed::rng(seed::derive(cfg.seed, "ga-init", 0));
        let density = (2.0 / n as f64).min(1.0);
        while pop.len() < size {
            let active: Vec<usize> = (0..n).filter(|_| rng.gen_bool(density)).collect();
            pop.push(Individual::from_indices(n, &active));
        }
    }
    pop
}

/// Flips each bit independently with probability `rate`; returns the number
/// of flips.
pub fn mutate(ind: &mut Individual, rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut flips = 0;
    for i in 0..ind.len() {
        if rng.gen_bool(rate) {
            ind.flip(i);
            flips += 1;
        }
    }
    flips
}

/// Swaps the tails of two parents after a uniformly drawn cut point.
pub fn crossover(a: &Individual, b: &Individual, rng: &mut ChaCha8Rng) -> (Individual, Individual) {
    let n = a.len();
    if n < 2 {
        return (a.clone(), b.clone());
    }
    let point = rng.gen_range(1..n);
    let mut x = a.bits.clone();
    let mut y = b.bits.clone();
    for i in point..n {
        x.set(i, b.bits[i]);
        y.set(i, a.bits[i]);
    }
    (Individual::new(x), Individual::new(y))
}

/// Fitness of bit strings for one class, memoised by bit pattern.
pub struct FitnessEvaluator<'a> {
    conditions: &'a [Condition],
    condition_covers: Vec<RowSet>,
    class_mask: &'a RowSet,
    rmi_weight: f64,
    length_weight: f64,
    cache: HashMap<FixedBitSet, f64>,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(
        conditions: &'a [Condition],
        target: usize,
        evaluator: &'a RuleEvaluator,
        cfg: &GaConfig,
    ) -> Result<Self> {
        let condition_covers = conditions
            .iter()
            .map(|c| evaluator.index().condition_cover(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(FitnessEvaluator {
            conditions,
            condition_covers,
            class_mask: evaluator.class_mask(target)?,
            rmi_weight: cfg.rmi_weight,
            length_weight: cfg.length_weight,
            cache: HashMap::new(),
        })
    }

    fn cover(&self, bits: &FixedBitSet) -> RowSet {
        let mut acc: Option<RowSet> = None;
        let active: Vec<usize> = bits.ones().collect();
        for (_, group) in &active.iter().chunk_by(|&&i| self.conditions[i].attribute) {
            let mut any = RowSet::with_capacity(self.class_mask.len());
            for &i in group {
                any.union_with(&self.condition_covers[i]);
            }
            match acc.as_mut() {
                Some(a) => a.intersect_with(&any),
                None => acc = Some(any),
            }
        }
        acc.unwrap_or_else(|| RowSet::with_capacity(self.class_mask.len()))
    }

    /// Uncached fitness of one bit string.
    pub fn compute(&self, bits: &FixedBitSet) -> f64 {
        let active = bits.count_ones(..);
        if active == 0 {
            return INVALID_FITNESS;
        }
        let table = ContingencyTable::from_sets(&self.cover(bits), self.class_mask);
        let rmi = table.rmi().unwrap_or(0.0);
        self.rmi_weight * rmi - self.length_weight * active as f64 / bits.len() as f64
    }

    /// Fills every individual's fitness, computing unseen patterns in
    /// parallel.
    pub fn evaluate(&mut self, pop: &mut [Individual]) {
        let mut todo: Vec<FixedBitSet> = Vec::new();
        let mut queued: HashSet<&FixedBitSet> = HashSet::new();
        for ind in pop.iter() {
            if ind.fitness.is_none()
                && !self.cache.contains_key(&ind.bits)
                && queued.insert(&ind.bits)
            {
                todo.push(ind.bits.clone());
            }
        }
        let scores: Vec<f64> = todo.par_iter().map(|b| self.compute(b)).collect();
        self.cache.extend(todo.into_iter().zip(scores));
        for ind in pop.iter_mut() {
            if ind.fitness.is_none() {
                ind.fitness = Some(self.cache[&ind.bits]);
            }
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

/// Outcome of one class's search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    /// Distinct decoded rules of the final population, best fitness first.
    pub rules: Vec<ScoredRule>,
    /// One entry for the initial population and one per generation.
    pub history: Vec<GenerationStats>,
    pub warnings: Vec<String>,
}

fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate().skip(1) {
        if ind.fitness.unwrap_or(f64::NEG_INFINITY) > pop[best].fitness.unwrap_or(f64::NEG_INFINITY)
        {
            best = i;
        }
    }
    best
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut ChaCha8Rng) -> &'p Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.gen_range(0..pop.len())];
        if c.fitness > best.fitness {
            best = c;
        }
    }
    best
}

fn summarize(generation: usize, pop: &[Individual]) -> GenerationStats {
    let fit: Vec<f64> = pop
        .iter()
        .map(|i| i.fitness.unwrap_or(INVALID_FITNESS))
        .collect();
    GenerationStats {
        generation,
        best: fit.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: fit.iter().sum::<f64>() / fit.len() as f64,
    }
}

/// Runs the generational search for `target` over `conditions` on the
/// training data behind `evaluator`.
///
/// Each generation keeps the single best individual and fills the rest with
/// children of tournament winners (single-point crossover, then per-bit
/// mutation at rate `mutation_expected_bits / N`). Generation `g` draws from
/// its own stream derived from `cfg.seed`.
pub fn evolve_class(
    conditions: &[Condition],
    target: usize,
    evaluator: &RuleEvaluator,
    cfg: &GaConfig,
) -> Result<Evolution> {
    cfg.validate()?;
    if conditions.is_empty() {
        let msg = format!(
            "class {} has no mined conditions; no rules evolved",
            evaluator
                .class_order()
                .get(target)
                .map_or("?", String::as_str)
        );
        warn!("{msg}");
        return Ok(Evolution {
            rules: Vec::new(),
            history: Vec::new(),
            warnings: vec![msg],
        });
    }
    let n = conditions.len();
    let rate = (cfg.mutation_expected_bits / n as f64).min(1.0);
    let mut fitness = FitnessEvaluator::new(conditions, target, evaluator, cfg)?;
    let mut pop = initial_population(n, cfg);
    fitness.evaluate(&mut pop);
    let mut history = vec![summarize(0, &pop)];

    for g in 1..=cfg.generations {
        let mut rng = seed::rng(seed::mix(cfg.seed, g as u64));
        let mut next = Vec::with_capacity(pop.len());
        next.push(pop[best_index(&pop)].clone());
        while next.len() < pop.len() {
            let a = tournament(&pop, cfg.tournament_size, &mut rng);
            let b = tournament(&pop, cfg.tournament_size, &mut rng);
            let (mut x, mut y) = if rng.gen_bool(cfg.crossover_prob) {
                crossover(a, b, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            mutate(&mut x, rate, &mut rng);
            mutate(&mut y, rate, &mut rng);
            next.push(x);
            if next.len() < pop.len() {
                next.push(y);
            }
        }
        pop = next;
        fitness.evaluate(&mut pop);
        history.push(summarize(g, &pop));
    }

    let mut ranked: Vec<&Individual> = pop.iter().collect();
    ranked.sort_by(|a, b| {
        b.fitness
            .unwrap_or(INVALID_FITNESS)
            .total_cmp(&a.fitness.unwrap_or(INVALID_FITNESS))
            .then_with(|| a.bits.ones().cmp(b.bits.ones()))
    });
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    for ind in ranked {
        if let Some(rule) = decode(&ind.bits, conditions, target) {
            if seen.insert(rule.clone()) {
                rules.push(evaluator.score(rule)?);
            }
        }
    }
    Ok(Evolution {
        rules,
        history,
        warnings: Vec::new(),
    })
}
