//! End-to-end runs: load, split, model, bin, then per class mine conditions,
//! evolve, refine, and finally score the pooled rules with Imitation@K.

pub mod checkpoint;
pub mod config;
pub mod render;
pub mod report;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use crate::blackbox::{
    predict_class, train_forest, BridgeClient, Classifier, ForestConfig, ModelHandle, RandomForest,
};
use crate::dataset::{
    apply_bins, fit_entropy_bins, load_csv, load_schema, split, BinnedDataset, BinningMap, Dataset,
    Split, SplitSpec,
};
use crate::error::{Error, Result};
use crate::evolve::{evolve_class, Evolution, GaConfig};
use crate::fidelity::{imitation_at_k, ImitationCurve};
use crate::local_explain::{gen_inst_conds, InstanceConditions, LimeConfig, LocalExplainer};
use crate::refine::refine_class;
use crate::rules::RuleEvaluator;
use crate::seed;

pub use self::checkpoint::Checkpoints;
pub use self::config::{apply_override, ModelSource, RunConfig, DEFAULT_KS};
pub use self::render::{render, render_text, Format};
pub use self::report::{
    ClassReport, ConditionReport, Metadata, Report, RuleReport, SCHEMA_VERSION,
};

/// File name of the forest written next to the report by `explain`.
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.json";

trait StageExt<T> {
    fn stage(self, name: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, name: &str) -> Result<T> {
        self.map_err(|e| if e.is_config() { e } else { e.in_stage(name) })
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

pub fn load_dataset(path: &Path, schema: Option<&Path>) -> Result<Dataset> {
    let hint = schema.map(load_schema).transpose()?;
    load_csv(path, hint.as_ref())
}

fn spawn_bridge(source: &ModelSource) -> Result<ModelHandle> {
    let ModelSource::Bridge { command, .. } = source else {
        unreachable!("called for bridge sources only")
    };
    let options = source.bridge_options().expect("bridge source");
    Ok(ModelHandle::Bridge(Arc::new(BridgeClient::spawn(
        command, options,
    )?)))
}

fn check_width(model: &dyn Classifier, data: &Dataset) -> Result<()> {
    if model.feature_count() != data.feature_count() {
        return Err(Error::SchemaMismatch(format!(
            "model expects {} features, dataset has {}",
            model.feature_count(),
            data.feature_count()
        )));
    }
    Ok(())
}

fn class_names(model: &dyn Classifier, predicted: &[usize]) -> Vec<String> {
    predicted
        .iter()
        .map(|&c| model.class_order()[c].clone())
        .collect()
}

/// Trains the built-in forest on the training split that `explain` would use.
pub fn train_model(cfg: &RunConfig) -> Result<RandomForest> {
    cfg.validate()?;
    let forest_cfg = match &cfg.model {
        ModelSource::Builtin { forest } => forest.clone(),
        _ => ForestConfig::default(),
    };
    let pool = build_pool(cfg.workers)?;
    pool.install(|| {
        let data = load_dataset(&cfg.dataset, cfg.schema.as_deref()).stage("load")?;
        let labels = data
            .labels()
            .ok_or_else(|| Error::Config("training a model requires a labelled dataset".into()))?;
        let spec = SplitSpec {
            seed: seed::derive(cfg.seed, "split", 0),
            ..cfg.split
        };
        let parts = split(&data, &spec, Some(labels)).stage("split")?;
        let train = data.subset(&parts.train);
        let fcfg = ForestConfig {
            seed: seed::derive(cfg.seed, "forest", 0),
            ..forest_cfg
        };
        train_forest(&train, train.labels().expect("labelled"), &fcfg).stage("model")
    })
}

struct Prepared {
    data: Dataset,
    model: ModelHandle,
    model_file: Option<String>,
    predicted: Vec<usize>,
    parts: Split,
}

fn prepare(cfg: &RunConfig, seeds: &mut BTreeMap<String, u64>) -> Result<Prepared> {
    let data = load_dataset(&cfg.dataset, cfg.schema.as_deref()).stage("load")?;
    let spec = SplitSpec {
        seed: seed::derive(cfg.seed, "split", 0),
        ..cfg.split
    };
    seeds.insert("split".into(), spec.seed);

    if let ModelSource::Builtin { forest } = &cfg.model {
        let labels = data
            .labels()
            .ok_or_else(|| Error::Config("the built-in model needs a labelled dataset".into()))?;
        let parts = split(&data, &spec, Some(labels)).stage("split")?;
        let train = data.subset(&parts.train);
        let fcfg = ForestConfig {
            seed: seed::derive(cfg.seed, "forest", 0),
            ..forest.clone()
        };
        seeds.insert("forest".into(), fcfg.seed);
        info!("training {} trees on {} rows", fcfg.tree_count, train.len());
        let forest =
            train_forest(&train, train.labels().expect("labelled"), &fcfg).stage("model")?;
        std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
        forest
            .save(cfg.output_dir.join(MODEL_FILE))
            .stage("model")?;
        let model = ModelHandle::Forest(Arc::new(forest));
        let predicted = predict_class(&model, data.rows()).stage("predict")?;
        return Ok(Prepared {
            data,
            model,
            model_file: Some(MODEL_FILE.into()),
            predicted,
            parts,
        });
    }

    let model = match &cfg.model {
        ModelSource::Load { path } => ModelHandle::load_forest(path).stage("model")?,
        bridge => spawn_bridge(bridge).stage("model")?,
    };
    check_width(&model, &data).stage("model")?;
    let predicted = predict_class(&model, data.rows()).stage("predict")?;
    let strata = class_names(&model, &predicted);
    let parts = split(&data, &spec, Some(&strata)).stage("split")?;
    Ok(Prepared {
        data,
        model,
        model_file: None,
        predicted,
        parts,
    })
}

struct ClassOutcome {
    condition_count: usize,
    evolved_count: usize,
    rules: Vec<crate::rules::ScoredRule>,
    warnings: Vec<String>,
}

struct ClassContext<'a> {
    cfg: &'a RunConfig,
    model: &'a ModelHandle,
    train: &'a Dataset,
    bins: &'a BinningMap,
    train_binned: &'a BinnedDataset,
    train_predicted: &'a [usize],
    train_eval: &'a RuleEvaluator,
    test_eval: &'a RuleEvaluator,
    checkpoints: &'a Checkpoints,
    base_fp: &'a str,
}

impl ClassContext<'_> {
    fn lime_config(&self, class: usize) -> LimeConfig {
        LimeConfig {
            seed: seed::derive(self.cfg.seed, "lime", class as u64),
            ..self.cfg.lime.clone()
        }
    }

    fn ga_config(&self, class: usize) -> GaConfig {
        GaConfig {
            seed: seed::derive(self.cfg.seed, "ga", class as u64),
            ..self.cfg.ga.clone()
        }
    }

    fn run(&self, class: usize) -> Result<ClassOutcome> {
        let lime = self.lime_config(class);
        let cond_fp = checkpoint::fingerprint(&[
            self.base_fp.as_bytes(),
            &serde_json::to_vec(&lime)?,
            &class.to_le_bytes(),
        ]);
        let stage = |name: &str| format!("{name} (class {})", self.model.class_order()[class]);
        let conds: InstanceConditions = match self.checkpoints.load("conditions", class, &cond_fp) {
            Some(c) => c,
            None => {
                let explainer = LocalExplainer::new(self.model, self.train, self.bins, &lime)
                    .stage(&stage("conditions"))?;
                let c = gen_inst_conds(&explainer, self.train_binned, self.train_predicted, class)
                    .stage(&stage("conditions"))?;
                self.checkpoints.save("conditions", class, &cond_fp, &c)?;
                c
            }
        };

        let ga = self.ga_config(class);
        let ga_fp = checkpoint::fingerprint(&[cond_fp.as_bytes(), &serde_json::to_vec(&ga)?]);
        let evo: Evolution = match self.checkpoints.load("evolve", class, &ga_fp) {
            Some(e) => e,
            None => {
                let e = evolve_class(&conds.conditions, class, self.train_eval, &ga)
                    .stage(&stage("evolve"))?;
                self.checkpoints.save("evolve", class, &ga_fp, &e)?;
                e
            }
        };
        if self.cfg.ga_progress {
            write_progress(&self.cfg.output_dir, class, &evo)?;
        }

        let rules = refine_class(
            evo.rules.clone(),
            self.train_eval,
            self.test_eval,
            &self.cfg.refine,
        )
        .stage(&stage("refine"))?;
        let mut warnings = conds.warnings.clone();
        warnings.extend(evo.warnings.iter().cloned());
        Ok(ClassOutcome {
            condition_count: conds.conditions.len(),
            evolved_count: evo.rules.len(),
            rules,
            warnings,
        })
    }
}

fn write_progress(out: &Path, class: usize, evo: &Evolution) -> Result<()> {
    let dir = out.join("progress");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(format!("ga-{class:03}.jsonl"));
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for g in &evo.history {
        writeln!(f, "{}", serde_json::to_string(g)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Runs the whole pipeline and writes `report.json` (and, for the built-in
/// model, `model.json`) into `cfg.output_dir`.
pub fn explain(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let pool = build_pool(cfg.workers)?;
    let report = pool.install(|| explain_in_pool(cfg))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    report
        .save(cfg.output_dir.join(REPORT_FILE))
        .stage("report")?;
    Ok(report)
}

fn explain_in_pool(cfg: &RunConfig) -> Result<Report> {
    let mut seeds = BTreeMap::new();
    let prep = prepare(cfg, &mut seeds)?;
    let mut warnings = prep.parts.warnings.clone();
    let model = &prep.model;
    let class_order = model.class_order().to_vec();

    let train = prep.data.subset(&prep.parts.train);
    let test = prep.data.subset(&prep.parts.test);
    let train_predicted: Vec<usize> = prep
        .parts
        .train
        .iter()
        .map(|&i| prep.predicted[i])
        .collect();
    let test_predicted: Vec<usize> = prep.parts.test.iter().map(|&i| prep.predicted[i]).collect();

    let bins = fit_entropy_bins(&train, &train_predicted, cfg.max_bins).stage("binning")?;
    let train_binned = apply_bins(&train, &bins).stage("binning")?;
    let test_binned = apply_bins(&test, &bins).stage("binning")?;
    let train_eval = RuleEvaluator::new(&train_binned, &train_predicted, &bins, &class_order)
        .stage("binning")?;
    let test_eval =
        RuleEvaluator::new(&test_binned, &test_predicted, &bins, &class_order).stage("binning")?;

    let base_fp = checkpoint::fingerprint(&[
        prep.data.fingerprint().as_bytes(),
        &serde_json::to_vec(&prep.parts.train)?,
        &serde_json::to_vec(&prep.predicted)?,
        &serde_json::to_vec(&bins)?,
        &serde_json::to_vec(&class_order)?,
    ]);
    let checkpoints = Checkpoints::new(cfg.output_dir.join("checkpoints"), cfg.resume);
    let ctx = ClassContext {
        cfg,
        model,
        train: &train,
        bins: &bins,
        train_binned: &train_binned,
        train_predicted: &train_predicted,
        train_eval: &train_eval,
        test_eval: &test_eval,
        checkpoints: &checkpoints,
        base_fp: &base_fp,
    };
    for c in 0..class_order.len() {
        seeds.insert(format!("lime/{c}"), ctx.lime_config(c).seed);
        seeds.insert(format!("ga/{c}"), ctx.ga_config(c).seed);
    }
    let outcomes: Vec<Result<ClassOutcome>> = (0..class_order.len())
        .into_par_iter()
        .map(|c| ctx.run(c))
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let per_class: Vec<Vec<_>> = outcomes.iter().map(|o| o.rules.clone()).collect();
    let proxy_seed = seed::derive(cfg.seed, "proxy", 0);
    seeds.insert("proxy".into(), proxy_seed);
    let imitation = imitation_at_k(
        &per_class,
        &test_binned,
        &test_predicted,
        &cfg.ks,
        proxy_seed,
    )
    .stage("fidelity")?;

    let classes = outcomes
        .iter()
        .enumerate()
        .map(|(c, o)| {
            warnings.extend(o.warnings.iter().cloned());
            Ok(ClassReport {
                class: class_order[c].clone(),
                baseline: test_eval.class_frequency(c)?,
                condition_count: o.condition_count,
                evolved_count: o.evolved_count,
                rules: o
                    .rules
                    .iter()
                    .map(|r| RuleReport::from_scored(r, &bins, &class_order))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let model_accuracy = test.labels().map(|labels| {
        let hits = labels
            .iter()
            .zip(&test_predicted)
            .filter(|(l, &p)| **l == class_order[p])
            .count();
        hits as f64 / labels.len() as f64
    });
    let out_of_range = train_binned.out_of_range + test_binned.out_of_range;
    if test_binned.unseen > 0 {
        warnings.push(format!(
            "{} test values were categories unseen in training",
            test_binned.unseen
        ));
    }

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        classes,
        imitation,
        binning: bins,
        metadata: Metadata {
            seed: cfg.seed,
            seeds,
            config: cfg.echo(),
            dataset_fingerprint: prep.data.fingerprint(),
            class_order,
            model_kind: model.kind(),
            model_file: prep.model_file,
            model_accuracy,
            train_rows: train.len(),
            test_rows: test.len(),
            out_of_range_values: out_of_range,
            warnings,
        },
    })
}

/// Inputs for re-scoring a saved report.
#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    /// Dataset to score on; defaults to the one recorded in the report.
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Model to compare against; defaults to the report's model.
    pub model: Option<ModelSource>,
    /// Split seed; defaults to the report's.
    pub split_seed: Option<u64>,
    pub ks: Vec<usize>,
    pub workers: usize,
}

/// Recomputes Imitation@K for the rules of a saved report. `report_dir` is
/// where the report (and its saved model, if any) lives.
pub fn evaluate(
    report: &Report,
    report_dir: &Path,
    opts: &EvaluateOptions,
) -> Result<ImitationCurve> {
    crate::fidelity::normalize_ks(&opts.ks)?;
    let recorded: RunConfig = serde_json::from_value(report.metadata.config.clone())
        .map_err(|e| Error::Config(format!("report carries an unreadable config: {e}")))?;
    let pool = build_pool(opts.workers)?;
    pool.install(|| {
        let dataset = opts.dataset.clone().unwrap_or(recorded.dataset.clone());
        let schema = opts.schema.clone().or(recorded.schema.clone());
        let data = load_dataset(&dataset, schema.as_deref()).stage("load")?;
        let actual = data.fingerprint();
        if actual != report.metadata.dataset_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: report.metadata.dataset_fingerprint.clone(),
                actual,
            });
        }
        let model = match opts.model.as_ref().unwrap_or(&recorded.model) {
            ModelSource::Builtin { .. } => {
                let file = report.metadata.model_file.as_deref().ok_or_else(|| {
                    Error::Config("report has no saved model; pass one explicitly".into())
                })?;
                ModelHandle::load_forest(report_dir.join(file))
            }
            ModelSource::Load { path } => ModelHandle::load_forest(path),
            bridge => spawn_bridge(bridge),
        }
        .stage("model")?;
        check_width(&model, &data).stage("model")?;
        if model.class_order() != report.metadata.class_order.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "model classes {:?} differ from the report's {:?}",
                model.class_order(),
                report.metadata.class_order
            )));
        }
        let predicted = predict_class(&model, data.rows()).stage("predict")?;
        let split_seed = opts
            .split_seed
            .or_else(|| report.metadata.seeds.get("split").copied())
            .unwrap_or_else(|| seed::derive(report.metadata.seed, "split", 0));
        let spec = SplitSpec {
            seed: split_seed,
            ..recorded.split
        };
        let parts = if matches!(recorded.model, ModelSource::Builtin { .. }) {
            let labels = data.labels().ok_or_else(|| {
                Error::Config(
                    "the report's split was stratified by labels; dataset has none".into(),
                )
            })?;
            split(&data, &spec, Some(labels))
        } else {
            split(&data, &spec, Some(&class_names(&model, &predicted)))
        }
        .stage("split")?;
        let test = data.subset(&parts.test);
        let test_binned = apply_bins(&test, &report.binning).stage("binning")?;
        let test_predicted: Vec<usize> = parts.test.iter().map(|&i| predicted[i]).collect();
        let rules = report.scored_rules()?;
        let proxy_seed = report
            .metadata
            .seeds
            .get("proxy")
            .copied()
            .unwrap_or_else(|| seed::derive(report.metadata.seed, "proxy", 0));
        imitation_at_k(&rules, &test_binned, &test_predicted, &opts.ks, proxy_seed)
            .stage("fidelity")
    })
}
