use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::blackbox::{BridgeOptions, ForestConfig, BRIDGE_BATCH_SIZE};
use crate::dataset::SplitSpec;
use crate::error::{Error, Result};
use crate::evolve::GaConfig;
use crate::local_explain::LimeConfig;
use crate::refine::RefineConfig;

pub const DEFAULT_KS: [usize; 5] = [1, 2, 5, 10, 20];

/// Where the black-box model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSource {
    /// Train the built-in random forest on the training split.
    Builtin {
        #[serde(default)]
        forest: ForestConfig,
    },
    /// A forest saved by `train-model`.
    Load { path: PathBuf },
    /// An external adapter process speaking the line-delimited protocol.
    Bridge {
        command: Vec<String>,
        #[serde(default = "default_bridge_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_bridge_batch")]
        batch_size: usize,
    },
}

fn default_bridge_timeout() -> u64 {
    60
}

fn default_bridge_batch() -> usize {
    BRIDGE_BATCH_SIZE
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Builtin {
            forest: ForestConfig::default(),
        }
    }
}

impl ModelSource {
    pub fn bridge_options(&self) -> Option<BridgeOptions> {
        match self {
            ModelSource::Bridge {
                timeout_secs,
                batch_size,
                ..
            } => Some(BridgeOptions {
                timeout: Duration::from_secs(*timeout_secs),
                batch_size: *batch_size,
            }),
            _ => None,
        }
    }
}

/// Every knob of an explanation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Optional schema sidecar (JSON) overriding inference.
    pub schema: Option<PathBuf>,
    pub model: ModelSource,
    pub split: SplitSpec,
    pub lime: LimeConfig,
    pub ga: GaConfig,
    pub refine: RefineConfig,
    pub ks: Vec<usize>,
    pub max_bins: usize,
    pub output_dir: PathBuf,
    /// Global seed; every stage seed is derived from it.
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Reuse matching checkpoints from an earlier run.
    pub resume: bool,
    /// Write per-generation GA statistics as JSON lines.
    pub ga_progress: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::new(),
            schema: None,
            model: ModelSource::default(),
            split: SplitSpec::default(),
            lime: LimeConfig::default(),
            ga: GaConfig::default(),
            refine: RefineConfig::default(),
            ks: DEFAULT_KS.to_vec(),
            max_bins: 8,
            output_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
            resume: false,
            ga_progress: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Config("dataset path is required".into()));
        }
        match &self.model {
            ModelSource::Builtin { forest } => forest.validate()?,
            ModelSource::Load { path } if path.as_os_str().is_empty() => {
                return Err(Error::Config("model.path is required".into()))
            }
            ModelSource::Bridge {
                command,
                timeout_secs,
                batch_size,
            } => {
                if command.is_empty() {
                    return Err(Error::Config("model.command must not be empty".into()));
                }
                if *timeout_secs == 0 || *batch_size == 0 {
                    return Err(Error::Config(
                        "model.timeout_secs and model.batch_size must be positive".into(),
                    ));
                }
            }
            ModelSource::Load { .. } => {}
        }
        self.split.validate()?;
        self.lime.validate()?;
        self.ga.validate()?;
        self.refine.validate()?;
        crate::fidelity::normalize_ks(&self.ks)?;
        if self.max_bins < 2 {
            return Err(Error::Config("max_bins must be at least 2".into()));
        }
        Ok(())
    }

    /// Parses a JSON document, applies `key=value` overrides, and validates.
    /// Relative paths are resolved against `base_dir`.
    pub fn from_json_with(
        text: &str,
        overrides: &[(String, String)],
        base_dir: &Path,
    ) -> Result<Self> {
        let mut doc: Json = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        // so that `model.forest.*` overrides land on the default model
        if let Json::Object(map) = &mut doc {
            map.entry("model")
                .or_insert_with(|| serde_json::json!({ "kind": "builtin" }));
        }
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_json_with(&text, overrides, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        if let Some(s) = self.schema.as_mut() {
            fix(s);
        }
        if let ModelSource::Load { path } = &mut self.model {
            fix(path);
        }
        fix(&mut self.output_dir);
    }

    /// The configuration as recorded in reports: execution-only settings
    /// (paths of outputs, worker count, resume and progress flags) are left
    /// out so that they cannot change the report bytes.
    pub fn echo(&self) -> Json {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Json::Object(map) = &mut v {
            for k in ["output_dir", "workers", "resume", "ga_progress"] {
                map.remove(k);
            }
        }
        v
    }
}

/// Sets `doc[a][b]... = value` for a dotted key such as
/// `ga.population-size`. Dashes become underscores. The value is parsed as
/// JSON when possible, then as a comma-separated list, else kept as a string.
pub fn apply_override(doc: &mut Json, key: &str, value: &str) -> Result<()> {
    let path: Vec<String> = key
        .trim_start_matches('-')
        .split('.')
        .map(|s| s.replace('-', "_"))
        .collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!("malformed override key {key:?}")));
    }
    let parsed = serde_json::from_str::<Json>(value)
        .or_else(|_| {
            if value.contains(',') {
                serde_json::from_str::<Json>(&format!("[{value}]"))
            } else {
                Err(serde::de::Error::custom("not a list"))
            }
        })
        .unwrap_or_else(|_| Json::String(value.to_string()));
    let mut node = doc;
    for (i, part) in path.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::Config(format!(
                "override {key:?}: {} is not an object",
                path[..i].join(".")
            )));
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == path.len() {
            map.insert(part.clone(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.clone())
            .or_insert_with(|| Json::Object(Default::default()));
    }
    unreachable!("override path has at least one element")
}
