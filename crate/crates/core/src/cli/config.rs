use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::LabelSet;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainSchedule;

/// Emotion inventory: a preset name or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelsSpec {
    Preset(String),
    List(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub labels: LabelsSpec,
    pub min_freq: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            labels: LabelsSpec::Preset("emorynlp".into()),
            min_freq: 1,
        }
    }
}

/// Input files. Relative paths are resolved against the config file's
/// directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Speaker-only corpus.
    pub si: Option<PathBuf>,
    /// A word-vector file, or `"random"` for seeded random vectors.
    pub embeddings: Option<String>,
}

/// Everything one run needs, as a single JSON document.
///
/// ```json
/// {
///   "mtl": true,
///   "model": {"embed_dim": 300, "dropout": 0.5},
///   "train": {"max_epochs": 50, "seed": 1},
///   "data": {"labels": "emorynlp", "min_freq": 1},
///   "paths": {"train": "train.jsonl", "dev": "dev.jsonl", "si": "friends.jsonl",
///             "embeddings": "glove.6B.300d.txt"},
///   "out_dir": "runs/emorynlp"
/// }
/// ```
///
/// Omitted fields take the preset's (or the built-in) defaults; unknown
/// fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Train the multi-task model; false trains the emotion model alone.
    pub mtl: bool,
    pub model: ModelConfig,
    pub train: TrainSchedule,
    pub data: DataConfig,
    pub paths: Paths,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mtl: true,
            model: ModelConfig::default(),
            train: TrainSchedule::default(),
            data: DataConfig::default(),
            paths: Paths::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

pub(crate) fn preset_defaults(preset: Option<&str>) -> Result<RunConfig> {
    let Some(name) = preset else {
        return Ok(RunConfig::default());
    };
    let model = ModelConfig::preset(name)
        .ok_or_else(|| Error::Config(format!("--preset: unknown preset `{name}` (emorynlp, meld)")))?;
    Ok(RunConfig {
        model,
        data: DataConfig {
            labels: LabelsSpec::Preset(name.to_string()),
            ..DataConfig::default()
        },
        ..RunConfig::default()
    })
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as JSON
/// when possible and taken as a string otherwise.
fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set `{spec}`: expected key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(Error::Config(format!("--set `{key}`: `{}` is not an object", parts[..i].join("."))));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Defaults, then the preset, then the file, then `--set` overrides.
pub fn load_run_config(path: Option<&Path>, preset: Option<&str>, overrides: &[String]) -> Result<RunConfig> {
    let mut root = serde_json::to_value(preset_defaults(preset)?)?;
    let base_dir = path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("--config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if !file.is_object() {
            return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
        }
        merge(&mut root, file);
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let mut config: RunConfig = serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("{path}: {}", e.into_inner()))
    })?;
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(p) = p {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
    };
    resolve(&mut config.paths.train);
    resolve(&mut config.paths.dev);
    resolve(&mut config.paths.test);
    resolve(&mut config.paths.si);
    if let Some(e) = &mut config.paths.embeddings {
        if e != "random" && Path::new(e).is_relative() {
            *e = base_dir.join(&*e).display().to_string();
        }
    }
    if config.out_dir.is_relative() && path.is_some() {
        config.out_dir = base_dir.join(&config.out_dir);
    }
    Ok(config)
}

impl RunConfig {
    pub fn labels(&self) -> Result<LabelSet> {
        match &self.data.labels {
            LabelsSpec::Preset(name) => LabelSet::preset(name)
                .ok_or_else(|| Error::Config(format!("data.labels: unknown label preset `{name}`"))),
            LabelsSpec::List(names) => LabelSet::new(names).map_err(|e| Error::Config(format!("data.labels: {e}"))),
        }
    }

    /// Checks values and that every input file exists, before any work.
    pub fn validate(&self, need_dev: bool) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        let labels = self.labels()?;
        if labels.len() != self.model.num_emotions {
            return Err(Error::Config(format!(
                "model.num_emotions is {} but data.labels has {} labels",
                self.model.num_emotions,
                labels.len()
            )));
        }
        let check = |name: &str, p: &Option<PathBuf>, required: bool| -> Result<()> {
            match p {
                None if required => Err(Error::Config(format!("paths.{name} is required"))),
                Some(p) if !p.is_file() => Err(Error::Config(format!("paths.{name}: no such file `{}`", p.display()))),
                _ => Ok(()),
            }
        };
        check("train", &self.paths.train, true)?;
        check("dev", &self.paths.dev, need_dev)?;
        check("test", &self.paths.test, false)?;
        check("si", &self.paths.si, false)?;
        match &self.paths.embeddings {
            None => Err(Error::Config(
                "paths.embeddings is required (a word-vector file or \"random\")".into(),
            )),
            Some(e) if e != "random" && !Path::new(e).is_file() => {
                Err(Error::Config(format!("paths.embeddings: no such file `{e}`")))
            }
            _ => Ok(()),
        }
    }
}
