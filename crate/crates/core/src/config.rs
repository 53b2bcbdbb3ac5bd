//! Experiment configuration: a flat `key = value` text format grouped into
//! `[section]`s, merged with command-line overrides.
//!
//! ```text
//! # comment
//! [experiment]
//! preset = half-to-full        # or a [schedule] section, not both
//! out = runs/half-to-full
//!
//! [data]
//! dataset = spirals            # spirals | cifar10 | csv
//! n_per_class = 500
//! classes = 3
//! noise = 0.1
//! path = data/cifar-10-batches-bin
//!
//! [net]
//! blocks = 16
//! width = 32
//! activation = relu
//!
//! [train]
//! epochs = 150
//! batch_size = 128
//! base_lr = 0.01              # default 0.1 for cifar10, 0.01 otherwise
//! lr_milestone_1 = 0.5
//! lr_milestone_2 = 0.75
//! lr_factor = 0.1
//! momentum = 0.9
//! weight_decay = 0
//! seed = 7
//! val_fraction = 0.1
//! precision = f64
//! augment_pad = none           # pixels, or none
//! record_wall_time = true
//!
//! [schedule]
//! family = endpoint-growth
//! d_L0 = 1
//! d_L1 = 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::Activation;
use crate::schedule::registry::Hyperparams;
use crate::schedule::{DepthSchedule, ScheduleRegistry};
use crate::trainer::{Precision, TrainConfig};

pub const DEFAULT_CIFAR_DIR: &str = "data/cifar-10-batches-bin";

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSelector {
    Spirals {
        n_per_class: usize,
        classes: usize,
        noise: f64,
    },
    Cifar10 {
        dir: PathBuf,
    },
    Csv {
        path: PathBuf,
    },
}

impl fmt::Display for DatasetSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSelector::Spirals {
                n_per_class,
                classes,
                noise,
            } => write!(
                f,
                "spirals(n_per_class={n_per_class}, classes={classes}, noise={noise})"
            ),
            DatasetSelector::Cifar10 { dir } => write!(f, "cifar10({})", dir.display()),
            DatasetSelector::Csv { path } => write!(f, "csv({})", path.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Preset name, or the family name when the schedule was given
    /// explicitly.
    pub schedule_name: String,
    pub dataset: DatasetSelector,
    pub blocks: usize,
    pub width: usize,
    pub activation: Activation,
    pub train: TrainConfig,
    pub out: PathBuf,
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag(flag) => write!(f, "--{flag}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Parsed but uninterpreted `section.key → value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("experiment", &["preset", "out"]),
    (
        "data",
        &["dataset", "n_per_class", "classes", "noise", "path"],
    ),
    ("net", &["blocks", "width", "activation"]),
    (
        "train",
        &[
            "epochs",
            "batch_size",
            "base_lr",
            "lr_milestone_1",
            "lr_milestone_2",
            "lr_factor",
            "momentum",
            "weight_decay",
            "seed",
            "val_fraction",
            "precision",
            "augment_pad",
            "record_wall_time",
        ],
    ),
];

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let at = || format!("{}:{line_no}", path.display());
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(at(), "unterminated section header"))?
                    .trim();
                if name != "schedule" && !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(Error::config(at(), format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::config(at(), "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .clone()
                .ok_or_else(|| Error::config(at(), format!("key `{key}` outside any section")))?;
            if key.is_empty() {
                return Err(Error::config(at(), "empty key"));
            }
            if sec != "schedule" {
                let keys = KNOWN
                    .iter()
                    .find(|(s, _)| *s == sec)
                    .map(|(_, k)| *k)
                    .unwrap_or(&[]);
                if !keys.contains(&key) {
                    return Err(Error::config(
                        at(),
                        format!("unknown key `{key}` in [{sec}]"),
                    ));
                }
            }
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: line_no,
            };
            let prev = raw.entries.insert(
                (sec.clone(), key.to_string()),
                Entry {
                    value: value.to_string(),
                    origin,
                },
            );
            if prev.is_some() {
                return Err(Error::config(
                    at(),
                    format!("duplicate key `{key}` in [{sec}]"),
                ));
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Sets `section.key` from a command-line flag, replacing any file value.
    pub fn set_flag(&mut self, section: &str, key: &str, value: impl Into<String>, flag: &str) {
        self.entries.insert(
            (section.to_string(), key.to_string()),
            Entry {
                value: value.into(),
                origin: Origin::Flag(flag.to_string()),
            },
        );
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn parsed<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| {
                Error::config(
                    e.origin.to_string(),
                    format!("invalid value {:?} for {section}.{key}", e.value),
                )
            }),
        }
    }

    fn string(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).map(|e| e.value.as_str())
    }

    fn location(&self, section: &str, key: &str) -> String {
        self.get(section, key)
            .map(|e| e.origin.to_string())
            .unwrap_or_else(|| format!("{section}.{key}"))
    }

    fn schedule_section(&self) -> Vec<(&str, &Entry)> {
        self.entries
            .iter()
            .filter(|((s, _), _)| s == "schedule")
            .map(|((_, k), e)| (k.as_str(), e))
            .collect()
    }
}

impl ExperimentConfig {
    /// Default desk-scale experiment with the given preset's schedule.
    pub fn from_preset(name: &str, registry: &ScheduleRegistry) -> Result<Self> {
        let mut raw = RawConfig::default();
        raw.set_flag("experiment", "preset", name, "preset");
        Self::from_raw(&raw, registry)
    }

    pub fn from_raw(raw: &RawConfig, registry: &ScheduleRegistry) -> Result<Self> {
        let (schedule_name, schedule) = resolve_schedule(raw, registry)?;

        let dataset_name = raw.string("data", "dataset").unwrap_or("spirals");
        let dataset = match dataset_name {
            "spirals" => DatasetSelector::Spirals {
                n_per_class: raw.parsed("data", "n_per_class", 500)?,
                classes: raw.parsed("data", "classes", 3)?,
                noise: raw.parsed("data", "noise", 0.1)?,
            },
            "cifar10" => DatasetSelector::Cifar10 {
                dir: raw
                    .string("data", "path")
                    .unwrap_or(DEFAULT_CIFAR_DIR)
                    .into(),
            },
            "csv" => DatasetSelector::Csv {
                path: raw
                    .string("data", "path")
                    .ok_or_else(|| {
                        Error::config(
                            raw.location("data", "dataset"),
                            "csv dataset needs data.path",
                        )
                    })?
                    .into(),
            },
            other => match other.strip_prefix("cifar10:") {
                Some(dir) => DatasetSelector::Cifar10 { dir: dir.into() },
                None => DatasetSelector::Csv { path: other.into() },
            },
        };

        let activation = match raw.string("net", "activation") {
            None => Activation::Relu,
            Some(s) => Activation::parse(s).ok_or_else(|| {
                Error::config(
                    raw.location("net", "activation"),
                    format!("unknown activation {s:?}"),
                )
            })?,
        };

        let defaults = TrainConfig::default();
        let precision = match raw.string("train", "precision") {
            None => defaults.precision,
            Some(s) => Precision::parse(s).ok_or_else(|| {
                Error::config(
                    raw.location("train", "precision"),
                    format!("unknown precision {s:?}"),
                )
            })?,
        };
        let augment_default = matches!(dataset, DatasetSelector::Cifar10 { .. }).then_some(4);
        let augment_pad = match raw.string("train", "augment_pad") {
            None => augment_default,
            Some("none") => None,
            Some(_) => Some(raw.parsed("train", "augment_pad", 0usize)?),
        };
        let train = TrainConfig {
            epochs: raw.parsed("train", "epochs", defaults.epochs)?,
            batch_size: raw.parsed("train", "batch_size", defaults.batch_size)?,
            base_lr: raw.parsed("train", "base_lr", default_lr(&dataset))?,
            lr_milestones: (
                raw.parsed("train", "lr_milestone_1", defaults.lr_milestones.0)?,
                raw.parsed("train", "lr_milestone_2", defaults.lr_milestones.1)?,
            ),
            lr_factor: raw.parsed("train", "lr_factor", defaults.lr_factor)?,
            momentum: raw.parsed("train", "momentum", defaults.momentum)?,
            weight_decay: raw.parsed("train", "weight_decay", defaults.weight_decay)?,
            schedule,
            seed: raw.parsed("train", "seed", defaults.seed)?,
            val_fraction: raw.parsed("train", "val_fraction", defaults.val_fraction)?,
            precision,
            augment_pad,
            record_wall_time: raw.parsed("train", "record_wall_time", defaults.record_wall_time)?,
        };
        train
            .validate()
            .map_err(|e| Error::config("[train]", e.to_string()))?;

        let cfg = ExperimentConfig {
            out: raw
                .string("experiment", "out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs").join(&schedule_name)),
            schedule_name,
            dataset,
            blocks: raw.parsed("net", "blocks", 16)?,
            width: raw.parsed("net", "width", 32)?,
            activation,
            train,
        };
        if cfg.blocks == 0 {
            return Err(Error::config(
                raw.location("net", "blocks"),
                "blocks must be at least 1",
            ));
        }
        if cfg.width == 0 {
            return Err(Error::config(
                raw.location("net", "width"),
                "width must be at least 1",
            ));
        }
        Ok(cfg)
    }

    /// Human-readable dump, one `key = value` per line.
    pub fn summary_lines(&self) -> Vec<String> {
        let t = &self.train;
        vec![
            format!(
                "schedule = {} [{}]",
                self.schedule_name,
                t.schedule.describe()
            ),
            format!("dataset = {}", self.dataset),
            format!("blocks = {}", self.blocks),
            format!("width = {}", self.width),
            format!("activation = {}", self.activation.as_str()),
            format!("epochs = {}", t.epochs),
            format!("batch_size = {}", t.batch_size),
            format!("base_lr = {}", t.base_lr),
            format!(
                "lr_milestones = {}, {}",
                t.lr_milestones.0, t.lr_milestones.1
            ),
            format!("lr_factor = {}", t.lr_factor),
            format!("momentum = {}", t.momentum),
            format!("weight_decay = {}", t.weight_decay),
            format!("seed = {}", t.seed),
            format!("val_fraction = {}", t.val_fraction),
            format!("precision = {}", t.precision.as_str()),
        ]
    }
}

/// 0.1 for CIFAR-10. The unnormalized MLP on small vector sets collapses
/// into all-dead ReLUs at 0.1 with momentum 0.9, so those default to 0.01.
pub fn default_lr(dataset: &DatasetSelector) -> f64 {
    match dataset {
        DatasetSelector::Cifar10 { .. } => TrainConfig::default().base_lr,
        _ => 0.01,
    }
}

fn resolve_schedule(
    raw: &RawConfig,
    registry: &ScheduleRegistry,
) -> Result<(String, Arc<dyn DepthSchedule>)> {
    let section = raw.schedule_section();
    let preset = raw.get("experiment", "preset");
    match (preset, section.is_empty()) {
        (Some(p), false) => Err(Error::config(
            p.origin.to_string(),
            "give either a preset or a [schedule] section, not both",
        )),
        (Some(p), true) => {
            let spec = registry
                .resolve_preset(&p.value)
                .map_err(|e| Error::config(p.origin.to_string(), e.to_string()))?;
            Ok((p.value.clone(), Arc::new(spec)))
        }
        (None, true) => Ok((
            "normal".into(),
            registry.build("normal", &Hyperparams::new())?,
        )),
        (None, false) => {
            let family = section
                .iter()
                .find(|(k, _)| *k == "family")
                .map(|(_, e)| *e)
                .ok_or_else(|| Error::config("[schedule]", "missing `family`"))?;
            let mut params = Hyperparams::new();
            for (k, e) in section.iter().filter(|(k, _)| *k != "family") {
                let v: f64 = e.value.parse().map_err(|_| {
                    Error::config(
                        e.origin.to_string(),
                        format!("{k} = {:?} is not a number", e.value),
                    )
                })?;
                params.insert(k.to_string(), v);
            }
            let schedule = registry
                .build(&family.value, &params)
                .map_err(|e| Error::config(family.origin.to_string(), e.to_string()))?;
            Ok((family.value.clone(), schedule))
        }
    }
}
