//! Run configuration: defaults, `key=value` files and command-line overrides.
//!
//! Values are applied in order default, then file, then flags, so a flag
//! always wins. Keys may use `-` or `_`; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{DEFAULT_K, DEFAULT_NEGATIVES};
use crate::model::Variant;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

pub const KEYS: &[&str] = &[
    "data",
    "out",
    "checkpoint",
    "seed",
    "variant",
    "d",
    "lr",
    "lambda",
    "epochs",
    "patience",
    "batch_size",
    "rms_decay",
    "rms_eps",
    "k",
    "n_neg",
    "item_topk",
    "cat_topk",
    "n_users",
    "n_items",
    "n_categories",
    "n_scenes",
    "cats_per_scene",
    "interactions_per_user",
    "noise_rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub k: usize,
    pub n_neg: usize,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            out: None,
            checkpoint: None,
            seed: 0,
            k: DEFAULT_K,
            n_neg: DEFAULT_NEGATIVES,
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for {}: {:?}", key, value)))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let value = value.trim();
        let k = key.as_str();
        match k {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "seed" => {
                self.seed = parse(k, value)?;
                self.train.seed = self.seed;
                self.synth.seed = self.seed;
            }
            "variant" => self.train.variant = value.parse::<Variant>()?,
            "d" => self.train.dim = parse(k, value)?,
            "lr" => self.train.lr = parse(k, value)?,
            "lambda" => self.train.lambda = parse(k, value)?,
            "epochs" => self.train.epochs = parse(k, value)?,
            "patience" => self.train.patience = parse(k, value)?,
            "batch_size" => self.train.batch_size = parse(k, value)?,
            "rms_decay" => self.train.rms_decay = parse(k, value)?,
            "rms_eps" => self.train.rms_eps = parse(k, value)?,
            "k" => self.k = parse(k, value)?,
            "n_neg" => self.n_neg = parse(k, value)?,
            "item_topk" => self.synth.item_topk = parse(k, value)?,
            "cat_topk" => self.synth.cat_topk = parse(k, value)?,
            "n_users" => self.synth.n_users = parse(k, value)?,
            "n_items" => self.synth.n_items = parse(k, value)?,
            "n_categories" => self.synth.n_categories = parse(k, value)?,
            "n_scenes" => self.synth.n_scenes = parse(k, value)?,
            "cats_per_scene" => self.synth.cats_per_scene = parse(k, value)?,
            "interactions_per_user" => self.synth.interactions_per_user = parse(k, value)?,
            "noise_rate" => self.synth.noise_rate = parse(k, value)?,
            _ => return Err(Error::Config(format!("unknown key {:?}", key))),
        }
        Ok(())
    }

    pub fn apply<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the flag overrides.
    pub fn resolve(file: Option<&Path>, flags: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let pairs = read_config_file(path)?;
            cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        }
        cfg.apply(flags.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(cfg)
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key: data".into()))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key: out".into()))
    }

    pub fn checkpoint_path(&self) -> Result<PathBuf> {
        match &self.checkpoint {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join(CHECKPOINT_FILE)),
        }
    }
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.tsv";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const PER_USER_FILE: &str = "per_user.tsv";
pub const GRID_FILE: &str = "grid.tsv";

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_config(text: &str, label: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(label, idx + 1, "expected key=value"))?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::parse(label, idx + 1, format!("unknown key {:?}", key)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
