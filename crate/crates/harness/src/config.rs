//! Run configuration: a TOML file layered over built-in defaults, then
//! `section.key=value` overrides from the command line.
//!
//! ```toml
//! data_dir = "data"
//! out_dir = "runs/default"
//!
//! [generator]          # synthetic corpus (gen-data)
//! regime = "large_scale"
//! n_domains = 150
//! [generator.sizes]
//! sl_train = 50000
//!
//! [shortlister]
//! variant = "b"        # "a" or "b"
//! epochs = 10
//!
//! [pretrain]
//! max_examples = 10000
//!
//! [hyprank]
//! models = ["LR", "LSTM_C"]
//! k = 5
//!
//! [eval]
//! ks = [1, 3, 5]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hyprank_core::autodiff::AdamConfig;
use hyprank_core::encoder::EncoderConfig;
use hyprank_core::hyprank::{HypRankConfig, RerankerKind};
use hyprank_core::shortlister::SoftmaxVariant;
use hyprank_core::{Error, Result};
use hyprank_datagen::io::read_text;
use hyprank_datagen::GeneratorConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShortlisterSettings {
    pub variant: String,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_dim: usize,
    pub word_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub patience: usize,
    pub lr: f64,
}

impl Default for ShortlisterSettings {
    fn default() -> Self {
        let e = EncoderConfig::STANDARD;
        Self {
            variant: "b".into(),
            char_dim: e.char_dim,
            char_hidden: e.char_hidden,
            word_dim: e.word_dim,
            word_hidden: e.word_hidden,
            epochs: 10,
            batch_size: 32,
            dropout: 0.2,
            patience: 3,
            lr: 4e-4,
        }
    }
}

impl ShortlisterSettings {
    pub fn variant(&self) -> Result<SoftmaxVariant> {
        self.variant.parse()
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { char_dim: self.char_dim, char_hidden: self.char_hidden, word_dim: self.word_dim, word_hidden: self.word_hidden }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub lr: f64,
    /// Leading sl_train utterances used for pre-training.
    pub max_examples: usize,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        Self { epochs: 3, batch_size: 32, dropout: 0.2, lr: 4e-4, max_examples: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypRankSettings {
    pub models: Vec<String>,
    pub k: usize,
    pub hidden: usize,
    pub ff_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub patience: usize,
    pub lr: f64,
}

impl Default for HypRankSettings {
    fn default() -> Self {
        let c = HypRankConfig::default();
        Self {
            models: RerankerKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            k: 5,
            hidden: c.hidden,
            ff_hidden: c.ff_hidden,
            epochs: 30,
            batch_size: 32,
            dropout: 0.2,
            patience: 5,
            lr: 4e-4,
        }
    }
}

impl HypRankSettings {
    pub fn kinds(&self) -> Result<Vec<RerankerKind>> {
        self.models.iter().map(|m| m.parse()).collect()
    }

    pub fn model_config(&self) -> HypRankConfig {
        HypRankConfig { hidden: self.hidden, ff_hidden: self.ff_hidden }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub ks: Vec<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { ks: vec![1, 3, 5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub generator: GeneratorConfig,
    pub shortlister: ShortlisterSettings,
    pub pretrain: PretrainSettings,
    pub hyprank: HypRankSettings,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            out_dir: "runs/default".into(),
            generator: GeneratorConfig::default(),
            shortlister: ShortlisterSettings::default(),
            pretrain: PretrainSettings::default(),
            hyprank: HypRankSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

pub fn adam(lr: f64) -> AdamConfig {
    AdamConfig { lr, ..AdamConfig::default() }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::parameter(format!("{name} = {v} must lie in [0, 1)")))
    }
}

fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::parameter(format!("{name} must be positive")));
    }
    Ok(())
}

fn check_lr(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::parameter(format!("{name} = {v} must be positive")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.shortlister;
        s.variant()?;
        for (n, v) in [
            ("shortlister.char_dim", s.char_dim),
            ("shortlister.char_hidden", s.char_hidden),
            ("shortlister.word_dim", s.word_dim),
            ("shortlister.word_hidden", s.word_hidden),
            ("shortlister.batch_size", s.batch_size),
            ("pretrain.batch_size", self.pretrain.batch_size),
            ("hyprank.k", self.hyprank.k),
            ("hyprank.hidden", self.hyprank.hidden),
            ("hyprank.ff_hidden", self.hyprank.ff_hidden),
            ("hyprank.batch_size", self.hyprank.batch_size),
        ] {
            check_positive(n, v)?;
        }
        check_rate("shortlister.dropout", s.dropout)?;
        check_rate("pretrain.dropout", self.pretrain.dropout)?;
        check_rate("hyprank.dropout", self.hyprank.dropout)?;
        check_lr("shortlister.lr", s.lr)?;
        check_lr("pretrain.lr", self.pretrain.lr)?;
        check_lr("hyprank.lr", self.hyprank.lr)?;
        self.hyprank.kinds()?;
        if self.eval.ks.contains(&0) {
            return Err(Error::parameter("eval.ks entries must be positive"));
        }
        self.generator.validate()
    }

    /// Defaults, overlaid by the TOML file at `path` (if any), overlaid by
    /// `overrides` of the form `section.key=value`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = toml::Value::try_from(RunConfig::default()).map_err(|e| Error::format(format!("config defaults: {e}")))?;
        if let Some(path) = path {
            let text = read_text(path)?;
            let file: toml::Table = toml::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
            merge(&mut value, toml::Value::Table(file));
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = value.try_into().map_err(|e| Error::parameter(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("config encoding: {e}")))
    }
}

fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Parses a scalar override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(value: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::parameter(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::parameter(format!("bad override key {key:?}")));
    }
    let mut node = value;
    for part in &path[..path.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| Error::parameter(format!("{key}: {part} is not a section")))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| Error::parameter(format!("{key} does not name a setting")))?;
    table.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}
