//! Pipeline settings: defaults, config-file parsing and flag overrides.
//!
//! Every tunable lives in a flat `section.key` table. A config file supplies
//! values as `key = value` lines under `[section]` headers; each key is also
//! exposed as a long command-line flag of the same dotted name, which takes
//! precedence over the file. Unknown keys are rejected. The fully resolved
//! table is echoed into every run manifest.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use eclf_core::pipeline::{EclfConfig, Variant};
use eclf_core::series::YearMonth;

/// `(key, default, help)` for every tunable.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("stl.period", "12", "seasonal cycle length in months"),
    (
        "stl.seasonal_window",
        "7",
        "odd LOESS window for cycle-subseries smoothing",
    ),
    (
        "stl.trend_window",
        "23",
        "odd LOESS window for trend smoothing",
    ),
    ("stl.robust_iterations", "1", "outer robustness passes"),
    ("stl.inner_iterations", "2", "inner seasonal/trend passes"),
    (
        "features.pcc_threshold",
        "0.3",
        "minimum |correlation| to keep a feature",
    ),
    (
        "features.keep_fraction",
        "0.5",
        "fraction of screened features kept after pruning",
    ),
    (
        "features.trend_preset",
        "",
        "comma-separated trend feature list; empty selects automatically",
    ),
    (
        "features.random_preset",
        "",
        "comma-separated random feature list; empty selects automatically",
    ),
    ("lstm_trend.hidden", "50", "recurrent units, trend stage"),
    ("lstm_trend.window", "12", "lookback months, trend stage"),
    (
        "lstm_trend.learning_rate",
        "0.001",
        "optimizer step size, trend stage",
    ),
    ("lstm_trend.beta1", "0.9", "first-moment decay, trend stage"),
    (
        "lstm_trend.beta2",
        "0.999",
        "second-moment decay, trend stage",
    ),
    (
        "lstm_trend.epsilon",
        "1e-8",
        "optimizer denominator floor, trend stage",
    ),
    ("lstm_trend.epochs", "120", "training epochs, trend stage"),
    (
        "lstm_trend.batch_size",
        "12",
        "mini-batch size, trend stage",
    ),
    ("lstm_random.hidden", "50", "recurrent units, random stage"),
    ("lstm_random.window", "12", "lookback months, random stage"),
    (
        "lstm_random.learning_rate",
        "0.001",
        "optimizer step size, random stage",
    ),
    (
        "lstm_random.beta1",
        "0.9",
        "first-moment decay, random stage",
    ),
    (
        "lstm_random.beta2",
        "0.999",
        "second-moment decay, random stage",
    ),
    (
        "lstm_random.epsilon",
        "1e-8",
        "optimizer denominator floor, random stage",
    ),
    ("lstm_random.epochs", "120", "training epochs, random stage"),
    (
        "lstm_random.batch_size",
        "12",
        "mini-batch size, random stage",
    ),
    (
        "gbt_trend.n_estimators",
        "300",
        "boosting rounds, trend stage",
    ),
    ("gbt_trend.max_depth", "2", "tree depth, trend stage"),
    ("gbt_trend.learning_rate", "0.11", "shrinkage, trend stage"),
    ("gbt_trend.lambda", "1", "L2 leaf penalty, trend stage"),
    ("gbt_trend.gamma", "0", "per-leaf penalty, trend stage"),
    (
        "gbt_trend.min_child_weight",
        "1",
        "minimum hessian mass per child, trend stage",
    ),
    (
        "gbt_random.n_estimators",
        "300",
        "boosting rounds, random stage",
    ),
    ("gbt_random.max_depth", "2", "tree depth, random stage"),
    (
        "gbt_random.learning_rate",
        "0.11",
        "shrinkage, random stage",
    ),
    ("gbt_random.lambda", "1", "L2 leaf penalty, random stage"),
    ("gbt_random.gamma", "0", "per-leaf penalty, random stage"),
    (
        "gbt_random.min_child_weight",
        "1",
        "minimum hessian mass per child, random stage",
    ),
    ("run.variant", "ECLF", "ECLF, EC-Neither, EC-RC or EC-TC"),
    ("run.stack_folds", "4", "expanding-window cross-fit folds"),
    ("run.seed", "42", "base RNG seed"),
    (
        "run.split",
        "auto",
        "first forecast month (YYYY-MM), or `auto` for January of the final year",
    ),
];

/// Fully resolved `key -> value` table.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn defaults() -> Self {
        Settings {
            values: KEYS
                .iter()
                .map(|(k, d, _)| (k.to_string(), d.to_string()))
                .collect(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.values.contains_key(key) {
            bail!("unknown configuration key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a config file: `[section]` headers, `key = value` lines,
    /// `#` comments.
    pub fn apply_file(&mut self, text: &str, path: &str) -> Result<()> {
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{path}:{}: expected `key = value`, got {raw:?}", no + 1);
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            self.set(&full, value.trim())
                .with_context(|| format!("{path}:{}", no + 1))?;
        }
        Ok(())
    }

    /// Applies `--section.key value` style overrides from parsed arguments.
    pub fn apply_overrides(&mut self, matches: &clap::ArgMatches) -> Result<()> {
        for (key, _, _) in KEYS {
            if let Some(value) = matches.get_one::<String>(key) {
                self.set(key, value)?;
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.values[key]
            .parse()
            .map_err(|e| anyhow::anyhow!("configuration key {key} = {:?}: {e}", self.values[key]))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("run.seed")
    }

    /// First forecast month; `auto` resolves to January of `final_year`.
    pub fn split(&self, final_year: i32) -> Result<YearMonth> {
        let raw = self.get("run.split");
        if raw == "auto" {
            return Ok(YearMonth::new(final_year, 1)?);
        }
        Ok(raw.parse::<YearMonth>()?)
    }

    pub fn stl(&self) -> Result<eclf_core::decompose::StlConfig> {
        Ok(eclf_core::decompose::StlConfig {
            period: self.parse("stl.period")?,
            seasonal_window: self.parse("stl.seasonal_window")?,
            trend_window: self.parse("stl.trend_window")?,
            robust_iterations: self.parse("stl.robust_iterations")?,
            inner_iterations: self.parse("stl.inner_iterations")?,
        })
    }

    fn lstm_stage(&self, section: &str, seed: u64) -> Result<eclf_core::pipeline::LstmStageConfig> {
        Ok(eclf_core::pipeline::LstmStageConfig {
            hidden: self.parse(&format!("{section}.hidden"))?,
            window: self.parse(&format!("{section}.window"))?,
            adam: eclf_core::lstm::AdamConfig {
                lr: self.parse(&format!("{section}.learning_rate"))?,
                beta1: self.parse(&format!("{section}.beta1"))?,
                beta2: self.parse(&format!("{section}.beta2"))?,
                epsilon: self.parse(&format!("{section}.epsilon"))?,
                epochs: self.parse(&format!("{section}.epochs"))?,
                batch_size: self.parse(&format!("{section}.batch_size"))?,
                seed,
            },
        })
    }

    fn gbt_stage(&self, section: &str) -> Result<eclf_core::gbt::GbtConfig> {
        Ok(eclf_core::gbt::GbtConfig {
            n_estimators: self.parse(&format!("{section}.n_estimators"))?,
            max_depth: self.parse(&format!("{section}.max_depth"))?,
            learning_rate: self.parse(&format!("{section}.learning_rate"))?,
            lambda: self.parse(&format!("{section}.lambda"))?,
            gamma: self.parse(&format!("{section}.gamma"))?,
            min_child_weight: self.parse(&format!("{section}.min_child_weight"))?,
        })
    }

    /// `""` means automatic selection; otherwise a comma-separated name list.
    fn feature_preset(&self, key: &str) -> Option<Vec<String>> {
        let raw = self.get(key).trim();
        if raw.is_empty() {
            return None;
        }
        Some(
            raw.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    pub fn eclf(&self) -> Result<EclfConfig> {
        let seed = self.seed()?;
        Ok(EclfConfig {
            stl: self.stl()?,
            pcc_threshold: self.parse("features.pcc_threshold")?,
            keep_fraction: self.parse("features.keep_fraction")?,
            trend_features: self.feature_preset("features.trend_preset"),
            random_features: self.feature_preset("features.random_preset"),
            lstm_trend: self.lstm_stage("lstm_trend", seed)?,
            lstm_random: self.lstm_stage("lstm_random", seed)?,
            gbt_trend: self.gbt_stage("gbt_trend")?,
            gbt_random: self.gbt_stage("gbt_random")?,
            variant: self.get("run.variant").parse::<Variant>()?,
            stack_folds: self.parse("run.stack_folds")?,
            seed,
        })
    }

    /// The resolved table, for manifest echoing.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
