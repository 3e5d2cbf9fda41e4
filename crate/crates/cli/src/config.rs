//! `key = value` run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

pub const KEYS: &[KeySpec] = &[
    key("case", "landfill", "landfill | spe10"),
    key("mesh", "default", "NXxNY, or default (50x50 landfill, 60x220 spe10)"),
    key("seed", "0", "seed for sampling, splitting, folds and initialization"),
    key("workers", "4", "worker threads for generate and crossval"),
    key("dataset", "dataset", "dataset directory (holds all/, train/, test/)"),
    key("model", "model", "model directory"),
    key("out", "out", "directory for reports"),
    key("u0", "default", "landfill influx, kg/m2/s"),
    key("q", "default", "spe10 injection rate, kg/s"),
    key("cf", "default", "Forchheimer coefficient"),
    key("m", "default", "Forchheimer exponent"),
    key("delta", "default", "Darcy error tolerance"),
    key("n_channels", "2", "landfill channel count, 2 or 7"),
    key("porosities", "default", "comma-separated channel porosities"),
    key("permeability", "synthetic", "spe10 permeability: synthetic or a file path"),
    key("perm_seed", "35", "seed of the synthetic permeability field"),
    key("tol", "1e-6", "Picard tolerance on the relative magnitude change"),
    key("max_iter", "200", "Picard iteration cap"),
    key("relaxation", "1.0", "Picard under-relaxation in (0,1]"),
    key("smoothing", "0.1", "mollifier width as a fraction of the flux threshold"),
    key("table_points", "512", "coefficient table nodes near the threshold"),
    key("quadrature_nodes", "512", "mollifier quadrature nodes"),
    key("variant", "limit-consistent", "limit-consistent | paper-literal dissipation"),
    key("linear_solver", "direct", "direct | cg"),
    key("plan", "default", "sampling plan: default, or four draws:distinct pairs"),
    key("retry_relaxation", "0.5", "relaxation for retrying failed solves, or none"),
    key("keep_magnitudes", "false", "store flux magnitudes with the dataset"),
    key("test_fraction", "0.05", "held-out fraction"),
    key("hidden", "256,512", "hidden layer sizes for train"),
    key("learning_rate", "0.01", "learning rate for train"),
    key("best", "none", "best.json from crossval; overrides hidden and learning_rate"),
    key("max_iterations", "2500", "gradient descent iteration cap"),
    key("patience", "15", "early-stopping patience"),
    key("train_threshold", "1e-8", "early-stopping improvement threshold for train"),
    key("cv_hidden", "256,512", "hidden layer candidates, separated by ';'"),
    key("learning_rates", "0.1,0.01,0.0075,0.001", "learning-rate candidates"),
    key("kappa", "5", "cross-validation folds"),
    key("cv_threshold", "default", "early-stopping threshold in crossval (1e-6 landfill, 1e-5 spe10)"),
    key("threshold", "0.5", "classification threshold"),
    key("split", "test", "dataset part to evaluate: all | train | test"),
    key("predictions", "none", "probability CSV to evaluate instead of a model"),
    key("pgm", "false", "write predicted label maps in evaluate"),
    key("input", "features.csv", "feature rows for predict"),
];

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|k| (k.key, k.default.to_string())).collect() }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        let spec = KEYS.iter().find(|k| k.key == key).ok_or_else(|| usage(format!("unknown config key `{key}`")))?;
        self.values.insert(spec.key, value.trim().to_string());
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_assignment(&mut self, kv: &str) -> anyhow::Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("`{kv}` is not KEY=VALUE")))?;
        self.set(k.trim(), v)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).unwrap_or_else(|| panic!("config key `{key}` is not declared"))
    }

    pub fn is_default(&self, key: &str) -> bool {
        matches!(self.raw(key), "default" | "none")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| usage(format!("{key} = {raw}: {e}")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: fmt::Display,
    {
        if self.is_default(key) {
            Ok(default)
        } else {
            self.get(key)
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> anyhow::Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        parse_list(self.raw(key)).map_err(|e| usage(format!("{key}: {e}")))
    }

    pub fn bool(&self, key: &str) -> anyhow::Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(usage(format!("{key} = {other}: expected true or false"))),
        }
    }

    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        self.values.clone()
    }
}

pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

pub fn help_table() -> String {
    let width = KEYS.iter().map(|k| k.key.len() + k.default.len()).max().unwrap_or(0) + 4;
    let mut out = String::from("Config keys (KEY = DEFAULT), set in --config files or with --set KEY=VALUE:\n");
    for k in KEYS {
        let lhs = format!("{} = {}", k.key, k.default);
        out.push_str(&format!("  {lhs:<width$} {}\n", k.help));
    }
    out
}
