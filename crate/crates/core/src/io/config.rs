//! Run configuration from a flat `key=value` file, overridable per key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{parse_key_values, read_file};
use crate::classify::ClassifierFamily;
use crate::dataset::ElectrodeMontage;
use crate::error::{Error, Result};

/// Everything an evaluation run needs. The seed is mandatory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub montages: Vec<ElectrodeMontage>,
    pub family: ClassifierFamily,
    pub trials: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub hyper: Option<f64>,
    pub out: PathBuf,
}

pub(crate) const CONFIG_KEYS: [&str; 8] = ["input", "montage", "family", "trials", "folds", "seed", "hyper", "out"];

fn list<T, F>(key: &str, value: &str, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} is empty")));
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    /// Reads a config file into raw key/value pairs.
    pub fn load_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let pairs = parse_key_values(&text)?;
        if let Some(k) = pairs.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?} in {}", path.display())));
        }
        Ok(pairs)
    }

    /// Builds a config from pairs; `overrides` win over `base`. Defaults:
    /// montage `II`, family `bayes_lda`, trials `5`, folds `10`, out `.`.
    pub fn resolve(base: &BTreeMap<String, String>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| overrides.get(k).or_else(|| base.get(k)).map(String::as_str);
        let inputs = match get("input") {
            Some(v) => list("input", v, |s| Ok(PathBuf::from(s)))?,
            None => return Err(Error::Config("no input given".into())),
        };
        for p in &inputs {
            if !p.exists() {
                return Err(Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        let seed = match get("seed") {
            Some(v) => number("seed", v)?,
            None => return Err(Error::Config("seed is required".into())),
        };
        let folds = number("folds", get("folds").unwrap_or("10"))?;
        if folds < 2 {
            return Err(Error::InvalidFoldCount(folds));
        }
        Ok(RunConfig {
            inputs,
            montages: list("montage", get("montage").unwrap_or("II"), str::parse)?,
            family: get("family").unwrap_or("bayes_lda").parse()?,
            trials: list("trials", get("trials").unwrap_or("5"), |s| number("trials", s))?,
            folds,
            seed,
            hyper: get("hyper").map(|v| number("hyper", v)).transpose()?,
            out: PathBuf::from(get("out").unwrap_or(".")),
        })
    }
}
