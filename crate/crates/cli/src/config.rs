//! `key = value` configuration files. Flags override file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

/// Bad invocation: missing or malformed arguments.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

const KEYS: &[&str] = &[
    "ablations",
    "accuracy",
    "audit",
    "budget",
    "cost",
    "flip",
    "flips",
    "gamma",
    "i-max",
    "lazy",
    "max-queries",
    "no-convergence",
    "out",
    "pool",
    "profile",
    "rules",
    "seed",
    "seed-size",
    "seeds",
    "source",
    "strategies",
    "strategy",
    "target-acc",
    "tau",
    "trials",
    "triples",
    "type-rules",
    "workers",
];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("line {}: expected `key = value`", idx + 1)))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("line {}: unknown key `{key}`", idx + 1)).into());
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Config { values })
    }

    /// The flag when given, else the file value parsed as `T`.
    pub fn pick<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("config key `{key}` = `{raw}`: {e}")).into()),
        }
    }

    /// A switch set by its flag or by `key = true` in the file.
    pub fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.pick::<bool>(key, None)?.unwrap_or(false))
    }
}

pub fn parse_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `0,3,7` or the half-open range `0..5`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || UsageError(format!("seeds `{text}` are neither a list nor a range a..b"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    Ok(parse_list(text).iter().map(|s| s.parse().map_err(|_| bad())).collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let cfg = Config::parse("# defaults\nstrategy = random\nseed_size=10\nlazy = true\n").unwrap();
        assert_eq!(cfg.pick::<String>("strategy", None).unwrap().as_deref(), Some("random"));
        assert_eq!(cfg.pick("strategy", Some("greedy".to_string())).unwrap().as_deref(), Some("greedy"));
        assert_eq!(cfg.pick::<usize>("seed-size", None).unwrap(), Some(10));
        assert!(cfg.flag("lazy", false).unwrap());
        assert!(!cfg.flag("type-rules", false).unwrap());
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(Config::parse("colour = blue").is_err());
        assert!(Config::parse("strategy random").is_err());
        let cfg = Config::parse("tau = high").unwrap();
        assert!(cfg.pick::<f64>("tau", None).is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("a..b").is_err());
        assert_eq!(parse_list(" a, ,b "), vec!["a", "b"]);
    }
}
