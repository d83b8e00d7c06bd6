//! Flat `key = value` config files. Keys use the long flag names without the
//! leading dashes; a flag given on the command line wins over the file.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "data",
    "model",
    "out",
    "seed",
    "threads",
    "mode",
    "stages",
    "trees",
    "max-depth",
    "k-features",
    "min-samples-leaf",
    "min-weighted-fraction",
    "epsilon-floor",
    "percentile",
    "percentiles",
    "b-reg",
    "weighted",
    "part",
    "train-fraction",
    "validation-fraction",
    "test-fraction",
    "stratified",
    "rescale-event-weights",
    "split-column",
    "label-column",
    "weight-column",
    "id-column",
    "ignore-columns",
    "n-trees",
    "sample-size",
    "n-samples",
    "dimension",
    "overlap",
    "imbalance",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: String,
    entries: HashMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, Failure> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::usage(format!("{path}:{}: expected key = value", i + 1)));
            };
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Failure::usage(format!("{path}:{}: unknown key {key:?}", i + 1)));
            }
            if entries.insert(key.clone(), (value.trim().to_string(), i + 1)).is_some() {
                return Err(Failure::usage(format!("{path}:{}: {key:?} set twice", i + 1)));
            }
        }
        Ok(ConfigFile {
            path: path.to_string(),
            entries,
        })
    }

    /// The command-line value if present, else the parsed file value.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|e| {
                Failure::usage(format!("{}:{line}: invalid value {value:?} for {key}: {e}", self.path))
            }),
        }
    }

    /// As [`ConfigFile::pick`] with a fallback.
    pub fn get<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn list<T: FromStr>(&self, cli: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e| {
                        Failure::usage(format!("{}:{line}: invalid entry {s:?} for {key}: {e}", self.path))
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let c = ConfigFile::parse("# run\nstages = 5\nmax_depth=3  # shallow\n\nignore-columns = a, b\n", "f").unwrap();
        assert_eq!(c.get(None, "stages", 1usize).unwrap(), 5);
        assert_eq!(c.get(None, "max-depth", 8usize).unwrap(), 3);
        assert_eq!(
            c.list::<String>(None, "ignore-columns").unwrap().unwrap(),
            vec!["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn cli_wins() {
        let c = ConfigFile::parse("stages = 5\n", "f").unwrap();
        assert_eq!(c.get(Some(9usize), "stages", 1).unwrap(), 9);
        assert_eq!(c.get(None, "trees", 100usize).unwrap(), 100);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("stages\n", "f").is_err());
        assert!(ConfigFile::parse("colour = red\n", "f").is_err());
        assert!(ConfigFile::parse("stages = 1\nstages = 2\n", "f").is_err());
        let c = ConfigFile::parse("stages = many\n", "f").unwrap();
        let err = c.get(None, "stages", 1usize).unwrap_err();
        assert!(err.message.contains("f:1"), "{}", err.message);
    }
}
