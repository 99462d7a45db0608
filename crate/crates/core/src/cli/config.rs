use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::{DataWindow, WindowRole};

/// Every key accepted in a configuration file.
pub const KNOWN_KEYS: &[&str] = &[
    "input",
    "output_dir",
    "seed",
    "threads",
    "training_start",
    "training_end",
    "development_start",
    "development_end",
    "test_start",
    "test_end",
    "calibration_window",
    "keywords",
    "sub_keywords",
    "c0",
    "mu",
    "sigma",
    "corr",
    "F",
    "m",
    "T_days",
    "r",
    "match",
    "weights",
    "method",
    "n_paths",
    "alpha",
    "lags",
    "models",
    "n_simulations",
    "k",
    "model",
    "n_trials",
    "epsilon",
    "d_conv",
    "rate_scale",
    "accounting",
    "hedge_pricer",
    "hedge_paths",
    "grid_lo",
    "grid_hi",
    "grid_points",
    "revenue_method",
    "n_steps",
    "drift",
];

/// A parsed configuration file: flat `key = value` lines, `#` comments.
/// Lists are comma-separated; matrices separate rows with `;`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses config text. Relative paths resolve against the current
    /// directory; [`RunConfig::load`] resolves them against the file's folder.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
                location: format!("config line {}", i + 1),
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Malformed {
                    location: format!("config line {}", i + 1),
                    message: format!("unknown key `{key}`"),
                });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Malformed {
                    location: format!("config line {}", i + 1),
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::new(),
        })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::invalid(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::invalid(format!("missing config key `{key}`")))
    }

    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::invalid(format!("config key `{key}`: cannot parse `{v}` ({e})"))))
            .transpose()
    }

    pub fn value_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn required<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.parse_value(key)?.ok_or_else(|| Error::invalid(format!("missing config key `{key}`")))
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|v| parse_floats(key, v)).transpose()
    }

    pub fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.get(key)
            .map(|v| v.split(';').filter(|r| !r.trim().is_empty()).map(|r| parse_floats(key, r)).collect())
            .transpose()
    }

    /// Resolves a path-valued key relative to the config file location.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|p| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.path("output_dir").unwrap_or_else(|| self.base_dir.join("out"))
    }

    /// The master seed. Randomized commands refuse to run without one.
    pub fn seed(&self) -> Result<u64> {
        self.required("seed")
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        self.parse_value("threads")
    }

    pub fn window(&self, role: WindowRole) -> Result<Option<DataWindow>> {
        let prefix = match role {
            WindowRole::Training => "training",
            WindowRole::Development => "development",
            WindowRole::Test => "test",
        };
        let start = self.get(&format!("{prefix}_start"));
        let end = self.get(&format!("{prefix}_end"));
        match (start, end) {
            (None, None) => Ok(None),
            (Some(s), Some(e)) => Ok(Some(DataWindow::new(role, parse_date(s)?, parse_date(e)?)?)),
            _ => Err(Error::invalid(format!("`{prefix}_start` and `{prefix}_end` must be given together"))),
        }
    }

    /// Canonical `key=value` text of every entry except `threads` and
    /// `output_dir`, neither of which affects results.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "threads" | "output_dir"))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn parse_floats(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::invalid(format!("config key `{key}`: `{s}` is not a number"))))
        .collect()
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::invalid(format!("bad date `{s}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_matrices_and_comments() {
        let cfg = RunConfig::parse("# pricing\nF = 3.85, 4.67\ncorr = 1,0.2; 0.2,1\nm = 100 # clicks\n").unwrap();
        assert_eq!(cfg.floats("F").unwrap().unwrap(), vec![3.85, 4.67]);
        assert_eq!(cfg.matrix("corr").unwrap().unwrap(), vec![vec![1.0, 0.2], vec![0.2, 1.0]]);
        assert_eq!(cfg.required::<f64>("m").unwrap(), 100.0);
        assert!(cfg.seed().is_err());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RunConfig::parse("colour = red\n").is_err());
        assert!(RunConfig::parse("m = 1\nm = 2\n").is_err());
        assert!(RunConfig::parse("just words\n").is_err());
    }

    #[test]
    fn canonical_form_ignores_threads_and_output_dir() {
        let a = RunConfig::parse("seed = 1\nthreads = 1\noutput_dir = a\n").unwrap();
        let b = RunConfig::parse("threads = 8\nseed = 1\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }
}
