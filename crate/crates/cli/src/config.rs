//! `key = value` configuration files. Keys are the long flag names without
//! the leading dashes; `_` and `-` are interchangeable and case is ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Config {
    path: String,
    entries: BTreeMap<String, (usize, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl Config {
    pub fn parse(path: &str, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CliError::Config {
                path: path.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let key = normalize(key);
            let value = value.trim().trim_matches('"').to_string();
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries.insert(key.clone(), (i + 1, value)).is_some() {
                return Err(err(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, value)) = self.entries.remove(&normalize(key)) else {
            return Ok(None);
        };
        value.parse().map(Some).map_err(|e| CliError::Config {
            path: self.path.clone(),
            line,
            message: format!("bad value '{value}' for '{key}': {e}"),
        })
    }

    /// Fills `slot` from `key` unless it is already set; the key is consumed
    /// either way.
    pub fn fill<T: FromStr>(&mut self, slot: &mut Option<T>, key: &str) -> Result<(), CliError>
    where
        T::Err: std::fmt::Display,
    {
        let value = self.take(key)?;
        if slot.is_none() {
            *slot = value;
        }
        Ok(())
    }

    pub fn discard(&mut self, key: &str) {
        self.entries.remove(&normalize(key));
    }

    /// Fails on any key nobody consumed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(CliError::Config {
                path: self.path,
                line,
                message: format!("unknown key '{key}'"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_quotes_and_key_spellings() {
        let mut c = Config::parse("c", "# header\nomega_ho = 2e-4\n\nQuad-Method = \"adaptive\" # trailing\n").unwrap();
        assert_eq!(c.take::<f64>("omega-ho").unwrap(), Some(2e-4));
        assert_eq!(c.take::<String>("quad_method").unwrap().as_deref(), Some("adaptive"));
        assert!(c.finish().is_ok());
    }

    #[test]
    fn explicit_values_win() {
        let mut c = Config::parse("c", "delta = 0.3").unwrap();
        let mut slot = Some(1.0);
        c.fill(&mut slot, "delta").unwrap();
        assert_eq!(slot, Some(1.0));
        assert!(c.is_empty());
    }

    #[test]
    fn rejects_malformed_duplicate_and_unknown() {
        assert!(Config::parse("c", "delta 0.3").is_err());
        assert!(Config::parse("c", "delta = 1\ndelta = 2").is_err());
        let c = Config::parse("c", "colour = red").unwrap();
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let mut c = Config::parse("c", "delta = fast").unwrap();
        assert!(c.take::<f64>("delta").is_err());
    }
}
