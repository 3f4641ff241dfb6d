//! Flat `key=value` configuration text with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed `key=value` pairs. Consumers take the keys they know;
/// [`KeyValues::finish`] rejects whatever is left.
#[derive(Clone, Debug)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Text {
                source_name: source.to_string(),
                line: line_no,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries
                .insert(k.to_string(), (v.to_string(), line_no))
                .is_some()
            {
                return Err(err(format!("duplicate key {k:?}")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Removes and parses `key` if present.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Text {
                source_name: self.source.clone(),
                line,
                msg: format!("bad value {v:?} for {key}: {e}"),
            }),
        }
    }

    /// Overwrites `field` when `key` is present.
    pub fn set<T>(&mut self, field: &mut T, key: &str) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = self.take(key)? {
            *field = v;
        }
        Ok(())
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::Text {
                source_name: self.source,
                line,
                msg: format!("unknown key {k:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let mut kv =
            KeyValues::parse("# header\nlr0 = 0.001 # trailing\n\nepochs=3\n", "t").unwrap();
        assert_eq!(kv.take::<f64>("lr0").unwrap(), Some(0.001));
        let mut e = 0usize;
        kv.set(&mut e, "epochs").unwrap();
        assert_eq!(e, 3);
        kv.finish().unwrap();
    }

    #[test]
    fn unknown_key_names_line() {
        let mut kv = KeyValues::parse("epochs=3\nlearning_rate=1\n", "cfg.txt").unwrap();
        kv.take::<usize>("epochs").unwrap();
        match kv.finish() {
            Err(Error::Text { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("learning_rate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines_and_values() {
        assert!(KeyValues::parse("novalue\n", "t").is_err());
        assert!(KeyValues::parse("a=1\na=2\n", "t").is_err());
        let mut kv = KeyValues::parse("epochs=many\n", "t").unwrap();
        assert!(kv.take::<usize>("epochs").is_err());
    }
}
