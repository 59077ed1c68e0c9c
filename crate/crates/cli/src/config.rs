//! Flat `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment; `[section]` headers
//! prefix the keys that follow with `section.`. Every key must be declared
//! by the experiment's schema, and resolution fills in the declared
//! defaults so the manifest can echo the complete configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dyn_nn_lab::Matrix64;

use crate::error::CliError;

/// Environment variable consulted when a config sets no `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "DYN_NN_LAB_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "dyn-nn-lab-output";

/// Declared key with its default; an empty default means "unset".
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Keys every experiment accepts.
pub const COMMON_KEYS: [Key; 4] = [
    key("experiment", "", "experiment id, see `dyn-nn-lab list`"),
    key("seed", "0", "root seed of every random stream"),
    key("output_dir", "", "directory for CSV, SVG and manifest output"),
    key("plot", "false", "also write plot_*.svg line charts"),
];

/// Parsed file, before schema checks.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(CliError::syntax(line_no, "unterminated section header"));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::syntax(line_no, "expected `key = value`"));
            };
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(CliError::syntax(line_no, &format!("malformed key '{k}'")));
            }
            let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            let v = unquote(v.trim());
            if entries.insert(full.clone(), (v, line_no)).is_some() {
                return Err(CliError::config(&full, format!("duplicate key (line {line_no})")));
            }
        }
        Ok(Self { entries, base_dir: base_dir.to_path_buf() })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Checks keys against `schema` and fills in defaults.
    pub fn resolve(&self, schema: &[Key]) -> Result<Config, CliError> {
        for (k, (_, line)) in &self.entries {
            if !schema.iter().any(|s| s.name == k) {
                let hint = schema
                    .iter()
                    .map(|s| (strsim::levenshtein(s.name, k), s.name))
                    .filter(|(d, _)| *d <= 2)
                    .min()
                    .map(|(_, s)| format!("; did you mean '{s}'?"))
                    .unwrap_or_default();
                return Err(CliError::config(k, format!("unknown key (line {line}){hint}")));
            }
        }
        let mut values = BTreeMap::new();
        for s in schema {
            let v = self.get(s.name).unwrap_or(s.default).to_string();
            values.insert(s.name.to_string(), v);
        }
        let mut cfg = Config { values, order: schema.iter().map(|k| k.name).collect() };
        if cfg.values["output_dir"].is_empty() {
            let dir = std::env::var(OUTPUT_DIR_ENV).ok().filter(|d| !d.is_empty()).unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
            cfg.values.insert("output_dir".into(), dir);
        }
        // resolve paths once so a manifest re-run finds the same files
        let out = absolute(Path::new(&cfg.values["output_dir"]), &std::env::current_dir().unwrap_or_default());
        cfg.values.insert("output_dir".into(), out.display().to_string());
        for s in schema.iter().filter(|s| s.name.ends_with(".file")) {
            let v = &cfg.values[s.name];
            if !v.is_empty() {
                let p = absolute(Path::new(v), &self.base_dir);
                cfg.values.insert(s.name.to_string(), p.display().to_string());
            }
        }
        Ok(cfg)
    }
}

fn unquote(v: &str) -> String {
    let q = v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\'')));
    if q { v[1..v.len() - 1].to_string() } else { v.to_string() }
}

fn absolute(p: &Path, base: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

/// Resolved configuration with typed accessors. Errors name the key.
#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    order: Vec<&'static str>,
}

impl Config {
    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key '{key}' is not in the schema"))
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("output_dir"))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key);
        if v.is_empty() {
            return Err(CliError::config(key, "a value is required"));
        }
        v.parse::<T>().map_err(|e| CliError::config(key, format!("cannot parse '{v}': {e}")))
    }

    pub fn string(&self, key: &str) -> Result<String, CliError> {
        let v = self.raw(key);
        if v.is_empty() {
            return Err(CliError::config(key, "a value is required"));
        }
        Ok(v.to_string())
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v: f64 = self.parse(key)?;
        if v.is_nan() {
            return Err(CliError::config(key, "NaN is not allowed"));
        }
        Ok(v)
    }

    pub fn finite(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if !v.is_finite() {
            return Err(CliError::config(key, format!("must be finite, got {v}")));
        }
        Ok(v)
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.finite(key)?;
        if v <= 0.0 {
            return Err(CliError::config(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn nonnegative(&self, key: &str) -> Result<f64, CliError> {
        let v = self.finite(key)?;
        if v < 0.0 {
            return Err(CliError::config(key, format!("must be nonnegative, got {v}")));
        }
        Ok(v)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.is_set(key) { self.f64(key).map(Some) } else { Ok(None) }
    }

    pub fn usize_at_least(&self, key: &str, min: usize) -> Result<usize, CliError> {
        let v: usize = self.parse(key)?;
        if v < min {
            return Err(CliError::config(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(CliError::config(key, format!("expected true or false, got '{v}'"))),
        }
    }

    /// Comma-separated reals, optionally wrapped in brackets or parentheses.
    pub fn list_f64(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.raw(key).trim();
        let inner = v.trim_start_matches(['[', '(']).trim_end_matches([']', ')']);
        if inner.trim().is_empty() {
            return Err(CliError::config(key, "a non-empty list is required"));
        }
        inner
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| !x.is_nan())
                    .ok_or_else(|| CliError::config(key, format!("'{s}' is not a number")))
            })
            .collect()
    }

    pub fn list_usize(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.list_f64(key)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
                    Ok(x as usize)
                } else {
                    Err(CliError::config(key, format!("{x} is not a count")))
                }
            })
            .collect()
    }

    /// Rows separated by `;`, entries by `,`.
    pub fn matrix(&self, key: &str) -> Result<Matrix64, CliError> {
        let v = self.raw(key);
        let rows: Vec<Vec<f64>> = v
            .split(';')
            .map(|r| {
                r.split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::config(key, format!("'{}' is not a number", s.trim()))))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Matrix64::from_rows(&rows).map_err(|e| CliError::config(key, e.to_string()))
    }

    /// `key = value` lines in schema order.
    pub fn to_lines(&self) -> Vec<String> {
        self.order.iter().map(|k| format!("{k} = {}", self.values[*k])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: [Key; 6] = [
        COMMON_KEYS[0],
        COMMON_KEYS[1],
        COMMON_KEYS[2],
        COMMON_KEYS[3],
        key("gd.eta", "0.1", ""),
        key("gd.theta0", "1,2", ""),
    ];

    fn parse(text: &str) -> Result<Config, CliError> {
        RawConfig::parse(text, Path::new("/tmp"))?.resolve(&SCHEMA)
    }

    #[test]
    fn sections_comments_and_defaults() {
        let c = parse("experiment = x # trailing\n[gd]\neta = 0.25\noutput_dir = ignored-section-key\n").unwrap_err();
        assert_eq!(c.key(), Some("gd.output_dir"));
        let c = parse("# header\nexperiment = \"x\"\n[gd]\neta = 0.25\n").unwrap();
        assert_eq!(c.f64("gd.eta").unwrap(), 0.25);
        assert_eq!(c.list_f64("gd.theta0").unwrap(), vec![1.0, 2.0]);
        assert_eq!(c.raw("experiment"), "x");
    }

    #[test]
    fn unknown_key_is_named_with_hint() {
        let e = parse("experiment = x\ngd.etta = 0.2\n").unwrap_err();
        assert_eq!(e.key(), Some("gd.etta"));
        assert!(e.to_string().contains("did you mean 'gd.eta'"), "{e}");
    }

    #[test]
    fn duplicates_and_syntax() {
        assert!(parse("gd.eta = 1\ngd.eta = 2\n").is_err());
        assert!(matches!(parse("no equals sign\n"), Err(CliError::Syntax { line: 1, .. })));
    }

    #[test]
    fn typed_errors_name_the_key() {
        let c = parse("experiment = x\ngd.eta = fast\n").unwrap();
        let e = c.f64("gd.eta").unwrap_err();
        assert_eq!(e.key(), Some("gd.eta"));
        let c = parse("experiment = x\ngd.theta0 = [2.5, 0.41]\n").unwrap();
        assert_eq!(c.list_f64("gd.theta0").unwrap(), vec![2.5, 0.41]);
    }

    #[test]
    fn lines_round_trip() {
        let c = parse("experiment = x\ngd.eta = 0.30000000000000004\noutput_dir = /tmp/o\n").unwrap();
        let text = c.to_lines().join("\n");
        let again = parse(&text).unwrap();
        assert_eq!(again.to_lines(), c.to_lines());
    }
}
