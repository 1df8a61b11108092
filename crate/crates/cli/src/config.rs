//! Run configuration: command-line flags over `BENDGRAPH_*` environment
//! variables over a `key = value` config file over built-in defaults.
//!
//! Config file format: one `key = value` per line, `#` starts a comment,
//! keys are the long flag names with `-` replaced by `_` (e.g. `max_epochs`).

use crate::CliError;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

pub const ENV_PREFIX: &str = "BENDGRAPH_";
/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "BENDGRAPH_CONFIG";

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", i + 1)));
        };
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(CliError::Usage(format!("config line {}: bad key {:?}", i + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Cli,
    Env,
    File,
    Default,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Cli => "cli",
            Source::Env => "env",
            Source::File => "file",
            Source::Default => "default",
        }
    }
}

pub struct Resolver {
    file: BTreeMap<String, String>,
    env: BTreeMap<String, String>,
    resolved: Map<String, Value>,
}

fn parse_bool(key: &str, s: &str) -> Result<bool, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected a boolean, got {s:?}"))),
    }
}

impl Resolver {
    /// Loads the config file named by `--config`, else by `BENDGRAPH_CONFIG`, if any.
    pub fn new(config: Option<&Path>) -> Result<Self, CliError> {
        let env: BTreeMap<String, String> = std::env::vars()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_ascii_lowercase(), v)))
            .filter(|(k, _)| k != "config")
            .collect();
        let path = config.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(Into::into));
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Input(format!("config file {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Resolver { file, env, resolved: Map::new() })
    }

    fn lookup(&self, key: &str) -> Option<(String, Source)> {
        self.env
            .get(key)
            .map(|v| (v.clone(), Source::Env))
            .or_else(|| self.file.get(key).map(|v| (v.clone(), Source::File)))
    }

    fn record(&mut self, key: &str, value: Value, source: Source) {
        self.resolved.insert(key.to_string(), json!({ "value": value, "source": source.as_str() }));
    }

    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let (v, src) = match cli {
            Some(v) => (v, Source::Cli),
            None => match self.lookup(key) {
                Some((s, src)) => (s.parse::<T>().map_err(|e| CliError::Usage(format!("{key}: {e}")))?, src),
                None => {
                    self.record(key, Value::Null, Source::Default);
                    return Ok(None);
                }
            },
        };
        self.record(key, Value::String(v.to_string()), src);
        Ok(Some(v))
    }

    pub fn value<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.optional(key, cli)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, Value::String(default.to_string()), Source::Default);
                Ok(default)
            }
        }
    }

    pub fn required<T>(&mut self, key: &str, cli: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, cli)?
            .ok_or_else(|| CliError::Usage(format!("missing --{} (or {ENV_PREFIX}{})", key.replace('_', "-"), key.to_ascii_uppercase())))
    }

    /// A switch: set on the command line wins, otherwise env or file may set it.
    pub fn flag(&mut self, key: &str, cli: bool) -> Result<bool, CliError> {
        let (v, src) = if cli {
            (true, Source::Cli)
        } else {
            match self.lookup(key) {
                Some((s, src)) => (parse_bool(key, &s)?, src),
                None => (false, Source::Default),
            }
        };
        self.record(key, Value::Bool(v), src);
        Ok(v)
    }

    /// Every key resolved so far with its value and source.
    pub fn resolved(&self, command: &str) -> Value {
        json!({ "command": command, "settings": Value::Object(self.resolved.clone()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values() {
        let m = parse_config("# comment\ngrid = 6\n\nmax-epochs=3 # trailing\nout = a b\n").unwrap();
        assert_eq!(m["grid"], "6");
        assert_eq!(m["max_epochs"], "3");
        assert_eq!(m["out"], "a b");
        assert!(parse_config("oops\n").is_err());
        assert!(parse_config("bad key = 1\n").is_err());
    }

    #[test]
    fn precedence_cli_env_file() {
        let mut r = Resolver { file: BTreeMap::new(), env: BTreeMap::new(), resolved: Map::new() };
        r.file.insert("grid".into(), "5".into());
        assert_eq!(r.value("grid", None, 10usize).unwrap(), 5);
        r.env.insert("grid".into(), "6".into());
        assert_eq!(r.value("grid", None, 10usize).unwrap(), 6);
        assert_eq!(r.value("grid", Some(7usize), 10).unwrap(), 7);
        assert_eq!(r.value("seed", None, 3u64).unwrap(), 3);
        let v = r.resolved("graph");
        assert_eq!(v["settings"]["grid"]["source"], "cli");
        assert_eq!(v["settings"]["seed"]["source"], "default");
        r.file.insert("no_mf".into(), "yes".into());
        assert!(r.flag("no_mf", false).unwrap());
        r.env.insert("grid".into(), "x".into());
        assert!(r.value("grid", None, 1usize).is_err());
    }
}
