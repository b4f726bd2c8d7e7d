//! Flat key=value settings. Sources in increasing precedence: built-in
//! defaults, a config file, command-line settings. Every value a command
//! reads is recorded so the manifest reproduces the run.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use isoshell::expr::Expr;
use isoshell::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Default)]
pub struct Config {
    given: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
    read: RefCell<BTreeSet<String>>,
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::InvalidParams(format!("{key} = `{value}`: expected {what}"))
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
        out.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl Config {
    pub fn load(file: Option<&Path>, settings: &[String]) -> Result<Config> {
        let mut c = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParams(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_pairs(&text)? {
                c.given.insert(k, v);
            }
        }
        for s in settings {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{s}`")))?;
            c.given.insert(normalize_key(k), v.trim().to_string());
        }
        Ok(c)
    }

    /// Override from a named flag, if it was given.
    pub fn set_opt<T: ToString>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.given.insert(key.to_string(), v.to_string());
        }
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.read.borrow_mut().insert(key.to_string());
        self.given.get(key).cloned()
    }

    fn record(&self, key: &str, v: &str) {
        self.resolved.borrow_mut().insert(key.to_string(), v.to_string());
    }

    pub fn has(&self, key: &str) -> bool {
        self.given.contains_key(key)
    }

    pub fn str(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        let v = self.raw(key)?;
        self.record(key, &v);
        Some(v)
    }

    pub fn parse<T: FromStr + ToString>(&self, key: &str, default: T, what: &str) -> Result<T> {
        let v = match self.raw(key) {
            Some(s) => s.parse::<T>().map_err(|_| bad(key, &s, what))?,
            None => default,
        };
        self.record(key, &v.to_string());
        Ok(v)
    }

    /// Real number; accepts constant expressions such as `pi/4`.
    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        let v = match self.raw(key) {
            Some(s) => constant(&s).ok_or_else(|| bad(key, &s, "a number"))?,
            None => default,
        };
        self.record(key, &fmt17(v));
        Ok(v)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        self.parse(key, default, "a nonnegative integer")
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        self.parse(key, default, "true or false")
    }

    /// Comma-separated reals (constant expressions allowed).
    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.raw(key) {
            Some(s) if s.trim().is_empty() => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|p| constant(p).ok_or_else(|| bad(key, &s, "comma-separated numbers")))
                .collect::<Result<_>>()?,
            None => default.to_vec(),
        };
        self.record(key, &v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    pub fn fixed<const N: usize>(&self, key: &str, default: [f64; N]) -> Result<[f64; N]> {
        let v = self.list(key, &default)?;
        v.clone()
            .try_into()
            .map_err(|_| bad(key, &v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","), &format!("{N} numbers")))
    }

    /// Expression in the given variables.
    pub fn expr(&self, key: &str, default: &str, vars: &[&str]) -> Result<Expr> {
        let src = self.str(key, default);
        Expr::parse(&src, vars).map_err(|e| Error::Parse(format!("{key}: {e}")))
    }

    /// Everything read, with defaults filled in.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    /// Keys that were given but never read by the command.
    pub fn unused(&self) -> Vec<String> {
        let read = self.read.borrow();
        self.given.keys().filter(|k| !read.contains(*k)).cloned().collect()
    }
}

fn constant(s: &str) -> Option<f64> {
    if let Ok(v) = s.trim().parse::<f64>() {
        return Some(v);
    }
    Expr::parse(s, &[]).ok()?.as_const()
}

/// 17 significant digits, round-trip exact.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}
