//! Deterministic CSV files and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use isoshell::Error;

use crate::config::{fmt17, Result};

/// Rows of numbers under a header, with `# key=value` metadata on top.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table {
            header: header.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt17(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Where a command writes, and what the manifest should say about it.
#[derive(Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub name: String,
}

impl Sink {
    pub fn new(dir: &Path, name: &str) -> Result<Sink> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            name: name.to_string(),
        })
    }

    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.name))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(format!("{}.manifest", self.name))
    }

    pub fn write_csv(&self, t: &Table) -> Result<PathBuf> {
        let p = self.csv_path();
        std::fs::write(&p, t.render()).map_err(|e| io_error(&p, e))?;
        Ok(p)
    }

    pub fn write_manifest(&self, m: &Manifest) -> Result<PathBuf> {
        let p = self.manifest_path();
        std::fs::write(&p, m.render()).map_err(|e| io_error(&p, e))?;
        Ok(p)
    }
}

fn io_error(p: &Path, e: std::io::Error) -> Error {
    Error::InvalidParams(format!("cannot write {}: {e}", p.display()))
}

/// Everything needed to repeat a run: command, resolved settings,
/// tolerances and the residuals it produced.
#[derive(Debug, Default)]
pub struct Manifest {
    pub command: String,
    pub settings: BTreeMap<String, String>,
    pub results: Vec<(String, String)>,
    pub status: String,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "status={}", self.status);
        let _ = writeln!(s, "[settings]");
        for (k, v) in &self.settings {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "[results]");
        for (k, v) in &self.results {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// One-line machine-readable error record for stderr.
pub fn error_record(e: &Error, code: i32) -> String {
    let kind = match e {
        Error::Diverged { .. } => "diverged",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::UnknownSurface(_) => "unknown_surface",
        Error::InvalidParams(_) => "invalid_params",
        Error::Immersion { .. } => "immersion",
        Error::OutsideDomain { .. } => "outside_domain",
        Error::Regime(_) => "regime",
        Error::Planar => "planar",
        Error::ConstantCurvature => "constant_curvature",
        Error::CriticalPoint => "critical_point",
        Error::Obstructed { .. } => "obstructed",
        Error::Grid(_) => "grid",
        Error::Inconclusive { .. } => "inconclusive",
        Error::NonUnique { .. } => "non_unique",
        Error::Precondition(_) => "precondition",
        Error::Stability(_) => "stability",
        Error::Coverage(_) => "coverage",
        Error::Parse(_) => "parse",
    };
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
    format!("error kind={kind} code={code} message=\"{msg}\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("surface", "sphere");
        t.push(vec![0.1, -2.0]);
        assert_eq!(t.render(), "# surface=sphere\na,b\n1.0000000000000001e-1,-2.0000000000000000e0\n");
    }

    #[test]
    fn error_records_escape_quotes() {
        let r = error_record(&Error::Parse("bad \"x\"".into()), 1);
        assert_eq!(r, "error kind=parse code=1 message=\"parse error: bad \\\"x\\\"\"");
    }
}
