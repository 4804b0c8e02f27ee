//! Data files and the run manifest. Every file is written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use catqrm::experiments::{ScenarioResult, Series, Table};
use serde::Serialize;

use crate::config::{Format, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serializing {what}: {source}")]
    Json { what: String, source: serde_json::Error },
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io { path: path.to_owned(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn table_csv(table: &Table) -> String {
    let mut header = Vec::new();
    for c in &table.columns {
        match c.data {
            Series::Real(_) => header.push(c.name.clone()),
            Series::Complex(_) => {
                header.push(format!("{}_re", c.name));
                header.push(format!("{}_im", c.name));
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..table.n_rows() {
        let mut first = true;
        for c in &table.columns {
            let cells = match &c.data {
                Series::Real(v) => vec![num(v[i])],
                Series::Complex(v) => vec![num(v[i].re), num(v[i].im)],
            };
            for cell in cells {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&cell);
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonTable<'a> {
    name: &'a str,
    n_rows: usize,
    columns: serde_json::Map<String, serde_json::Value>,
}

fn table_json(table: &Table) -> Result<serde_json::Value, OutputError> {
    let mut columns = serde_json::Map::new();
    for c in &table.columns {
        let v = serde_json::to_value(&c.data).map_err(|source| OutputError::Json { what: c.name.clone(), source })?;
        columns.insert(c.name.clone(), v);
    }
    serde_json::to_value(JsonTable { name: &table.name, n_rows: table.n_rows(), columns })
        .map_err(|source| OutputError::Json { what: table.name.clone(), source })
}

fn pretty(value: &impl Serialize, what: &str) -> Result<Vec<u8>, OutputError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|source| OutputError::Json { what: what.to_owned(), source })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the data files of one scenario and returns their names.
pub fn write_result(dir: &Path, cfg: &ScenarioConfig, result: &ScenarioResult) -> Result<Vec<String>, OutputError> {
    let stem = &cfg.output.stem;
    let mut files = Vec::new();
    match cfg.output.format {
        Format::Csv => {
            let main = format!("{stem}.csv");
            write_atomic(&dir.join(&main), table_csv(&result.table).as_bytes())?;
            files.push(main);
            for t in &result.companions {
                let name = format!("{stem}_{}.csv", t.name);
                write_atomic(&dir.join(&name), table_csv(t).as_bytes())?;
                files.push(name);
            }
        }
        Format::Json => {
            let mut doc = serde_json::Map::new();
            doc.insert("scenario".into(), result.name.clone().into());
            doc.insert("table".into(), table_json(&result.table)?);
            let companions = result.companions.iter().map(table_json).collect::<Result<Vec<_>, _>>()?;
            doc.insert("companions".into(), companions.into());
            let name = format!("{stem}.json");
            write_atomic(&dir.join(&name), &pretty(&doc, &name)?)?;
            files.push(name);
        }
    }
    Ok(files)
}

#[derive(Debug, Serialize)]
pub struct ScenarioRecord {
    pub scenario: String,
    pub files: Vec<String>,
    pub rows: usize,
    pub wall_time_s: f64,
    pub metrics: std::collections::BTreeMap<String, f64>,
    pub solver: catqrm::dynamics::SolverStats,
    /// Inputs exactly as the library saw them.
    pub resolved: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub software: &'static str,
    pub version: &'static str,
    /// Canonical config text; `parse_config` turns it back into the same run.
    pub config: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub scenarios: Vec<ScenarioRecord>,
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, OutputError> {
    let path = dir.join("manifest.json");
    write_atomic(&path, &pretty(manifest, "manifest")?)?;
    Ok(path)
}

/// `name  metric  runtime` for stdout.
pub fn summary_line(name: &str, metric: &str, seconds: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{name:<17} {metric:<48} {seconds:>9.3}s");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use catqrm::experiments::Column;
    use catqrm::qops::C64;

    #[test]
    fn csv_splits_complex_and_keeps_17_digits() {
        let t = Table::new(
            "t",
            vec![Column::real("x", vec![0.1, 1.0 / 3.0]), Column::complex("z", vec![C64::new(1.0, -2.0); 2])],
        )
        .unwrap();
        let csv = table_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,z_re,z_im");
        assert_eq!(lines[2], "3.3333333333333331e-1,1.0000000000000000e0,-2.0000000000000000e0");
        let back: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
