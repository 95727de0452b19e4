//! CSV and JSON artifacts with a provenance header.

use crate::error::CliError;
use serde_json::Value;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Doubles with 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Artifacts {
    dir: PathBuf,
    command: String,
    hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, hash: String, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            hash,
            seed,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn target(&mut self, name: &str) -> Result<PathBuf, CliError> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(CliError::Config(format!("artifact name {name:?} must be a plain file name")));
        }
        let path = self.dir.join(name);
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.target(name)?;
        let mut file = File::create(&path)?;
        writeln!(file, "# holomera v{VERSION} config={}", self.hash)?;
        writeln!(file, "# command={} seed={}", self.command, self.seed)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json(&mut self, name: &str, payload: Value) -> Result<PathBuf, CliError> {
        let path = self.target(name)?;
        let doc = serde_json::json!({
            "meta": {
                "version": VERSION,
                "config": self.hash,
                "command": self.command,
                "seed": self.seed,
            },
            "result": payload,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Reads a CSV artifact into its header and rows, skipping `#` lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}

/// Two numeric columns of a CSV artifact as pairs.
pub fn read_columns(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let (header, rows) = read_csv(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{} has no column {name:?}", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    rows.iter()
        .map(|r| {
            let parse = |i: usize| {
                r[i].parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad number {:?} in {}", r[i], path.display())))
            };
            Ok((parse(ix)?, parse(iy)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.2422297916, 1e-300, 6.02e23] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path(), "test", "abc".into(), 3).unwrap();
        let p = a
            .csv("t.csv", &["x", "y"], &[vec![float(1.0), float(2.5)], vec![float(2.0), float(-1.0)]])
            .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(&format!("# holomera v{VERSION} config=abc\n")));
        assert_eq!(read_columns(&p, "x", "y").unwrap(), vec![(1.0, 2.5), (2.0, -1.0)]);
        assert!(a.csv("../escape.csv", &["x"], &[]).is_err());
    }
}
