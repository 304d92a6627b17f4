use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Shares and other fractions in machine files.
pub fn share(x: f64) -> String {
    format!("{x:.4}")
}

pub fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.4}"),
        None => "undefined".to_string(),
    }
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn csv<R, S>(&self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = Vec<S>>,
        S: AsRef<[u8]>,
    {
        let path = self.0.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| write_error(&path, e))?;
        w.write_record(header).map_err(|e| write_error(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| write_error(&path, e))?;
        }
        w.flush().map_err(|e| write_error(&path, e))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.0.join(name), value)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| write_error(path, e))
}

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

/// Writes to `path`, or stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| write_error(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
    }
}
