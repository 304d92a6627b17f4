//! On-disk corpus snapshots: `index.json` plus one AppAnalysis JSON per app
//! under `apps/`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::AppAnalysis;
use crate::device::Corpus;
use crate::longitudinal::CorpusSnapshot;

pub const INDEX_FILE: &str = "index.json";
pub const APPS_DIR: &str = "apps";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: app id `{found}` does not match index entry `{expected}`")]
    IndexMismatch { path: PathBuf, expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub app_id: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub source: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotIndex {
    pub label: String,
    pub apps: Vec<IndexEntry>,
    #[serde(default)]
    pub failures: Vec<Failure>,
}

/// File name for an app id; anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn file_name_for(app_id: &str) -> String {
    let stem: String = app_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    format!("{stem}.json")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SnapshotError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| SnapshotError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SnapshotError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| SnapshotError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_snapshot(dir: &Path, label: &str, corpus: &Corpus, failures: &[Failure]) -> Result<SnapshotIndex, SnapshotError> {
    let apps_dir = dir.join(APPS_DIR);
    fs::create_dir_all(&apps_dir).map_err(io_err(&apps_dir))?;

    let mut entries = Vec::with_capacity(corpus.len());
    let mut used = std::collections::BTreeSet::new();
    for (app_id, analysis) in corpus {
        let mut file = file_name_for(app_id);
        // Sanitizing can collide distinct ids; disambiguate deterministically.
        let mut n = 1;
        while !used.insert(file.clone()) {
            n += 1;
            file = format!("{}~{n}.json", file_name_for(app_id).trim_end_matches(".json"));
        }
        write_json(&apps_dir.join(&file), analysis)?;
        entries.push(IndexEntry {
            app_id: app_id.clone(),
            file: format!("{APPS_DIR}/{file}"),
        });
    }
    let index = SnapshotIndex {
        label: label.to_string(),
        apps: entries,
        failures: failures.to_vec(),
    };
    write_json(&dir.join(INDEX_FILE), &index)?;
    Ok(index)
}

pub fn read_snapshot(dir: &Path) -> Result<CorpusSnapshot, SnapshotError> {
    let index: SnapshotIndex = read_json(&dir.join(INDEX_FILE))?;
    let mut analyses = Corpus::new();
    for entry in &index.apps {
        let path = dir.join(&entry.file);
        let analysis: AppAnalysis = read_json(&path)?;
        if analysis.app_id != entry.app_id {
            return Err(SnapshotError::IndexMismatch {
                path,
                expected: entry.app_id.clone(),
                found: analysis.app_id,
            });
        }
        analyses.insert(analysis.app_id.clone(), analysis);
    }
    Ok(CorpusSnapshot::new(index.label, analyses))
}
