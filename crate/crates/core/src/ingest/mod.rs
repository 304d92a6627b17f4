//! APK container ingestion and sidecar input loading.
//!
//! An [`ApkArchive`] is an immutable, fully decompressed view of a ZIP
//! container. Downstream parsers pull DEX payloads and the manifest from it;
//! nothing here interprets their contents.

mod sidecar;
mod zip;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

pub use sidecar::{
    load_catalog, load_dangerous_list, load_devices, load_devices_csv, load_devices_jsonl,
    load_permission_map, SidecarError,
};

pub const MANIFEST_ENTRY: &str = "AndroidManifest.xml";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("no end-of-central-directory record found")]
    MissingEndOfCentralDirectory,
    #[error("central directory is corrupt")]
    CorruptCentralDirectory,
    #[error("unsupported compression method {0}")]
    UnsupportedCompressionMethod(u16),
    #[error("unsupported archive feature: {0}")]
    UnsupportedFeature(&'static str),
    #[error("entry `{0}` is truncated")]
    TruncatedEntry(String),
    #[error("crc mismatch for entry `{0}`")]
    CrcMismatch(String),
    #[error("archive has no AndroidManifest.xml at its root")]
    MissingManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum IngestWarning {
    /// Several central-directory records share a name; the last one was kept.
    DuplicateEntry { name: String, occurrences: usize },
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestWarning::DuplicateEntry { name, occurrences } => {
                write!(f, "duplicate entry `{name}` ({occurrences} records, last kept)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub name: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApkArchive {
    pub source_name: String,
    entries: Vec<ArchiveEntry>,
    warnings: Vec<IngestWarning>,
}

impl ApkArchive {
    /// Entries in central-directory order, names unique.
    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn warnings(&self) -> &[IngestWarning] {
        &self.warnings
    }

    pub fn entry(&self, name: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    /// Builds an archive from already-extracted entries. Duplicate names are
    /// resolved the same way as in [`open_archive`].
    pub fn from_entries(source_name: impl Into<String>, entries: Vec<ArchiveEntry>) -> Self {
        let (entries, warnings) = dedup_last_wins(entries);
        ApkArchive {
            source_name: source_name.into(),
            entries,
            warnings,
        }
    }
}

fn dedup_last_wins(entries: Vec<ArchiveEntry>) -> (Vec<ArchiveEntry>, Vec<IngestWarning>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &entries {
        *counts.entry(e.name.as_str()).or_default() += 1;
    }
    let warnings: Vec<IngestWarning> = counts
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(name, &n)| IngestWarning::DuplicateEntry {
            name: name.to_string(),
            occurrences: n,
        })
        .collect();

    if warnings.is_empty() {
        return (entries, warnings);
    }
    let mut remaining: HashMap<String, usize> = counts
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let kept = entries
        .into_iter()
        .filter(|e| {
            let left = remaining.get_mut(&e.name).expect("counted above");
            *left -= 1;
            *left == 0
        })
        .collect();
    (kept, warnings)
}

/// Opens a ZIP container and decompresses every entry.
pub fn open_archive(bytes: &[u8]) -> Result<ApkArchive, IngestError> {
    let records = zip::read_central_directory(bytes)?;
    let entries = records
        .iter()
        .map(|r| {
            Ok(ArchiveEntry {
                name: r.name.clone(),
                payload: zip::extract(bytes, r)?,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(ApkArchive::from_entries(String::new(), entries))
}

/// Multidex index of an entry name: `classes.dex` is 1, `classesN.dex` is N
/// for N >= 2 without leading zeros.
fn dex_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        return Some(1);
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse::<u32>().ok().filter(|&n| n >= 2)
}

/// DEX payloads in load order: `classes.dex`, then `classesN.dex` by ascending N.
pub fn dex_payloads(archive: &ApkArchive) -> Vec<&[u8]> {
    let mut indexed: Vec<(u32, &[u8])> = archive
        .entries
        .iter()
        .filter_map(|e| dex_index(&e.name).map(|n| (n, e.payload.as_slice())))
        .collect();
    indexed.sort_by_key(|(n, _)| *n);
    indexed.into_iter().map(|(_, p)| p).collect()
}

pub fn manifest_payload(archive: &ApkArchive) -> Result<&[u8], IngestError> {
    archive
        .entry(MANIFEST_ENTRY)
        .map(|e| e.payload.as_slice())
        .ok_or(IngestError::MissingManifest)
}
