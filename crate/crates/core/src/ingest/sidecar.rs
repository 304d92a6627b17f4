//! Loaders for the non-APK inputs: catalog, permission map, dangerous list
//! and device profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::attribution::{ApiPermissionMap, CatalogError, DangerousPermissionList, LibraryCatalog, PermissionFileError};
use crate::device::{DeviceError, DeviceProfile, DeviceRecord};

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Catalog { path: PathBuf, source: CatalogError },
    #[error("{path}: {source}")]
    Permissions { path: PathBuf, source: PermissionFileError },
    #[error("{path}:{line}: {reason}")]
    Devices { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Device { path: PathBuf, source: DeviceError },
}

fn read(path: &Path) -> Result<String, SidecarError> {
    fs::read_to_string(path).map_err(|source| SidecarError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_catalog(path: &Path) -> Result<LibraryCatalog, SidecarError> {
    LibraryCatalog::parse(&read(path)?).map_err(|source| SidecarError::Catalog {
        path: path.to_path_buf(),
        source,
    })
}

/// The map's api-level label defaults to the file stem.
pub fn load_permission_map(path: &Path) -> Result<ApiPermissionMap, SidecarError> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ApiPermissionMap::parse(&read(path)?, &label).map_err(|source| SidecarError::Permissions {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dangerous_list(path: &Path) -> Result<DangerousPermissionList, SidecarError> {
    DangerousPermissionList::parse(&read(path)?).map_err(|source| SidecarError::Permissions {
        path: path.to_path_buf(),
        source,
    })
}

/// Dispatches on extension: `.csv` install lists, anything else JSON lines.
pub fn load_devices(path: &Path, usage_csv: Option<&Path>) -> Result<Vec<DeviceProfile>, SidecarError> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        load_devices_csv(path, usage_csv)
    } else {
        let mut devices = load_devices_jsonl(path)?;
        if let Some(usage) = usage_csv {
            let extra = read_usage_csv(usage)?;
            for d in &mut devices {
                for (day, app) in extra.get(&d.device_id).into_iter().flatten() {
                    d.record_usage(*day, app).map_err(|source| SidecarError::Device {
                        path: usage.to_path_buf(),
                        source,
                    })?;
                }
            }
        }
        Ok(devices)
    }
}

pub fn load_devices_jsonl(path: &Path) -> Result<Vec<DeviceProfile>, SidecarError> {
    let text = read(path)?;
    let mut devices = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |reason: String| SidecarError::Devices {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: DeviceRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let device = DeviceProfile::try_from(record).map_err(|e| bad(e.to_string()))?;
        if !seen.insert(device.device_id.clone()) {
            return Err(bad(format!("duplicate device `{}`", device.device_id)));
        }
        devices.push(device);
    }
    Ok(devices)
}

fn csv_rows(path: &Path, text: &str, fields: usize, header: &str) -> Result<Vec<(usize, Vec<String>)>, SidecarError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with(header)) {
            continue;
        }
        let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cols.len() != fields || cols.iter().any(String::is_empty) {
            return Err(SidecarError::Devices {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected {fields} non-empty comma-separated fields"),
            });
        }
        rows.push((i + 1, cols));
    }
    Ok(rows)
}

fn read_usage_csv(path: &Path) -> Result<BTreeMap<String, Vec<(u32, String)>>, SidecarError> {
    let text = read(path)?;
    let mut usage: BTreeMap<String, Vec<(u32, String)>> = BTreeMap::new();
    for (line, cols) in csv_rows(path, &text, 3, "device_id")? {
        let day: u32 = cols[1].parse().map_err(|_| SidecarError::Devices {
            path: path.to_path_buf(),
            line,
            reason: format!("`{}` is not a non-negative day", cols[1]),
        })?;
        usage
            .entry(cols[0].clone())
            .or_default()
            .push((day, cols[2].clone()));
    }
    Ok(usage)
}

/// `device_id,app_id` install rows plus optional `device_id,day,app_id` usage rows.
pub fn load_devices_csv(installs: &Path, usage: Option<&Path>) -> Result<Vec<DeviceProfile>, SidecarError> {
    let text = read(installs)?;
    let mut installed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (_, cols) in csv_rows(installs, &text, 2, "device_id")? {
        installed
            .entry(cols[0].clone())
            .or_default()
            .insert(cols[1].clone());
    }
    let (usage, usage_path) = match usage {
        Some(p) => (read_usage_csv(p)?, p.to_path_buf()),
        None => (BTreeMap::new(), installs.to_path_buf()),
    };
    if let Some(stray) = usage.keys().find(|d| !installed.contains_key(*d)) {
        return Err(SidecarError::Devices {
            path: usage_path,
            line: 0,
            reason: format!("usage for device `{stray}` with no installed apps"),
        });
    }
    installed
        .into_iter()
        .map(|(id, apps)| {
            let events = usage
                .get(&id)
                .into_iter()
                .flatten()
                .map(|(d, a)| (*d as i64, a.clone()));
            DeviceProfile::new(id, apps, events).map_err(|source| SidecarError::Device {
                path: usage_path.clone(),
                source,
            })
        })
        .collect()
}
