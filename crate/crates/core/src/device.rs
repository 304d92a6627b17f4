//! Device install lists and per-day usage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::AppAnalysis;

/// App id (package name) to analysis.
pub type Corpus = BTreeMap<String, AppAnalysis>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("device `{device}`: usage of `{app}` which is not installed")]
    UsageNotInstalled { device: String, app: String },
    #[error("device `{device}`: negative day {day}")]
    NegativeDay { device: String, day: i64 },
    #[error("empty device id")]
    EmptyDeviceId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UsageEvent {
    pub day: u32,
    pub app_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceProfile {
    pub device_id: String,
    installed: BTreeSet<String>,
    usage: BTreeSet<UsageEvent>,
}

impl DeviceProfile {
    pub fn new(
        device_id: impl Into<String>,
        installed: impl IntoIterator<Item = String>,
        usage: impl IntoIterator<Item = (i64, String)>,
    ) -> Result<Self, DeviceError> {
        let device_id = device_id.into();
        if device_id.is_empty() {
            return Err(DeviceError::EmptyDeviceId);
        }
        let installed: BTreeSet<String> = installed.into_iter().collect();
        let mut events = BTreeSet::new();
        for (day, app_id) in usage {
            let day = u32::try_from(day).map_err(|_| DeviceError::NegativeDay {
                device: device_id.clone(),
                day,
            })?;
            if !installed.contains(&app_id) {
                return Err(DeviceError::UsageNotInstalled {
                    device: device_id,
                    app: app_id,
                });
            }
            events.insert(UsageEvent { day, app_id });
        }
        Ok(DeviceProfile {
            device_id,
            installed,
            usage: events,
        })
    }

    pub fn installed_only(device_id: impl Into<String>, installed: impl IntoIterator<Item = String>) -> Result<Self, DeviceError> {
        DeviceProfile::new(device_id, installed, std::iter::empty())
    }

    pub fn installed(&self) -> &BTreeSet<String> {
        &self.installed
    }

    /// Usage events sorted by (day, app), duplicates collapsed.
    pub fn usage(&self) -> &BTreeSet<UsageEvent> {
        &self.usage
    }

    /// Adds an app to the install list.
    pub fn install(&mut self, app_id: impl Into<String>) {
        self.installed.insert(app_id.into());
    }

    pub fn record_usage(&mut self, day: u32, app_id: &str) -> Result<(), DeviceError> {
        if !self.installed.contains(app_id) {
            return Err(DeviceError::UsageNotInstalled {
                device: self.device_id.clone(),
                app: app_id.to_string(),
            });
        }
        self.usage.insert(UsageEvent {
            day,
            app_id: app_id.to_string(),
        });
        Ok(())
    }

    pub fn observed_days(&self) -> BTreeSet<u32> {
        self.usage.iter().map(|e| e.day).collect()
    }

    /// Installed apps present in the corpus, and the count of those that are not.
    pub fn resolve<'a>(&'a self, corpus: &'a Corpus) -> (Vec<&'a AppAnalysis>, usize) {
        let mut resolved = Vec::with_capacity(self.installed.len());
        let mut missing = 0;
        for app in &self.installed {
            match corpus.get(app) {
                Some(a) => resolved.push(a),
                None => missing += 1,
            }
        }
        (resolved, missing)
    }
}

/// JSON-lines record: `{device_id, installed: [...], usage: [[day, app_id], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub device_id: String,
    pub installed: Vec<String>,
    #[serde(default)]
    pub usage: Vec<(i64, String)>,
}

impl TryFrom<DeviceRecord> for DeviceProfile {
    type Error = DeviceError;

    fn try_from(r: DeviceRecord) -> Result<Self, Self::Error> {
        DeviceProfile::new(r.device_id, r.installed, r.usage)
    }
}

impl From<&DeviceProfile> for DeviceRecord {
    fn from(d: &DeviceProfile) -> Self {
        DeviceRecord {
            device_id: d.device_id.clone(),
            installed: d.installed.iter().cloned().collect(),
            usage: d
                .usage
                .iter()
                .map(|e| (e.day as i64, e.app_id.clone()))
                .collect(),
        }
    }
}
