//! Lower-bound estimate of ad-library data transmission.
//!
//! One leak is counted per (ad library, app, day) whenever the app was run
//! that day and the library can use at least one permission in it.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::LibraryCatalog;
use crate::device::{Corpus, DeviceProfile};
use crate::ilc::library_prevalence;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LeakageError {
    #[error("no device has any usage data")]
    NoUsageData,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeakEvent {
    pub device_id: String,
    pub day: u32,
    pub app_id: String,
    pub library_id: String,
    pub network_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LeakageOptions {
    /// Divide by the span from first to last observed day instead of the
    /// number of observed days.
    pub calendar_days: bool,
    /// Only ad libraries whose corpus prevalence exceeds this fraction.
    pub min_prevalence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeviceEvents {
    pub events: Vec<LeakEvent>,
    pub unresolved_usage: usize,
}

pub fn daily_leak_events(device: &DeviceProfile, corpus: &Corpus, catalog: &LibraryCatalog) -> DeviceEvents {
    daily_leak_events_filtered(device, corpus, catalog, None)
}

fn daily_leak_events_filtered(
    device: &DeviceProfile,
    corpus: &Corpus,
    catalog: &LibraryCatalog,
    eligible: Option<&BTreeSet<String>>,
) -> DeviceEvents {
    let mut out = DeviceEvents::default();
    for usage in device.usage() {
        let Some(app) = corpus.get(&usage.app_id) else {
            out.unresolved_usage += 1;
            continue;
        };
        for (library, usable) in &app.library_perms {
            if usable.is_empty() || !catalog.is_ad_library(library) {
                continue;
            }
            if eligible.is_some_and(|e| !e.contains(library)) {
                continue;
            }
            out.events.push(LeakEvent {
                device_id: device.device_id.clone(),
                day: usage.day,
                app_id: app.app_id.clone(),
                library_id: library.clone(),
                network_id: catalog.network_of(library).to_string(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLeakage {
    pub device_id: String,
    pub observed_days: usize,
    pub denominator_days: u64,
    pub events: usize,
    pub leaks_per_day: f64,
    pub networks_per_day: f64,
    pub max_leaks_in_a_day: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposedSummary {
    pub devices: usize,
    pub mean_leaks_per_device_day: f64,
    pub mean_distinct_networks_per_device_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSummary {
    /// Unweighted over devices with at least one observed day.
    pub mean_leaks_per_device_day: f64,
    pub mean_distinct_networks_per_device_day: f64,
    pub max_leaks_any_device_day: usize,
    pub devices_with_usage: usize,
    /// Same means restricted to devices with at least one event.
    pub ad_exposed: ExposedSummary,
    pub unresolved_usage_events: usize,
    pub per_device: Vec<DeviceLeakage>,
}

/// Neumaier-compensated sum; order is fixed by the caller.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        compensated_sum(values.iter().copied()) / values.len() as f64
    }
}

fn device_leakage(device: &DeviceProfile, events: &[LeakEvent], calendar_days: bool) -> Option<DeviceLeakage> {
    let days = device.observed_days();
    let (&first, &last) = (days.first()?, days.last()?);
    let denominator = if calendar_days {
        (last - first) as u64 + 1
    } else {
        days.len() as u64
    };

    let mut per_day: BTreeMap<u32, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for e in events {
        let slot = per_day.entry(e.day).or_default();
        slot.0 += 1;
        slot.1.insert(&e.network_id);
    }
    let network_days = per_day.values().map(|(_, n)| n.len() as u64).sum::<u64>();
    Some(DeviceLeakage {
        device_id: device.device_id.clone(),
        observed_days: days.len(),
        denominator_days: denominator,
        events: events.len(),
        leaks_per_day: events.len() as f64 / denominator as f64,
        networks_per_day: network_days as f64 / denominator as f64,
        max_leaks_in_a_day: per_day.values().map(|(n, _)| *n).max().unwrap_or(0),
    })
}

fn eligible_libraries(corpus: &Corpus, options: &LeakageOptions) -> Option<BTreeSet<String>> {
    options.min_prevalence.map(|threshold| {
        library_prevalence(corpus)
            .unwrap_or_default()
            .into_iter()
            .filter(|(_, p)| *p > threshold)
            .map(|(l, _)| l)
            .collect()
    })
}

/// Every event over the population honouring `min_prevalence`, sorted.
pub fn population_leak_events(
    population: &[DeviceProfile],
    corpus: &Corpus,
    catalog: &LibraryCatalog,
    options: &LeakageOptions,
) -> Vec<LeakEvent> {
    let eligible = eligible_libraries(corpus, options);
    let mut events: Vec<LeakEvent> = population
        .par_iter()
        .flat_map_iter(|d| daily_leak_events_filtered(d, corpus, catalog, eligible.as_ref()).events)
        .collect();
    events.sort();
    events
}

pub fn summarize_leakage(
    population: &[DeviceProfile],
    corpus: &Corpus,
    catalog: &LibraryCatalog,
    options: &LeakageOptions,
) -> Result<LeakageSummary, LeakageError> {
    let eligible = eligible_libraries(corpus, options);
    let per_device: Vec<(DeviceEvents, Option<DeviceLeakage>)> = population
        .par_iter()
        .map(|d| {
            let ev = daily_leak_events_filtered(d, corpus, catalog, eligible.as_ref());
            let summary = device_leakage(d, &ev.events, options.calendar_days);
            (ev, summary)
        })
        .collect();

    let unresolved_usage_events = per_device.iter().map(|(e, _)| e.unresolved_usage).sum();
    let mut rows: Vec<DeviceLeakage> = per_device.into_iter().filter_map(|(_, s)| s).collect();
    if rows.is_empty() {
        return Err(LeakageError::NoUsageData);
    }
    rows.sort_by(|a, b| a.device_id.cmp(&b.device_id));

    let leaks: Vec<f64> = rows.iter().map(|r| r.leaks_per_day).collect();
    let networks: Vec<f64> = rows.iter().map(|r| r.networks_per_day).collect();
    let exposed: Vec<&DeviceLeakage> = rows.iter().filter(|r| r.events > 0).collect();
    let exposed_leaks: Vec<f64> = exposed.iter().map(|r| r.leaks_per_day).collect();
    let exposed_networks: Vec<f64> = exposed.iter().map(|r| r.networks_per_day).collect();

    Ok(LeakageSummary {
        mean_leaks_per_device_day: mean(&leaks),
        mean_distinct_networks_per_device_day: mean(&networks),
        max_leaks_any_device_day: rows.iter().map(|r| r.max_leaks_in_a_day).max().unwrap_or(0),
        devices_with_usage: rows.len(),
        ad_exposed: ExposedSummary {
            devices: exposed.len(),
            mean_leaks_per_device_day: mean(&exposed_leaks),
            mean_distinct_networks_per_device_day: mean(&exposed_networks),
        },
        unresolved_usage_events,
        per_device: rows,
    })
}
