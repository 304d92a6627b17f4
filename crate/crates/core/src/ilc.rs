//! Intra-library collusion findings and population metrics.
//!
//! A library embedded in several apps on one device can pool the permissions
//! each host grants it. For every (device, library) pair this module computes
//! the per-app usable sets, their union, and how far the union exceeds the
//! best single host.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Corpus, DeviceProfile};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum IlcError {
    #[error("device population is empty")]
    EmptyPopulation,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no library benefits on any device")]
    NoBenefitingFindings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IlcFinding {
    pub device_id: String,
    pub library_id: String,
    pub hosting_apps: Vec<String>,
    /// Usable set of the library in each hosting app, parallel to `hosting_apps`.
    pub per_app_sets: Vec<BTreeSet<String>>,
    pub union_set: BTreeSet<String>,
    pub single_app_max: usize,
    /// `|union_set| - single_app_max`.
    pub additional: usize,
    pub benefits: bool,
}

impl IlcFinding {
    fn from_hosts(device_id: &str, library_id: &str, hosts: Vec<(String, BTreeSet<String>)>) -> Self {
        let (hosting_apps, per_app_sets): (Vec<_>, Vec<_>) = hosts.into_iter().unzip();
        let union_set: BTreeSet<String> = per_app_sets.iter().flatten().cloned().collect();
        let single_app_max = per_app_sets.iter().map(BTreeSet::len).max().unwrap_or(0);
        let additional = union_set.len() - single_app_max;
        IlcFinding {
            device_id: device_id.to_string(),
            library_id: library_id.to_string(),
            hosting_apps,
            per_app_sets,
            union_set,
            single_app_max,
            additional,
            benefits: additional > 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceAnalysis {
    pub device_id: String,
    /// One finding per library present in a resolved app, sorted by library id.
    pub findings: Vec<IlcFinding>,
    pub resolved_apps: usize,
    pub unresolved_apps: usize,
}

impl DeviceAnalysis {
    pub fn benefiting(&self) -> impl Iterator<Item = &IlcFinding> {
        self.findings.iter().filter(|f| f.benefits)
    }

    pub fn benefiting_count(&self) -> usize {
        self.benefiting().count()
    }
}

pub fn analyze_device(device: &DeviceProfile, corpus: &Corpus) -> DeviceAnalysis {
    let (apps, unresolved_apps) = device.resolve(corpus);
    let mut hosts: BTreeMap<&str, Vec<(String, BTreeSet<String>)>> = BTreeMap::new();
    for app in &apps {
        for library in &app.libraries_present {
            let usable = app.library_perms.get(library).cloned().unwrap_or_default();
            hosts
                .entry(library.as_str())
                .or_default()
                .push((app.app_id.clone(), usable));
        }
    }
    DeviceAnalysis {
        device_id: device.device_id.clone(),
        findings: hosts
            .into_iter()
            .map(|(lib, h)| IlcFinding::from_hosts(&device.device_id, lib, h))
            .collect(),
        resolved_apps: apps.len(),
        unresolved_apps,
    }
}

/// Which devices count towards per-device distributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PopulationFilter {
    #[default]
    All,
    /// Only devices with at least one app resolved against the corpus.
    WithResolvedApps,
}

impl PopulationFilter {
    fn admits(self, d: &DeviceAnalysis) -> bool {
        match self {
            PopulationFilter::All => true,
            PopulationFilter::WithResolvedApps => d.resolved_apps > 0,
        }
    }
}

/// Integer buckets `first, first+1, …, open_from-1` and a final `open_from+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucketing {
    pub first: usize,
    pub open_from: usize,
}

impl Bucketing {
    pub const BENEFITING_LIBRARIES: Bucketing = Bucketing { first: 0, open_from: 5 };
    pub const ADDITIONAL_PERMISSIONS: Bucketing = Bucketing { first: 1, open_from: 5 };
    pub const ADDITIONAL_PERMISSIONS_COARSE: Bucketing = Bucketing { first: 1, open_from: 2 };

    pub fn len(&self) -> usize {
        self.open_from - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, value: usize) -> usize {
        value.clamp(self.first, self.open_from) - self.first
    }

    pub fn label(&self, index: usize) -> String {
        let v = self.first + index;
        if v == self.open_from {
            format!("{v}+")
        } else {
            v.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketShare {
    pub bucket: String,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub rows: Vec<BucketShare>,
    pub total: u64,
}

impl Distribution {
    pub fn from_values(bucketing: Bucketing, values: impl IntoIterator<Item = usize>) -> Self {
        let mut counts = vec![0u64; bucketing.len()];
        for v in values {
            counts[bucketing.index(v)] += 1;
        }
        let total: u64 = counts.iter().sum();
        Distribution {
            rows: counts
                .iter()
                .enumerate()
                .map(|(i, &count)| BucketShare {
                    bucket: bucketing.label(i),
                    count,
                    share: if total == 0 { 0.0 } else { count as f64 / total as f64 },
                })
                .collect(),
            total,
        }
    }

    pub fn share(&self, bucket: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.bucket == bucket).map(|r| r.share)
    }
}

/// Per-device analyses over a population, computed in parallel and kept in
/// input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationAnalysis {
    pub devices: Vec<DeviceAnalysis>,
}

impl PopulationAnalysis {
    pub fn new(population: &[DeviceProfile], corpus: &Corpus) -> Self {
        PopulationAnalysis {
            devices: population
                .par_iter()
                .map(|d| analyze_device(d, corpus))
                .collect(),
        }
    }

    pub fn findings(&self) -> impl Iterator<Item = &IlcFinding> {
        self.devices.iter().flat_map(|d| d.findings.iter())
    }

    pub fn benefiting_findings(&self) -> impl Iterator<Item = &IlcFinding> {
        self.findings().filter(|f| f.benefits)
    }

    pub fn unresolved_apps(&self) -> usize {
        self.devices.iter().map(|d| d.unresolved_apps).sum()
    }

    pub fn benefiting_count_distribution(&self, filter: PopulationFilter) -> Result<Distribution, IlcError> {
        self.benefiting_count_distribution_with(Bucketing::BENEFITING_LIBRARIES, filter)
    }

    pub fn benefiting_count_distribution_with(
        &self,
        bucketing: Bucketing,
        filter: PopulationFilter,
    ) -> Result<Distribution, IlcError> {
        let admitted: Vec<&DeviceAnalysis> = self.devices.iter().filter(|d| filter.admits(d)).collect();
        if admitted.is_empty() {
            return Err(IlcError::EmptyPopulation);
        }
        Ok(Distribution::from_values(
            bucketing,
            admitted.iter().map(|d| d.benefiting_count()),
        ))
    }

    pub fn additional_perm_distribution(&self) -> Result<Distribution, IlcError> {
        self.additional_perm_distribution_with(Bucketing::ADDITIONAL_PERMISSIONS)
    }

    pub fn additional_perm_distribution_with(&self, bucketing: Bucketing) -> Result<Distribution, IlcError> {
        let dist = Distribution::from_values(bucketing, self.benefiting_findings().map(|f| f.additional));
        if dist.total == 0 {
            return Err(IlcError::NoBenefitingFindings);
        }
        Ok(dist)
    }

    pub fn library_benefit_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for f in self.benefiting_findings() {
            *counts.entry(f.library_id.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn library_benefit_shares(&self) -> Result<BTreeMap<String, f64>, IlcError> {
        let counts = self.library_benefit_counts();
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(IlcError::NoBenefitingFindings);
        }
        Ok(counts
            .into_iter()
            .map(|(lib, c)| (lib, c as f64 / total as f64))
            .collect())
    }

    pub fn mean_libraries_per_device(&self, filter: PopulationFilter) -> Result<f64, IlcError> {
        let counts: Vec<usize> = self
            .devices
            .iter()
            .filter(|d| filter.admits(d))
            .map(|d| d.findings.len())
            .collect();
        if counts.is_empty() {
            return Err(IlcError::EmptyPopulation);
        }
        Ok(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
    }
}

fn require_population(population: &[DeviceProfile]) -> Result<(), IlcError> {
    if population.is_empty() {
        Err(IlcError::EmptyPopulation)
    } else {
        Ok(())
    }
}

pub fn benefiting_count_distribution(population: &[DeviceProfile], corpus: &Corpus) -> Result<Distribution, IlcError> {
    require_population(population)?;
    PopulationAnalysis::new(population, corpus).benefiting_count_distribution(PopulationFilter::All)
}

pub fn additional_perm_distribution(population: &[DeviceProfile], corpus: &Corpus) -> Result<Distribution, IlcError> {
    PopulationAnalysis::new(population, corpus).additional_perm_distribution()
}

pub fn library_benefit_shares(population: &[DeviceProfile], corpus: &Corpus) -> Result<BTreeMap<String, f64>, IlcError> {
    PopulationAnalysis::new(population, corpus).library_benefit_shares()
}

pub fn mean_libraries_per_device(population: &[DeviceProfile], corpus: &Corpus) -> Result<f64, IlcError> {
    require_population(population)?;
    PopulationAnalysis::new(population, corpus).mean_libraries_per_device(PopulationFilter::All)
}

/// Fraction of corpus apps that contain each library.
pub fn library_prevalence(corpus: &Corpus) -> Result<BTreeMap<String, f64>, IlcError> {
    if corpus.is_empty() {
        return Err(IlcError::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for app in corpus.values() {
        for lib in &app.libraries_present {
            *counts.entry(lib.clone()).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    Ok(counts.into_iter().map(|(l, c)| (l, c as f64 / n)).collect())
}
