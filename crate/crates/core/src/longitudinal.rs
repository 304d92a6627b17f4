//! Snapshot-to-snapshot comparison over a fixed device population.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Corpus, DeviceProfile};
use crate::ilc::{Bucketing, Distribution, IlcError, PopulationAnalysis, PopulationFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Old,
    New,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Old => "old",
            Side::New => "new",
        })
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LongitudinalError {
    #[error("snapshots share no apps")]
    EmptyIntersection,
    #[error("no benefiting findings in the {0} snapshot")]
    NoBenefitingFindings(Side),
    #[error(transparent)]
    Engine(#[from] IlcError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSnapshot {
    pub label: String,
    pub analyses: Corpus,
}

impl CorpusSnapshot {
    pub fn new(label: impl Into<String>, analyses: Corpus) -> Self {
        CorpusSnapshot {
            label: label.into(),
            analyses,
        }
    }
}

/// Restricts both snapshots to the apps they have in common.
pub fn align_snapshots(old: &CorpusSnapshot, new: &CorpusSnapshot) -> Result<(CorpusSnapshot, CorpusSnapshot), LongitudinalError> {
    let common: BTreeSet<&String> = old
        .analyses
        .keys()
        .filter(|k| new.analyses.contains_key(*k))
        .collect();
    if common.is_empty() {
        return Err(LongitudinalError::EmptyIntersection);
    }
    let restrict = |s: &CorpusSnapshot| CorpusSnapshot {
        label: s.label.clone(),
        analyses: s
            .analyses
            .iter()
            .filter(|(k, _)| common.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    };
    Ok((restrict(old), restrict(new)))
}

/// Percent change from `old` to `new`; undefined on a zero baseline.
pub fn pct_change(old: f64, new: f64) -> Option<f64> {
    if old == 0.0 {
        None
    } else {
        Some((new - old) / old * 100.0)
    }
}

/// Display form at table precision: `+31.2%`, `-19.7%`, `undefined`.
pub fn format_pct_change(change: Option<f64>) -> String {
    match change {
        None => "undefined".to_string(),
        Some(c) => {
            let rounded = (c * 10.0).round() / 10.0;
            if rounded == 0.0 {
                "0.0%".to_string()
            } else {
                format!("{rounded:+.1}%")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub bucket: String,
    pub old_share: f64,
    pub new_share: f64,
    pub pct_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalReport {
    pub metric: String,
    pub old_label: String,
    pub new_label: String,
    pub common_app_count: usize,
    pub rows: Vec<ReportRow>,
}

impl LongitudinalReport {
    /// Builds a report from paired shares (fractions or percentages alike).
    pub fn from_shares<'a>(
        metric: &str,
        old_label: &str,
        new_label: &str,
        common_app_count: usize,
        shares: impl IntoIterator<Item = (&'a str, f64, f64)>,
    ) -> Self {
        LongitudinalReport {
            metric: metric.to_string(),
            old_label: old_label.to_string(),
            new_label: new_label.to_string(),
            common_app_count,
            rows: shares
                .into_iter()
                .map(|(bucket, old_share, new_share)| ReportRow {
                    bucket: bucket.to_string(),
                    old_share,
                    new_share,
                    pct_change: pct_change(old_share, new_share),
                })
                .collect(),
        }
    }

    fn from_distributions(metric: &str, old: &CorpusSnapshot, new: &CorpusSnapshot, a: &Distribution, b: &Distribution) -> Self {
        LongitudinalReport::from_shares(
            metric,
            &old.label,
            &new.label,
            old.analyses.len(),
            a.rows
                .iter()
                .zip(&b.rows)
                .map(|(x, y)| (x.bucket.as_str(), x.share, y.share)),
        )
    }

    pub fn row(&self, bucket: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.bucket == bucket)
    }

    /// Human-readable table: shares in percent to 0.1, change to 0.1%.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{} ({} common apps)\n{:<8} {:>8} {:>8} {:>10}\n",
            self.metric,
            self.common_app_count,
            "bucket",
            format!("{} %", self.old_label),
            format!("{} %", self.new_label),
            "% change"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>8.1} {:>8.1} {:>10}\n",
                r.bucket,
                r.old_share * 100.0,
                r.new_share * 100.0,
                format_pct_change(r.pct_change)
            ));
        }
        out
    }
}

pub fn diff_benefiting_counts(
    old: &CorpusSnapshot,
    new: &CorpusSnapshot,
    population: &[DeviceProfile],
) -> Result<LongitudinalReport, LongitudinalError> {
    if population.is_empty() {
        return Err(IlcError::EmptyPopulation.into());
    }
    let a = PopulationAnalysis::new(population, &old.analyses).benefiting_count_distribution(PopulationFilter::All)?;
    let b = PopulationAnalysis::new(population, &new.analyses).benefiting_count_distribution(PopulationFilter::All)?;
    Ok(LongitudinalReport::from_distributions("benefiting libraries per device", old, new, &a, &b))
}

pub fn diff_additional_perms(
    old: &CorpusSnapshot,
    new: &CorpusSnapshot,
    population: &[DeviceProfile],
) -> Result<LongitudinalReport, LongitudinalError> {
    let side = |s: &CorpusSnapshot, which| {
        PopulationAnalysis::new(population, &s.analyses)
            .additional_perm_distribution_with(Bucketing::ADDITIONAL_PERMISSIONS_COARSE)
            .map_err(|e| match e {
                IlcError::NoBenefitingFindings => LongitudinalError::NoBenefitingFindings(which),
                other => other.into(),
            })
    };
    let a = side(old, Side::Old)?;
    let b = side(new, Side::New)?;
    Ok(LongitudinalReport::from_distributions("additional permissions per benefiting finding", old, new, &a, &b))
}

/// Benefit shares per library on each side, zero where a library is absent.
pub fn share_shift(
    old: &CorpusSnapshot,
    new: &CorpusSnapshot,
    population: &[DeviceProfile],
) -> Result<BTreeMap<String, (f64, f64)>, LongitudinalError> {
    let side = |s: &CorpusSnapshot, which| {
        PopulationAnalysis::new(population, &s.analyses)
            .library_benefit_shares()
            .map_err(|_| LongitudinalError::NoBenefitingFindings(which))
    };
    let a = side(old, Side::Old)?;
    let b = side(new, Side::New)?;
    let libs: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    Ok(libs
        .into_iter()
        .map(|l| {
            (
                l.clone(),
                (a.get(l).copied().unwrap_or(0.0), b.get(l).copied().unwrap_or(0.0)),
            )
        })
        .collect())
}
