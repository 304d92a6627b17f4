use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ilc_core::attribution::{AnalysisContext, DangerousPermissionList};
use ilc_core::corpus::{analyze_inputs, list_inputs};
use ilc_core::device::{Corpus, DeviceProfile};
use ilc_core::dex::{extract_invocations, parse_dex};
use ilc_core::ilc::{library_prevalence, Distribution, IlcError, PopulationAnalysis, PopulationFilter};
use ilc_core::ingest::{self, load_catalog, load_dangerous_list, load_devices, load_permission_map};
use ilc_core::leakage::{population_leak_events, summarize_leakage, LeakageOptions};
use ilc_core::longitudinal::{align_snapshots, diff_additional_perms, diff_benefiting_counts, share_shift, CorpusSnapshot, LongitudinalReport};
use ilc_core::manifest::{parse_manifest_with, ManifestOptions, TargetSdkBucket};
use ilc_core::snapshot::{read_snapshot, write_snapshot};
use serde::Serialize;

use crate::args::{AnalyzeArgs, ContextArgs, DeviceArgs, DumpArgs, IlcArgs, LeakageArgs, LongitudinalArgs, TargetSdkArgs};
use crate::output::{emit, pct, share, OutDir};
use crate::{require, CliError};

fn load_context(a: &ContextArgs) -> Result<AnalysisContext, CliError> {
    require(&a.catalog, "catalog")?;
    require(&a.permission_map, "permission map")?;
    let dangerous = match &a.dangerous {
        Some(p) => {
            require(p, "dangerous permission list")?;
            load_dangerous_list(p).map_err(CliError::input)?
        }
        None => DangerousPermissionList::android_6(),
    };
    let mut ctx = AnalysisContext::new(
        load_catalog(&a.catalog).map_err(CliError::input)?,
        load_permission_map(&a.permission_map).map_err(CliError::input)?,
        dangerous,
    );
    ctx.manifest_options.merge_sdk23 = !a.no_sdk23_merge;
    ctx.version_label = a.version_label.clone();
    Ok(ctx)
}

fn load_population(a: &DeviceArgs) -> Result<Vec<DeviceProfile>, CliError> {
    require(&a.devices, "devices file")?;
    if let Some(u) = &a.usage {
        require(u, "usage file")?;
    }
    load_devices(&a.devices, a.usage.as_deref()).map_err(CliError::input)
}

fn load_snapshot(dir: &Path) -> Result<CorpusSnapshot, CliError> {
    require(dir, "snapshot")?;
    read_snapshot(dir).map_err(CliError::input)
}

fn distribution_rows(d: &Distribution) -> Vec<Vec<String>> {
    d.rows.iter().map(|r| vec![r.bucket.clone(), share(r.share)]).collect()
}

/// Highest share first, ties by id.
fn ranked(shares: &BTreeMap<String, f64>) -> Vec<Vec<String>> {
    let mut v: Vec<(&String, &f64)> = shares.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(l, s)| vec![l.clone(), share(*s)]).collect()
}

#[derive(Serialize)]
struct AnalyzeSummary<'a> {
    label: &'a str,
    inputs: usize,
    analyzed: usize,
    failed: usize,
    warnings: usize,
    permission_map: &'a str,
    classes_total: usize,
    classes_unattributed: usize,
    unattributed_class_fraction: f64,
    invocations_total: usize,
    invocations_mapped: usize,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    require(&a.corpus, "corpus directory")?;
    let ctx = load_context(&a.context)?;
    let inputs = list_inputs(&a.corpus).map_err(|e| CliError::Input(format!("cannot list {}: {e}", a.corpus.display())))?;
    let run = analyze_inputs(&inputs, &ctx);
    for (source, w) in &run.warnings {
        eprintln!("warning: {source}: {w}");
    }
    for f in &run.failures {
        eprintln!("warning: {} skipped: {}", f.source, f.error);
    }

    let label = a.label.clone().unwrap_or_else(|| {
        a.corpus
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_default()
    });
    let out = OutDir::create(&a.out)?;
    write_snapshot(&a.out, &label, &run.analyses, &run.failures).map_err(CliError::input)?;
    out.csv("failures.csv", &["source", "error"], run.failures.iter().map(|f| vec![f.source.clone(), f.error.clone()]))?;
    out.csv("warnings.csv", &["source", "warning"], run.warnings.iter().map(|(s, w)| vec![s.clone(), w.to_string()]))?;
    out.json(
        "analyze_summary.json",
        &AnalyzeSummary {
            label: &label,
            inputs: inputs.len(),
            analyzed: run.analyses.len(),
            failed: run.failures.len(),
            warnings: run.warnings.len(),
            permission_map: ctx.permission_map.api_level_label(),
            classes_total: run.stats.classes_total,
            classes_unattributed: run.stats.classes_unattributed,
            unattributed_class_fraction: run.unattributed_class_fraction(),
            invocations_total: run.stats.invocations_total,
            invocations_mapped: run.stats.invocations_mapped,
        },
    )?;
    eprintln!(
        "analyzed {} of {} inputs ({} failed)",
        run.analyses.len(),
        inputs.len(),
        run.failures.len()
    );
    if run.analyses.is_empty() {
        return Err(CliError::Empty(format!("no app in {} could be analyzed", a.corpus.display())));
    }
    Ok(())
}

#[derive(Serialize)]
struct IlcSummary {
    corpus_apps: usize,
    devices: usize,
    devices_with_resolved_apps: usize,
    unresolved_app_references: usize,
    mean_libraries_per_device: f64,
    findings: usize,
    benefiting_findings: usize,
}

pub fn ilc(a: &IlcArgs) -> Result<(), CliError> {
    let snapshot = load_snapshot(&a.snapshot)?;
    let devices = load_population(&a.devices)?;
    let filter = if a.resolved_only {
        PopulationFilter::WithResolvedApps
    } else {
        PopulationFilter::All
    };
    let corpus = &snapshot.analyses;
    let prevalence = library_prevalence(corpus).map_err(CliError::empty)?;
    let pa = PopulationAnalysis::new(&devices, corpus);
    let counts = pa.benefiting_count_distribution(filter).map_err(CliError::empty)?;
    let mean = pa.mean_libraries_per_device(filter).map_err(CliError::empty)?;

    let out = OutDir::create(&a.out)?;
    out.csv("prevalence.csv", &["library_id", "share"], ranked(&prevalence))?;
    out.csv("benefiting_counts.csv", &["bucket", "share"], distribution_rows(&counts))?;
    out.csv(
        "findings.csv",
        &["device_id", "library_id", "n_hosting_apps", "union_size", "single_app_max", "additional", "benefits"],
        pa.findings().map(|f| {
            vec![
                f.device_id.clone(),
                f.library_id.clone(),
                f.hosting_apps.len().to_string(),
                f.union_set.len().to_string(),
                f.single_app_max.to_string(),
                f.additional.to_string(),
                f.benefits.to_string(),
            ]
        }),
    )?;
    out.json(
        "ilc_summary.json",
        &IlcSummary {
            corpus_apps: corpus.len(),
            devices: devices.len(),
            devices_with_resolved_apps: pa.devices.iter().filter(|d| d.resolved_apps > 0).count(),
            unresolved_app_references: pa.unresolved_apps(),
            mean_libraries_per_device: mean,
            findings: pa.findings().count(),
            benefiting_findings: pa.benefiting_findings().count(),
        },
    )?;
    println!("mean libraries per device: {mean:.4}");

    match (pa.additional_perm_distribution(), pa.library_benefit_shares()) {
        (Ok(additional), Ok(shares)) => {
            out.csv("additional_perms.csv", &["bucket", "share"], distribution_rows(&additional))?;
            out.csv("benefit_shares.csv", &["library_id", "share"], ranked(&shares))?;
            Ok(())
        }
        (Err(e), _) | (_, Err(e)) => {
            debug_assert_eq!(e, IlcError::NoBenefitingFindings);
            Err(CliError::Empty(format!("{e}; additional_perms.csv and benefit_shares.csv not written")))
        }
    }
}

pub fn targetsdk(a: &TargetSdkArgs) -> Result<(), CliError> {
    let snapshot = load_snapshot(&a.snapshot)?;
    let corpus = &snapshot.analyses;
    if corpus.is_empty() {
        return Err(CliError::empty(IlcError::EmptyCorpus));
    }
    let mut histogram: BTreeMap<Option<u32>, u64> = BTreeMap::new();
    let mut buckets: BTreeMap<TargetSdkBucket, u64> = BTreeMap::new();
    for app in corpus.values() {
        *histogram.entry(app.target_sdk).or_default() += 1;
        *buckets.entry(TargetSdkBucket::of(app.target_sdk)).or_default() += 1;
    }
    // known levels ascending, unknown last
    let mut rows: Vec<(Option<u32>, u64)> = histogram.into_iter().collect();
    rows.sort_by_key(|(t, _)| (t.is_none(), *t));

    let out = OutDir::create(&a.out)?;
    out.csv(
        "target_sdk.csv",
        &["target_sdk", "count"],
        rows.iter()
            .map(|(t, n)| vec![t.map_or("unknown".to_string(), |v| v.to_string()), n.to_string()]),
    )?;
    let n = corpus.len() as f64;
    out.csv(
        "target_sdk_buckets.csv",
        &["bucket", "share"],
        TargetSdkBucket::ALL
            .iter()
            .map(|b| vec![b.as_str().to_string(), share(*buckets.get(b).unwrap_or(&0) as f64 / n)]),
    )
}

fn report_rows(r: &LongitudinalReport) -> Vec<Vec<String>> {
    r.rows
        .iter()
        .map(|row| vec![row.bucket.clone(), share(row.old_share), share(row.new_share), pct(row.pct_change)])
        .collect()
}

#[derive(Serialize)]
struct LongitudinalSummary<'a> {
    old_label: &'a str,
    new_label: &'a str,
    old_apps: usize,
    new_apps: usize,
    common_app_count: usize,
    benefiting_counts: &'a LongitudinalReport,
    additional_perms: Option<&'a LongitudinalReport>,
}

pub fn longitudinal(a: &LongitudinalArgs) -> Result<(), CliError> {
    let old = load_snapshot(&a.old)?;
    let new = load_snapshot(&a.new)?;
    let devices = load_population(&a.devices)?;
    let (o, n) = align_snapshots(&old, &new).map_err(CliError::empty)?;

    let counts = diff_benefiting_counts(&o, &n, &devices).map_err(CliError::empty)?;
    let header = ["bucket", "old_share", "new_share", "pct_change"];
    let out = OutDir::create(&a.out)?;
    out.csv("benefiting_counts_diff.csv", &header, report_rows(&counts))?;
    print!("{}", counts.render_table());

    let additional = diff_additional_perms(&o, &n, &devices);
    if let Ok(r) = &additional {
        out.csv("additional_perms_diff.csv", &header, report_rows(r))?;
        print!("\n{}", r.render_table());
    }
    out.json(
        "longitudinal.json",
        &LongitudinalSummary {
            old_label: &old.label,
            new_label: &new.label,
            old_apps: old.analyses.len(),
            new_apps: new.analyses.len(),
            common_app_count: counts.common_app_count,
            benefiting_counts: &counts,
            additional_perms: additional.as_ref().ok(),
        },
    )?;
    additional.map_err(CliError::empty)?;

    let shift = share_shift(&o, &n, &devices).map_err(CliError::empty)?;
    out.csv(
        "share_shift.csv",
        &["library_id", "old_share", "new_share"],
        shift.iter().map(|(l, (x, y))| vec![l.clone(), share(*x), share(*y)]),
    )
}

pub fn leakage(a: &LeakageArgs) -> Result<(), CliError> {
    let snapshot = load_snapshot(&a.snapshot)?;
    let devices = load_population(&a.devices)?;
    require(&a.catalog, "catalog")?;
    let catalog = load_catalog(&a.catalog).map_err(CliError::input)?;
    if let Some(p) = a.min_prevalence {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage(format!("--min-prevalence must be within [0, 1], got {p}")));
        }
    }
    let options = LeakageOptions {
        calendar_days: a.calendar_days,
        min_prevalence: a.min_prevalence,
    };
    let corpus: &Corpus = &snapshot.analyses;
    let summary = summarize_leakage(&devices, corpus, &catalog, &options).map_err(CliError::empty)?;
    let events = population_leak_events(&devices, corpus, &catalog, &options);

    let out = OutDir::create(&a.out)?;
    out.csv(
        "events.csv",
        &["device_id", "day", "app_id", "library_id", "network_id"],
        events.iter().map(|e| {
            vec![
                e.device_id.clone(),
                e.day.to_string(),
                e.app_id.clone(),
                e.library_id.clone(),
                e.network_id.clone(),
            ]
        }),
    )?;
    out.json("leakage_summary.json", &summary)?;
    if summary.unresolved_usage_events > 0 {
        eprintln!("warning: {} usage events refer to apps missing from the snapshot", summary.unresolved_usage_events);
    }
    println!(
        "leaks per device-day: {:.4} (ad-exposed devices: {:.4})",
        summary.mean_leaks_per_device_day, summary.ad_exposed.mean_leaks_per_device_day
    );
    println!(
        "distinct networks per device-day: {:.4} (ad-exposed devices: {:.4})",
        summary.mean_distinct_networks_per_device_day, summary.ad_exposed.mean_distinct_networks_per_device_day
    );
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    require(path, "input")?;
    fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn is_zip(bytes: &[u8]) -> bool {
    bytes.starts_with(b"PK\x03\x04") || bytes.starts_with(b"PK\x05\x06")
}

pub fn dump_dex(a: &DumpArgs) -> Result<(), CliError> {
    let bytes = read_input(&a.input)?;
    let archive;
    let payloads: Vec<&[u8]> = if is_zip(&bytes) {
        archive = ingest::open_archive(&bytes).map_err(CliError::input)?;
        ingest::dex_payloads(&archive)
    } else {
        vec![&bytes[..]]
    };
    if payloads.is_empty() {
        return Err(CliError::Empty(format!("{} contains no classes.dex", a.input.display())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(["caller_class", "callee_class", "callee_name", "callee_descriptor", "kind"]).map_err(io)?;
    for (i, payload) in payloads.iter().enumerate() {
        let dex = parse_dex(payload).map_err(|e| CliError::Input(format!("dex #{i}: {e}")))?;
        let extraction = extract_invocations(&dex);
        for warning in &extraction.warnings {
            eprintln!("warning: dex #{i}: {warning}");
        }
        for r in &extraction.records {
            w.write_record([
                r.caller_class.as_str(),
                r.callee.defining_class.as_str(),
                r.callee.name.as_str(),
                r.callee.descriptor().as_str(),
                r.invoke_kind.as_str(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    emit(a.out.as_deref(), &bytes)
}

pub fn dump_manifest(a: &DumpArgs) -> Result<(), CliError> {
    let bytes = read_input(&a.input)?;
    let archive;
    let manifest: &[u8] = if is_zip(&bytes) {
        archive = ingest::open_archive(&bytes).map_err(CliError::input)?;
        ingest::manifest_payload(&archive).map_err(CliError::input)?
    } else {
        &bytes
    };
    let info = parse_manifest_with(manifest, &ManifestOptions::default()).map_err(CliError::input)?;
    let mut text = serde_json::to_string_pretty(&info).map_err(CliError::input)?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())
}
