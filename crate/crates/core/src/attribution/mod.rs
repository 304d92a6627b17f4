//! Per-library usable-permission attribution.
//!
//! Classes are assigned to a library or to app code by package prefix. Each
//! invocation's mapped permissions are credited to the invoking class's
//! owner, then intersected with what the manifest declares and with the
//! dangerous-permission list.

mod catalog;
mod permissions;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{
    class_path, normalize_prefix, CatalogEntry, CatalogError, LibraryCatalog, LibraryCategory, Owner,
};
pub use permissions::{ApiPermissionMap, DangerousPermissionList, PermissionFileError};

use crate::dex::{self, DexError, DexFile, InvocationRecord, WalkWarning};
use crate::ingest::{self, ApkArchive, IngestError, IngestWarning};
use crate::manifest::{self, ManifestError, ManifestInfo, ManifestOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppAnalysis {
    pub app_id: String,
    pub version_label: String,
    pub declared: BTreeSet<String>,
    pub target_sdk: Option<u32>,
    /// Usable permissions per library present in the app.
    pub library_perms: BTreeMap<String, BTreeSet<String>>,
    pub app_code_perms: BTreeSet<String>,
    pub libraries_present: BTreeSet<String>,
}

impl AppAnalysis {
    pub fn usable(&self, library_id: &str) -> Option<&BTreeSet<String>> {
        self.library_perms.get(library_id)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisStats {
    pub classes_total: usize,
    pub classes_unattributed: usize,
    pub invocations_total: usize,
    pub invocations_mapped: usize,
}

impl AnalysisStats {
    fn add(&mut self, other: &AnalysisStats) {
        self.classes_total += other.classes_total;
        self.classes_unattributed += other.classes_unattributed;
        self.invocations_total += other.invocations_total;
        self.invocations_mapped += other.invocations_mapped;
    }

    pub fn merged<'a>(all: impl IntoIterator<Item = &'a AnalysisStats>) -> AnalysisStats {
        let mut total = AnalysisStats::default();
        for s in all {
            total.add(s);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AnalysisWarning {
    Archive(IngestWarning),
    Bytecode { payload: usize, warning: WalkWarning },
}

impl fmt::Display for AnalysisWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisWarning::Archive(w) => write!(f, "{w}"),
            AnalysisWarning::Bytecode { payload, warning } => write!(f, "dex #{payload}: {warning}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppReport {
    pub analysis: AppAnalysis,
    pub stats: AnalysisStats,
    pub warnings: Vec<AnalysisWarning>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("archive: {0}")]
    Ingest(#[from] IngestError),
    #[error("archive contains no classes.dex")]
    NoDexPayload,
    #[error("dex #{payload}: {error}")]
    Dex { payload: usize, error: DexError },
    #[error("manifest: {0}")]
    Manifest(#[from] ManifestError),
}

/// Shared, immutable inputs for attribution.
#[derive(Debug, Clone)]
pub struct AnalysisContext {
    pub catalog: LibraryCatalog,
    pub permission_map: ApiPermissionMap,
    pub dangerous: DangerousPermissionList,
    pub manifest_options: ManifestOptions,
    pub version_label: String,
}

impl AnalysisContext {
    pub fn new(catalog: LibraryCatalog, permission_map: ApiPermissionMap, dangerous: DangerousPermissionList) -> Self {
        AnalysisContext {
            catalog,
            permission_map,
            dangerous,
            manifest_options: ManifestOptions::default(),
            version_label: String::new(),
        }
    }
}

/// Permissions demanded per owner, before intersecting with the manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Demands {
    pub by_owner: BTreeMap<Owner, BTreeSet<String>>,
    pub invocations_total: usize,
    /// Invocations whose callee is in the map, dangerous or not.
    pub invocations_mapped: usize,
}

pub fn classify_class(class_descriptor: &str, catalog: &LibraryCatalog) -> Owner {
    catalog.classify(class_descriptor)
}

pub fn demanded_permissions(
    invocations: &[InvocationRecord],
    catalog: &LibraryCatalog,
    map: &ApiPermissionMap,
    dangerous: &DangerousPermissionList,
) -> Demands {
    let mut demands = Demands {
        invocations_total: invocations.len(),
        ..Demands::default()
    };
    // Records arrive grouped by caller; classify each caller once.
    let mut last: Option<(&str, Owner)> = None;
    for inv in invocations {
        let Some(perms) = map.lookup(&inv.callee) else {
            continue;
        };
        demands.invocations_mapped += 1;
        let owner = match &last {
            Some((class, owner)) if *class == inv.caller_class => owner.clone(),
            _ => {
                let owner = catalog.classify(&inv.caller_class);
                last = Some((&inv.caller_class, owner.clone()));
                owner
            }
        };
        let dangerous_perms: Vec<&String> = perms.iter().filter(|p| dangerous.contains(p)).collect();
        if dangerous_perms.is_empty() {
            continue;
        }
        demands
            .by_owner
            .entry(owner)
            .or_default()
            .extend(dangerous_perms.into_iter().cloned());
    }
    demands
}

/// Attribution over already-parsed inputs. DEX order does not matter.
pub fn analyze_parsed(
    fallback_app_id: &str,
    manifest: &ManifestInfo,
    dexes: &[DexFile],
    ctx: &AnalysisContext,
) -> AppReport {
    let mut stats = AnalysisStats::default();
    let mut warnings = Vec::new();
    let mut libraries_present = BTreeSet::new();
    let mut demanded: BTreeMap<Owner, BTreeSet<String>> = BTreeMap::new();

    for (payload, dex) in dexes.iter().enumerate() {
        for class in &dex.classes {
            stats.classes_total += 1;
            match ctx.catalog.classify(&class.descriptor) {
                Owner::Library(id) => {
                    libraries_present.insert(id);
                }
                Owner::App => stats.classes_unattributed += 1,
            }
        }
        let extraction = dex::extract_invocations(dex);
        warnings.extend(
            extraction
                .warnings
                .into_iter()
                .map(|warning| AnalysisWarning::Bytecode { payload, warning }),
        );
        let demands = demanded_permissions(
            &extraction.records,
            &ctx.catalog,
            &ctx.permission_map,
            &ctx.dangerous,
        );
        stats.invocations_total += demands.invocations_total;
        stats.invocations_mapped += demands.invocations_mapped;
        for (owner, perms) in demands.by_owner {
            demanded.entry(owner).or_default().extend(perms);
        }
    }

    let granted: BTreeSet<String> = ctx.dangerous.retain_dangerous(&manifest.declared_permissions);
    let usable = |owner: &Owner| -> BTreeSet<String> {
        demanded
            .get(owner)
            .map(|d| d.intersection(&granted).cloned().collect())
            .unwrap_or_default()
    };

    let library_perms = libraries_present
        .iter()
        .map(|id| (id.clone(), usable(&Owner::Library(id.clone()))))
        .collect();

    let app_id = if manifest.package.is_empty() {
        fallback_app_id.to_string()
    } else {
        manifest.package.clone()
    };

    AppReport {
        analysis: AppAnalysis {
            app_id,
            version_label: ctx.version_label.clone(),
            declared: manifest.declared_permissions.clone(),
            target_sdk: manifest.target_sdk,
            library_perms,
            app_code_perms: usable(&Owner::App),
            libraries_present,
        },
        stats,
        warnings,
    }
}

pub fn analyze_app(archive: &ApkArchive, ctx: &AnalysisContext) -> Result<AppReport, AnalysisError> {
    let manifest = manifest::parse_manifest_with(ingest::manifest_payload(archive)?, &ctx.manifest_options)?;
    let payloads = ingest::dex_payloads(archive);
    if payloads.is_empty() {
        return Err(AnalysisError::NoDexPayload);
    }
    let dexes = payloads
        .iter()
        .enumerate()
        .map(|(payload, bytes)| dex::parse_dex(bytes).map_err(|error| AnalysisError::Dex { payload, error }))
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = analyze_parsed(&archive.source_name, &manifest, &dexes, ctx);
    let mut warnings: Vec<AnalysisWarning> = archive
        .warnings()
        .iter()
        .cloned()
        .map(AnalysisWarning::Archive)
        .collect();
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    Ok(report)
}

/// Opens and analyzes one APK image.
pub fn analyze_apk(source_name: &str, bytes: &[u8], ctx: &AnalysisContext) -> Result<AppReport, AnalysisError> {
    let archive = ingest::open_archive(bytes)?.with_source_name(source_name);
    analyze_app(&archive, ctx)
}
