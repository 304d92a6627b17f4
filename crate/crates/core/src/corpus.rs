//! Batch analysis of a corpus directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::attribution::{analyze_apk, AnalysisContext, AnalysisStats, AnalysisWarning, AppAnalysis};
use crate::device::Corpus;
use crate::snapshot::{self, Failure, INDEX_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Apk,
    /// A pre-extracted AppAnalysis, passed through unchanged.
    Analysis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusInput {
    pub path: PathBuf,
    pub kind: InputKind,
}

impl CorpusInput {
    pub fn source_name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// Lists `*.apk` and `*.json` files (not recursive), sorted by file name.
pub fn list_inputs(dir: &Path) -> io::Result<Vec<CorpusInput>> {
    let mut inputs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        let kind = match ext.as_deref() {
            Some("apk") => InputKind::Apk,
            Some("json") if path.file_name().is_some_and(|n| n != INDEX_FILE) => InputKind::Analysis,
            _ => continue,
        };
        inputs.push(CorpusInput { path, kind });
    }
    inputs.sort_by(|a, b| a.path.file_name().cmp(&b.path.file_name()));
    Ok(inputs)
}

#[derive(Debug, Clone)]
pub struct AppOutcome {
    pub source: String,
    pub result: Result<(AppAnalysis, AnalysisStats, Vec<AnalysisWarning>), String>,
}

pub fn analyze_input(input: &CorpusInput, ctx: &AnalysisContext) -> AppOutcome {
    let source = input.source_name();
    let result = match input.kind {
        InputKind::Apk => fs::read(&input.path)
            .map_err(|e| e.to_string())
            .and_then(|bytes| analyze_apk(&source, &bytes, ctx).map_err(|e| e.to_string()))
            .map(|r| (r.analysis, r.stats, r.warnings)),
        InputKind::Analysis => snapshot::read_json::<AppAnalysis>(&input.path)
            .map_err(|e| e.to_string())
            .map(|a| (a, AnalysisStats::default(), Vec::new())),
    };
    AppOutcome { source, result }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusRun {
    pub analyses: Corpus,
    pub failures: Vec<Failure>,
    pub warnings: Vec<(String, AnalysisWarning)>,
    pub stats: AnalysisStats,
}

impl CorpusRun {
    /// Fraction of classes that matched no catalog prefix.
    pub fn unattributed_class_fraction(&self) -> f64 {
        if self.stats.classes_total == 0 {
            0.0
        } else {
            self.stats.classes_unattributed as f64 / self.stats.classes_total as f64
        }
    }
}

/// Analyzes inputs in parallel on the current rayon pool. Results merge in
/// input order; later inputs with an already-seen app id are failures.
pub fn analyze_inputs(inputs: &[CorpusInput], ctx: &AnalysisContext) -> CorpusRun {
    let outcomes: Vec<AppOutcome> = inputs.par_iter().map(|i| analyze_input(i, ctx)).collect();
    let mut run = CorpusRun::default();
    let mut origin: std::collections::BTreeMap<String, String> = Default::default();
    for outcome in outcomes {
        match outcome.result {
            Ok((analysis, stats, warnings)) => {
                if let Some(first) = origin.get(&analysis.app_id) {
                    run.failures.push(Failure {
                        source: outcome.source,
                        error: format!("duplicate app id `{}` (first seen in {first})", analysis.app_id),
                    });
                    continue;
                }
                origin.insert(analysis.app_id.clone(), outcome.source.clone());
                run.stats = AnalysisStats::merged([&run.stats, &stats]);
                run.warnings
                    .extend(warnings.into_iter().map(|w| (outcome.source.clone(), w)));
                run.analyses.insert(analysis.app_id.clone(), analysis);
            }
            Err(error) => run.failures.push(Failure {
                source: outcome.source,
                error,
            }),
        }
    }
    run
}
