use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ilc", version, about = "Per-library permission analysis and intra-library collusion reports for Android app corpora")]
pub struct Cli {
    /// Worker threads for per-app and per-device work (default: all cores)
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a directory of APKs and/or AppAnalysis JSON into a snapshot
    Analyze(AnalyzeArgs),
    /// Prevalence, benefiting-library and additional-permission tables
    Ilc(IlcArgs),
    /// Histogram of targetSdkVersion over a snapshot
    Targetsdk(TargetSdkArgs),
    /// Compare two snapshots over one device population
    Longitudinal(LongitudinalArgs),
    /// Lower-bound ad-library leak estimate from usage logs
    Leakage(LeakageArgs),
    /// Print every invocation found in an APK or DEX file as CSV
    DumpDex(DumpArgs),
    /// Print the parsed manifest of an APK or manifest file as JSON
    DumpManifest(DumpArgs),
}

#[derive(Debug, Args)]
pub struct ContextArgs {
    /// Library catalog TSV: prefix, library, category[, network]
    #[arg(long)]
    pub catalog: PathBuf,
    /// API-to-permission map TSV
    #[arg(long)]
    pub permission_map: PathBuf,
    /// Dangerous permission list, one per line (default: bundled Android 6 list)
    #[arg(long)]
    pub dangerous: Option<PathBuf>,
    /// Ignore uses-permission-sdk-23 declarations
    #[arg(long)]
    pub no_sdk23_merge: bool,
    /// Version label stored in every analysis
    #[arg(long, default_value = "")]
    pub version_label: String,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    /// Devices as JSON lines, or a `device_id,app_id` install CSV
    #[arg(long)]
    pub devices: PathBuf,
    /// Optional `device_id,day,app_id` usage CSV
    #[arg(long)]
    pub usage: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshot label (default: corpus directory name)
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub context: ContextArgs,
}

#[derive(Debug, Args)]
pub struct IlcArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[command(flatten)]
    pub devices: DeviceArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Count only devices with at least one app found in the snapshot
    #[arg(long)]
    pub resolved_only: bool,
}

#[derive(Debug, Args)]
pub struct TargetSdkArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LongitudinalArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[command(flatten)]
    pub devices: DeviceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LeakageArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[command(flatten)]
    pub devices: DeviceArgs,
    /// Catalog used for library categories and ad networks
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Divide by the first-to-last day span instead of observed days
    #[arg(long)]
    pub calendar_days: bool,
    /// Only ad libraries present in more than this fraction of apps
    #[arg(long)]
    pub min_prevalence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    pub input: PathBuf,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}
