//! Intra-library collusion analysis for Android apps.
//!
//! Pipeline: APK bytes ([`ingest`]) to bytecode call sites ([`dex`]) and
//! manifest facts ([`manifest`]), attributed to libraries and permissions
//! ([`attribution`]), then aggregated per device ([`ilc`], [`longitudinal`],
//! [`leakage`]).

pub mod attribution;
pub mod corpus;
pub mod device;
pub mod dex;
pub mod ilc;
pub mod ingest;
pub mod leakage;
pub mod longitudinal;
pub mod manifest;
pub mod snapshot;
