//! Android manifest extraction from binary (AXML) and plaintext XML.
//!
//! Both decoders lower the document to a flat sequence of element starts,
//! which a single collector turns into [`ManifestInfo`]. Keeping one
//! collector is what makes the two forms agree.

mod axml;
mod plain;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

pub(crate) const ATTR_NAME: u32 = 0x0101_0003;
pub(crate) const ATTR_MIN_SDK_VERSION: u32 = 0x0101_020c;
pub(crate) const ATTR_TARGET_SDK_VERSION: u32 = 0x0101_0270;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("not a binary or plaintext XML manifest")]
    UnrecognizedFormat,
    #[error("string pool is corrupt")]
    StringPoolCorrupt,
    #[error("binary XML chunk at {0:#x} is truncated")]
    TruncatedChunk(usize),
    #[error("XML syntax error: {0}")]
    Syntax(String),
    #[error("document has no <manifest> root element")]
    MissingRootElement,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub package: String,
    #[serde(rename = "permissions")]
    pub declared_permissions: BTreeSet<String>,
    #[serde(rename = "targetSdk")]
    pub target_sdk: Option<u32>,
    #[serde(rename = "minSdk")]
    pub min_sdk: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSdkBucket {
    Pre23,
    AtLeast23,
    Unknown,
}

impl TargetSdkBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetSdkBucket::Pre23 => "pre_23",
            TargetSdkBucket::AtLeast23 => "at_least_23",
            TargetSdkBucket::Unknown => "unknown",
        }
    }
}

pub fn target_sdk_bucket(info: &ManifestInfo) -> TargetSdkBucket {
    TargetSdkBucket::of(info.target_sdk)
}

impl TargetSdkBucket {
    pub const ALL: [TargetSdkBucket; 3] = [TargetSdkBucket::Pre23, TargetSdkBucket::AtLeast23, TargetSdkBucket::Unknown];

    pub fn of(target_sdk: Option<u32>) -> TargetSdkBucket {
        match target_sdk {
            Some(v) if v <= 22 => TargetSdkBucket::Pre23,
            Some(_) => TargetSdkBucket::AtLeast23,
            None => TargetSdkBucket::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifestOptions {
    /// Count `uses-permission-sdk-23` declarations as declared permissions.
    pub merge_sdk23: bool,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions { merge_sdk23: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum AttrValue {
    Text(String),
    Int(i64),
    /// `@type/name` style references, unresolvable without a resource table.
    Reference,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Attr {
    pub android: bool,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ElementStart {
    pub name: String,
    pub attrs: Vec<Attr>,
}

impl ElementStart {
    fn android_attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs
            .iter()
            .find(|a| a.android && a.name == name)
            .map(|a| &a.value)
    }

    fn plain_attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs
            .iter()
            .find(|a| !a.android && a.name == name)
            .map(|a| &a.value)
    }
}

fn sdk_value(value: &AttrValue) -> Option<u32> {
    let n = match value {
        AttrValue::Int(n) => *n,
        AttrValue::Text(s) => s.trim().parse::<i64>().ok()?,
        AttrValue::Reference | AttrValue::Other => return None,
    };
    u32::try_from(n).ok().filter(|&v| v >= 1)
}

fn is_valid_permission(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace)
}

fn collect(elements: &[ElementStart], options: &ManifestOptions) -> Result<ManifestInfo, ManifestError> {
    let root = elements.first().ok_or(ManifestError::MissingRootElement)?;
    if root.name != "manifest" {
        return Err(ManifestError::MissingRootElement);
    }
    let mut info = ManifestInfo {
        package: match root.plain_attr("package") {
            Some(AttrValue::Text(s)) => s.trim().to_string(),
            _ => String::new(),
        },
        ..ManifestInfo::default()
    };
    let mut seen_uses_sdk = false;

    for el in &elements[1..] {
        match el.name.as_str() {
            "uses-permission" => add_permission(&mut info, el),
            "uses-permission-sdk-23" if options.merge_sdk23 => add_permission(&mut info, el),
            "uses-sdk" if !seen_uses_sdk => {
                seen_uses_sdk = true;
                info.target_sdk = el.android_attr("targetSdkVersion").and_then(sdk_value);
                info.min_sdk = el.android_attr("minSdkVersion").and_then(sdk_value);
            }
            _ => {}
        }
    }
    Ok(info)
}

fn add_permission(info: &mut ManifestInfo, el: &ElementStart) {
    if let Some(AttrValue::Text(name)) = el.android_attr("name") {
        let name = name.trim();
        if is_valid_permission(name) {
            info.declared_permissions.insert(name.to_string());
        }
    }
}

fn strip_utf8_bom(bytes: &[u8]) -> &[u8] {
    bytes.strip_prefix(&[0xef, 0xbb, 0xbf]).unwrap_or(bytes)
}

pub fn parse_manifest(bytes: &[u8]) -> Result<ManifestInfo, ManifestError> {
    parse_manifest_with(bytes, &ManifestOptions::default())
}

pub fn parse_manifest_with(bytes: &[u8], options: &ManifestOptions) -> Result<ManifestInfo, ManifestError> {
    let elements = if axml::looks_binary(bytes) {
        axml::element_starts(bytes)?
    } else {
        let text = plain::decode_text(strip_utf8_bom(bytes))?;
        plain::element_starts(&text)?
    };
    collect(&elements, options)
}
