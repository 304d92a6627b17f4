use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("empty library prefix")]
    EmptyPrefix,
    #[error("duplicate prefix `{0}`")]
    DuplicatePrefix(String),
    #[error("prefix `{0}` has a network id but is not an ad library")]
    NetworkOnNonAd(String),
    #[error("library `{0}` is listed with conflicting categories or networks")]
    ConflictingLibrary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LibraryCategory {
    Ad,
    Analytics,
    Social,
    Utility,
    Other,
}

impl FromStr for LibraryCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ad" | "ads" | "advertising" => LibraryCategory::Ad,
            "analytics" => LibraryCategory::Analytics,
            "social" => LibraryCategory::Social,
            "utility" => LibraryCategory::Utility,
            "other" => LibraryCategory::Other,
            other => return Err(format!("unknown category `{other}`")),
        })
    }
}

impl fmt::Display for LibraryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LibraryCategory::Ad => "ad",
            LibraryCategory::Analytics => "analytics",
            LibraryCategory::Social => "social",
            LibraryCategory::Utility => "utility",
            LibraryCategory::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    /// Package path such as `com/facebook/ads`, without leading or trailing `/`.
    pub prefix: String,
    pub library_id: String,
    pub category: LibraryCategory,
    pub network_id: Option<String>,
}

/// Code region that a class belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    App,
    Library(String),
}

/// Package-prefix signatures of known third-party libraries.
#[derive(Debug, Clone, Default)]
pub struct LibraryCatalog {
    entries: Vec<CatalogEntry>,
    by_prefix: HashMap<String, usize>,
    by_library: BTreeMap<String, usize>,
}

/// `com.foo.bar`, `com/foo/bar/` and `Lcom/foo/bar` all become `com/foo/bar`.
pub fn normalize_prefix(raw: &str) -> String {
    let raw = raw.trim();
    let raw = raw.strip_prefix('L').filter(|r| r.contains('/')).unwrap_or(raw);
    raw.replace('.', "/").trim_matches('/').to_string()
}

/// Internal class path of a reference descriptor: `Lcom/a/B;` -> `com/a/B`.
pub fn class_path(descriptor: &str) -> &str {
    let d = descriptor.trim_start_matches('[');
    d.strip_prefix('L')
        .and_then(|d| d.strip_suffix(';'))
        .unwrap_or(d)
}

impl LibraryCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, CatalogError> {
        let mut by_prefix = HashMap::with_capacity(entries.len());
        let mut by_library = BTreeMap::new();
        let mut normalized = Vec::with_capacity(entries.len());
        for mut e in entries {
            e.prefix = normalize_prefix(&e.prefix);
            if e.prefix.is_empty() {
                return Err(CatalogError::EmptyPrefix);
            }
            if e.network_id.is_some() && e.category != LibraryCategory::Ad {
                return Err(CatalogError::NetworkOnNonAd(e.prefix));
            }
            let idx = normalized.len();
            if by_prefix.insert(e.prefix.clone(), idx).is_some() {
                return Err(CatalogError::DuplicatePrefix(e.prefix));
            }
            if let Some(&first) = by_library.get(&e.library_id) {
                let prev: &CatalogEntry = &normalized[first];
                if prev.category != e.category || prev.network_id != e.network_id {
                    return Err(CatalogError::ConflictingLibrary(e.library_id));
                }
            } else {
                by_library.insert(e.library_id.clone(), idx);
            }
            normalized.push(e);
        }
        Ok(LibraryCatalog {
            entries: normalized,
            by_prefix,
            by_library,
        })
    }

    /// Parses `prefix<TAB>library_id<TAB>category[<TAB>network_id]` lines.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: String| CatalogError::BadLine { line: i + 1, reason };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(bad(format!("expected 3 or 4 tab-separated fields, got {}", fields.len())));
            }
            if fields[1].is_empty() {
                return Err(bad("empty library id".into()));
            }
            let category = fields[2].parse().map_err(bad)?;
            entries.push(CatalogEntry {
                prefix: fields[0].to_string(),
                library_id: fields[1].to_string(),
                category,
                network_id: fields.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            });
        }
        LibraryCatalog::new(entries)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Any catalog entry for the library; all entries of one library agree
    /// on category and network.
    pub fn library(&self, library_id: &str) -> Option<&CatalogEntry> {
        self.by_library.get(library_id).map(|&i| &self.entries[i])
    }

    pub fn is_ad_library(&self, library_id: &str) -> bool {
        self.library(library_id)
            .is_some_and(|e| e.category == LibraryCategory::Ad)
    }

    /// Ad network of a library, defaulting to the library id itself.
    pub fn network_of<'a>(&'a self, library_id: &'a str) -> &'a str {
        self.library(library_id)
            .and_then(|e| e.network_id.as_deref())
            .unwrap_or(library_id)
    }

    /// Longest matching package-path prefix wins.
    pub fn classify(&self, class_descriptor: &str) -> Owner {
        let path = class_path(class_descriptor);
        let mut end = path.len();
        loop {
            if let Some(&i) = self.by_prefix.get(&path[..end]) {
                return Owner::Library(self.entries[i].library_id.clone());
            }
            match path[..end].rfind('/') {
                Some(slash) => end = slash,
                None => return Owner::App,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(text: &str) -> LibraryCatalog {
        LibraryCatalog::parse(text).unwrap()
    }

    #[test]
    fn longest_prefix_wins() {
        let c = catalog("com/facebook\tfacebook\tsocial\ncom/facebook/ads\tfacebook-ads\tad\tfacebook\n");
        assert_eq!(
            c.classify("Lcom/facebook/ads/AdView;"),
            Owner::Library("facebook-ads".into())
        );
        assert_eq!(
            c.classify("Lcom/facebook/login/Login;"),
            Owner::Library("facebook".into())
        );
    }

    #[test]
    fn unmatched_is_app_code() {
        let c = catalog("com/mopub\tcom/mopub\tad\n");
        assert_eq!(c.classify("Lcom/example/myapp/Main;"), Owner::App);
        assert_eq!(c.classify("La/a/a;"), Owner::App);
        assert_eq!(c.classify("Lcom/mopub/MoPubView;"), Owner::Library("com/mopub".into()));
    }

    #[test]
    fn prefix_matches_whole_segments_only() {
        let c = catalog("com/mopub\tmopub\tad\n");
        assert_eq!(c.classify("Lcom/mopubx/Foo;"), Owner::App);
        assert_eq!(c.classify("[Lcom/mopub/Foo;"), Owner::Library("mopub".into()));
    }

    #[test]
    fn dotted_prefixes_are_normalized() {
        let c = catalog("com.flurry.\tflurry\tanalytics\n");
        assert_eq!(c.entries()[0].prefix, "com/flurry");
        assert_eq!(c.classify("Lcom/flurry/sdk/A;"), Owner::Library("flurry".into()));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            LibraryCatalog::parse("a/b\tx\tad\na/b\ty\tad\n").unwrap_err(),
            CatalogError::DuplicatePrefix("a/b".into())
        );
        assert_eq!(
            LibraryCatalog::parse("/\tx\tad\n").unwrap_err(),
            CatalogError::EmptyPrefix
        );
        assert_eq!(
            LibraryCatalog::parse("a/b\tx\tsocial\tnet\n").unwrap_err(),
            CatalogError::NetworkOnNonAd("a/b".into())
        );
        assert!(matches!(
            LibraryCatalog::parse("a/b\tx\tweird\n").unwrap_err(),
            CatalogError::BadLine { line: 1, .. }
        ));
        assert_eq!(
            LibraryCatalog::parse("a/b\tx\tad\nc/d\tx\tsocial\n").unwrap_err(),
            CatalogError::ConflictingLibrary("x".into())
        );
    }

    #[test]
    fn network_defaults_to_library() {
        let c = catalog("# ads\ncom/a\ta\tad\tnet-a\ncom/b\tb\tad\n");
        assert_eq!(c.network_of("a"), "net-a");
        assert_eq!(c.network_of("b"), "b");
        assert!(c.is_ad_library("b"));
        assert!(!c.is_ad_library("zzz"));
    }
}
