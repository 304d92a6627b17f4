use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::dex::MethodRef;

const DEFAULT_DANGEROUS: &str = include_str!("../../data/dangerous-permissions-android-6.0.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermissionFileError {
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("dangerous-permission list is empty")]
    EmptyList,
}

fn is_qualified(name: &str) -> bool {
    name.contains('.') && !name.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DangerousPermissionList {
    names: BTreeSet<String>,
}

impl DangerousPermissionList {
    pub fn new(names: impl IntoIterator<Item = String>) -> Result<Self, PermissionFileError> {
        let names: BTreeSet<String> = names.into_iter().map(|n| n.trim().to_string()).collect();
        if names.is_empty() {
            return Err(PermissionFileError::EmptyList);
        }
        if let Some(bad) = names.iter().find(|n| !is_qualified(n)) {
            return Err(PermissionFileError::BadLine {
                line: 0,
                reason: format!("`{bad}` is not a fully qualified permission name"),
            });
        }
        Ok(DangerousPermissionList { names })
    }

    /// One name per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PermissionFileError> {
        let mut names = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !is_qualified(line) {
                return Err(PermissionFileError::BadLine {
                    line: i + 1,
                    reason: format!("`{line}` is not a fully qualified permission name"),
                });
            }
            names.insert(line.to_string());
        }
        DangerousPermissionList::new(names)
    }

    /// The Android 6.0 dangerous-permission groups.
    pub fn android_6() -> Self {
        DangerousPermissionList::parse(DEFAULT_DANGEROUS).expect("bundled list is valid")
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.names
    }

    pub fn retain_dangerous<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
        names
            .into_iter()
            .filter(|n| self.contains(n))
            .cloned()
            .collect()
    }
}

/// Framework method -> permissions required to invoke it.
#[derive(Debug, Clone, Default)]
pub struct ApiPermissionMap {
    // class descriptor -> "name(params)ret" -> permissions
    entries: HashMap<String, HashMap<String, BTreeSet<String>>>,
    api_level_label: String,
    len: usize,
}

impl ApiPermissionMap {
    pub fn new(api_level_label: impl Into<String>) -> Self {
        ApiPermissionMap {
            api_level_label: api_level_label.into(),
            ..Default::default()
        }
    }

    pub fn insert(&mut self, class: &str, method: &str, descriptor: &str, permission: &str) {
        let set = self
            .entries
            .entry(class.to_string())
            .or_default()
            .entry(format!("{method}{descriptor}"))
            .or_default();
        if set.is_empty() {
            self.len += 1;
        }
        set.insert(permission.to_string());
    }

    /// Parses `permission<TAB>class_descriptor<TAB>method_name<TAB>method_descriptor`
    /// lines. A `# api-level: X` comment overrides `default_label`.
    pub fn parse(text: &str, default_label: &str) -> Result<Self, PermissionFileError> {
        let mut map = ApiPermissionMap::new(default_label);
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: String| PermissionFileError::BadLine { line: i + 1, reason };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(label) = comment.trim().strip_prefix("api-level:") {
                    map.api_level_label = label.trim().to_string();
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [permission, class, method, descriptor] = fields[..] else {
                return Err(bad(format!("expected 4 tab-separated fields, got {}", fields.len())));
            };
            if !is_qualified(permission) {
                return Err(bad(format!("`{permission}` is not a fully qualified permission name")));
            }
            if !(class.starts_with('L') && class.ends_with(';')) {
                return Err(bad(format!("`{class}` is not a class descriptor")));
            }
            if method.is_empty() {
                return Err(bad("empty method name".into()));
            }
            if !descriptor.starts_with('(') || !descriptor.contains(')') {
                return Err(bad(format!("`{descriptor}` is not a method descriptor")));
            }
            map.insert(class, method, descriptor, permission);
        }
        Ok(map)
    }

    pub fn api_level_label(&self) -> &str {
        &self.api_level_label
    }

    /// Number of distinct mapped APIs.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lookup(&self, callee: &MethodRef) -> Option<&BTreeSet<String>> {
        let methods = self.entries.get(&callee.defining_class)?;
        methods.get(&format!("{}{}", callee.name, callee.descriptor()))
    }

    /// Mapped permissions that the dangerous list does not contain; these are
    /// ignored during attribution.
    pub fn non_dangerous(&self, dangerous: &DangerousPermissionList) -> BTreeSet<String> {
        self.entries
            .values()
            .flat_map(|m| m.values())
            .flatten()
            .filter(|p| !dangerous.contains(p))
            .cloned()
            .collect()
    }
}
