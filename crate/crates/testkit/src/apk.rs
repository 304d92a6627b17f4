//! APK fixtures written with an independent ZIP implementation.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stored,
    Deflated,
}

#[derive(Debug, Clone, Default)]
pub struct ApkBuilder {
    entries: Vec<(String, Vec<u8>, Option<Method>)>,
    default_method: Option<Method>,
}

impl ApkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compression for entries added without an explicit method.
    pub fn method(mut self, m: Method) -> Self {
        self.default_method = Some(m);
        self
    }

    pub fn entry(mut self, name: &str, data: impl Into<Vec<u8>>) -> Self {
        self.entries.push((name.to_string(), data.into(), None));
        self
    }

    pub fn entry_with(mut self, name: &str, data: impl Into<Vec<u8>>, m: Method) -> Self {
        self.entries.push((name.to_string(), data.into(), Some(m)));
        self
    }

    pub fn manifest(self, data: impl Into<Vec<u8>>) -> Self {
        self.entry("AndroidManifest.xml", data)
    }

    /// `classes.dex`, `classes2.dex`, ... in order.
    pub fn dex_payloads(mut self, payloads: impl IntoIterator<Item = Vec<u8>>) -> Self {
        for (i, p) in payloads.into_iter().enumerate() {
            let name = if i == 0 { "classes.dex".to_string() } else { format!("classes{}.dex", i + 1) };
            self = self.entry(&name, p);
        }
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut w = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, data, m) in &self.entries {
            let method = match m.or(self.default_method).unwrap_or(Method::Deflated) {
                Method::Stored => CompressionMethod::Stored,
                Method::Deflated => CompressionMethod::Deflated,
            };
            let opts = SimpleFileOptions::default()
                .compression_method(method)
                .last_modified_time(zip::DateTime::default());
            w.start_file(name.as_str(), opts).expect("start entry");
            w.write_all(data).expect("write entry");
        }
        w.finish().expect("finish archive").into_inner()
    }
}
