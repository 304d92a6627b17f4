//! Binary XML (AXML) chunk decoding.

use super::{
    Attr, AttrValue, ElementStart, ManifestError, ANDROID_NS, ATTR_MIN_SDK_VERSION, ATTR_NAME,
    ATTR_TARGET_SDK_VERSION,
};

const CHUNK_XML: u16 = 0x0003;
const CHUNK_STRING_POOL: u16 = 0x0001;
const CHUNK_RESOURCE_MAP: u16 = 0x0180;
const CHUNK_START_ELEMENT: u16 = 0x0102;

const UTF8_FLAG: u32 = 0x100;
const NO_INDEX: u32 = 0xffff_ffff;

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_ATTRIBUTE: u8 = 0x02;
const TYPE_STRING: u8 = 0x03;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_HEX: u8 = 0x11;
const TYPE_INT_BOOLEAN: u8 = 0x12;

pub(super) fn looks_binary(bytes: &[u8]) -> bool {
    bytes.len() >= 8 && u16::from_le_bytes([bytes[0], bytes[1]]) == CHUNK_XML
}

fn u16_at(b: &[u8], off: usize) -> Option<u16> {
    b.get(off..off + 2).map(|s| u16::from_le_bytes([s[0], s[1]]))
}

fn u32_at(b: &[u8], off: usize) -> Option<u32> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

fn read_string_pool(chunk: &[u8]) -> Option<Vec<String>> {
    let header_size = u16_at(chunk, 2)? as usize;
    let count = u32_at(chunk, 8)? as usize;
    let flags = u32_at(chunk, 16)?;
    let strings_start = u32_at(chunk, 20)? as usize;
    let utf8 = flags & UTF8_FLAG != 0;

    (0..count)
        .map(|i| {
            let rel = u32_at(chunk, header_size + i * 4)? as usize;
            let at = strings_start.checked_add(rel)?;
            if utf8 {
                utf8_string(chunk, at)
            } else {
                utf16_string(chunk, at)
            }
        })
        .collect()
}

fn utf8_len(chunk: &[u8], at: &mut usize) -> Option<usize> {
    let b0 = *chunk.get(*at)? as usize;
    *at += 1;
    if b0 & 0x80 != 0 {
        let b1 = *chunk.get(*at)? as usize;
        *at += 1;
        Some(((b0 & 0x7f) << 8) | b1)
    } else {
        Some(b0)
    }
}

fn utf8_string(chunk: &[u8], mut at: usize) -> Option<String> {
    let _chars = utf8_len(chunk, &mut at)?;
    let len = utf8_len(chunk, &mut at)?;
    let bytes = chunk.get(at..at + len)?;
    String::from_utf8(bytes.to_vec()).ok()
}

fn utf16_string(chunk: &[u8], mut at: usize) -> Option<String> {
    let mut len = u16_at(chunk, at)? as usize;
    at += 2;
    if len & 0x8000 != 0 {
        len = ((len & 0x7fff) << 16) | u16_at(chunk, at)? as usize;
        at += 2;
    }
    let raw = chunk.get(at..at + len * 2)?;
    let units: Vec<u16> = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    String::from_utf16(&units).ok()
}

struct Decoder {
    strings: Vec<String>,
    resource_ids: Vec<u32>,
}

impl Decoder {
    fn string(&self, idx: u32) -> Result<&str, ManifestError> {
        self.strings
            .get(idx as usize)
            .map(String::as_str)
            .ok_or(ManifestError::StringPoolCorrupt)
    }

    fn optional_string(&self, idx: u32) -> Result<Option<&str>, ManifestError> {
        if idx == NO_INDEX {
            Ok(None)
        } else {
            self.string(idx).map(Some)
        }
    }

    /// Canonical name for attributes identified by framework resource id.
    /// Obfuscators often blank the name string itself.
    fn known_attr(&self, name_idx: u32) -> Option<&'static str> {
        match *self.resource_ids.get(name_idx as usize)? {
            ATTR_NAME => Some("name"),
            ATTR_TARGET_SDK_VERSION => Some("targetSdkVersion"),
            ATTR_MIN_SDK_VERSION => Some("minSdkVersion"),
            _ => None,
        }
    }

    fn element(&self, chunk: &[u8], at: usize) -> Result<ElementStart, ManifestError> {
        let truncated = || ManifestError::TruncatedChunk(at);
        let header_size = u16_at(chunk, 2).ok_or_else(truncated)? as usize;
        let ext = header_size;
        let name_idx = u32_at(chunk, ext + 4).ok_or_else(truncated)?;
        let attr_start = u16_at(chunk, ext + 8).ok_or_else(truncated)? as usize;
        let attr_size = u16_at(chunk, ext + 10).ok_or_else(truncated)? as usize;
        let attr_count = u16_at(chunk, ext + 12).ok_or_else(truncated)? as usize;
        if attr_size < 20 && attr_count > 0 {
            return Err(truncated());
        }

        let mut attrs = Vec::with_capacity(attr_count);
        for i in 0..attr_count {
            let base = ext + attr_start + i * attr_size;
            let ns = u32_at(chunk, base).ok_or_else(truncated)?;
            let name = u32_at(chunk, base + 4).ok_or_else(truncated)?;
            let raw = u32_at(chunk, base + 8).ok_or_else(truncated)?;
            let data_type = *chunk.get(base + 15).ok_or_else(truncated)?;
            let data = u32_at(chunk, base + 16).ok_or_else(truncated)?;

            let ns = self.optional_string(ns)?;
            let (android, name) = match self.known_attr(name) {
                Some(canonical) => (true, canonical.to_string()),
                None => (ns == Some(ANDROID_NS), self.string(name)?.to_string()),
            };
            let value = match data_type {
                TYPE_STRING => AttrValue::Text(self.string(data)?.to_string()),
                TYPE_INT_DEC | TYPE_INT_HEX | TYPE_INT_BOOLEAN => AttrValue::Int(data as i32 as i64),
                TYPE_REFERENCE | TYPE_ATTRIBUTE => AttrValue::Reference,
                _ => match self.optional_string(raw)? {
                    Some(s) => AttrValue::Text(s.to_string()),
                    None => AttrValue::Other,
                },
            };
            attrs.push(Attr { android, name, value });
        }
        Ok(ElementStart {
            name: self.string(name_idx)?.to_string(),
            attrs,
        })
    }
}

pub(super) fn element_starts(bytes: &[u8]) -> Result<Vec<ElementStart>, ManifestError> {
    let header_size = u16_at(bytes, 2).ok_or(ManifestError::TruncatedChunk(0))? as usize;
    let total = (u32_at(bytes, 4).ok_or(ManifestError::TruncatedChunk(0))? as usize).min(bytes.len());

    let mut decoder: Option<Decoder> = None;
    let mut resource_ids = Vec::new();
    let mut out = Vec::new();
    let mut pos = header_size;

    while pos + 8 <= total {
        let kind = u16_at(bytes, pos).ok_or(ManifestError::TruncatedChunk(pos))?;
        let size = u32_at(bytes, pos + 4).ok_or(ManifestError::TruncatedChunk(pos))? as usize;
        if size < 8 || pos + size > total {
            return Err(ManifestError::TruncatedChunk(pos));
        }
        let chunk = &bytes[pos..pos + size];
        match kind {
            CHUNK_STRING_POOL if decoder.is_none() => {
                let strings = read_string_pool(chunk).ok_or(ManifestError::StringPoolCorrupt)?;
                decoder = Some(Decoder {
                    strings,
                    resource_ids: Vec::new(),
                });
            }
            CHUNK_RESOURCE_MAP => {
                let hs = u16_at(chunk, 2).unwrap_or(8) as usize;
                resource_ids = chunk
                    .get(hs..)
                    .unwrap_or_default()
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
            }
            CHUNK_START_ELEMENT => {
                let d = decoder.as_mut().ok_or(ManifestError::StringPoolCorrupt)?;
                if d.resource_ids.is_empty() && !resource_ids.is_empty() {
                    d.resource_ids = std::mem::take(&mut resource_ids);
                }
                out.push(d.element(chunk, pos)?);
            }
            _ => {}
        }
        pos += size;
    }
    Ok(out)
}
