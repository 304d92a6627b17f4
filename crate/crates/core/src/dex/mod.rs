//! DEX container parsing and invocation extraction.
//!
//! [`parse_dex`] resolves the string, type, proto and method tables and loads
//! the instruction arrays of every method with a body. [`extract_invocations`]
//! then walks those arrays and reports every invoke instruction.

mod reader;
mod walk;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use reader::Image;
pub use walk::{extract_invocations, instruction_width, Extraction, InvocationRecord, InvokeKind, WalkWarning};

const HEADER_SIZE: usize = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const NO_INDEX: u32 = 0xffff_ffff;
const SUPPORTED_VERSIONS: [&str; 4] = ["035", "037", "038", "039"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DexError {
    #[error("bad DEX magic")]
    BadMagic,
    #[error("unsupported DEX version {0}")]
    UnsupportedVersion(String),
    #[error("{section} index {index} out of bounds")]
    IndexOutOfBounds { section: &'static str, index: u32 },
    #[error("truncated {0} section")]
    TruncatedSection(&'static str),
    #[error("sections {0} and {1} overlap")]
    OverlappingSections(&'static str, &'static str),
    #[error("malformed {0}")]
    Malformed(&'static str),
}

/// A method reference resolved through `method_ids`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MethodRef {
    pub defining_class: String,
    pub name: String,
    pub parameter_descriptors: Vec<String>,
    pub return_descriptor: String,
}

impl MethodRef {
    /// Full method descriptor, e.g. `(ILjava/lang/String;)V`.
    pub fn descriptor(&self) -> String {
        let mut out = String::with_capacity(
            2 + self.return_descriptor.len()
                + self.parameter_descriptors.iter().map(String::len).sum::<usize>(),
        );
        out.push('(');
        for p in &self.parameter_descriptors {
            out.push_str(p);
        }
        out.push(')');
        out.push_str(&self.return_descriptor);
        out
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}{}", self.defining_class, self.name, self.descriptor())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proto {
    pub shorty: u32,
    pub return_type: u32,
    pub parameters: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeItem {
    pub offset: u32,
    pub registers_size: u16,
    pub ins_size: u16,
    pub outs_size: u16,
    pub tries_size: u16,
    pub insns: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedMethod {
    pub method_idx: u32,
    pub access_flags: u32,
    pub code: Option<CodeItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub descriptor: String,
    pub access_flags: u32,
    /// Direct methods followed by virtual methods, in encoded order.
    pub methods: Vec<EncodedMethod>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DexFile {
    pub version: String,
    pub strings: Vec<String>,
    /// Type descriptors, indexed by type id.
    pub types: Vec<String>,
    pub protos: Vec<Proto>,
    pub methods: Vec<MethodRef>,
    pub classes: Vec<ClassDef>,
}

impl DexFile {
    pub fn method(&self, idx: u32) -> Option<&MethodRef> {
        self.methods.get(idx as usize)
    }
}

#[derive(Debug, Clone, Copy)]
struct Section {
    name: &'static str,
    size: u32,
    off: u32,
    item: usize,
}

impl Section {
    fn range(&self) -> (usize, usize) {
        let start = self.off as usize;
        (start, start + self.size as usize * self.item)
    }
}

fn check_index(section: &'static str, index: u32, len: usize) -> Result<usize, DexError> {
    if (index as usize) < len {
        Ok(index as usize)
    } else {
        Err(DexError::IndexOutOfBounds { section, index })
    }
}

fn parse_version(bytes: &[u8]) -> Result<String, DexError> {
    let magic = bytes.get(..8).ok_or(DexError::BadMagic)?;
    if &magic[..4] != b"dex\n" || magic[7] != 0 {
        return Err(DexError::BadMagic);
    }
    let version = String::from_utf8_lossy(&magic[4..7]).into_owned();
    if !SUPPORTED_VERSIONS.contains(&version.as_str()) {
        return Err(DexError::UnsupportedVersion(version));
    }
    Ok(version)
}

/// Parses a DEX image into resolved tables.
pub fn parse_dex(bytes: &[u8]) -> Result<DexFile, DexError> {
    let version = parse_version(bytes)?;
    if bytes.len() < HEADER_SIZE {
        return Err(DexError::TruncatedSection("header"));
    }
    let img = Image::new(bytes);
    if img.u32(0x28, "header")? != ENDIAN_CONSTANT {
        return Err(DexError::Malformed("header endian tag"));
    }

    let section = |name, at: usize, item| -> Result<Section, DexError> {
        Ok(Section {
            name,
            size: img.u32(at, "header")?,
            off: img.u32(at + 4, "header")?,
            item,
        })
    };
    let string_ids = section("string_ids", 0x38, 4)?;
    let type_ids = section("type_ids", 0x40, 4)?;
    let proto_ids = section("proto_ids", 0x48, 12)?;
    let field_ids = section("field_ids", 0x50, 8)?;
    let method_ids = section("method_ids", 0x58, 8)?;
    let class_defs = section("class_defs", 0x60, 32)?;

    let id_sections = [string_ids, type_ids, proto_ids, field_ids, method_ids, class_defs];
    for s in &id_sections {
        let (start, end) = s.range();
        if s.size > 0 && (start < HEADER_SIZE || end > img.len()) {
            return Err(DexError::TruncatedSection(s.name));
        }
    }
    for (i, a) in id_sections.iter().enumerate() {
        for b in &id_sections[i + 1..] {
            if a.size == 0 || b.size == 0 {
                continue;
            }
            let (a0, a1) = a.range();
            let (b0, b1) = b.range();
            if a0 < b1 && b0 < a1 {
                return Err(DexError::OverlappingSections(a.name, b.name));
            }
        }
    }

    let strings = (0..string_ids.size as usize)
        .map(|i| {
            let data_off = img.u32(string_ids.off as usize + i * 4, "string_ids")? as usize;
            let mut pos = data_off;
            let _utf16_len = img.uleb128(&mut pos, "string_data")?;
            img.mutf8(pos, "string_data")
        })
        .collect::<Result<Vec<_>, _>>()?;

    let types = (0..type_ids.size as usize)
        .map(|i| {
            let sidx = img.u32(type_ids.off as usize + i * 4, "type_ids")?;
            Ok(strings[check_index("string_ids", sidx, strings.len())?].clone())
        })
        .collect::<Result<Vec<_>, DexError>>()?;

    let read_type_list = |off: u32| -> Result<Vec<u32>, DexError> {
        if off == 0 {
            return Ok(Vec::new());
        }
        let off = off as usize;
        let size = img.u32(off, "type_list")? as usize;
        img.slice(off + 4, size.saturating_mul(2), "type_list")?;
        (0..size)
            .map(|k| {
                let t = img.u16(off + 4 + k * 2, "type_list")? as u32;
                check_index("type_ids", t, types.len())?;
                Ok(t)
            })
            .collect()
    };

    let protos = (0..proto_ids.size as usize)
        .map(|i| {
            let base = proto_ids.off as usize + i * 12;
            let shorty = img.u32(base, "proto_ids")?;
            check_index("string_ids", shorty, strings.len())?;
            let return_type = img.u32(base + 4, "proto_ids")?;
            check_index("type_ids", return_type, types.len())?;
            let parameters = read_type_list(img.u32(base + 8, "proto_ids")?)?;
            Ok(Proto {
                shorty,
                return_type,
                parameters,
            })
        })
        .collect::<Result<Vec<_>, DexError>>()?;

    let methods = (0..method_ids.size as usize)
        .map(|i| {
            let base = method_ids.off as usize + i * 8;
            let class_idx = img.u16(base, "method_ids")? as u32;
            let proto_idx = img.u16(base + 2, "method_ids")? as u32;
            let name_idx = img.u32(base + 4, "method_ids")?;
            let class = check_index("type_ids", class_idx, types.len())?;
            let proto = &protos[check_index("proto_ids", proto_idx, protos.len())?];
            let name = check_index("string_ids", name_idx, strings.len())?;
            Ok(MethodRef {
                defining_class: types[class].clone(),
                name: strings[name].clone(),
                parameter_descriptors: proto
                    .parameters
                    .iter()
                    .map(|&t| types[t as usize].clone())
                    .collect(),
                return_descriptor: types[proto.return_type as usize].clone(),
            })
        })
        .collect::<Result<Vec<_>, DexError>>()?;

    let classes = (0..class_defs.size as usize)
        .map(|i| {
            let base = class_defs.off as usize + i * 32;
            let class_idx = img.u32(base, "class_defs")?;
            let access_flags = img.u32(base + 4, "class_defs")?;
            let superclass = img.u32(base + 8, "class_defs")?;
            if superclass != NO_INDEX {
                check_index("type_ids", superclass, types.len())?;
            }
            let class_data_off = img.u32(base + 24, "class_defs")?;
            let descriptor = types[check_index("type_ids", class_idx, types.len())?].clone();
            let methods = if class_data_off == 0 {
                Vec::new()
            } else {
                read_class_data(&img, class_data_off as usize, methods.len())?
            };
            Ok(ClassDef {
                descriptor,
                access_flags,
                methods,
            })
        })
        .collect::<Result<Vec<_>, DexError>>()?;

    Ok(DexFile {
        version,
        strings,
        types,
        protos,
        methods,
        classes,
    })
}

fn read_class_data(img: &Image<'_>, off: usize, method_count: usize) -> Result<Vec<EncodedMethod>, DexError> {
    let mut pos = off;
    let static_fields = img.uleb128(&mut pos, "class_data")?;
    let instance_fields = img.uleb128(&mut pos, "class_data")?;
    let direct = img.uleb128(&mut pos, "class_data")?;
    let virtual_ = img.uleb128(&mut pos, "class_data")?;

    for _ in 0..(static_fields as u64 + instance_fields as u64) {
        img.uleb128(&mut pos, "class_data")?;
        img.uleb128(&mut pos, "class_data")?;
    }

    let mut out = Vec::with_capacity((direct + virtual_) as usize);
    for count in [direct, virtual_] {
        // method_idx_diff restarts for the virtual list.
        let mut method_idx: u32 = 0;
        for k in 0..count {
            let diff = img.uleb128(&mut pos, "class_data")?;
            let access_flags = img.uleb128(&mut pos, "class_data")?;
            let code_off = img.uleb128(&mut pos, "class_data")?;
            method_idx = if k == 0 {
                diff
            } else {
                method_idx
                    .checked_add(diff)
                    .ok_or(DexError::Malformed("class_data"))?
            };
            check_index("method_ids", method_idx, method_count)?;
            let code = if code_off == 0 {
                None
            } else {
                Some(read_code_item(img, code_off)?)
            };
            out.push(EncodedMethod {
                method_idx,
                access_flags,
                code,
            });
        }
    }
    Ok(out)
}

fn read_code_item(img: &Image<'_>, off: u32) -> Result<CodeItem, DexError> {
    let base = off as usize;
    let insns_size = img.u32(base + 12, "code_item")? as usize;
    let raw = img.slice(base + 16, insns_size.saturating_mul(2), "code_item")?;
    Ok(CodeItem {
        offset: off,
        registers_size: img.u16(base, "code_item")?,
        ins_size: img.u16(base + 2, "code_item")?,
        outs_size: img.u16(base + 4, "code_item")?,
        tries_size: img.u16(base + 6, "code_item")?,
        insns: raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
    })
}
