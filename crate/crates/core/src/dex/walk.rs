//! Instruction-stream walking.
//!
//! Only invoke instructions carry meaning here; every other opcode just needs
//! its width. Switch and array payloads are data embedded in the stream and
//! are skipped as regions once an anchor instruction has declared them.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{DexFile, MethodRef};

const PACKED_SWITCH_IDENT: u16 = 0x0100;
const SPARSE_SWITCH_IDENT: u16 = 0x0200;
const FILL_ARRAY_IDENT: u16 = 0x0300;

const OP_FILL_ARRAY_DATA: u8 = 0x26;
const OP_PACKED_SWITCH: u8 = 0x2b;
const OP_SPARSE_SWITCH: u8 = 0x2c;
const OP_INVOKE_POLYMORPHIC: u8 = 0xfa;
const OP_INVOKE_POLYMORPHIC_RANGE: u8 = 0xfb;
const OP_INVOKE_CUSTOM: u8 = 0xfc;
const OP_INVOKE_CUSTOM_RANGE: u8 = 0xfd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvokeKind {
    Virtual,
    Super,
    Direct,
    Static,
    Interface,
    VirtualRange,
    SuperRange,
    DirectRange,
    StaticRange,
    InterfaceRange,
}

impl InvokeKind {
    pub fn from_opcode(op: u8) -> Option<InvokeKind> {
        use InvokeKind::*;
        Some(match op {
            0x6e => Virtual,
            0x6f => Super,
            0x70 => Direct,
            0x71 => Static,
            0x72 => Interface,
            0x74 => VirtualRange,
            0x75 => SuperRange,
            0x76 => DirectRange,
            0x77 => StaticRange,
            0x78 => InterfaceRange,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        use InvokeKind::*;
        match self {
            Virtual => "virtual",
            Super => "super",
            Direct => "direct",
            Static => "static",
            Interface => "interface",
            VirtualRange => "virtual/range",
            SuperRange => "super/range",
            DirectRange => "direct/range",
            StaticRange => "static/range",
            InterfaceRange => "interface/range",
        }
    }
}

impl fmt::Display for InvokeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InvocationRecord {
    pub caller_class: String,
    pub callee: MethodRef,
    pub invoke_kind: InvokeKind,
    /// Position of the invoke in code units from the start of the body.
    pub offset: u32,
}

/// A problem found while walking one method body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum WalkWarning {
    /// Walking of the body stopped; records before `offset` were kept.
    UnknownOpcode { opcode: u8, class: String, offset: u32 },
    /// An instruction or payload would cross the end of the body, or a
    /// declared payload is not at an instruction boundary. Walking stopped.
    MisalignedStream { class: String, offset: u32 },
    /// An invoke referenced a method id outside the table. Walking stopped.
    BadMethodIndex { class: String, offset: u32, index: u32 },
    /// invoke-custom has no direct method reference and is not recorded.
    SkippedCallSite { class: String, offset: u32 },
}

impl fmt::Display for WalkWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkWarning::UnknownOpcode { opcode, class, offset } => {
                write!(f, "unknown opcode {opcode:#04x} in {class} at {offset:#x}")
            }
            WalkWarning::MisalignedStream { class, offset } => {
                write!(f, "misaligned instruction stream in {class} at {offset:#x}")
            }
            WalkWarning::BadMethodIndex { class, offset, index } => {
                write!(f, "method index {index} out of bounds in {class} at {offset:#x}")
            }
            WalkWarning::SkippedCallSite { class, offset } => {
                write!(f, "skipped invoke-custom in {class} at {offset:#x}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub records: Vec<InvocationRecord>,
    pub warnings: Vec<WalkWarning>,
}

/// Width in code units of a non-payload instruction, or `None` for opcodes
/// that are unused in every supported DEX version.
pub fn instruction_width(op: u8) -> Option<usize> {
    Some(match op {
        0x00 | 0x01 | 0x04 | 0x07 => 1,
        0x02 | 0x05 | 0x08 => 2,
        0x03 | 0x06 | 0x09 => 3,
        0x0a..=0x12 => 1,
        0x13 => 2,
        0x14 => 3,
        0x15 | 0x16 => 2,
        0x17 => 3,
        0x18 => 5,
        0x19 | 0x1a => 2,
        0x1b => 3,
        0x1c => 2,
        0x1d | 0x1e => 1,
        0x1f | 0x20 => 2,
        0x21 => 1,
        0x22 | 0x23 => 2,
        0x24..=0x26 => 3,
        0x27 | 0x28 => 1,
        0x29 => 2,
        0x2a..=0x2c => 3,
        0x2d..=0x3d => 2,
        0x3e..=0x43 => return None,
        0x44..=0x6d => 2,
        0x6e..=0x72 => 3,
        0x73 => return None,
        0x74..=0x78 => 3,
        0x79 | 0x7a => return None,
        0x7b..=0x8f => 1,
        0x90..=0xaf => 2,
        0xb0..=0xcf => 1,
        0xd0..=0xe2 => 2,
        0xe3..=0xf9 => return None,
        0xfa | 0xfb => 4,
        0xfc | 0xfd => 3,
        0xfe | 0xff => 2,
    })
}

/// Total width of the payload starting at `pos`, given its ident unit.
fn payload_width(insns: &[u16], pos: usize) -> Option<usize> {
    let unit = |k: usize| insns.get(pos + k).copied();
    match unit(0)? {
        PACKED_SWITCH_IDENT => Some(4 + unit(1)? as usize * 2),
        SPARSE_SWITCH_IDENT => Some(2 + unit(1)? as usize * 4),
        FILL_ARRAY_IDENT => {
            let element_width = unit(1)? as usize;
            let size = unit(2)? as usize | (unit(3)? as usize) << 16;
            Some(4 + (size * element_width).div_ceil(2))
        }
        _ => None,
    }
}

fn is_payload_ident(unit: u16) -> bool {
    matches!(unit, PACKED_SWITCH_IDENT | SPARSE_SWITCH_IDENT | FILL_ARRAY_IDENT)
}

fn expected_ident(op: u8) -> u16 {
    match op {
        OP_PACKED_SWITCH => PACKED_SWITCH_IDENT,
        OP_SPARSE_SWITCH => SPARSE_SWITCH_IDENT,
        _ => FILL_ARRAY_IDENT,
    }
}

/// Walks one body, appending records and warnings. Returns the final
/// position in code units on success.
fn walk_body(
    dex: &DexFile,
    class: &str,
    insns: &[u16],
    out: &mut Extraction,
) -> Option<usize> {
    // Payload start offset -> expected ident, declared by anchors.
    let mut payloads: BTreeMap<usize, u16> = BTreeMap::new();
    let mut pos = 0usize;
    let misaligned = |offset: usize| WalkWarning::MisalignedStream {
        class: class.to_string(),
        offset: offset as u32,
    };

    while pos < insns.len() {
        let unit = insns[pos];

        if let Some(&ident) = payloads.get(&pos) {
            if unit != ident || !pos.is_multiple_of(2) {
                out.warnings.push(misaligned(pos));
                return None;
            }
        }
        if is_payload_ident(unit) {
            // Payloads are only legal at even offsets.
            let width = match payload_width(insns, pos) {
                Some(w) if pos.is_multiple_of(2) && pos + w <= insns.len() => w,
                _ => {
                    out.warnings.push(misaligned(pos));
                    return None;
                }
            };
            payloads.remove(&pos);
            pos += width;
            continue;
        }

        let op = (unit & 0xff) as u8;
        let Some(width) = instruction_width(op) else {
            out.warnings.push(WalkWarning::UnknownOpcode {
                opcode: op,
                class: class.to_string(),
                offset: pos as u32,
            });
            return None;
        };
        if pos + width > insns.len() {
            out.warnings.push(misaligned(pos));
            return None;
        }

        match op {
            OP_FILL_ARRAY_DATA | OP_PACKED_SWITCH | OP_SPARSE_SWITCH => {
                let rel = (insns[pos + 1] as u32 | (insns[pos + 2] as u32) << 16) as i32;
                let target = pos as i64 + rel as i64;
                if target < 0 || target >= insns.len() as i64 || target == pos as i64 {
                    out.warnings.push(misaligned(pos));
                    return None;
                }
                // Backward targets were already skipped by ident detection.
                if target > pos as i64 {
                    payloads.insert(target as usize, expected_ident(op));
                }
            }
            OP_INVOKE_CUSTOM | OP_INVOKE_CUSTOM_RANGE => {
                out.warnings.push(WalkWarning::SkippedCallSite {
                    class: class.to_string(),
                    offset: pos as u32,
                });
            }
            _ => {
                let kind = match op {
                    OP_INVOKE_POLYMORPHIC | OP_INVOKE_POLYMORPHIC_RANGE => Some(InvokeKind::Virtual),
                    _ => InvokeKind::from_opcode(op),
                };
                if let Some(kind) = kind {
                    let index = insns[pos + 1] as u32;
                    let Some(callee) = dex.method(index) else {
                        out.warnings.push(WalkWarning::BadMethodIndex {
                            class: class.to_string(),
                            offset: pos as u32,
                            index,
                        });
                        return None;
                    };
                    out.records.push(InvocationRecord {
                        caller_class: class.to_string(),
                        callee: callee.clone(),
                        invoke_kind: kind,
                        offset: pos as u32,
                    });
                }
            }
        }
        pos += width;
    }

    if let Some((&offset, _)) = payloads.iter().next() {
        // A declared payload that the walk stepped over.
        out.warnings.push(misaligned(offset));
        return None;
    }
    Some(pos)
}

/// Extracts every invocation from every method body, in class, method and
/// offset order. Bodies that fail to walk keep the records found before the
/// failure and add a warning.
pub fn extract_invocations(dex: &DexFile) -> Extraction {
    let mut out = Extraction::default();
    for class in &dex.classes {
        for method in &class.methods {
            if let Some(code) = &method.code {
                walk_body(dex, &class.descriptor, &code.insns, &mut out);
            }
        }
    }
    out
}
