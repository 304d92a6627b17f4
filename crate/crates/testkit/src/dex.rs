//! A small DEX assembler. Builds version-035 images from class specs and
//! reports, for every invoke it emitted, the record an extractor should find.

use std::collections::{BTreeMap, BTreeSet};

/// A method reference by name, as it appears in `method_ids`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSig {
    pub class: String,
    pub name: String,
    pub params: Vec<String>,
    pub ret: String,
}

impl MethodSig {
    pub fn new(class: &str, name: &str, params: &[&str], ret: &str) -> Self {
        MethodSig {
            class: class.to_string(),
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
            ret: ret.to_string(),
        }
    }

    pub fn descriptor(&self) -> String {
        format!("({}){}", self.params.concat(), self.ret)
    }

    fn shorty(&self) -> String {
        std::iter::once(&self.ret)
            .chain(&self.params)
            .map(|d| match d.as_bytes()[0] {
                b'L' | b'[' => 'L',
                c => c as char,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invoke {
    Virtual,
    Super,
    Direct,
    Static,
    Interface,
}

impl Invoke {
    pub const ALL: [Invoke; 5] = [Invoke::Virtual, Invoke::Super, Invoke::Direct, Invoke::Static, Invoke::Interface];

    fn opcode(self, range: bool) -> u8 {
        let base = match self {
            Invoke::Virtual => 0x6e,
            Invoke::Super => 0x6f,
            Invoke::Direct => 0x70,
            Invoke::Static => 0x71,
            Invoke::Interface => 0x72,
        };
        if range {
            base + 6
        } else {
            base
        }
    }

    /// Kind label an extractor reports for this invoke.
    pub fn label(self, range: bool) -> String {
        let base = match self {
            Invoke::Virtual => "virtual",
            Invoke::Super => "super",
            Invoke::Direct => "direct",
            Invoke::Static => "static",
            Invoke::Interface => "interface",
        };
        if range {
            format!("{base}/range")
        } else {
            base.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Insn {
    /// invoke-kind {regs} (35c), at most five registers.
    Invoke { kind: Invoke, method: MethodSig, regs: Vec<u8> },
    /// invoke-kind/range {first .. first+count-1} (3rc).
    InvokeRange { kind: Invoke, method: MethodSig, first: u16, count: u8 },
    /// invoke-polymorphic (45cc) or its range form (4rcc).
    InvokePolymorphic { method: MethodSig, proto: MethodSig, range: bool },
    /// invoke-custom (35c) or invoke-custom/range (3rc) on a call site index.
    InvokeCustom { call_site: u16, range: bool },
    PackedSwitch { reg: u8, first_key: i32, targets: Vec<i32> },
    SparseSwitch { reg: u8, keys: Vec<i32>, targets: Vec<i32> },
    FillArrayData { reg: u8, element_width: u16, data: Vec<u8> },
    /// Any other opcode with explicit operand units after the first.
    Op { opcode: u8, high: u8, operands: Vec<u16> },
    /// Raw code units, copied verbatim (for malformed streams).
    Raw(Vec<u16>),
}

impl Insn {
    pub fn op(opcode: u8) -> Insn {
        let units = format_units(opcode).expect("opcode has a format");
        Insn::Op {
            opcode,
            high: 0,
            operands: vec![0; units - 1],
        }
    }

    pub fn return_void() -> Insn {
        Insn::op(0x0e)
    }

    pub fn invoke(kind: Invoke, method: MethodSig, regs: &[u8]) -> Insn {
        Insn::Invoke {
            kind,
            method,
            regs: regs.to_vec(),
        }
    }

    pub fn invoke_range(kind: Invoke, method: MethodSig, first: u16, count: u8) -> Insn {
        Insn::InvokeRange {
            kind,
            method,
            first,
            count,
        }
    }
}

/// Instruction formats by opcode; the leading digit of a format id is its
/// size in code units.
const FORMATS: &[(u8, u8, &str)] = &[
    (0x00, 0x00, "10x"),
    (0x01, 0x01, "12x"),
    (0x02, 0x02, "22x"),
    (0x03, 0x03, "32x"),
    (0x04, 0x04, "12x"),
    (0x05, 0x05, "22x"),
    (0x06, 0x06, "32x"),
    (0x07, 0x07, "12x"),
    (0x08, 0x08, "22x"),
    (0x09, 0x09, "32x"),
    (0x0a, 0x0d, "11x"),
    (0x0e, 0x0e, "10x"),
    (0x0f, 0x11, "11x"),
    (0x12, 0x12, "11n"),
    (0x13, 0x13, "21s"),
    (0x14, 0x14, "31i"),
    (0x15, 0x15, "21h"),
    (0x16, 0x16, "21s"),
    (0x17, 0x17, "31i"),
    (0x18, 0x18, "51l"),
    (0x19, 0x19, "21h"),
    (0x1a, 0x1a, "21c"),
    (0x1b, 0x1b, "31c"),
    (0x1c, 0x1c, "21c"),
    (0x1d, 0x1e, "11x"),
    (0x1f, 0x1f, "21c"),
    (0x20, 0x20, "22c"),
    (0x21, 0x21, "12x"),
    (0x22, 0x22, "21c"),
    (0x23, 0x23, "22c"),
    (0x24, 0x24, "35c"),
    (0x25, 0x25, "3rc"),
    (0x26, 0x26, "31t"),
    (0x27, 0x27, "11x"),
    (0x28, 0x28, "10t"),
    (0x29, 0x29, "20t"),
    (0x2a, 0x2a, "30t"),
    (0x2b, 0x2c, "31t"),
    (0x2d, 0x31, "23x"),
    (0x32, 0x37, "22t"),
    (0x38, 0x3d, "21t"),
    (0x44, 0x51, "23x"),
    (0x52, 0x5f, "22c"),
    (0x60, 0x6d, "21c"),
    (0x6e, 0x72, "35c"),
    (0x74, 0x78, "3rc"),
    (0x7b, 0x8f, "12x"),
    (0x90, 0xaf, "23x"),
    (0xb0, 0xcf, "12x"),
    (0xd0, 0xd7, "22s"),
    (0xd8, 0xe2, "22b"),
    (0xfa, 0xfa, "45cc"),
    (0xfb, 0xfb, "4rcc"),
    (0xfc, 0xfc, "35c"),
    (0xfd, 0xfd, "3rc"),
    (0xfe, 0xff, "21c"),
];

pub fn format_of(opcode: u8) -> Option<&'static str> {
    FORMATS
        .iter()
        .find(|(lo, hi, _)| (*lo..=*hi).contains(&opcode))
        .map(|(_, _, f)| *f)
}

pub fn format_units(opcode: u8) -> Option<usize> {
    format_of(opcode).map(|f| (f.as_bytes()[0] - b'0') as usize)
}

/// Opcodes with no format in any supported version.
pub fn unused_opcodes() -> Vec<u8> {
    (0..=255u8).filter(|op| format_of(*op).is_none()).collect()
}

/// Opcodes that are safe as filler: fixed width, no payload, not an invoke.
pub fn filler_opcodes() -> Vec<u8> {
    (0..=255u8)
        .filter(|&op| {
            format_of(op).is_some()
                && !matches!(op, 0x00 | 0x26 | 0x2b | 0x2c | 0x6e..=0x78 | 0xfa..=0xfd)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub params: Vec<String>,
    pub ret: String,
    pub access_flags: u32,
    /// Direct (static, private, constructor) rather than virtual.
    pub direct: bool,
    pub body: Option<Vec<Insn>>,
    /// Emit payloads right after their anchor, jumped over by goto/32,
    /// instead of collecting them after the last instruction.
    pub inline_payloads: bool,
}

impl MethodSpec {
    pub fn new(name: &str, params: &[&str], ret: &str, body: Vec<Insn>) -> Self {
        MethodSpec {
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
            ret: ret.to_string(),
            access_flags: 0x0001,
            direct: false,
            body: Some(body),
            inline_payloads: false,
        }
    }

    pub fn abstract_method(name: &str, params: &[&str], ret: &str) -> Self {
        MethodSpec {
            access_flags: 0x0401,
            body: None,
            ..MethodSpec::new(name, params, ret, Vec::new())
        }
    }

    pub fn direct(mut self) -> Self {
        self.direct = true;
        self.access_flags = 0x0009;
        self
    }

    pub fn inline_payloads(mut self) -> Self {
        self.inline_payloads = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub descriptor: String,
    pub superclass: Option<String>,
    pub access_flags: u32,
    pub methods: Vec<MethodSpec>,
}

impl ClassSpec {
    pub fn new(descriptor: &str, methods: Vec<MethodSpec>) -> Self {
        ClassSpec {
            descriptor: descriptor.to_string(),
            superclass: Some("Ljava/lang/Object;".to_string()),
            access_flags: 0x0001,
            methods,
        }
    }
}

/// What an extractor should report for one emitted invoke.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpectedCall {
    pub caller_class: String,
    pub callee: MethodSig,
    pub kind: String,
    pub offset: u32,
}

#[derive(Debug, Clone)]
pub struct AssembledDex {
    pub bytes: Vec<u8>,
    pub expected: Vec<ExpectedCall>,
    /// invoke-custom sites, which carry no method reference.
    pub call_sites: usize,
    pub method_count: usize,
}

/// Narrower view of the id tables, for tests that corrupt indices.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    pub method_ids_off: u32,
    pub class_defs_off: u32,
    pub method_index: BTreeMap<MethodSig, u16>,
}

#[derive(Debug, Clone)]
pub struct DexBuilder {
    pub version: String,
    pub classes: Vec<ClassSpec>,
}

impl Default for DexBuilder {
    fn default() -> Self {
        DexBuilder {
            version: "035".to_string(),
            classes: Vec::new(),
        }
    }
}

fn utf16_key(s: &str) -> Vec<u16> {
    s.encode_utf16().collect()
}

/// Modified UTF-8: NUL as two bytes, supplementary characters as two
/// three-byte surrogates.
pub fn encode_mutf8(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        let u = unit as u32;
        match u {
            0x01..=0x7f => out.push(u as u8),
            0x00 | 0x80..=0x7ff => {
                out.push(0xc0 | (u >> 6) as u8);
                out.push(0x80 | (u & 0x3f) as u8);
            }
            _ => {
                out.push(0xe0 | (u >> 12) as u8);
                out.push(0x80 | ((u >> 6) & 0x3f) as u8);
                out.push(0x80 | (u & 0x3f) as u8);
            }
        }
    }
    out
}

fn uleb(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn align4(out: &mut Vec<u8>) {
    while !out.len().is_multiple_of(4) {
        out.push(0);
    }
}

fn put_u32(out: &mut [u8], at: usize, v: u32) {
    out[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn adler32(data: &[u8]) -> u32 {
    let (mut a, mut b) = (1u32, 0u32);
    for chunk in data.chunks(5552) {
        for &x in chunk {
            a += x as u32;
            b += a;
        }
        a %= 65521;
        b %= 65521;
    }
    (b << 16) | a
}

struct Tables {
    strings: Vec<String>,
    types: Vec<String>,
    protos: Vec<(String, Vec<String>)>,
    methods: Vec<MethodSig>,
}

impl Tables {
    fn string(&self, s: &str) -> u32 {
        self.strings
            .binary_search_by(|x| utf16_key(x).cmp(&utf16_key(s)))
            .expect("string interned") as u32
    }

    fn ty(&self, d: &str) -> u32 {
        self.types.iter().position(|t| t == d).expect("type interned") as u32
    }

    fn proto(&self, m: &MethodSig) -> u16 {
        self.protos
            .iter()
            .position(|(r, p)| *r == m.ret && *p == m.params)
            .expect("proto interned") as u16
    }

    fn method(&self, m: &MethodSig) -> u16 {
        self.methods.iter().position(|x| x == m).expect("method interned") as u16
    }
}

fn referenced_sigs(insn: &Insn) -> Vec<&MethodSig> {
    match insn {
        Insn::Invoke { method, .. } | Insn::InvokeRange { method, .. } => vec![method],
        Insn::InvokePolymorphic { method, proto, .. } => vec![method, proto],
        _ => Vec::new(),
    }
}

impl DexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(mut self, v: &str) -> Self {
        self.version = v.to_string();
        self
    }

    pub fn class(mut self, c: ClassSpec) -> Self {
        self.classes.push(c);
        self
    }

    fn defined_sigs(&self) -> Vec<(usize, MethodSig)> {
        let mut out = Vec::new();
        for (ci, c) in self.classes.iter().enumerate() {
            for m in &c.methods {
                out.push((
                    ci,
                    MethodSig {
                        class: c.descriptor.clone(),
                        name: m.name.clone(),
                        params: m.params.clone(),
                        ret: m.ret.clone(),
                    },
                ));
            }
        }
        out
    }

    fn tables(&self) -> Tables {
        let mut method_set: BTreeSet<MethodSig> = BTreeSet::new();
        let mut proto_only: Vec<MethodSig> = Vec::new();
        for (_, sig) in self.defined_sigs() {
            method_set.insert(sig);
        }
        for c in &self.classes {
            for m in &c.methods {
                for insn in m.body.iter().flatten() {
                    match insn {
                        Insn::InvokePolymorphic { method, proto, .. } => {
                            method_set.insert(method.clone());
                            proto_only.push(proto.clone());
                        }
                        other => method_set.extend(referenced_sigs(other).into_iter().cloned()),
                    }
                }
            }
        }

        let mut strings: BTreeSet<String> = BTreeSet::new();
        let mut types: BTreeSet<String> = BTreeSet::new();
        for c in &self.classes {
            types.insert(c.descriptor.clone());
            types.extend(c.superclass.clone());
        }
        for m in method_set.iter().chain(&proto_only) {
            types.insert(m.class.clone());
            types.insert(m.ret.clone());
            types.extend(m.params.iter().cloned());
            strings.insert(m.name.clone());
            strings.insert(m.shorty());
        }
        strings.extend(types.iter().cloned());

        let mut strings: Vec<String> = strings.into_iter().collect();
        strings.sort_by_key(|s| utf16_key(s));
        strings.dedup();
        let string_pos = |s: &str| {
            strings
                .binary_search_by(|x| utf16_key(x).cmp(&utf16_key(s)))
                .unwrap()
        };
        let mut types: Vec<String> = types.into_iter().collect();
        types.sort_by_key(|t| string_pos(t));

        let type_pos = |t: &str| types.iter().position(|x| x == t).unwrap();
        let mut protos: Vec<(String, Vec<String>)> = method_set
            .iter()
            .chain(&proto_only)
            .map(|m| (m.ret.clone(), m.params.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        protos.sort_by_key(|(r, p)| (type_pos(r), p.iter().map(|x| type_pos(x)).collect::<Vec<_>>()));

        let proto_pos = |m: &MethodSig| protos.iter().position(|(r, p)| *r == m.ret && *p == m.params).unwrap();
        let mut methods: Vec<MethodSig> = method_set.into_iter().collect();
        methods.sort_by_key(|m| (type_pos(&m.class), string_pos(&m.name), proto_pos(m)));

        Tables {
            strings,
            types,
            protos,
            methods,
        }
    }

    pub fn build(&self) -> AssembledDex {
        self.build_with_layout().0
    }

    pub fn build_with_layout(&self) -> (AssembledDex, Layout) {
        let t = self.tables();
        assert!(t.types.len() <= 0xffff && t.methods.len() <= 0xffff && t.protos.len() <= 0xffff);

        let n_str = t.strings.len();
        let n_ty = t.types.len();
        let n_pr = t.protos.len();
        let n_me = t.methods.len();
        let n_cl = self.classes.len();

        let string_ids_off = 0x70;
        let type_ids_off = string_ids_off + 4 * n_str;
        let proto_ids_off = type_ids_off + 4 * n_ty;
        let method_ids_off = proto_ids_off + 12 * n_pr;
        let class_defs_off = method_ids_off + 8 * n_me;
        let data_off = class_defs_off + 32 * n_cl;

        let mut out = vec![0u8; data_off];
        let mut expected = Vec::new();
        let mut call_sites = 0;

        // type_lists for protos
        let mut proto_params_off = vec![0u32; n_pr];
        for (i, (_, params)) in t.protos.iter().enumerate() {
            if params.is_empty() {
                continue;
            }
            align4(&mut out);
            proto_params_off[i] = out.len() as u32;
            out.extend_from_slice(&(params.len() as u32).to_le_bytes());
            for p in params {
                out.extend_from_slice(&(t.ty(p) as u16).to_le_bytes());
            }
        }

        // string data
        let mut string_data_off = vec![0u32; n_str];
        for (i, s) in t.strings.iter().enumerate() {
            string_data_off[i] = out.len() as u32;
            uleb(&mut out, s.encode_utf16().count() as u32);
            out.extend(encode_mutf8(s));
            out.push(0);
        }

        // code items
        let mut code_off: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (ci, c) in self.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                let Some(body) = &m.body else { continue };
                let (insns, calls, customs) = encode_body(&t, &c.descriptor, body, m.inline_payloads);
                expected.extend(calls);
                call_sites += customs;
                align4(&mut out);
                code_off.insert((ci, mi), out.len() as u32);
                let ins = m.params.iter().map(|p| if p == "J" || p == "D" { 2 } else { 1 }).sum::<u16>()
                    + u16::from(!m.direct);
                let registers = ins.max(16) + 16;
                for v in [registers, ins, 5, 0] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&(insns.len() as u32).to_le_bytes());
                for u in &insns {
                    out.extend_from_slice(&u.to_le_bytes());
                }
            }
        }

        // class data
        let mut class_data_off = vec![0u32; n_cl];
        for (ci, c) in self.classes.iter().enumerate() {
            if c.methods.is_empty() {
                continue;
            }
            class_data_off[ci] = out.len() as u32;
            let mut lists: [Vec<(u16, u32, u32)>; 2] = [Vec::new(), Vec::new()];
            for (mi, m) in c.methods.iter().enumerate() {
                let sig = MethodSig {
                    class: c.descriptor.clone(),
                    name: m.name.clone(),
                    params: m.params.clone(),
                    ret: m.ret.clone(),
                };
                let entry = (
                    t.method(&sig),
                    m.access_flags,
                    code_off.get(&(ci, mi)).copied().unwrap_or(0),
                );
                lists[usize::from(!m.direct)].push(entry);
            }
            uleb(&mut out, 0);
            uleb(&mut out, 0);
            uleb(&mut out, lists[0].len() as u32);
            uleb(&mut out, lists[1].len() as u32);
            for list in &mut lists {
                list.sort();
                let mut prev = 0u32;
                for (k, (idx, flags, code)) in list.iter().enumerate() {
                    let idx = *idx as u32;
                    uleb(&mut out, if k == 0 { idx } else { idx - prev });
                    prev = idx;
                    uleb(&mut out, *flags);
                    uleb(&mut out, *code);
                }
            }
        }

        // map list
        align4(&mut out);
        let map_off = out.len();
        let mut items: Vec<(u16, u32, u32)> = vec![(0x0000, 1, 0)];
        for (kind, n, off) in [
            (0x0001u16, n_str, string_ids_off),
            (0x0002, n_ty, type_ids_off),
            (0x0003, n_pr, proto_ids_off),
            (0x0005, n_me, method_ids_off),
            (0x0006, n_cl, class_defs_off),
        ] {
            if n > 0 {
                items.push((kind, n as u32, off as u32));
            }
        }
        items.push((0x1000, 1, map_off as u32));
        out.extend_from_slice(&(items.len() as u32).to_le_bytes());
        for (kind, n, off) in items {
            out.extend_from_slice(&kind.to_le_bytes());
            out.extend_from_slice(&0u16.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(&off.to_le_bytes());
        }

        // id tables
        for (i, &data_off) in string_data_off.iter().enumerate().take(n_str) {
            put_u32(&mut out, string_ids_off + 4 * i, data_off);
        }
        for (i, ty) in t.types.iter().enumerate() {
            put_u32(&mut out, type_ids_off + 4 * i, t.string(ty));
        }
        for (i, (ret, params)) in t.protos.iter().enumerate() {
            let base = proto_ids_off + 12 * i;
            let sig = MethodSig {
                class: String::new(),
                name: String::new(),
                params: params.clone(),
                ret: ret.clone(),
            };
            put_u32(&mut out, base, t.string(&sig.shorty()));
            put_u32(&mut out, base + 4, t.ty(ret));
            put_u32(&mut out, base + 8, proto_params_off[i]);
        }
        for (i, m) in t.methods.iter().enumerate() {
            let base = method_ids_off + 8 * i;
            out[base..base + 2].copy_from_slice(&(t.ty(&m.class) as u16).to_le_bytes());
            out[base + 2..base + 4].copy_from_slice(&t.proto(m).to_le_bytes());
            put_u32(&mut out, base + 4, t.string(&m.name));
        }
        for (i, c) in self.classes.iter().enumerate() {
            let base = class_defs_off + 32 * i;
            put_u32(&mut out, base, t.ty(&c.descriptor));
            put_u32(&mut out, base + 4, c.access_flags);
            put_u32(&mut out, base + 8, c.superclass.as_deref().map_or(0xffff_ffff, |s| t.ty(s)));
            put_u32(&mut out, base + 12, 0);
            put_u32(&mut out, base + 16, 0xffff_ffff);
            put_u32(&mut out, base + 24, class_data_off[i]);
        }

        // header
        out[..8].copy_from_slice(format!("dex\n{}\0", self.version).as_bytes());
        let file_size = out.len() as u32;
        let header = [
            (0x20, file_size),
            (0x24, 0x70),
            (0x28, 0x1234_5678),
            (0x34, map_off as u32),
            (0x38, n_str as u32),
            (0x3c, if n_str > 0 { string_ids_off as u32 } else { 0 }),
            (0x40, n_ty as u32),
            (0x44, if n_ty > 0 { type_ids_off as u32 } else { 0 }),
            (0x48, n_pr as u32),
            (0x4c, if n_pr > 0 { proto_ids_off as u32 } else { 0 }),
            (0x58, n_me as u32),
            (0x5c, if n_me > 0 { method_ids_off as u32 } else { 0 }),
            (0x60, n_cl as u32),
            (0x64, if n_cl > 0 { class_defs_off as u32 } else { 0 }),
            (0x68, file_size - data_off as u32),
            (0x6c, data_off as u32),
        ];
        for (at, v) in header {
            put_u32(&mut out, at, v);
        }
        let checksum = adler32(&out[12..]);
        put_u32(&mut out, 8, checksum);

        let layout = Layout {
            method_ids_off: method_ids_off as u32,
            class_defs_off: class_defs_off as u32,
            method_index: t.methods.iter().enumerate().map(|(i, m)| (m.clone(), i as u16)).collect(),
        };
        (
            AssembledDex {
                bytes: out,
                expected,
                call_sites,
                method_count: self.classes.iter().map(|c| c.methods.len()).sum(),
            },
            layout,
        )
    }
}

fn payload_units(insn: &Insn) -> Option<Vec<u16>> {
    let words = |v: i32| [(v as u32 & 0xffff) as u16, (v as u32 >> 16) as u16];
    match insn {
        Insn::PackedSwitch { first_key, targets, .. } => {
            let mut u = vec![0x0100, targets.len() as u16];
            u.extend(words(*first_key));
            for t in targets {
                u.extend(words(*t));
            }
            Some(u)
        }
        Insn::SparseSwitch { keys, targets, .. } => {
            assert_eq!(keys.len(), targets.len());
            let mut u = vec![0x0200, keys.len() as u16];
            for k in keys {
                u.extend(words(*k));
            }
            for t in targets {
                u.extend(words(*t));
            }
            Some(u)
        }
        Insn::FillArrayData { element_width, data, .. } => {
            let w = *element_width as usize;
            assert!(w > 0 && data.len() % w == 0);
            let n = (data.len() / w) as u32;
            let mut u = vec![0x0300, *element_width, (n & 0xffff) as u16, (n >> 16) as u16];
            let mut bytes = data.clone();
            if bytes.len() % 2 == 1 {
                bytes.push(0);
            }
            u.extend(bytes.chunks(2).map(|c| u16::from_le_bytes([c[0], c[1]])));
            Some(u)
        }
        _ => None,
    }
}

fn anchor_opcode(insn: &Insn) -> (u8, u8) {
    match insn {
        Insn::PackedSwitch { reg, .. } => (0x2b, *reg),
        Insn::SparseSwitch { reg, .. } => (0x2c, *reg),
        Insn::FillArrayData { reg, .. } => (0x26, *reg),
        _ => unreachable!(),
    }
}

fn encode_body(t: &Tables, class: &str, body: &[Insn], inline: bool) -> (Vec<u16>, Vec<ExpectedCall>, usize) {
    let mut units: Vec<u16> = Vec::new();
    let mut calls = Vec::new();
    let mut customs = 0;
    // (anchor position, payload units)
    let mut deferred: Vec<(usize, Vec<u16>)> = Vec::new();

    fn patch_anchor(units: &mut [u16], anchor: usize, target: usize) {
        let rel = (target as i64 - anchor as i64) as i32 as u32;
        units[anchor + 1] = (rel & 0xffff) as u16;
        units[anchor + 2] = (rel >> 16) as u16;
    }

    for insn in body {
        let pos = units.len();
        match insn {
            Insn::Invoke { kind, method, regs } => {
                assert!(regs.len() <= 5);
                let mut r = [0u8; 5];
                r[..regs.len()].copy_from_slice(regs);
                units.push(kind.opcode(false) as u16 | (regs.len() as u16) << 12 | (r[4] as u16 & 0xf) << 8);
                units.push(t.method(method));
                units.push(
                    (r[0] as u16 & 0xf) | (r[1] as u16 & 0xf) << 4 | (r[2] as u16 & 0xf) << 8 | (r[3] as u16 & 0xf) << 12,
                );
                calls.push(ExpectedCall {
                    caller_class: class.to_string(),
                    callee: method.clone(),
                    kind: kind.label(false),
                    offset: pos as u32,
                });
            }
            Insn::InvokeRange { kind, method, first, count } => {
                units.push(kind.opcode(true) as u16 | (*count as u16) << 8);
                units.push(t.method(method));
                units.push(*first);
                calls.push(ExpectedCall {
                    caller_class: class.to_string(),
                    callee: method.clone(),
                    kind: kind.label(true),
                    offset: pos as u32,
                });
            }
            Insn::InvokePolymorphic { method, proto, range } => {
                if *range {
                    units.extend([0xfb | 3 << 8, t.method(method), 0, t.proto(proto)]);
                } else {
                    units.extend([0xfa | 2 << 12, t.method(method), 0x0010, t.proto(proto)]);
                }
                calls.push(ExpectedCall {
                    caller_class: class.to_string(),
                    callee: method.clone(),
                    kind: "virtual".to_string(),
                    offset: pos as u32,
                });
            }
            Insn::InvokeCustom { call_site, range } => {
                if *range {
                    units.extend([0xfd | 1 << 8, *call_site, 0]);
                } else {
                    units.extend([0xfc | 1 << 12, *call_site, 0]);
                }
                customs += 1;
            }
            Insn::PackedSwitch { .. } | Insn::SparseSwitch { .. } | Insn::FillArrayData { .. } => {
                let (op, reg) = anchor_opcode(insn);
                units.extend([op as u16 | (reg as u16) << 8, 0, 0]);
                let payload = payload_units(insn).unwrap();
                if inline {
                    let goto = units.len();
                    units.extend([0x2a, 0, 0]);
                    if units.len() % 2 == 1 {
                        units.push(0);
                    }
                    let target = units.len();
                    patch_anchor(&mut units, pos, target);
                    units.extend(payload);
                    let after = units.len();
                    patch_anchor(&mut units, goto, after);
                } else {
                    deferred.push((pos, payload));
                }
            }
            Insn::Op { opcode, high, operands } => {
                assert_eq!(Some(operands.len() + 1), format_units(*opcode), "operand count for {opcode:#04x}");
                units.push(*opcode as u16 | (*high as u16) << 8);
                units.extend(operands);
            }
            Insn::Raw(raw) => units.extend(raw),
        }
    }
    for (anchor, payload) in deferred {
        if units.len() % 2 == 1 {
            units.push(0);
        }
        let target = units.len();
        patch_anchor(&mut units, anchor, target);
        units.extend(payload);
    }
    (units, calls, customs)
}

/// A fixed suite of images covering every invoke opcode, every payload
/// pseudo-instruction in both placements, every other defined opcode, and
/// non-ASCII names.
pub fn fixture_suite() -> Vec<DexBuilder> {
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    let mut rng = crate::seeded(0x00de_c0de);
    let apis = [
        MethodSig::new("Landroid/location/LocationManager;", "getLastKnownLocation", &["Ljava/lang/String;"], "Landroid/location/Location;"),
        MethodSig::new("Landroid/telephony/TelephonyManager;", "getDeviceId", &[], "Ljava/lang/String;"),
        MethodSig::new("Landroid/hardware/Camera;", "open", &["I"], "Landroid/hardware/Camera;"),
        MethodSig::new("Ljava/lang/Object;", "<init>", &[], "V"),
        MethodSig::new("Ljava/util/List;", "get", &["I"], "Ljava/lang/Object;"),
        MethodSig::new("Lcom/ex/Util;", "mix", &["J", "D", "[I"], "[Ljava/lang/String;"),
    ];
    let handle = MethodSig::new("Ljava/lang/invoke/MethodHandle;", "invokeExact", &["[Ljava/lang/Object;"], "Ljava/lang/Object;");
    let handle2 = MethodSig::new("Ljava/lang/invoke/MethodHandle;", "invoke", &["[Ljava/lang/Object;"], "Ljava/lang/Object;");
    let call_proto = MethodSig::new("", "", &["Ljava/lang/String;", "I"], "V");

    let payload = |rng: &mut crate::Rng, k: usize| -> Insn {
        match k % 3 {
            0 => Insn::PackedSwitch {
                reg: 1,
                first_key: rng.gen_range(-5..5),
                targets: (0..rng.gen_range(0..5)).map(|_| rng.gen_range(-20..20)).collect(),
            },
            1 => {
                let n = rng.gen_range(0..5);
                Insn::SparseSwitch {
                    reg: 2,
                    keys: (0..n).map(|i| i * 7 - 3).collect(),
                    targets: (0..n).map(|_| rng.gen_range(-20..20)).collect(),
                }
            }
            _ => {
                let width = *[1u16, 2, 4, 8].choose(rng).unwrap();
                let count = rng.gen_range(0..7) as usize;
                Insn::FillArrayData {
                    reg: 3,
                    element_width: width,
                    data: (0..count * width as usize).map(|_| rng.gen()).collect(),
                }
            }
        }
    };
    // Operand units drawn to include payload idents, which must not confuse
    // a walker that skips operands by width.
    let filler = |rng: &mut crate::Rng, op: u8| -> Insn {
        let n = format_units(op).unwrap() - 1;
        Insn::Op {
            opcode: op,
            high: rng.gen(),
            operands: (0..n)
                .map(|_| *[0x0100u16, 0x0200, 0x0300, 0x006e, 0xffff, rng.gen()].choose(rng).unwrap())
                .collect(),
        }
    };

    let mut builders = Vec::new();

    // 1: every invoke kind, both encodings, against every api.
    let mut methods = Vec::new();
    for (i, kind) in Invoke::ALL.iter().enumerate() {
        for range in [false, true] {
            let mut body = Vec::new();
            for api in &apis {
                if range {
                    body.push(Insn::invoke_range(*kind, api.clone(), rng.gen_range(0..300), rng.gen_range(0..6)));
                } else {
                    let n = rng.gen_range(0..=5);
                    let regs: Vec<u8> = (0..n).map(|_| rng.gen_range(0..16)).collect();
                    body.push(Insn::invoke(*kind, api.clone(), &regs));
                }
                body.push(Insn::op(0x0c));
            }
            body.push(Insn::return_void());
            let name = format!("call{i}{}", if range { "r" } else { "" });
            methods.push(MethodSpec::new(&name, &[], "V", body));
        }
    }
    methods.push(MethodSpec::new("<init>", &[], "V", vec![Insn::invoke(Invoke::Direct, apis[3].clone(), &[0]), Insn::return_void()]).direct());
    builders.push(DexBuilder::new().class(ClassSpec::new("Lcom/ex/Invokes;", methods)));

    // 2: polymorphic and custom call sites, in a 038 image.
    let mut methods = Vec::new();
    for k in 0..4 {
        let body = vec![
            Insn::InvokePolymorphic { method: handle.clone(), proto: call_proto.clone(), range: k % 2 == 1 },
            Insn::InvokeCustom { call_site: k, range: k >= 2 },
            Insn::InvokePolymorphic { method: handle2.clone(), proto: call_proto.clone(), range: k % 2 == 0 },
            Insn::op(0xfe),
            Insn::op(0xff),
            Insn::return_void(),
        ];
        methods.push(MethodSpec::new(&format!("poly{k}"), &["I"], "V", body));
    }
    builders.push(DexBuilder::new().version("038").class(ClassSpec::new("Lcom/ex/Poly;", methods)));

    // 3: payloads, trailing and inline, with invokes around them.
    let mut methods = Vec::new();
    for k in 0..18 {
        let mut body = Vec::new();
        for j in 0..rng.gen_range(1..4) {
            if rng.gen_bool(0.5) {
                body.push(Insn::op(0x12));
            }
            body.push(payload(&mut rng, k + j));
            let api = apis.choose(&mut rng).unwrap().clone();
            body.push(Insn::invoke(*Invoke::ALL.choose(&mut rng).unwrap(), api, &[1]));
        }
        body.push(Insn::op(0x0f));
        let mut m = MethodSpec::new(&format!("sw{k}"), &["I"], "I", body);
        if k % 2 == 1 {
            m = m.inline_payloads();
        }
        methods.push(m);
    }
    builders.push(DexBuilder::new().version("037").class(ClassSpec::new("Lcom/ex/Payloads;", methods)));

    // 4: every other defined opcode as filler between invokes.
    let fillers = filler_opcodes();
    let mut methods = Vec::new();
    for (k, chunk) in fillers.chunks(24).enumerate() {
        let mut body = Vec::new();
        for &op in chunk {
            body.push(filler(&mut rng, op));
            if rng.gen_bool(0.3) {
                let api = apis.choose(&mut rng).unwrap().clone();
                body.push(Insn::invoke_range(Invoke::Static, api, 4, 3));
            }
        }
        body.push(Insn::return_void());
        methods.push(MethodSpec::new(&format!("ops{k}"), &["J", "Z"], "V", body).direct());
    }
    methods.push(MethodSpec::abstract_method("todo", &[], "V"));
    builders.push(DexBuilder::new().version("039").class(ClassSpec::new("Lcom/ex/Ops;", methods)));

    // 5: non-ASCII names, self calls, empty bodies, a class without methods.
    let local = MethodSig::new("Lcom/ex/\u{dc}n\u{ef}c\u{f6}d\u{e9};", "na\u{ef}ve\u{1F600}", &["Ljava/lang/String;"], "V");
    let methods = vec![
        MethodSpec::new(&local.name, &["Ljava/lang/String;"], "V", vec![Insn::return_void()]),
        MethodSpec::new("caller", &[], "V", vec![
            Insn::invoke(Invoke::Virtual, local.clone(), &[0, 1]),
            Insn::invoke_range(Invoke::Virtual, local.clone(), 0, 2),
            Insn::return_void(),
        ]),
        MethodSpec::new("empty", &[], "V", vec![]),
    ];
    builders.push(
        DexBuilder::new()
            .class(ClassSpec::new(&local.class, methods))
            .class(ClassSpec::new("Lcom/ex/Marker;", vec![])),
    );

    // 6: bulk random methods across several classes.
    let mut b = DexBuilder::new();
    for c in 0..4 {
        let mut methods = Vec::new();
        for m in 0..5 {
            let mut body = Vec::new();
            for _ in 0..rng.gen_range(0..8) {
                match rng.gen_range(0..4) {
                    0 => {
                        let k = rng.gen_range(0..3);
                        body.push(payload(&mut rng, k))
                    }
                    1 => {
                        let op = *fillers.choose(&mut rng).unwrap();
                        body.push(filler(&mut rng, op))
                    }
                    2 => body.push(Insn::invoke_range(*Invoke::ALL.choose(&mut rng).unwrap(), apis.choose(&mut rng).unwrap().clone(), 0, 1)),
                    _ => body.push(Insn::invoke(*Invoke::ALL.choose(&mut rng).unwrap(), apis.choose(&mut rng).unwrap().clone(), &[2, 3])),
                }
            }
            body.push(Insn::return_void());
            let mut spec = MethodSpec::new(&format!("m{m}"), &[], "V", body);
            if m % 2 == 0 {
                spec = spec.inline_payloads();
            }
            methods.push(spec);
        }
        b = b.class(ClassSpec::new(&format!("Lorg/bulk/K{c};"), methods));
    }
    builders.push(b);
    builders
}
