//! Manifest fixtures: one element tree rendered as plaintext XML or packed
//! as binary AXML.

use std::collections::BTreeMap;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Framework resource ids for the attributes fixtures use.
pub fn attr_resource_id(name: &str) -> Option<u32> {
    Some(match name {
        "name" => 0x0101_0003,
        "versionCode" => 0x0101_021b,
        "versionName" => 0x0101_021c,
        "minSdkVersion" => 0x0101_020c,
        "targetSdkVersion" => 0x0101_0270,
        "maxSdkVersion" => 0x0101_0271,
        "label" => 0x0101_0001,
        "icon" => 0x0101_0002,
        "exported" => 0x0101_0010,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i32),
    Bool(bool),
    /// Resource reference; `name` is the plaintext spelling, e.g. `@string/x`.
    Ref { id: u32, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub android: bool,
    pub name: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attribute>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn attr(mut self, name: &str, value: Value) -> Self {
        self.attrs.push(Attribute {
            android: false,
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn android(mut self, name: &str, value: Value) -> Self {
        self.attrs.push(Attribute {
            android: true,
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn child(mut self, c: Element) -> Self {
        self.children.push(c);
        self
    }
}

pub fn text(s: &str) -> Value {
    Value::Str(s.to_string())
}

/// A typical manifest with the given permissions and sdk levels.
pub fn manifest(package: &str, permissions: &[&str], target_sdk: Option<i32>, min_sdk: Option<i32>) -> Element {
    let mut root = Element::new("manifest")
        .attr("package", text(package))
        .android("versionCode", Value::Int(1))
        .android("versionName", text("1.0"));
    if target_sdk.is_some() || min_sdk.is_some() {
        let mut sdk = Element::new("uses-sdk");
        if let Some(m) = min_sdk {
            sdk = sdk.android("minSdkVersion", Value::Int(m));
        }
        if let Some(t) = target_sdk {
            sdk = sdk.android("targetSdkVersion", Value::Int(t));
        }
        root = root.child(sdk);
    }
    for p in permissions {
        root = root.child(Element::new("uses-permission").android("name", text(p)));
    }
    root.child(
        Element::new("application")
            .android("label", Value::Ref {
                id: 0x7f0a_0000,
                name: "@string/app_name".into(),
            })
            .child(Element::new("activity").android("name", text(".Main")).android("exported", Value::Bool(true))),
    )
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PlainOptions {
    /// Prefix bound to the android namespace.
    pub prefix: String,
    pub declaration: bool,
    pub indent: bool,
}

impl Default for PlainOptions {
    fn default() -> Self {
        PlainOptions {
            prefix: "android".into(),
            declaration: true,
            indent: true,
        }
    }
}

pub fn render_plain(root: &Element, opts: &PlainOptions) -> String {
    let mut out = String::new();
    if opts.declaration {
        out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    }
    render_element(root, opts, 0, &mut out);
    out
}

fn render_element(e: &Element, opts: &PlainOptions, depth: usize, out: &mut String) {
    let pad = if opts.indent { "    ".repeat(depth) } else { String::new() };
    out.push_str(&pad);
    out.push('<');
    out.push_str(&e.name);
    if depth == 0 {
        out.push_str(&format!(" xmlns:{}=\"{}\"", opts.prefix, ANDROID_NS));
    }
    for a in &e.attrs {
        let value = match &a.value {
            Value::Str(s) => escape(s),
            Value::Int(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Ref { name, .. } => escape(name),
        };
        if a.android {
            out.push_str(&format!(" {}:{}=\"{}\"", opts.prefix, a.name, value));
        } else {
            out.push_str(&format!(" {}=\"{}\"", a.name, value));
        }
    }
    if e.children.is_empty() {
        out.push_str(" />\n");
        return;
    }
    out.push_str(">\n");
    for c in &e.children {
        render_element(c, opts, depth + 1, out);
    }
    out.push_str(&pad);
    out.push_str(&format!("</{}>\n", e.name));
}

#[derive(Debug, Clone, Default)]
pub struct BinaryOptions {
    pub utf8: bool,
    /// Blank the name strings of attributes that have a resource id, as
    /// obfuscators do; readers must fall back to the resource map.
    pub strip_attr_names: bool,
    /// Emit integers as hex-typed values.
    pub hex_ints: bool,
}

struct Pool {
    strings: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Pool {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

fn collect_attr_names(e: &Element, out: &mut Vec<String>) {
    for a in &e.attrs {
        if a.android && attr_resource_id(&a.name).is_some() && !out.contains(&a.name) {
            out.push(a.name.clone());
        }
    }
    for c in &e.children {
        collect_attr_names(c, out);
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn string_pool_chunk(strings: &[String], utf8: bool) -> Vec<u8> {
    let mut data = Vec::new();
    let mut offsets = Vec::new();
    for s in strings {
        offsets.push(data.len() as u32);
        if utf8 {
            let chars = s.encode_utf16().count();
            let bytes = s.as_bytes();
            for n in [chars, bytes.len()] {
                if n > 0x7f {
                    data.push(0x80 | (n >> 8) as u8);
                    data.push(n as u8);
                } else {
                    data.push(n as u8);
                }
            }
            data.extend_from_slice(bytes);
            data.push(0);
        } else {
            let units: Vec<u16> = s.encode_utf16().collect();
            let n = units.len();
            if n > 0x7fff {
                push_u16(&mut data, 0x8000 | (n >> 16) as u16);
                push_u16(&mut data, n as u16);
            } else {
                push_u16(&mut data, n as u16);
            }
            for u in units {
                push_u16(&mut data, u);
            }
            push_u16(&mut data, 0);
        }
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }
    let header = 0x1c;
    let strings_start = header + 4 * strings.len();
    let mut out = Vec::new();
    push_u16(&mut out, 0x0001);
    push_u16(&mut out, header as u16);
    push_u32(&mut out, (strings_start + data.len()) as u32);
    push_u32(&mut out, strings.len() as u32);
    push_u32(&mut out, 0);
    push_u32(&mut out, if utf8 { 0x100 } else { 0 });
    push_u32(&mut out, strings_start as u32);
    push_u32(&mut out, 0);
    for o in offsets {
        push_u32(&mut out, o);
    }
    out.extend(data);
    out
}

const NONE: u32 = 0xffff_ffff;

pub fn pack_binary(root: &Element, opts: &BinaryOptions) -> Vec<u8> {
    let mut pool = Pool {
        strings: Vec::new(),
        index: BTreeMap::new(),
    };
    // Attribute names with resource ids come first, parallel to the map.
    let mut attr_names = Vec::new();
    collect_attr_names(root, &mut attr_names);
    let mut res_ids = Vec::new();
    for (i, name) in attr_names.iter().enumerate() {
        let spelled = if opts.strip_attr_names {
            // Distinct blanks so pool entries stay parallel to the map.
            " ".repeat(i)
        } else {
            name.clone()
        };
        // Kept out of the lookup map: other strings with the same text get
        // their own entries outside the resource-mapped range.
        pool.strings.push(spelled);
        pool.index.insert(format!("\u{0}attr:{name}"), i as u32);
        res_ids.push(attr_resource_id(name).unwrap());
    }
    let prefix = pool.intern("android");
    let uri = pool.intern(ANDROID_NS);

    let mut body = Vec::new();
    let ns_chunk = |kind: u16, out: &mut Vec<u8>| {
        push_u16(out, kind);
        push_u16(out, 0x10);
        push_u32(out, 0x18);
        push_u32(out, 1);
        push_u32(out, NONE);
        push_u32(out, prefix);
        push_u32(out, uri);
    };
    ns_chunk(0x0100, &mut body);
    emit_element(root, opts, &mut pool, uri, &mut body, 1);
    ns_chunk(0x0101, &mut body);

    let mut out = Vec::new();
    push_u16(&mut out, 0x0003);
    push_u16(&mut out, 8);
    push_u32(&mut out, 0);
    out.extend(string_pool_chunk(&pool.strings, opts.utf8));
    push_u16(&mut out, 0x0180);
    push_u16(&mut out, 8);
    push_u32(&mut out, 8 + 4 * res_ids.len() as u32);
    for id in res_ids {
        push_u32(&mut out, id);
    }
    out.extend(body);
    let total = out.len() as u32;
    out[4..8].copy_from_slice(&total.to_le_bytes());
    out
}

fn emit_element(e: &Element, opts: &BinaryOptions, pool: &mut Pool, uri: u32, out: &mut Vec<u8>, line: u32) {
    let name = pool.intern(&e.name);
    let mut attrs = Vec::new();
    for a in &e.attrs {
        let name_idx = if a.android && attr_resource_id(&a.name).is_some() {
            pool.index[&format!("\u{0}attr:{}", a.name)]
        } else {
            pool.intern(&a.name)
        };
        let ns = if a.android { uri } else { NONE };
        let (raw, ty, data) = match &a.value {
            Value::Str(s) => {
                let i = pool.intern(s);
                (i, 0x03u8, i)
            }
            Value::Int(n) => (NONE, if opts.hex_ints { 0x11 } else { 0x10 }, *n as u32),
            Value::Bool(b) => (NONE, 0x12, if *b { NONE } else { 0 }),
            Value::Ref { id, .. } => (NONE, 0x01, *id),
        };
        attrs.push((ns, name_idx, raw, ty, data));
    }
    let size = 0x24 + 20 * attrs.len() as u32;
    push_u16(out, 0x0102);
    push_u16(out, 0x10);
    push_u32(out, size);
    push_u32(out, line);
    push_u32(out, NONE);
    push_u32(out, NONE);
    push_u32(out, name);
    push_u16(out, 0x14);
    push_u16(out, 0x14);
    push_u16(out, attrs.len() as u16);
    push_u16(out, 0);
    push_u16(out, 0);
    push_u16(out, 0);
    for (ns, n, raw, ty, data) in attrs {
        push_u32(out, ns);
        push_u32(out, n);
        push_u32(out, raw);
        push_u16(out, 8);
        out.push(0);
        out.push(ty);
        push_u32(out, data);
    }
    for (k, c) in e.children.iter().enumerate() {
        emit_element(c, opts, pool, uri, out, line + 1 + k as u32);
    }
    push_u16(out, 0x0103);
    push_u16(out, 0x10);
    push_u32(out, 0x18);
    push_u32(out, line);
    push_u32(out, NONE);
    push_u32(out, NONE);
    push_u32(out, name);
}


/// What a faithful manifest parser must report for one tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedManifest {
    pub package: String,
    pub permissions: std::collections::BTreeSet<String>,
    pub target_sdk: Option<u32>,
    pub min_sdk: Option<u32>,
}

fn perm(p: &str) -> String {
    format!("android.permission.{p}")
}

fn expect(package: &str, perms: &[&str], target_sdk: Option<u32>, min_sdk: Option<u32>) -> ExpectedManifest {
    ExpectedManifest {
        package: package.into(),
        permissions: perms.iter().map(|p| if p.contains('.') { p.to_string() } else { perm(p) }).collect(),
        target_sdk,
        min_sdk,
    }
}

/// Manifest trees covering the shapes real packagers emit, with the result
/// both encodings must parse to. Index 1 is a plain two-permission manifest
/// and index 4 uses `uses-permission-sdk-23`.
pub fn reference_cases() -> Vec<(Element, ExpectedManifest)> {
    let mut out = vec![
        (manifest("com.a", &[], None, None), expect("com.a", &[], None, None)),
        (
            manifest("com.b", &[&perm("CAMERA"), &perm("INTERNET")], Some(23), Some(15)),
            expect("com.b", &["CAMERA", "INTERNET"], Some(23), Some(15)),
        ),
        (
            manifest("com.c", &[&perm("READ_CONTACTS")], Some(22), None),
            expect("com.c", &["READ_CONTACTS"], Some(22), None),
        ),
        (manifest("com.d", &[], None, Some(9)), expect("com.d", &[], None, Some(9))),
    ];

    let e = manifest("com.e", &[&perm("SEND_SMS")], Some(26), Some(21))
        .child(Element::new("uses-permission-sdk-23").android("name", text(&perm("BODY_SENSORS"))));
    out.push((e, expect("com.e", &["SEND_SMS", "BODY_SENSORS"], Some(26), Some(21))));

    // duplicates and surrounding whitespace
    let e = manifest("com.f", &[&perm("CAMERA"), &perm("CAMERA")], Some(19), None)
        .child(Element::new("uses-permission").android("name", text(&format!("  {}  ", perm("CAMERA")))));
    out.push((e, expect("com.f", &["CAMERA"], Some(19), None)));

    // targetSdk given as a string literal
    let e = Element::new("manifest")
        .attr("package", text("com.g"))
        .child(Element::new("uses-sdk").android("targetSdkVersion", text("24")));
    out.push((e, expect("com.g", &[], Some(24), None)));

    // targetSdk as a resource reference is unknown
    let e = Element::new("manifest")
        .attr("package", text("com.h"))
        .child(Element::new("uses-sdk").android("targetSdkVersion", Value::Ref { id: 0x7f0b_0001, name: "@integer/target".into() }))
        .child(Element::new("uses-permission").android("name", text(&perm("RECORD_AUDIO"))));
    out.push((e, expect("com.h", &["RECORD_AUDIO"], None, None)));

    // vendor permissions count, permission definitions do not
    let e = manifest("org.i", &["com.vendor.permission.C2D_MESSAGE", &perm("GET_ACCOUNTS")], Some(28), Some(16))
        .child(Element::new("permission").android("name", text("org.i.permission.OWN")));
    out.push((e, expect("org.i", &["GET_ACCOUNTS", "com.vendor.permission.C2D_MESSAGE"], Some(28), Some(16))));

    // an unprefixed name attribute is not the android one
    let e = Element::new("manifest")
        .attr("package", text("com.j"))
        .child(Element::new("uses-permission").attr("name", text(&perm("READ_SMS"))))
        .child(Element::new("uses-permission").android("name", text(&perm("READ_CALENDAR"))));
    out.push((e, expect("com.j", &["READ_CALENDAR"], None, None)));

    // many permissions, non-ASCII package
    let many: Vec<String> = (0..40).map(|i| format!("com.x.permission.P{i:02}")).collect();
    let refs: Vec<&str> = many.iter().map(String::as_str).collect();
    out.push((
        manifest("com.k.\u{e9}l\u{e8}ve", &refs, Some(30), Some(30)),
        expect("com.k.\u{e9}l\u{e8}ve", &refs, Some(30), Some(30)),
    ));

    // only the first uses-sdk counts
    let e = Element::new("manifest")
        .attr("package", text("com.l"))
        .child(Element::new("uses-sdk").android("targetSdkVersion", Value::Int(21)))
        .child(Element::new("uses-sdk").android("targetSdkVersion", Value::Int(27)));
    out.push((e, expect("com.l", &[], Some(21), None)));
    out
}
