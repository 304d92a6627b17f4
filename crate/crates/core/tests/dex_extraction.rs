use std::collections::BTreeMap;

use ilc_core::dex::{extract_invocations, parse_dex, DexError, WalkWarning};
use ilc_testkit::dex::{fixture_suite, unused_opcodes, ClassSpec, DexBuilder, Insn, Invoke, MethodSig, MethodSpec};

type Key = (String, String, String, String, String, u32);

fn expected_multiset(b: &DexBuilder) -> (Vec<u8>, BTreeMap<Key, usize>, usize) {
    let dex = b.build();
    let mut m = BTreeMap::new();
    for e in &dex.expected {
        let key = (
            e.caller_class.clone(),
            e.callee.class.clone(),
            e.callee.name.clone(),
            e.callee.descriptor(),
            e.kind.clone(),
            e.offset,
        );
        *m.entry(key).or_insert(0) += 1;
    }
    (dex.bytes, m, dex.call_sites)
}

fn extracted_multiset(bytes: &[u8]) -> (BTreeMap<Key, usize>, Vec<WalkWarning>) {
    let dex = parse_dex(bytes).expect("fixture parses");
    let ex = extract_invocations(&dex);
    let mut m = BTreeMap::new();
    for r in &ex.records {
        let key = (
            r.caller_class.clone(),
            r.callee.defining_class.clone(),
            r.callee.name.clone(),
            r.callee.descriptor(),
            r.invoke_kind.as_str().to_string(),
            r.offset,
        );
        *m.entry(key).or_insert(0) += 1;
    }
    (m, ex.warnings)
}

#[test]
fn suite_matches_assembler_source() {
    let mut methods = 0;
    for b in fixture_suite() {
        methods += b.classes.iter().map(|c| c.methods.len()).sum::<usize>();
        let (bytes, want, call_sites) = expected_multiset(&b);
        let (got, warnings) = extracted_multiset(&bytes);
        assert_eq!(got, want);
        assert_eq!(warnings.len(), call_sites, "{warnings:?}");
        assert!(warnings.iter().all(|w| matches!(w, WalkWarning::SkippedCallSite { .. })));
    }
    assert!(methods >= 50, "{methods}");
}

#[test]
fn parsed_tables_round_trip() {
    let sig = MethodSig::new("Lp/Q;", "go", &["I", "Ljava/lang/String;"], "Z");
    let b = DexBuilder::new().class(ClassSpec::new(
        "Lp/Q;",
        vec![
            MethodSpec::new("go", &["I", "Ljava/lang/String;"], "Z", vec![Insn::op(0x0f)]),
            MethodSpec::new("<init>", &[], "V", vec![Insn::return_void()]).direct(),
            MethodSpec::abstract_method("later", &[], "V"),
        ],
    ));
    let dex = parse_dex(&b.build().bytes).unwrap();
    assert_eq!(dex.version, "035");
    assert_eq!(dex.classes.len(), 1);
    let class = &dex.classes[0];
    assert_eq!(class.descriptor, "Lp/Q;");
    assert_eq!(class.methods.len(), 3);
    // direct methods come first
    assert_eq!(dex.method(class.methods[0].method_idx).unwrap().name, "<init>");
    assert!(class.methods.iter().any(|m| m.code.is_none()));
    let go = dex.methods.iter().find(|m| m.name == "go").unwrap();
    assert_eq!(go.descriptor(), sig.descriptor());
    assert_eq!(go.to_string(), "Lp/Q;->go(ILjava/lang/String;)Z");
}

fn one_method(body: Vec<Insn>) -> Vec<u8> {
    DexBuilder::new()
        .class(ClassSpec::new("La/A;", vec![MethodSpec::new("f", &[], "V", body)]))
        .build()
        .bytes
}

fn call() -> Insn {
    Insn::invoke(Invoke::Static, MethodSig::new("La/B;", "g", &[], "V"), &[])
}

#[test]
fn unknown_opcodes_stop_the_body_and_keep_earlier_records() {
    for op in unused_opcodes() {
        let bytes = one_method(vec![call(), Insn::Raw(vec![op as u16]), call(), Insn::return_void()]);
        let dex = parse_dex(&bytes).unwrap();
        let ex = extract_invocations(&dex);
        assert_eq!(ex.records.len(), 1, "opcode {op:#04x}");
        assert_eq!(ex.records[0].offset, 0);
        assert!(matches!(
            ex.warnings.as_slice(),
            [WalkWarning::UnknownOpcode { opcode, offset: 3, .. }] if *opcode == op
        ));
    }
}

#[test]
fn a_bad_body_does_not_affect_other_methods() {
    let b = DexBuilder::new().class(ClassSpec::new(
        "La/A;",
        vec![
            MethodSpec::new("bad", &[], "V", vec![Insn::Raw(vec![0x3e]), call()]),
            MethodSpec::new("good", &[], "V", vec![call(), Insn::return_void()]),
        ],
    ));
    let ex = extract_invocations(&parse_dex(&b.build().bytes).unwrap());
    assert_eq!(ex.records.len(), 1);
    assert_eq!(ex.warnings.len(), 1);
}

#[test]
fn truncated_instruction_is_misaligned() {
    // const-wide needs five units; only two remain.
    let bytes = one_method(vec![call(), Insn::Raw(vec![0x0018, 0x0000])]);
    let ex = extract_invocations(&parse_dex(&bytes).unwrap());
    assert_eq!(ex.records.len(), 1);
    assert!(matches!(ex.warnings[..], [WalkWarning::MisalignedStream { offset: 3, .. }]));
}

#[test]
fn payload_at_odd_offset_is_misaligned() {
    let bytes = one_method(vec![Insn::op(0x0e), Insn::Raw(vec![0x0100, 0, 0, 0])]);
    let ex = extract_invocations(&parse_dex(&bytes).unwrap());
    assert!(matches!(ex.warnings[..], [WalkWarning::MisalignedStream { offset: 1, .. }]));
}

#[test]
fn anchor_pointing_at_non_payload_is_misaligned() {
    // fill-array-data +4 lands on return-void, not a payload.
    let bytes = one_method(vec![Insn::Raw(vec![0x0026, 4, 0]), Insn::op(0x00), Insn::return_void(), call()]);
    let ex = extract_invocations(&parse_dex(&bytes).unwrap());
    assert!(ex.records.is_empty());
    assert!(matches!(ex.warnings[..], [WalkWarning::MisalignedStream { offset: 4, .. }]));
}

#[test]
fn bad_method_index_is_a_warning() {
    let bytes = one_method(vec![call(), Insn::Raw(vec![0x0071, 0x7fff, 0]), call()]);
    let ex = extract_invocations(&parse_dex(&bytes).unwrap());
    assert_eq!(ex.records.len(), 1);
    assert!(matches!(ex.warnings[..], [WalkWarning::BadMethodIndex { index: 0x7fff, .. }]));
}

#[test]
fn header_errors() {
    let good = one_method(vec![Insn::return_void()]);

    let mut bad = good.clone();
    bad[0] = b'x';
    assert_eq!(parse_dex(&bad), Err(DexError::BadMagic));

    let mut bad = good.clone();
    bad[4..7].copy_from_slice(b"036");
    assert_eq!(parse_dex(&bad), Err(DexError::UnsupportedVersion("036".into())));

    assert!(matches!(parse_dex(&good[..0x40]), Err(DexError::TruncatedSection(_))));
    assert!(matches!(parse_dex(&good[..good.len() / 2]), Err(DexError::TruncatedSection(_))));

    let mut bad = good.clone();
    bad[0x28..0x2c].copy_from_slice(&0x7856_3412u32.to_le_bytes());
    assert!(matches!(parse_dex(&bad), Err(DexError::Malformed(_))));
}

#[test]
fn out_of_range_indices_are_errors() {
    let b = DexBuilder::new().class(ClassSpec::new("La/A;", vec![MethodSpec::new("f", &[], "V", vec![Insn::return_void()])]));
    let (dex, layout) = b.build_with_layout();
    let mut bytes = dex.bytes;
    // method_ids[0].name_idx
    let at = layout.method_ids_off as usize + 4;
    bytes[at..at + 4].copy_from_slice(&0xffffu32.to_le_bytes());
    assert_eq!(
        parse_dex(&bytes),
        Err(DexError::IndexOutOfBounds {
            section: "string_ids",
            index: 0xffff
        })
    );
}

#[test]
fn overlapping_id_sections_are_rejected() {
    let b = DexBuilder::new().class(ClassSpec::new("La/A;", vec![MethodSpec::new("f", &[], "V", vec![Insn::return_void()])]));
    let (dex, layout) = b.build_with_layout();
    let mut bytes = dex.bytes;
    // point class_defs at method_ids
    bytes[0x64..0x68].copy_from_slice(&layout.method_ids_off.to_le_bytes());
    assert!(matches!(parse_dex(&bytes), Err(DexError::OverlappingSections(..))));
}

#[test]
fn every_supported_version_parses() {
    for v in ["035", "037", "038", "039"] {
        let bytes = DexBuilder::new()
            .version(v)
            .class(ClassSpec::new("La/A;", vec![MethodSpec::new("f", &[], "V", vec![call(), Insn::return_void()])]))
            .build()
            .bytes;
        let dex = parse_dex(&bytes).unwrap();
        assert_eq!(dex.version, v);
        assert_eq!(extract_invocations(&dex).records.len(), 1);
    }
}
