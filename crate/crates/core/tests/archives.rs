use ilc_core::ingest::{dex_payloads, manifest_payload, open_archive, IngestError, IngestWarning};
use ilc_testkit::apk::{ApkBuilder, Method};
use ilc_testkit::seeded;
use rand::RngCore;

fn blob(seed: u64, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    seeded(seed).fill_bytes(&mut v);
    v
}

/// Offsets of (local header, central header) for the named entry.
fn headers(zip: &[u8], name: &str) -> (usize, usize) {
    let find = |sig: [u8; 4], name_at: usize| {
        (0..zip.len() - 4)
            .find(|&i| zip[i..i + 4] == sig && zip.get(i + name_at..i + name_at + name.len()) == Some(name.as_bytes()))
            .unwrap()
    };
    (find([0x50, 0x4b, 0x03, 0x04], 30), find([0x50, 0x4b, 0x01, 0x02], 46))
}

#[test]
fn stored_and_deflated_entries_round_trip() {
    let text = b"hello hello hello hello hello".repeat(50);
    let random = blob(1, 5000);
    let zip = ApkBuilder::new()
        .entry_with("a.txt", text.clone(), Method::Deflated)
        .entry_with("b.bin", random.clone(), Method::Stored)
        .entry_with("empty", Vec::new(), Method::Deflated)
        .entry_with("dir/c.bin", random.clone(), Method::Deflated)
        .build();
    let a = open_archive(&zip).unwrap();
    let names: Vec<&str> = a.entries().iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["a.txt", "b.bin", "empty", "dir/c.bin"]);
    assert_eq!(a.entry("a.txt").unwrap().payload, text);
    assert_eq!(a.entry("b.bin").unwrap().payload, random);
    assert!(a.entry("empty").unwrap().payload.is_empty());
    assert_eq!(a.entry("dir/c.bin").unwrap().payload, random);
    assert!(a.warnings().is_empty());
}

#[test]
fn multidex_and_manifest_lookup() {
    let zip = ApkBuilder::new()
        .entry("classes10.dex", b"ten".to_vec())
        .entry("classes2.dex", b"two".to_vec())
        .entry("classes.dex", b"one".to_vec())
        .entry("classes1.dex", b"not-a-dex-name".to_vec())
        .entry("classes02.dex", b"nor-this".to_vec())
        .entry("assets/classes3.dex", b"nested".to_vec())
        .manifest(b"<manifest/>".to_vec())
        .build();
    let a = open_archive(&zip).unwrap();
    let dex: Vec<&[u8]> = dex_payloads(&a);
    assert_eq!(dex, [&b"one"[..], b"two", b"ten"]);
    assert_eq!(manifest_payload(&a).unwrap(), b"<manifest/>");

    let no_manifest = open_archive(&ApkBuilder::new().entry("classes.dex", b"x".to_vec()).build()).unwrap();
    assert_eq!(manifest_payload(&no_manifest), Err(IngestError::MissingManifest));
}

#[test]
fn crc_mismatch_is_detected() {
    let payload = blob(2, 300);
    let mut zip = ApkBuilder::new().entry_with("x.bin", payload, Method::Stored).build();
    let (local, _) = headers(&zip, "x.bin");
    zip[local + 30 + 5 + 10] ^= 0xff;
    let a = open_archive(&zip);
    assert_eq!(a.err(), Some(IngestError::CrcMismatch("x.bin".into())));
}

#[test]
fn truncation_and_garbage() {
    let zip = ApkBuilder::new().entry("a", blob(3, 2000)).build();
    assert_eq!(open_archive(b"not a zip at all").err(), Some(IngestError::MissingEndOfCentralDirectory));
    assert_eq!(open_archive(&zip[..zip.len() / 2]).err(), Some(IngestError::MissingEndOfCentralDirectory));
    // keep the EOCD but drop the data in front of it
    let mut cut = zip.clone();
    cut.drain(10..40);
    assert!(open_archive(&cut).is_err());
}

#[test]
fn comment_after_eocd_is_tolerated() {
    let mut zip = ApkBuilder::new().entry("a", b"abc".to_vec()).build();
    let comment = b"signed by nobody";
    let n = zip.len();
    zip[n - 2..].copy_from_slice(&(comment.len() as u16).to_le_bytes());
    zip.extend_from_slice(comment);
    assert_eq!(open_archive(&zip).unwrap().entry("a").unwrap().payload, b"abc");
}

#[test]
fn unsupported_method_and_encryption() {
    let zip = ApkBuilder::new().entry("m", b"data".to_vec()).build();
    let (local, central) = headers(&zip, "m");

    let mut bz = zip.clone();
    bz[local + 8..local + 10].copy_from_slice(&12u16.to_le_bytes());
    bz[central + 10..central + 12].copy_from_slice(&12u16.to_le_bytes());
    assert_eq!(open_archive(&bz).err(), Some(IngestError::UnsupportedCompressionMethod(12)));

    let mut enc = zip.clone();
    enc[central + 8] |= 1;
    assert_eq!(open_archive(&enc).err(), Some(IngestError::UnsupportedFeature("encryption")));
}

#[test]
fn zip64_and_multi_disk_are_unsupported() {
    let zip = ApkBuilder::new().entry("m", b"data".to_vec()).build();
    let eocd = zip.len() - 22;

    let mut z = zip.clone();
    z[eocd + 16..eocd + 20].copy_from_slice(&u32::MAX.to_le_bytes());
    assert_eq!(open_archive(&z).err(), Some(IngestError::UnsupportedFeature("zip64")));

    let mut z = zip.clone();
    z[eocd + 4] = 1;
    assert_eq!(open_archive(&z).err(), Some(IngestError::UnsupportedFeature("multi-disk archive")));
}

#[test]
fn duplicate_names_keep_the_last_record() {
    let mut zip = ApkBuilder::new()
        .entry("classes.dex", b"first".to_vec())
        .entry("other", b"middle".to_vec())
        .entry("classes.deX", b"second".to_vec())
        .build();
    // rename the third entry onto the first, in both headers
    let (local, central) = headers(&zip, "classes.deX");
    zip[local + 30 + 10] = b'x';
    zip[central + 46 + 10] = b'x';
    let a = open_archive(&zip).unwrap();
    assert_eq!(dex_payloads(&a), [&b"second"[..]]);
    assert_eq!(a.entries().len(), 2);
    assert_eq!(
        a.warnings(),
        [IngestWarning::DuplicateEntry {
            name: "classes.dex".into(),
            occurrences: 2
        }]
    );
}
