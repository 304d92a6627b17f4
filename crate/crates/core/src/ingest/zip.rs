//! Classic (non-ZIP64) ZIP reader driven by the central directory.

use std::io::Read;

use flate2::read::DeflateDecoder;

use super::IngestError;

const LOCAL_HEADER_SIG: u32 = 0x0403_4b50;
const CENTRAL_HEADER_SIG: u32 = 0x0201_4b50;
const EOCD_SIG: u32 = 0x0605_4b50;
const ZIP64_LOCATOR_SIG: u32 = 0x0706_4b50;

const EOCD_LEN: usize = 22;
const CENTRAL_HEADER_LEN: usize = 46;
const LOCAL_HEADER_LEN: usize = 30;
const MAX_COMMENT_LEN: usize = 0xffff;

const FLAG_ENCRYPTED: u16 = 0x0001;

const METHOD_STORED: u16 = 0;
const METHOD_DEFLATE: u16 = 8;

/// One central directory record, trimmed to what extraction needs.
#[derive(Debug, Clone)]
pub(crate) struct CentralRecord {
    pub name: String,
    pub flags: u16,
    pub method: u16,
    pub crc32: u32,
    pub compressed_size: u32,
    pub uncompressed_size: u32,
    pub local_header_offset: u32,
}

fn u16_at(buf: &[u8], off: usize) -> Option<u16> {
    buf.get(off..off + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

fn u32_at(buf: &[u8], off: usize) -> Option<u32> {
    buf.get(off..off + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Scans backwards for the end-of-central-directory record. The record may be
/// followed by an archive comment of up to 64 KiB.
fn find_eocd(bytes: &[u8]) -> Option<usize> {
    if bytes.len() < EOCD_LEN {
        return None;
    }
    let last = bytes.len() - EOCD_LEN;
    let first = last.saturating_sub(MAX_COMMENT_LEN);
    (first..=last).rev().find(|&pos| {
        u32_at(bytes, pos) == Some(EOCD_SIG)
            && u16_at(bytes, pos + 20).map(|c| pos + EOCD_LEN + c as usize) == Some(bytes.len())
    })
    .or_else(|| {
        // Tolerate trailing garbage or a comment length that disagrees with the file size.
        (first..=last).rev().find(|&pos| u32_at(bytes, pos) == Some(EOCD_SIG))
    })
}

pub(crate) fn read_central_directory(bytes: &[u8]) -> Result<Vec<CentralRecord>, IngestError> {
    let eocd = find_eocd(bytes).ok_or(IngestError::MissingEndOfCentralDirectory)?;

    if eocd >= 20 && u32_at(bytes, eocd - 20) == Some(ZIP64_LOCATOR_SIG) {
        return Err(IngestError::UnsupportedFeature("zip64"));
    }

    let disk = u16_at(bytes, eocd + 4).unwrap_or(0);
    let cd_disk = u16_at(bytes, eocd + 6).unwrap_or(0);
    let entries_this_disk = u16_at(bytes, eocd + 8).unwrap_or(0);
    let entries_total = u16_at(bytes, eocd + 10).unwrap_or(0);
    let cd_size = u32_at(bytes, eocd + 12).unwrap_or(0);
    let cd_offset = u32_at(bytes, eocd + 16).unwrap_or(0);

    if disk != 0 || cd_disk != 0 || entries_this_disk != entries_total {
        return Err(IngestError::UnsupportedFeature("multi-disk archive"));
    }
    if entries_total == 0xffff || cd_size == 0xffff_ffff || cd_offset == 0xffff_ffff {
        return Err(IngestError::UnsupportedFeature("zip64"));
    }

    let cd_start = cd_offset as usize;
    let cd_end = cd_start
        .checked_add(cd_size as usize)
        .filter(|&end| end <= eocd)
        .ok_or(IngestError::CorruptCentralDirectory)?;
    let cd = &bytes[cd_start..cd_end];

    let mut records = Vec::with_capacity(entries_total as usize);
    let mut pos = 0usize;
    for _ in 0..entries_total {
        if u32_at(cd, pos) != Some(CENTRAL_HEADER_SIG) || pos + CENTRAL_HEADER_LEN > cd.len() {
            return Err(IngestError::CorruptCentralDirectory);
        }
        let field16 = |off| u16_at(cd, pos + off).unwrap_or(0);
        let field32 = |off| u32_at(cd, pos + off).unwrap_or(0);

        let flags = field16(8);
        let method = field16(10);
        let crc32 = field32(16);
        let compressed_size = field32(20);
        let uncompressed_size = field32(24);
        let name_len = field16(28) as usize;
        let extra_len = field16(30) as usize;
        let comment_len = field16(32) as usize;
        let local_header_offset = field32(42);

        let name_start = pos + CENTRAL_HEADER_LEN;
        let name_bytes = cd
            .get(name_start..name_start + name_len)
            .ok_or(IngestError::CorruptCentralDirectory)?;
        let name = String::from_utf8_lossy(name_bytes).into_owned();

        if compressed_size == 0xffff_ffff
            || uncompressed_size == 0xffff_ffff
            || local_header_offset == 0xffff_ffff
        {
            return Err(IngestError::UnsupportedFeature("zip64"));
        }

        records.push(CentralRecord {
            name,
            flags,
            method,
            crc32,
            compressed_size,
            uncompressed_size,
            local_header_offset,
        });
        pos = name_start + name_len + extra_len + comment_len;
    }
    Ok(records)
}

/// Extracts one entry. Sizes and CRC come from the central directory, which
/// also covers entries written with a trailing data descriptor.
pub(crate) fn extract(bytes: &[u8], record: &CentralRecord) -> Result<Vec<u8>, IngestError> {
    let truncated = || IngestError::TruncatedEntry(record.name.clone());

    if record.flags & FLAG_ENCRYPTED != 0 {
        return Err(IngestError::UnsupportedFeature("encryption"));
    }

    let header = record.local_header_offset as usize;
    if u32_at(bytes, header) != Some(LOCAL_HEADER_SIG) {
        return Err(truncated());
    }
    let name_len = u16_at(bytes, header + 26).ok_or_else(truncated)? as usize;
    let extra_len = u16_at(bytes, header + 28).ok_or_else(truncated)? as usize;
    let data_start = header + LOCAL_HEADER_LEN + name_len + extra_len;
    let data = data_start
        .checked_add(record.compressed_size as usize)
        .and_then(|end| bytes.get(data_start..end))
        .ok_or_else(truncated)?;

    let payload = match record.method {
        METHOD_STORED => {
            if record.compressed_size != record.uncompressed_size {
                return Err(truncated());
            }
            data.to_vec()
        }
        METHOD_DEFLATE => {
            let expected = record.uncompressed_size as usize;
            let mut out = Vec::with_capacity(expected);
            DeflateDecoder::new(data)
                // One extra byte detects a stream longer than declared.
                .take(expected as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|_| truncated())?;
            if out.len() != expected {
                return Err(truncated());
            }
            out
        }
        other => return Err(IngestError::UnsupportedCompressionMethod(other)),
    };

    if crc32fast::hash(&payload) != record.crc32 {
        return Err(IngestError::CrcMismatch(record.name.clone()));
    }
    Ok(payload)
}
