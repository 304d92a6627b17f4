use super::DexError;

/// Bounds-checked little-endian reads over a DEX image.
#[derive(Clone, Copy)]
pub(crate) struct Image<'a> {
    bytes: &'a [u8],
}

impl<'a> Image<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Image { bytes }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn slice(&self, off: usize, len: usize, section: &'static str) -> Result<&'a [u8], DexError> {
        off.checked_add(len)
            .and_then(|end| self.bytes.get(off..end))
            .ok_or(DexError::TruncatedSection(section))
    }

    pub fn u16(&self, off: usize, section: &'static str) -> Result<u16, DexError> {
        let b = self.slice(off, 2, section)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&self, off: usize, section: &'static str) -> Result<u32, DexError> {
        let b = self.slice(off, 4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads an unsigned LEB128 value (at most five bytes) and advances `off`.
    pub fn uleb128(&self, off: &mut usize, section: &'static str) -> Result<u32, DexError> {
        let mut result: u32 = 0;
        for i in 0..5 {
            let byte = *self
                .bytes
                .get(*off)
                .ok_or(DexError::TruncatedSection(section))?;
            *off += 1;
            result |= ((byte & 0x7f) as u32) << (7 * i);
            if byte & 0x80 == 0 {
                return Ok(result);
            }
        }
        Err(DexError::Malformed(section))
    }

    /// Reads a NUL-terminated MUTF-8 string starting at `off`.
    pub fn mutf8(&self, off: usize, section: &'static str) -> Result<String, DexError> {
        let rest = self
            .bytes
            .get(off..)
            .ok_or(DexError::TruncatedSection(section))?;
        let end = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or(DexError::TruncatedSection(section))?;
        Ok(decode_mutf8(&rest[..end]))
    }
}

/// Decodes Modified UTF-8 (two-byte NUL, surrogate pairs encoded as separate
/// three-byte sequences). Invalid sequences become U+FFFD.
pub(crate) fn decode_mutf8(bytes: &[u8]) -> String {
    if bytes.is_ascii() {
        return String::from_utf8_lossy(bytes).into_owned();
    }
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b0 = bytes[i] as u16;
        let cont = |k: usize| bytes.get(i + k).filter(|&&b| b & 0xc0 == 0x80).map(|&b| (b & 0x3f) as u16);
        if b0 < 0x80 {
            units.push(b0);
            i += 1;
        } else if b0 & 0xe0 == 0xc0 {
            match cont(1) {
                Some(c1) => {
                    units.push(((b0 & 0x1f) << 6) | c1);
                    i += 2;
                }
                None => {
                    units.push(0xfffd);
                    i += 1;
                }
            }
        } else if b0 & 0xf0 == 0xe0 {
            match (cont(1), cont(2)) {
                (Some(c1), Some(c2)) => {
                    units.push(((b0 & 0x0f) << 12) | (c1 << 6) | c2);
                    i += 3;
                }
                _ => {
                    units.push(0xfffd);
                    i += 1;
                }
            }
        } else {
            units.push(0xfffd);
            i += 1;
        }
    }
    String::from_utf16_lossy(&units)
}
