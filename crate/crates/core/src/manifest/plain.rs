use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use super::{Attr, AttrValue, ElementStart, ManifestError, ANDROID_NS};

/// Decodes UTF-8 or BOM-marked UTF-16 text and checks it starts like XML.
pub(super) fn decode_text(bytes: &[u8]) -> Result<String, ManifestError> {
    let text = match bytes {
        [0xff, 0xfe, rest @ ..] => utf16(rest, u16::from_le_bytes)?,
        [0xfe, 0xff, rest @ ..] => utf16(rest, u16::from_be_bytes)?,
        _ => String::from_utf8(bytes.to_vec()).map_err(|_| ManifestError::UnrecognizedFormat)?,
    };
    if !text.trim_start().starts_with('<') {
        return Err(ManifestError::UnrecognizedFormat);
    }
    Ok(text)
}

fn utf16(bytes: &[u8], unit: fn([u8; 2]) -> u16) -> Result<String, ManifestError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(ManifestError::UnrecognizedFormat);
    }
    let units: Vec<u16> = bytes.chunks_exact(2).map(|c| unit([c[0], c[1]])).collect();
    String::from_utf16(&units).map_err(|_| ManifestError::UnrecognizedFormat)
}

fn syntax(e: impl std::fmt::Display) -> ManifestError {
    ManifestError::Syntax(e.to_string())
}

/// Prefix -> namespace URI, one frame per open element.
struct Scopes(Vec<HashMap<String, String>>);

impl Scopes {
    fn resolve(&self, prefix: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find_map(|frame| frame.get(prefix))
            .map(String::as_str)
    }
}

fn lower(start: &BytesStart<'_>, scopes: &mut Scopes) -> Result<ElementStart, ManifestError> {
    let mut frame = HashMap::new();
    let mut raw = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(syntax)?;
        let key = attr.key.as_ref().to_string();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(syntax)?
            .into_owned();
        if let Some(prefix) = key.strip_prefix("xmlns:") {
            frame.insert(prefix.to_string(), value);
        } else if key != "xmlns" {
            raw.push((key, value));
        }
    }
    scopes.0.push(frame);

    let attrs = raw
        .into_iter()
        .map(|(key, value)| {
            let (android, name) = match key.split_once(':') {
                // An undeclared `android:` prefix is accepted as-is.
                Some((prefix, local)) => (
                    scopes.resolve(prefix).map_or(prefix == "android", |ns| ns == ANDROID_NS),
                    local.to_string(),
                ),
                None => (false, key),
            };
            let value = if value.starts_with('@') || value.starts_with('?') {
                AttrValue::Reference
            } else {
                AttrValue::Text(value)
            };
            Attr { android, name, value }
        })
        .collect();

    let name = start.name();
    let name = name.as_ref();
    Ok(ElementStart {
        name: name.rsplit(':').next().unwrap_or(name).to_string(),
        attrs,
    })
}

pub(super) fn element_starts(text: &str) -> Result<Vec<ElementStart>, ManifestError> {
    let mut reader = Reader::from_str(text);
    let mut scopes = Scopes(Vec::new());
    let mut out = Vec::new();
    loop {
        match reader.read_event().map_err(syntax)? {
            Event::Start(e) => out.push(lower(&e, &mut scopes)?),
            Event::Empty(e) => {
                out.push(lower(&e, &mut scopes)?);
                scopes.0.pop();
            }
            Event::End(_) => {
                scopes.0.pop();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(out)
}
