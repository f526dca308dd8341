//! PDF text strings: PDFDocEncoding, UTF-16BE and UTF-8 with BOM.

use lopdf::{Object, StringFormat};

// PDFDocEncoding bytes 0x18..=0x1F and 0x80..=0xA0 that differ from Latin-1.
const LOW: [char; 8] = ['˘', 'ˇ', 'ˆ', '˙', '˝', '˛', '˚', '˜'];
const HIGH: [char; 33] = [
    '•', '†', '‡', '…', '—', '–', 'ƒ', '⁄', '‹', '›', '−', '‰', '„', '“', '”', '‘', '’', '‚', '™', 'ﬁ', 'ﬂ', 'Ł', 'Œ',
    'Š', 'Ÿ', 'Ž', 'ı', 'ł', 'œ', 'š', 'ž', '\u{FFFD}', '€',
];

pub fn decode(bytes: &[u8]) -> String {
    if let Some(rest) = bytes.strip_prefix(&[0xFE, 0xFF]) {
        let units: Vec<u16> = rest
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
            .collect();
        return String::from_utf16_lossy(&units);
    }
    if let Some(rest) = bytes.strip_prefix(&[0xEF, 0xBB, 0xBF]) {
        return String::from_utf8_lossy(rest).into_owned();
    }
    bytes
        .iter()
        .map(|&b| match b {
            0x18..=0x1F => LOW[(b - 0x18) as usize],
            0x80..=0xA0 => HIGH[(b - 0x80) as usize],
            b => b as char,
        })
        .collect()
}

/// Printable ASCII is written as a literal string; anything else as
/// UTF-16BE with a byte-order mark.
pub fn encode(text: &str) -> Object {
    if text.bytes().all(|b| (0x20..0x7F).contains(&b)) {
        Object::String(text.as_bytes().to_vec(), StringFormat::Literal)
    } else {
        let mut bytes = vec![0xFE, 0xFF];
        for unit in text.encode_utf16() {
            bytes.extend_from_slice(&unit.to_be_bytes());
        }
        Object::String(bytes, StringFormat::Hexadecimal)
    }
}

pub fn object_text(obj: &Object) -> Option<String> {
    match obj {
        Object::String(bytes, _) => Some(decode(bytes)),
        Object::Name(name) => Some(String::from_utf8_lossy(name).into_owned()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_unicode_round_trip() {
        for s in ["Ashley Arnold", "02108", "José Ñúñez", "名前", "", "a\nb"] {
            let Object::String(bytes, _) = encode(s) else {
                panic!("not a string")
            };
            assert_eq!(decode(&bytes), s);
        }
    }

    #[test]
    fn pdfdoc_specials() {
        assert_eq!(decode(&[0x80, 0x41, 0xA0]), "•A€");
    }
}
