//! Appearance streams for text widgets.

use lopdf::{Dictionary, Object, ObjectId, Stream, dictionary};

/// Standard 14 faces used in generated appearances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// Filled-in answers.
    Helvetica,
    /// Placeholder tokens, in Courier-Bold. OCR keeps its braces and digits
    /// apart more reliably than in Helvetica.
    Courier,
}

impl Face {
    pub fn resource(self) -> &'static str {
        match self {
            Face::Helvetica => "Helv",
            Face::Courier => "Cour",
        }
    }

    pub fn font(self) -> Dictionary {
        let base = match self {
            Face::Helvetica => "Helvetica",
            Face::Courier => "Courier-Bold",
        };
        dictionary! {
            "Type" => "Font",
            "Subtype" => "Type1",
            "BaseFont" => base,
            "Encoding" => "WinAnsiEncoding",
        }
    }

    /// Width of `text` at 1 pt.
    pub fn width_em(self, text: &str) -> f64 {
        match self {
            Face::Helvetica => text_width_em(text),
            Face::Courier => text.chars().count() as f64 * 0.6,
        }
    }

    /// Largest font size (capped at 14 pt) at which `text` fits in a box.
    pub fn fit(self, text: &str, width: f64, height: f64) -> f64 {
        fit_em(self.width_em(text), width, height)
    }
}

/// Helvetica advance widths for 0x20..=0x7E, in 1/1000 em.
const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, // 0x20
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556, // 0x30
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778, // 0x40
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556, // 0x50
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556, // 0x60
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584, // 0x70
];

const MAX_FONT_PTS: f64 = 14.0;
const PADDING_PTS: f64 = 2.0;

/// WinAnsi byte for a character, `?` when it has none.
fn win_ansi(c: char) -> u8 {
    match c {
        ' '..='~' => c as u8,
        '\u{A0}'..='\u{FF}' => c as u32 as u8,
        '€' => 0x80,
        '‚' => 0x82,
        'ƒ' => 0x83,
        '„' => 0x84,
        '…' => 0x85,
        '†' => 0x86,
        '‡' => 0x87,
        'ˆ' => 0x88,
        '‰' => 0x89,
        'Š' => 0x8A,
        '‹' => 0x8B,
        'Œ' => 0x8C,
        'Ž' => 0x8E,
        '‘' => 0x91,
        '’' => 0x92,
        '“' => 0x93,
        '”' => 0x94,
        '•' => 0x95,
        '–' => 0x96,
        '—' => 0x97,
        '˜' => 0x98,
        '™' => 0x99,
        'š' => 0x9A,
        '›' => 0x9B,
        'œ' => 0x9C,
        'ž' => 0x9E,
        'Ÿ' => 0x9F,
        _ => b'?',
    }
}

fn byte_width(b: u8) -> f64 {
    match b {
        0x20..=0x7E => HELVETICA[(b - 0x20) as usize] as f64,
        _ => 556.0,
    }
}

/// Width of `text` in Helvetica at 1 pt.
pub fn text_width_em(text: &str) -> f64 {
    text.chars().map(|c| byte_width(win_ansi(c))).sum::<f64>() / 1000.0
}

/// Largest Helvetica size (capped at 14 pt) at which `text` fits in a box.
pub fn fit_font_size(text: &str, width: f64, height: f64) -> f64 {
    fit_em(text_width_em(text), width, height)
}

fn fit_em(em: f64, width: f64, height: f64) -> f64 {
    let by_height = (height - PADDING_PTS) * 0.8;
    let by_width = if em > 0.0 {
        (width - 2.0 * PADDING_PTS) / em
    } else {
        f64::INFINITY
    };
    by_height.min(by_width).clamp(0.0, MAX_FONT_PTS)
}

fn literal(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() + 2);
    out.push('(');
    for &b in bytes {
        match b {
            b'(' | b')' | b'\\' => {
                out.push('\\');
                out.push(b as char);
            }
            0x20..=0x7E => out.push(b as char),
            b => out.push_str(&format!("\\{b:03o}")),
        }
    }
    out.push(')');
    out
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Content and resources for a one-line text appearance.
pub fn text_stream(text: &str, width: f64, height: f64, size: f64, face: Face, font: ObjectId) -> Stream {
    let encoded: Vec<u8> = text
        .chars()
        .filter(|c| *c != '\n' && *c != '\r')
        .map(win_ansi)
        .collect();
    let baseline = ((height - size) / 2.0 + 0.22 * size).max(1.0);
    let content = format!(
        "/Tx BMC\nq\n1 1 {w} {h} re W n\nBT\n/{res} {size} Tf\n0 g\n{x} {y} Td\n{s} Tj\nET\nQ\nEMC\n",
        w = round2(width - 2.0),
        h = round2(height - 2.0),
        size = round2(size),
        x = PADDING_PTS,
        y = round2(baseline),
        s = literal(&encoded),
        res = face.resource(),
    );
    let mut fonts = Dictionary::new();
    fonts.set(face.resource(), font);
    let dict = dictionary! {
        "Type" => "XObject",
        "Subtype" => "Form",
        "BBox" => vec![0.into(), 0.into(), Object::Real(width as f32), Object::Real(height as f32)],
        "Resources" => dictionary! { "Font" => fonts },
    };
    Stream::new(dict, content.into_bytes())
}

/// `/Yes` and `/Off` appearances for a checkbox that has none.
pub fn checkbox_streams(width: f64, height: f64, zapf: ObjectId) -> (Stream, Stream) {
    let size = (height.min(width) * 0.8).max(1.0);
    let on = format!(
        "q\nBT\n/ZaDb {s} Tf\n0 g\n{x} {y} Td\n(4) Tj\nET\nQ\n",
        s = round2(size),
        x = round2((width - size * 0.846) / 2.0),
        y = round2((height - size) / 2.0 + 0.2 * size),
    );
    let dict = |content: String| {
        let d = dictionary! {
            "Type" => "XObject",
            "Subtype" => "Form",
            "BBox" => vec![0.into(), 0.into(), Object::Real(width as f32), Object::Real(height as f32)],
            "Resources" => dictionary! { "Font" => dictionary! { "ZaDb" => zapf } },
        };
        Stream::new(d, content.into_bytes())
    };
    (dict(on), dict(String::new()))
}

pub fn zapf_font() -> Dictionary {
    dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "ZapfDingbats",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_width_uses_font_metrics() {
        // { { f i e l d _ 0 1 } }
        let expected = (334.0 * 4.0 + 278.0 + 222.0 + 556.0 + 222.0 + 556.0 + 556.0 * 3.0) / 1000.0;
        assert!((text_width_em("{{field_01}}") - expected).abs() < 1e-9);
    }

    #[test]
    fn fit_is_bounded_by_height_and_cap() {
        assert!((fit_font_size("{{field_01}}", 200.0, 18.0) - 12.8).abs() < 1e-9);
        assert_eq!(fit_font_size("x", 500.0, 100.0), 14.0);
        assert!(fit_font_size("{{field_01}}", 10.0, 10.0) < 6.0);
    }

    #[test]
    fn courier_is_monospaced() {
        assert!((Face::Courier.width_em("{{field_01}}") - 7.2).abs() < 1e-9);
        // (200 - 4) / 7.2 exceeds the height bound.
        assert!((Face::Courier.fit("{{field_01}}", 200.0, 18.0) - 12.8).abs() < 1e-9);
        assert!((Face::Courier.fit("{{field_01}}", 40.0, 18.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn literal_escapes() {
        assert_eq!(literal(b"a(b)\\"), "(a\\(b\\)\\\\)");
        assert_eq!(literal(&[0xE9]), "(\\351)");
    }
}
