//! AcroForm fields: enumeration, size classes, placeholder stamping and filling.

mod appearance;
mod form;
pub mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use lopdf::{Document, Object, ObjectId, dictionary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use appearance::{Face, fit_font_size, text_width_em};

#[derive(Debug, Error)]
pub enum PdfError {
    #[error("not a PDF: {0}")]
    NotPdf(String),
    #[error("encrypted PDFs are not supported")]
    EncryptedPdf,
    #[error("no field named '{0}'")]
    UnknownField(String),
    #[error("field '{field}' is a {kind} field and cannot take {given}")]
    TypeMismatch {
        field: String,
        kind: FieldKind,
        given: &'static str,
    },
    #[error("PDF write failed: {0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Text,
    Checkbox,
    Radio,
    Choice,
    Signature,
    Other,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldKind::Text => "text",
            FieldKind::Checkbox => "checkbox",
            FieldKind::Radio => "radio",
            FieldKind::Choice => "choice",
            FieldKind::Signature => "signature",
            FieldKind::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Writable,
    Small,
}

/// Rectangle in PDF user space, normalised so `x0 <= x1` and `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self {
            x0: ax.min(bx),
            y0: ay.min(by),
            x1: ax.max(bx),
            y1: ay.max(by),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    /// Fully qualified field name.
    pub name: String,
    pub kind: FieldKind,
    /// Zero-based page of the first widget in reading order.
    pub page: u32,
    pub bbox: Rect,
    pub size_class: SizeClass,
    #[serde(default = "one")]
    pub widget_count: usize,
    /// Export values for radio groups and choice lists.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePolicy {
    pub min_dimension_pts: f64,
    pub min_area_pts2: f64,
    /// Token font sizes below this demote a field to small.
    pub font_floor_pts: f64,
}

impl Default for SizePolicy {
    fn default() -> Self {
        Self {
            min_dimension_pts: 14.0,
            min_area_pts2: 400.0,
            font_floor_pts: 6.0,
        }
    }
}

pub fn classify_size(field: &FieldDescriptor, policy: &SizePolicy) -> SizeClass {
    let b = &field.bbox;
    if matches!(field.kind, FieldKind::Checkbox | FieldKind::Radio)
        || b.width().min(b.height()) < policy.min_dimension_pts
        || b.area() < policy.min_area_pts2
    {
        SizeClass::Small
    } else {
        SizeClass::Writable
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldList {
    pub fields: Vec<FieldDescriptor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

pub fn enumerate_fields(pdf: &[u8]) -> Result<FieldList, PdfError> {
    enumerate_fields_with(pdf, &SizePolicy::default())
}

pub fn enumerate_fields_with(pdf: &[u8], policy: &SizePolicy) -> Result<FieldList, PdfError> {
    let doc = form::load(pdf)?;
    let (nodes, diagnostics) = form::fields(&doc);
    let fields = nodes
        .iter()
        .map(|node| {
            let first = &node.widgets[0];
            let options = match node.kind {
                FieldKind::Radio => {
                    let mut opts: Vec<String> = node.widgets.iter().flat_map(|w| form::on_states(&doc, w.id)).collect();
                    opts.dedup();
                    opts
                }
                FieldKind::Choice => form::choice_options(&doc, node.id),
                _ => Vec::new(),
            };
            let mut d = FieldDescriptor {
                name: node.name.clone(),
                kind: node.kind,
                page: first.page,
                bbox: first.rect,
                size_class: SizeClass::Writable,
                widget_count: node.widgets.len(),
                options,
            };
            d.size_class = classify_size(&d, policy);
            d
        })
        .collect();
    Ok(FieldList { fields, diagnostics })
}

/// A placeholder token such as `field_07`; displayed as `{{field_07}}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(index: usize, width: usize) -> Self {
        Token(format!("field_{index:0width$}"))
    }

    /// Bare name, e.g. `field_07`.
    pub fn name(&self) -> &str {
        &self.0
    }

    /// The decimal digits, exactly as written.
    pub fn digits(&self) -> &str {
        &self.0["field_".len()..]
    }

    pub fn braced(&self) -> String {
        format!("{{{{{}}}}}", self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{{{}}}}}", self.0)
    }
}

impl FromStr for Token {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s.strip_prefix("{{").and_then(|r| r.strip_suffix("}}")).unwrap_or(s);
        let digits = bare
            .strip_prefix("field_")
            .ok_or_else(|| format!("'{s}' is not a field token"))?;
        if digits.len() < 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("'{s}' is not a field token"));
        }
        Ok(Token(bare.to_string()))
    }
}

impl TryFrom<String> for Token {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Token> for String {
    fn from(t: Token) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderEntry {
    pub token: Token,
    pub field: String,
}

/// Token to field name, in stamping order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderMap {
    pub entries: Vec<PlaceholderEntry>,
}

impl PlaceholderMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn field_for(&self, token: &Token) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| &e.token == token)
            .map(|e| e.field.as_str())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.entries.iter().map(|e| &e.token)
    }
}

#[derive(Debug, Clone)]
pub struct Stamped {
    pub pdf: Vec<u8>,
    pub map: PlaceholderMap,
    /// Input fields with any demotions to small applied.
    pub fields: Vec<FieldDescriptor>,
    pub diagnostics: Vec<String>,
}

const TOKEN_FACE: Face = Face::Courier;

fn token_width(count: usize) -> usize {
    count.to_string().len().max(2)
}

fn save(doc: &mut Document) -> Result<Vec<u8>, PdfError> {
    let mut out = Vec::new();
    doc.save_to(&mut out).map_err(|e| PdfError::Write(e.to_string()))?;
    Ok(out)
}

/// Font resources shared by generated appearances.
struct Fonts {
    helv: ObjectId,
    cour: ObjectId,
    zapf: ObjectId,
}

impl Fonts {
    fn id(&self, face: Face) -> ObjectId {
        match face {
            Face::Helvetica => self.helv,
            Face::Courier => self.cour,
        }
    }
}

fn ensure_fonts(doc: &mut Document) -> Fonts {
    let existing = |doc: &Document, key: &[u8]| -> Option<ObjectId> {
        let form = form::acroform(doc)?;
        let dr = doc.dereference(form.get(b"DR").ok()?).ok()?.1.as_dict().ok()?;
        let fonts = doc.dereference(dr.get(b"Font").ok()?).ok()?.1.as_dict().ok()?;
        fonts.get(key).ok()?.as_reference().ok()
    };
    let helv = existing(doc, b"Helv").unwrap_or_else(|| doc.add_object(Face::Helvetica.font()));
    let cour = existing(doc, b"Cour").unwrap_or_else(|| doc.add_object(Face::Courier.font()));
    let zapf = existing(doc, b"ZaDb").unwrap_or_else(|| doc.add_object(appearance::zapf_font()));

    // Make sure the form advertises them and asks viewers to use our appearances.
    let form_id = form::acroform_id(doc);
    let form: Option<&mut lopdf::Dictionary> = match form_id {
        Some(id) => doc.get_dictionary_mut(id).ok(),
        None => doc
            .catalog_mut()
            .ok()
            .and_then(|c| c.get_mut(b"AcroForm").ok())
            .and_then(|o| o.as_dict_mut().ok()),
    };
    if let Some(form) = form {
        if !matches!(form.get(b"DR"), Ok(Object::Dictionary(_)) | Ok(Object::Reference(_))) {
            form.set("DR", dictionary! {});
        }
        if let Ok(Object::Dictionary(dr)) = form.get_mut(b"DR") {
            if !matches!(dr.get(b"Font"), Ok(Object::Dictionary(_))) {
                dr.set("Font", dictionary! {});
            }
            if let Ok(Object::Dictionary(fonts)) = dr.get_mut(b"Font") {
                fonts.set("Helv", helv);
                fonts.set("Cour", cour);
                fonts.set("ZaDb", zapf);
            }
        }
        form.set("NeedAppearances", false);
    }
    Fonts { helv, cour, zapf }
}

fn set_text_appearance(doc: &mut Document, widget: &form::Widget, value: &str, size: f64, face: Face, fonts: &Fonts) {
    let (w, h) = (widget.rect.width(), widget.rect.height());
    let stream = appearance::text_stream(value, w, h, size, face, fonts.id(face));
    let ap = doc.add_object(stream);
    if let Ok(w) = doc.get_dictionary_mut(widget.id) {
        w.set("AP", dictionary! { "N" => ap });
        w.set(
            "DA",
            Object::string_literal(format!("/{} {size:.2} Tf 0 g", face.resource())),
        );
    }
}

/// Writes `{{field_NN}}` into every writable field with a visible appearance.
///
/// Fields whose token would need a font smaller than the policy floor are
/// demoted to small, reported, and left untouched.
pub fn stamp_placeholders(pdf: &[u8], fields: &[FieldDescriptor], policy: &SizePolicy) -> Result<Stamped, PdfError> {
    let mut doc = form::load(pdf)?;
    let (nodes, _) = form::fields(&doc);
    let mut fields = fields.to_vec();
    let mut diagnostics = Vec::new();

    let node_for = |name: &str| nodes.iter().find(|n| n.name == name);
    for f in &fields {
        if node_for(&f.name).is_none() {
            return Err(PdfError::UnknownField(f.name.clone()));
        }
    }

    // Demote until the token width (which depends on the count) is stable.
    loop {
        let writable = fields.iter().filter(|f| f.size_class == SizeClass::Writable).count();
        let probe = Token::new(writable.max(1), token_width(writable)).braced();
        let mut changed = false;
        for f in fields.iter_mut().filter(|f| f.size_class == SizeClass::Writable) {
            let node = node_for(&f.name).expect("checked above");
            let smallest = node
                .widgets
                .iter()
                .map(|w| TOKEN_FACE.fit(&probe, w.rect.width(), w.rect.height()))
                .fold(f64::INFINITY, f64::min);
            if smallest < policy.font_floor_pts {
                f.size_class = SizeClass::Small;
                changed = true;
                diagnostics.push(format!(
                    "field '{}' is too small for a legible token ({smallest:.1} pt < {} pt); treated as small",
                    f.name, policy.font_floor_pts
                ));
            }
        }
        if !changed {
            break;
        }
    }

    let writable: Vec<&FieldDescriptor> = fields.iter().filter(|f| f.size_class == SizeClass::Writable).collect();
    let width = token_width(writable.len());
    let mut map = PlaceholderMap::default();
    if writable.is_empty() {
        return Ok(Stamped {
            pdf: pdf.to_vec(),
            map,
            fields,
            diagnostics,
        });
    }

    let fonts = ensure_fonts(&mut doc);
    for (i, f) in writable.iter().enumerate() {
        let token = Token::new(i + 1, width);
        let node = node_for(&f.name).expect("checked above");
        let shown = token.braced();
        if let Ok(dict) = doc.get_dictionary_mut(node.id) {
            dict.set("V", text::encode(&shown));
        }
        for w in &node.widgets {
            let size = TOKEN_FACE.fit(&shown, w.rect.width(), w.rect.height());
            set_text_appearance(&mut doc, w, &shown, size, TOKEN_FACE, &fonts);
        }
        if node.widgets.len() > 1 {
            diagnostics.push(format!(
                "field '{}': {} widgets stamped with {}",
                f.name,
                node.widgets.len(),
                shown
            ));
        }
        map.entries.push(PlaceholderEntry {
            token,
            field: f.name.clone(),
        });
    }

    Ok(Stamped {
        pdf: save(&mut doc)?,
        map,
        fields,
        diagnostics,
    })
}

/// A field value: text for text and choice fields, a flag for checkboxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Bool(bool),
    Text(String),
}

impl FieldValue {
    fn type_name(&self) -> &'static str {
        match self {
            FieldValue::Bool(_) => "a boolean",
            FieldValue::Text(_) => "text",
        }
    }
}

const FILL_MIN_FONT: f64 = 4.0;

/// Sets field values and regenerates their appearances.
pub fn fill_fields(pdf: &[u8], answers: &BTreeMap<String, FieldValue>) -> Result<Vec<u8>, PdfError> {
    let mut doc = form::load(pdf)?;
    let (nodes, _) = form::fields(&doc);

    let mut plan = Vec::new();
    for (name, value) in answers {
        let node = nodes
            .iter()
            .find(|n| &n.name == name)
            .ok_or_else(|| PdfError::UnknownField(name.clone()))?;
        let ok = matches!(
            (node.kind, value),
            (FieldKind::Text | FieldKind::Choice, FieldValue::Text(_))
                | (FieldKind::Checkbox, FieldValue::Bool(_))
                | (FieldKind::Radio, _)
        );
        if !ok {
            return Err(PdfError::TypeMismatch {
                field: name.clone(),
                kind: node.kind,
                given: value.type_name(),
            });
        }
        plan.push((node, value));
    }
    if plan.is_empty() {
        return Ok(pdf.to_vec());
    }

    let fonts = ensure_fonts(&mut doc);
    for (node, value) in plan {
        match (node.kind, value) {
            (FieldKind::Text | FieldKind::Choice, FieldValue::Text(s)) => {
                if let Ok(dict) = doc.get_dictionary_mut(node.id) {
                    dict.set("V", text::encode(s));
                }
                for w in &node.widgets {
                    let size = appearance::fit_font_size(s, w.rect.width(), w.rect.height()).max(FILL_MIN_FONT);
                    set_text_appearance(&mut doc, w, s, size, Face::Helvetica, &fonts);
                }
            }
            (FieldKind::Checkbox, FieldValue::Bool(on)) => {
                set_checkbox(&mut doc, node, *on, &fonts);
            }
            (FieldKind::Radio, v) => set_radio(&mut doc, node, v)?,
            _ => unreachable!("checked above"),
        }
    }
    save(&mut doc)
}

fn set_checkbox(doc: &mut Document, node: &form::FieldNode, on: bool, fonts: &Fonts) {
    let mut state = None;
    for w in &node.widgets {
        let mut states = form::on_states(doc, w.id);
        if states.is_empty() {
            let (yes, off) = appearance::checkbox_streams(w.rect.width(), w.rect.height(), fonts.zapf);
            let yes = doc.add_object(yes);
            let off = doc.add_object(off);
            if let Ok(d) = doc.get_dictionary_mut(w.id) {
                d.set("AP", dictionary! { "N" => dictionary! { "Yes" => yes, "Off" => off } });
            }
            states.push("Yes".into());
        }
        let name = if on { states[0].clone() } else { "Off".into() };
        if let Ok(d) = doc.get_dictionary_mut(w.id) {
            d.set("AS", Object::Name(name.clone().into_bytes()));
        }
        state.get_or_insert(name);
    }
    if let Ok(d) = doc.get_dictionary_mut(node.id) {
        let v = state.unwrap_or_else(|| "Off".into());
        d.set("V", Object::Name(v.into_bytes()));
    }
}

fn set_radio(doc: &mut Document, node: &form::FieldNode, value: &FieldValue) -> Result<(), PdfError> {
    let options: Vec<Vec<String>> = node.widgets.iter().map(|w| form::on_states(doc, w.id)).collect();
    let all: Vec<&String> = options.iter().flatten().collect();
    let choice = match value {
        FieldValue::Bool(false) => "Off".to_string(),
        FieldValue::Bool(true) if all.len() == 1 => all[0].clone(),
        FieldValue::Text(s) if all.contains(&s) => s.clone(),
        other => {
            return Err(PdfError::TypeMismatch {
                field: node.name.clone(),
                kind: FieldKind::Radio,
                given: other.type_name(),
            });
        }
    };
    for (w, opts) in node.widgets.iter().zip(&options) {
        let state = if opts.contains(&choice) {
            choice.clone()
        } else {
            "Off".into()
        };
        if let Ok(d) = doc.get_dictionary_mut(w.id) {
            d.set("AS", Object::Name(state.into_bytes()));
        }
    }
    if let Ok(d) = doc.get_dictionary_mut(node.id) {
        d.set("V", Object::Name(choice.into_bytes()));
    }
    Ok(())
}

/// Current field values. Text fields without a value are omitted; checkboxes
/// always report a flag.
pub fn read_field_values(pdf: &[u8]) -> Result<BTreeMap<String, FieldValue>, PdfError> {
    let doc = form::load(pdf)?;
    let (nodes, _) = form::fields(&doc);
    let mut out = BTreeMap::new();
    for node in nodes {
        let v = doc
            .get_dictionary(node.id)
            .ok()
            .and_then(|d| d.get(b"V").ok())
            .and_then(|v| doc.dereference(v).ok().map(|(_, o)| o.clone()));
        let value = match (node.kind, v) {
            (FieldKind::Checkbox, Some(Object::Name(n))) => Some(FieldValue::Bool(n != b"Off")),
            (FieldKind::Checkbox, _) => Some(FieldValue::Bool(false)),
            (FieldKind::Radio, Some(Object::Name(n))) if n != b"Off" => {
                Some(FieldValue::Text(String::from_utf8_lossy(&n).into_owned()))
            }
            (FieldKind::Radio, _) => Some(FieldValue::Bool(false)),
            (_, Some(obj)) => text::object_text(&obj).map(FieldValue::Text),
            (_, None) => None,
        };
        if let Some(v) = value {
            out.insert(node.name, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::pdf::{FieldSpec, FormBuilder, form14};

    fn field(kind: FieldKind, w: f64, h: f64) -> FieldDescriptor {
        FieldDescriptor {
            name: "f".into(),
            kind,
            page: 0,
            bbox: Rect::new(0.0, 0.0, w, h),
            size_class: SizeClass::Writable,
            widget_count: 1,
            options: vec![],
        }
    }

    #[test]
    fn size_classes() {
        let p = SizePolicy::default();
        assert_eq!(
            classify_size(&field(FieldKind::Checkbox, 12.0, 12.0), &p),
            SizeClass::Small
        );
        assert_eq!(
            classify_size(&field(FieldKind::Text, 200.0, 18.0), &p),
            SizeClass::Writable
        );
        assert_eq!(classify_size(&field(FieldKind::Text, 10.0, 10.0), &p), SizeClass::Small);
        // 20 x 15: both dimensions pass, area 300 < 400.
        assert_eq!(classify_size(&field(FieldKind::Text, 20.0, 15.0), &p), SizeClass::Small);
    }

    #[test]
    fn tokens_parse_and_pad() {
        assert_eq!(Token::new(3, 2).to_string(), "{{field_03}}");
        assert_eq!(Token::new(1, 3).name(), "field_001");
        assert_eq!("{{field_07}}".parse::<Token>().unwrap().digits(), "07");
        assert!("field_x1".parse::<Token>().is_err());
        assert_eq!(token_width(9), 2);
        assert_eq!(token_width(120), 3);
    }

    #[test]
    fn enumerates_fixture_in_reading_order() {
        let list = enumerate_fields(&form14()).unwrap();
        assert_eq!(list.fields.len(), 14);
        let text = list.fields.iter().filter(|f| f.kind == FieldKind::Text).count();
        let boxes = list.fields.iter().filter(|f| f.kind == FieldKind::Checkbox).count();
        assert_eq!((text, boxes), (10, 4));
        for pair in list.fields.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(
                a.page < b.page
                    || (a.page == b.page
                        && (a.bbox.y1 > b.bbox.y1 || (a.bbox.y1 == b.bbox.y1 && a.bbox.x0 <= b.bbox.x0)))
            );
        }
        assert!(list.fields.iter().any(|f| f.page == 1));
    }

    #[test]
    fn flat_pdf_has_no_fields() {
        let pdf = FormBuilder::new()
            .page(|p| p.text(72.0, 700.0, 12.0, "No form here"))
            .build();
        let list = enumerate_fields(&pdf).unwrap();
        assert!(list.fields.is_empty());
        assert_eq!(list.diagnostics.len(), 1);
    }

    #[test]
    fn garbage_is_not_pdf() {
        assert!(matches!(enumerate_fields(b"hello"), Err(PdfError::NotPdf(_))));
    }

    #[test]
    fn stamping_numbers_writable_fields() {
        let pdf = form14();
        let fields = enumerate_fields(&pdf).unwrap().fields;
        let stamped = stamp_placeholders(&pdf, &fields, &SizePolicy::default()).unwrap();
        assert_eq!(stamped.map.len(), 10);
        assert_eq!(stamped.map.entries[0].token.name(), "field_01");
        let values = read_field_values(&stamped.pdf).unwrap();
        for e in &stamped.map.entries {
            assert_eq!(values[&e.field], FieldValue::Text(e.token.braced()));
        }
        // Checkboxes untouched.
        assert_eq!(values.values().filter(|v| **v == FieldValue::Bool(false)).count(), 4);
    }

    #[test]
    fn stamping_is_idempotent() {
        let pdf = form14();
        let policy = SizePolicy::default();
        let first = stamp_placeholders(&pdf, &enumerate_fields(&pdf).unwrap().fields, &policy).unwrap();
        let again_fields = enumerate_fields(&first.pdf).unwrap().fields;
        let second = stamp_placeholders(&first.pdf, &again_fields, &policy).unwrap();
        assert_eq!(first.map, second.map);
    }

    #[test]
    fn no_writable_fields_leaves_pdf_alone() {
        let pdf = FormBuilder::new()
            .page(|p| p.field(FieldSpec::checkbox("only_box", 72.0, 700.0)))
            .build();
        let fields = enumerate_fields(&pdf).unwrap().fields;
        let stamped = stamp_placeholders(&pdf, &fields, &SizePolicy::default()).unwrap();
        assert!(stamped.map.is_empty());
        assert_eq!(stamped.pdf, pdf);
    }

    #[test]
    fn wide_forms_get_three_digit_tokens() {
        let pdf = FormBuilder::new()
            .page(|mut p| {
                for i in 0..120 {
                    let (col, row) = (i % 4, i / 4);
                    p = p.field(FieldSpec::text(
                        &format!("t{i:03}"),
                        20.0 + col as f64 * 145.0,
                        760.0 - row as f64 * 24.0,
                        140.0,
                        20.0,
                    ));
                }
                p
            })
            .build();
        let fields = enumerate_fields(&pdf).unwrap().fields;
        let stamped = stamp_placeholders(&pdf, &fields, &SizePolicy::default()).unwrap();
        assert_eq!(stamped.map.len(), 120);
        assert_eq!(stamped.map.entries[0].token.braced(), "{{field_001}}");
        assert_eq!(stamped.map.entries[119].token.braced(), "{{field_120}}");
    }

    #[test]
    fn tiny_text_field_is_demoted() {
        // Passes the size policy but the token cannot fit at 6 pt.
        let pdf = FormBuilder::new()
            .page(|p| {
                p.field(FieldSpec::text("narrow", 72.0, 700.0, 30.0, 20.0))
                    .field(FieldSpec::text("wide", 72.0, 650.0, 200.0, 20.0))
            })
            .build();
        let fields = enumerate_fields(&pdf).unwrap().fields;
        assert!(fields.iter().all(|f| f.size_class == SizeClass::Writable));
        let stamped = stamp_placeholders(&pdf, &fields, &SizePolicy::default()).unwrap();
        assert_eq!(stamped.map.len(), 1);
        assert_eq!(stamped.map.entries[0].field, "wide");
        assert_eq!(stamped.diagnostics.len(), 1);
        let narrow = stamped.fields.iter().find(|f| f.name == "narrow").unwrap();
        assert_eq!(narrow.size_class, SizeClass::Small);
    }

    #[test]
    fn fill_reads_back() {
        let pdf = form14();
        let answers = BTreeMap::from([
            ("first_name".to_string(), FieldValue::Text("Ashley Arnold".into())),
            ("zip".to_string(), FieldValue::Text("02108".into())),
            ("jury_trial".to_string(), FieldValue::Bool(true)),
        ]);
        let filled = fill_fields(&pdf, &answers).unwrap();
        let values = read_field_values(&filled).unwrap();
        for (k, v) in &answers {
            assert_eq!(&values[k], v);
        }
        assert_eq!(values["change_children"], FieldValue::Bool(false));
    }

    #[test]
    fn empty_fill_is_identity() {
        let pdf = form14();
        let filled = fill_fields(&pdf, &BTreeMap::new()).unwrap();
        assert_eq!(read_field_values(&filled).unwrap(), read_field_values(&pdf).unwrap());
    }

    #[test]
    fn fill_errors() {
        let pdf = form14();
        let unknown = BTreeMap::from([("nope".to_string(), FieldValue::Bool(true))]);
        assert!(matches!(fill_fields(&pdf, &unknown), Err(PdfError::UnknownField(_))));
        let wrong = BTreeMap::from([("first_name".to_string(), FieldValue::Bool(true))]);
        assert!(matches!(fill_fields(&pdf, &wrong), Err(PdfError::TypeMismatch { .. })));
        let wrong = BTreeMap::from([("jury_trial".to_string(), FieldValue::Text("yes".into()))]);
        assert!(matches!(fill_fields(&pdf, &wrong), Err(PdfError::TypeMismatch { .. })));
    }

    #[test]
    fn radio_groups_are_one_field() {
        let pdf = FormBuilder::new()
            .page(|p| {
                p.field(FieldSpec::radio(
                    "contact",
                    &[("Phone", 72.0, 700.0), ("Mail", 150.0, 700.0)],
                ))
            })
            .build();
        let fields = enumerate_fields(&pdf).unwrap().fields;
        assert_eq!(fields.len(), 1);
        assert_eq!(fields[0].kind, FieldKind::Radio);
        assert_eq!(fields[0].options, vec!["Phone", "Mail"]);
        let filled = fill_fields(
            &pdf,
            &BTreeMap::from([("contact".to_string(), FieldValue::Text("Mail".into()))]),
        )
        .unwrap();
        assert_eq!(
            read_field_values(&filled).unwrap()["contact"],
            FieldValue::Text("Mail".into())
        );
    }
}
