//! Walking the AcroForm field tree.

use std::collections::HashMap;

use lopdf::{Dictionary, Document, Object, ObjectId};

use super::{FieldKind, PdfError, Rect, text};

const FF_RADIO: i64 = 1 << 15;
const FF_PUSHBUTTON: i64 = 1 << 16;

#[derive(Debug, Clone)]
pub(super) struct Widget {
    pub id: ObjectId,
    pub page: u32,
    pub rect: Rect,
}

/// A terminal field and the widgets that show it.
#[derive(Debug, Clone)]
pub(super) struct FieldNode {
    pub id: ObjectId,
    pub name: String,
    pub kind: FieldKind,
    pub widgets: Vec<Widget>,
}

pub(super) fn load(pdf: &[u8]) -> Result<Document, PdfError> {
    if !pdf.starts_with(b"%PDF-") && !pdf[..pdf.len().min(1024)].windows(5).any(|w| w == b"%PDF-") {
        return Err(PdfError::NotPdf("missing %PDF- header".into()));
    }
    let doc = Document::load_mem(pdf).map_err(|e| match e {
        lopdf::Error::Decryption(_) | lopdf::Error::InvalidPassword => PdfError::EncryptedPdf,
        other => PdfError::NotPdf(other.to_string()),
    })?;
    if doc.was_encrypted() || doc.is_encrypted() {
        return Err(PdfError::EncryptedPdf);
    }
    if doc.get_pages().is_empty() {
        return Err(PdfError::NotPdf("document has no pages".into()));
    }
    Ok(doc)
}

fn deref<'a>(doc: &'a Document, obj: &'a Object) -> Option<&'a Object> {
    doc.dereference(obj).ok().map(|(_, o)| o)
}

pub(super) fn acroform_id(doc: &Document) -> Option<ObjectId> {
    doc.catalog().ok()?.get(b"AcroForm").ok()?.as_reference().ok()
}

/// The AcroForm dictionary, whether stored inline in the catalog or by reference.
pub(super) fn acroform(doc: &Document) -> Option<&Dictionary> {
    let obj = doc.catalog().ok()?.get(b"AcroForm").ok()?;
    deref(doc, obj)?.as_dict().ok()
}

fn number(doc: &Document, obj: &Object) -> Option<f64> {
    deref(doc, obj)?.as_float().ok().map(f64::from)
}

pub(super) fn rect_of(doc: &Document, dict: &Dictionary) -> Option<Rect> {
    let arr = deref(doc, dict.get(b"Rect").ok()?)?.as_array().ok()?;
    if arr.len() != 4 {
        return None;
    }
    let v: Vec<f64> = arr.iter().map(|o| number(doc, o)).collect::<Option<_>>()?;
    Some(Rect::new(v[0], v[1], v[2], v[3]))
}

fn page_index(doc: &Document) -> (HashMap<ObjectId, u32>, HashMap<ObjectId, u32>) {
    let mut pages = HashMap::new();
    let mut annots = HashMap::new();
    for (n, page_id) in doc.get_pages() {
        let index = n - 1;
        pages.insert(page_id, index);
        if let Ok(page) = doc.get_dictionary(page_id)
            && let Ok(obj) = page.get(b"Annots")
            && let Some(Ok(arr)) = deref(doc, obj).map(Object::as_array)
        {
            for a in arr {
                if let Ok(id) = a.as_reference() {
                    annots.insert(id, index);
                }
            }
        }
    }
    (pages, annots)
}

#[derive(Clone, Default)]
struct Inherited {
    ft: Option<Vec<u8>>,
    ff: i64,
}

fn kind_of(inh: &Inherited) -> FieldKind {
    match inh.ft.as_deref() {
        Some(b"Tx") => FieldKind::Text,
        Some(b"Btn") if inh.ff & FF_PUSHBUTTON != 0 => FieldKind::Other,
        Some(b"Btn") if inh.ff & FF_RADIO != 0 => FieldKind::Radio,
        Some(b"Btn") => FieldKind::Checkbox,
        Some(b"Ch") => FieldKind::Choice,
        Some(b"Sig") => FieldKind::Signature,
        _ => FieldKind::Other,
    }
}

struct Walker<'a> {
    doc: &'a Document,
    pages: HashMap<ObjectId, u32>,
    annots: HashMap<ObjectId, u32>,
    out: Vec<FieldNode>,
    seen: std::collections::HashSet<ObjectId>,
}

impl Walker<'_> {
    fn widget(&self, id: ObjectId, dict: &Dictionary) -> Option<Widget> {
        let rect = rect_of(self.doc, dict)?;
        let page = dict
            .get(b"P")
            .ok()
            .and_then(|p| p.as_reference().ok())
            .and_then(|p| self.pages.get(&p).copied())
            .or_else(|| self.annots.get(&id).copied())
            .unwrap_or(0);
        Some(Widget { id, page, rect })
    }

    fn visit(&mut self, id: ObjectId, parent_name: &str, parent: &Inherited) {
        if !self.seen.insert(id) {
            return;
        }
        let Ok(dict) = self.doc.get_dictionary(id) else {
            return;
        };
        let partial = dict.get(b"T").ok().and_then(text::object_text);
        let name = match (&partial, parent_name.is_empty()) {
            (Some(p), true) => p.clone(),
            (Some(p), false) => format!("{parent_name}.{p}"),
            (None, _) => parent_name.to_string(),
        };
        let mut inh = parent.clone();
        if let Ok(ft) = dict.get(b"FT").and_then(Object::as_name) {
            inh.ft = Some(ft.to_vec());
        }
        if let Some(ff) = dict.get(b"Ff").ok().and_then(|o| o.as_i64().ok()) {
            inh.ff = ff;
        }

        let kids: Vec<ObjectId> = dict
            .get(b"Kids")
            .ok()
            .and_then(|k| deref(self.doc, k))
            .and_then(|k| k.as_array().ok())
            .map(|arr| arr.iter().filter_map(|o| o.as_reference().ok()).collect())
            .unwrap_or_default();

        let mut widgets = Vec::new();
        if kids.is_empty() {
            if let Some(w) = self.widget(id, dict) {
                widgets.push(w);
            }
        } else {
            for kid in kids {
                let Ok(kd) = self.doc.get_dictionary(kid) else {
                    continue;
                };
                if kd.has(b"T") {
                    self.visit(kid, &name, &inh);
                } else if let Some(w) = self.widget(kid, kd) {
                    widgets.push(w);
                }
            }
        }
        if !widgets.is_empty() {
            widgets.sort_by(|a, b| reading_order(a.page, &a.rect, b.page, &b.rect));
            self.out.push(FieldNode {
                id,
                name,
                kind: kind_of(&inh),
                widgets,
            });
        }
    }
}

pub(super) fn reading_order(pa: u32, ra: &Rect, pb: u32, rb: &Rect) -> std::cmp::Ordering {
    pa.cmp(&pb).then(rb.y1.total_cmp(&ra.y1)).then(ra.x0.total_cmp(&rb.x0))
}

/// Terminal fields in reading order, plus diagnostics.
pub(super) fn fields(doc: &Document) -> (Vec<FieldNode>, Vec<String>) {
    let mut diagnostics = Vec::new();
    let Some(form) = acroform(doc) else {
        diagnostics.push("no AcroForm dictionary; the PDF has no form layer".to_string());
        return (Vec::new(), diagnostics);
    };
    if form.has(b"XFA") {
        diagnostics.push("XFA data present and ignored; only AcroForm fields are read".into());
    }
    let roots: Vec<ObjectId> = form
        .get(b"Fields")
        .ok()
        .and_then(|f| deref(doc, f))
        .and_then(|f| f.as_array().ok())
        .map(|arr| arr.iter().filter_map(|o| o.as_reference().ok()).collect())
        .unwrap_or_default();
    let (pages, annots) = page_index(doc);
    let mut walker = Walker {
        doc,
        pages,
        annots,
        out: Vec::new(),
        seen: Default::default(),
    };
    for root in roots {
        walker.visit(root, "", &Inherited::default());
    }
    let mut out = walker.out;
    out.sort_by(|a, b| {
        let (wa, wb) = (&a.widgets[0], &b.widgets[0]);
        reading_order(wa.page, &wa.rect, wb.page, &wb.rect).then_with(|| a.name.cmp(&b.name))
    });
    for node in &out {
        if node.widgets.len() > 1 && node.kind != FieldKind::Radio {
            diagnostics.push(format!(
                "field '{}' has {} widgets; each widget gets the same value",
                node.name,
                node.widgets.len()
            ));
        }
    }
    (out, diagnostics)
}

/// Export values of a button widget: the non-`Off` keys of its normal appearance.
pub(super) fn on_states(doc: &Document, widget: ObjectId) -> Vec<String> {
    let Ok(dict) = doc.get_dictionary(widget) else {
        return Vec::new();
    };
    let normal = dict
        .get(b"AP")
        .ok()
        .and_then(|ap| deref(doc, ap))
        .and_then(|ap| ap.as_dict().ok())
        .and_then(|ap| ap.get(b"N").ok())
        .and_then(|n| deref(doc, n))
        .and_then(|n| n.as_dict().ok());
    normal
        .map(|n| {
            n.iter()
                .map(|(k, _)| String::from_utf8_lossy(k).into_owned())
                .filter(|k| k != "Off")
                .collect()
        })
        .unwrap_or_default()
}

pub(super) fn choice_options(doc: &Document, field: ObjectId) -> Vec<String> {
    let Ok(dict) = doc.get_dictionary(field) else {
        return Vec::new();
    };
    let Some(Ok(arr)) = dict.get(b"Opt").ok().and_then(|o| deref(doc, o)).map(Object::as_array) else {
        return Vec::new();
    };
    arr.iter()
        .filter_map(|o| match deref(doc, o)? {
            Object::Array(pair) => pair.first().and_then(text::object_text),
            other => text::object_text(other),
        })
        .collect()
}
