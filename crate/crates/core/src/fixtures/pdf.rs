//! Small AcroForm PDFs built in memory.

use lopdf::{Dictionary, Document, Object, ObjectId, Stream, dictionary};

pub const LETTER: (f64, f64) = (612.0, 792.0);
pub const CHECKBOX_SIZE: f64 = 12.0;

#[derive(Debug, Clone)]
pub enum Shape {
    Text {
        width: f64,
        height: f64,
    },
    Checkbox,
    /// Export value and lower-left corner of each button.
    Radio(Vec<(String, f64, f64)>),
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub shape: Shape,
}

impl FieldSpec {
    pub fn text(name: &str, x: f64, y: f64, width: f64, height: f64) -> Self {
        Self {
            name: name.into(),
            x,
            y,
            shape: Shape::Text { width, height },
        }
    }

    pub fn checkbox(name: &str, x: f64, y: f64) -> Self {
        Self {
            name: name.into(),
            x,
            y,
            shape: Shape::Checkbox,
        }
    }

    pub fn radio(name: &str, buttons: &[(&str, f64, f64)]) -> Self {
        Self {
            name: name.into(),
            x: buttons.first().map_or(0.0, |b| b.1),
            y: buttons.first().map_or(0.0, |b| b.2),
            shape: Shape::Radio(buttons.iter().map(|(v, x, y)| (v.to_string(), *x, *y)).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TextSpec {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct PageBuilder {
    pub texts: Vec<TextSpec>,
    pub fields: Vec<FieldSpec>,
}

impl PageBuilder {
    pub fn text(mut self, x: f64, y: f64, size: f64, text: &str) -> Self {
        self.texts.push(TextSpec {
            x,
            y,
            size,
            text: text.into(),
        });
        self
    }

    pub fn field(mut self, field: FieldSpec) -> Self {
        self.fields.push(field);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct FormBuilder {
    pages: Vec<PageBuilder>,
}

fn escape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            ' '..='~' => out.push(c),
            _ => out.push('?'),
        }
    }
    out
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Object {
    Object::Array([x0, y0, x1, y1].into_iter().map(|v| Object::Real(v as f32)).collect())
}

fn button_ap(doc: &mut Document, on: &str, zapf: ObjectId) -> Dictionary {
    let bbox = || rect(0.0, 0.0, CHECKBOX_SIZE, CHECKBOX_SIZE);
    let resources = || dictionary! { "Font" => dictionary! { "ZaDb" => zapf } };
    let border = "0 G 0.5 w 0.25 0.25 11.5 11.5 re S\n";
    let yes = doc.add_object(Stream::new(
        dictionary! { "Type" => "XObject", "Subtype" => "Form", "BBox" => bbox(), "Resources" => resources() },
        format!("{border}BT /ZaDb 10 Tf 1.3 1.8 Td (4) Tj ET\n").into_bytes(),
    ));
    let off = doc.add_object(Stream::new(
        dictionary! { "Type" => "XObject", "Subtype" => "Form", "BBox" => bbox(), "Resources" => resources() },
        border.as_bytes().to_vec(),
    ));
    let mut n = Dictionary::new();
    n.set(on, yes);
    n.set("Off", off);
    dictionary! { "N" => n }
}

impl FormBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn page(mut self, f: impl FnOnce(PageBuilder) -> PageBuilder) -> Self {
        self.pages.push(f(PageBuilder::default()));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut doc = Document::with_version("1.7");
        let pages_id = doc.new_object_id();
        let helv = doc.add_object(dictionary! {
            "Type" => "Font",
            "Subtype" => "Type1",
            "BaseFont" => "Helvetica",
            "Encoding" => "WinAnsiEncoding",
        });
        let zapf = doc.add_object(dictionary! {
            "Type" => "Font",
            "Subtype" => "Type1",
            "BaseFont" => "ZapfDingbats",
        });

        let mut kids = Vec::new();
        let mut fields = Vec::new();
        for page in &self.pages {
            let page_id = doc.new_object_id();
            let mut content = String::new();
            for t in &page.texts {
                content.push_str(&format!(
                    "BT /F1 {} Tf {} {} Td ({}) Tj ET\n",
                    t.size,
                    t.x,
                    t.y,
                    escape(&t.text)
                ));
            }
            // Thin outlines so text boxes are visible when rendered.
            for f in &page.fields {
                if let Shape::Text { width, height } = f.shape {
                    content.push_str(&format!("0.6 G 0.5 w {} {} {} {} re S\n", f.x, f.y, width, height));
                }
            }
            let content_id = doc.add_object(Stream::new(dictionary! {}, content.into_bytes()));

            let mut annots = Vec::new();
            for f in &page.fields {
                match &f.shape {
                    Shape::Text { width, height } => {
                        let id = doc.add_object(dictionary! {
                            "Type" => "Annot",
                            "Subtype" => "Widget",
                            "FT" => "Tx",
                            "T" => Object::string_literal(f.name.clone()),
                            "Rect" => rect(f.x, f.y, f.x + width, f.y + height),
                            "F" => 4,
                            "P" => page_id,
                            "DA" => Object::string_literal("/Helv 0 Tf 0 g"),
                        });
                        annots.push(id.into());
                        fields.push(id.into());
                    }
                    Shape::Checkbox => {
                        let ap = button_ap(&mut doc, "Yes", zapf);
                        let id = doc.add_object(dictionary! {
                            "Type" => "Annot",
                            "Subtype" => "Widget",
                            "FT" => "Btn",
                            "T" => Object::string_literal(f.name.clone()),
                            "Rect" => rect(f.x, f.y, f.x + CHECKBOX_SIZE, f.y + CHECKBOX_SIZE),
                            "F" => 4,
                            "P" => page_id,
                            "V" => "Off",
                            "AS" => "Off",
                            "AP" => ap,
                        });
                        annots.push(id.into());
                        fields.push(id.into());
                    }
                    Shape::Radio(buttons) => {
                        let parent = doc.new_object_id();
                        let mut widgets = Vec::new();
                        for (value, x, y) in buttons {
                            let ap = button_ap(&mut doc, value, zapf);
                            let id = doc.add_object(dictionary! {
                                "Type" => "Annot",
                                "Subtype" => "Widget",
                                "Parent" => parent,
                                "Rect" => rect(*x, *y, x + CHECKBOX_SIZE, y + CHECKBOX_SIZE),
                                "F" => 4,
                                "P" => page_id,
                                "AS" => "Off",
                                "AP" => ap,
                            });
                            annots.push(id.into());
                            widgets.push(Object::from(id));
                        }
                        doc.objects.insert(
                            parent,
                            Object::Dictionary(dictionary! {
                                "FT" => "Btn",
                                "Ff" => 1i64 << 15,
                                "T" => Object::string_literal(f.name.clone()),
                                "V" => "Off",
                                "Kids" => widgets,
                            }),
                        );
                        fields.push(parent.into());
                    }
                }
            }

            doc.objects.insert(
                page_id,
                Object::Dictionary(dictionary! {
                    "Type" => "Page",
                    "Parent" => pages_id,
                    "MediaBox" => rect(0.0, 0.0, LETTER.0, LETTER.1),
                    "Contents" => content_id,
                    "Resources" => dictionary! { "Font" => dictionary! { "F1" => helv } },
                    "Annots" => annots,
                }),
            );
            kids.push(Object::from(page_id));
        }

        let count = kids.len() as i64;
        doc.objects.insert(
            pages_id,
            Object::Dictionary(dictionary! { "Type" => "Pages", "Kids" => kids, "Count" => count }),
        );
        let mut catalog = dictionary! { "Type" => "Catalog", "Pages" => pages_id };
        if !fields.is_empty() {
            let form = doc.add_object(dictionary! {
                "Fields" => fields,
                "DA" => Object::string_literal("/Helv 0 Tf 0 g"),
                "DR" => dictionary! { "Font" => dictionary! { "Helv" => helv, "ZaDb" => zapf } },
            });
            catalog.set("AcroForm", form);
        }
        let catalog_id = doc.add_object(catalog);
        doc.trailer.set("Root", catalog_id);

        let mut out = Vec::new();
        doc.save_to(&mut out).expect("in-memory PDF write");
        out
    }
}

const LABEL_X: f64 = 72.0;
const BOX_X: f64 = 200.0;
const BOX_W: f64 = 300.0;
const BOX_H: f64 = 20.0;

/// Text field name, label and baseline of the label, per page.
pub const FORM14_TEXT: [(u32, &str, &str, f64); 10] = [
    (0, "first_name", "First name", 676.0),
    (0, "last_name", "Last name", 646.0),
    (0, "street", "Street address", 616.0),
    (0, "city", "City or town", 586.0),
    (0, "state", "State", 556.0),
    (0, "zip", "Zip code", 526.0),
    (0, "phone", "Phone number", 496.0),
    (1, "employer", "Employer name", 676.0),
    (1, "monthly_income", "Monthly income", 646.0),
    (1, "signature_date", "Date signed", 616.0),
];

/// Checkbox name, lower-left corner and nearby text, per page.
pub const FORM14_BOXES: [(u32, &str, f64, f64); 4] = [
    (0, "jury_trial", LABEL_X, 430.0),
    (0, "change_children", LABEL_X, 400.0),
    (1, "office_received", 480.0, 300.0),
    (1, "office_filed", 520.0, 300.0),
];

/// A two-page form with ten text fields and four checkboxes. The first two
/// checkboxes have a label to their right; the last two sit far from any text.
pub fn form14() -> Vec<u8> {
    let text_fields = |page: u32, mut p: PageBuilder| {
        for (pg, name, label, y) in FORM14_TEXT {
            if pg == page {
                p = p
                    .text(LABEL_X, y, 11.0, label)
                    .field(FieldSpec::text(name, BOX_X, y - 5.0, BOX_W, BOX_H));
            }
        }
        p
    };
    FormBuilder::new()
        .page(|p| {
            let p = p.text(LABEL_X, 730.0, 16.0, "Complaint for Modification");
            let p = text_fields(0, p)
                .text(LABEL_X + 20.0, 432.0, 11.0, "Request a jury trial")
                .text(LABEL_X + 20.0, 402.0, 11.0, "Change custody of the children");
            FORM14_BOXES
                .iter()
                .filter(|b| b.0 == 0)
                .fold(p, |p, b| p.field(FieldSpec::checkbox(b.1, b.2, b.3)))
        })
        .page(|p| {
            let p = p.text(LABEL_X, 730.0, 16.0, "Financial Information");
            let p = text_fields(1, p).text(LABEL_X, 302.0, 11.0, "Office use only:");
            FORM14_BOXES
                .iter()
                .filter(|b| b.0 == 1)
                .fold(p, |p, b| p.field(FieldSpec::checkbox(b.1, b.2, b.3)))
        })
        .build()
}
