//! Builds small but realistic DOCX packages.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

const CONTENT_TYPES: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types"><Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/><Default Extension="xml" ContentType="application/xml"/><Override PartName="/word/document.xml" ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml"/><Override PartName="/word/styles.xml" ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.styles+xml"/><Override PartName="/word/header1.xml" ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.header+xml"/></Types>"#;

const ROOT_RELS: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships"><Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="word/document.xml"/></Relationships>"#;

const DOC_RELS: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships"><Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/styles" Target="styles.xml"/><Relationship Id="rId2" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/header" Target="header1.xml"/><Relationship Id="rId3" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/hyperlink" Target="https://example.org/" TargetMode="External"/></Relationships>"#;

const STYLES: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<w:styles xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main"><w:style w:type="paragraph" w:default="1" w:styleId="Normal"><w:name w:val="Normal"/></w:style></w:styles>"#;

const HEADER: &str = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<w:hdr xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main"><w:p><w:r><w:t>COMMONWEALTH OF MASSACHUSETTS</w:t></w:r></w:p></w:hdr>"#;

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accumulates body XML and writes a complete package.
#[derive(Debug, Clone, Default)]
pub struct DocxBuilder {
    body: String,
}

impl DocxBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// A paragraph of runs given as `(text, run properties XML)`.
    pub fn paragraph(self, runs: &[(&str, &str)]) -> Self {
        self.styled_paragraph("", runs)
    }

    pub fn styled_paragraph(mut self, ppr: &str, runs: &[(&str, &str)]) -> Self {
        self.body.push_str("<w:p>");
        if !ppr.is_empty() {
            self.body.push_str(&format!("<w:pPr>{ppr}</w:pPr>"));
        }
        for (text, rpr) in runs {
            self.body.push_str(&run_xml(text, rpr));
        }
        self.body.push_str("</w:p>");
        self
    }

    /// A one-row table; its cells are not part of the run table.
    pub fn table(mut self, cells: &[&str]) -> Self {
        self.body.push_str("<w:tbl><w:tblPr/><w:tr>");
        for cell in cells {
            self.body.push_str(&format!(
                "<w:tc><w:p><w:r><w:t>{}</w:t></w:r></w:p></w:tc>",
                escape(cell)
            ));
        }
        self.body.push_str("</w:tr></w:tbl>");
        self
    }

    pub fn raw(mut self, xml: &str) -> Self {
        self.body.push_str(xml);
        self
    }

    pub fn document_xml(&self) -> String {
        format!(
            concat!(
                r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>"#,
                "\n",
                r#"<w:document xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main" "#,
                r#"xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">"#,
                r#"<w:body>{}<w:sectPr><w:headerReference w:type="default" r:id="rId2"/>"#,
                r#"<w:pgSz w:w="12240" w:h="15840"/></w:sectPr></w:body></w:document>"#
            ),
            self.body
        )
    }

    pub fn build(&self) -> Vec<u8> {
        package_with_document(&self.document_xml())
    }
}

pub fn run_xml(text: &str, rpr: &str) -> String {
    let props = if rpr.is_empty() {
        String::new()
    } else {
        format!("<w:rPr>{rpr}</w:rPr>")
    };
    if text.is_empty() {
        format!("<w:r>{props}</w:r>")
    } else {
        format!(r#"<w:r>{props}<w:t xml:space="preserve">{}</w:t></w:r>"#, escape(text))
    }
}

/// Zips a main document part together with fixed supporting parts.
pub fn package_with_document(document_xml: &str) -> Vec<u8> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let deflated = SimpleFileOptions::default().compression_method(CompressionMethod::Deflated);
    let parts: [(&str, &str); 6] = [
        ("[Content_Types].xml", CONTENT_TYPES),
        ("_rels/.rels", ROOT_RELS),
        ("word/document.xml", document_xml),
        ("word/_rels/document.xml.rels", DOC_RELS),
        ("word/styles.xml", STYLES),
        ("word/header1.xml", HEADER),
    ];
    for (name, body) in parts {
        zip.start_file(name, deflated).expect("zip entry");
        zip.write_all(body.as_bytes()).expect("zip write");
    }
    zip.finish().expect("zip finish").into_inner()
}

/// A demand letter with placeholder styles mixed in one document.
pub fn demand_letter() -> Vec<u8> {
    DocxBuilder::new()
        .styled_paragraph(r#"<w:jc w:val="right"/>"#, &[("[DATE]", r#"<w:i/>"#)])
        .paragraph(&[("Dear ", ""), ("John Smith:", r#"<w:b/><w:sz w:val="24"/>"#)])
        .paragraph(&[
            ("I am writing to claim the return of my security deposit of ", ""),
            ("$____", r#"<w:u w:val="single"/>"#),
            (" for the apartment at ", ""),
            ("{ADDRESS}", r#"<w:highlight w:val="yellow"/>"#),
            (".", ""),
        ])
        .styled_paragraph(
            r#"<w:numPr><w:ilvl w:val="0"/><w:numId w:val="1"/></w:numPr>"#,
            &[("[Optional: if you withheld any amount, list it here]", r#"<w:i/>"#)],
        )
        .paragraph(&[("Sincerely,", "")])
        .paragraph(&[("Your name", r#"<w:color w:val="FF0000"/>"#)])
        .build()
}

/// Five structurally different documents used by round-trip checks.
pub fn corpus() -> Vec<(&'static str, Vec<u8>)> {
    let hyperlinks = DocxBuilder::new()
        .raw(concat!(
            r#"<w:p><w:r><w:t xml:space="preserve">See </w:t></w:r>"#,
            r#"<w:hyperlink r:id="rId3"><w:r><w:rPr><w:rStyle w:val="Hyperlink"/></w:rPr><w:t>the court website</w:t></w:r></w:hyperlink>"#,
            r#"<w:r><w:t xml:space="preserve"> for [COURT NAME].</w:t></w:r></w:p>"#
        ))
        .paragraph(&[("", r#"<w:b/>"#), ("after an empty run", "")])
        .build();

    let tables = DocxBuilder::new()
        .paragraph(&[("Parties", r#"<w:b/>"#)])
        .table(&["Plaintiff", "[PLAINTIFF]"])
        .paragraph(&[("Defendant: ", ""), ("[DEFENDANT]", r#"<w:i/>"#)])
        .build();

    let mixed_children = DocxBuilder::new()
        .raw(concat!(
            r#"<w:p><w:pPr><w:pStyle w:val="Normal"/></w:pPr>"#,
            r#"<w:r><w:rPr><w:rFonts w:ascii="Times New Roman"/></w:rPr><w:t>Line one</w:t><w:br/><w:t>line two</w:t><w:tab/><w:t>tabbed</w:t></w:r>"#,
            r#"<w:r><w:fldChar w:fldCharType="begin"/></w:r>"#,
            r#"<w:r><w:instrText xml:space="preserve"> PAGE </w:instrText></w:r>"#,
            r#"<w:r><w:fldChar w:fldCharType="end"/></w:r>"#,
            r#"<w:bookmarkStart w:id="0" w:name="b"/><w:r><w:t>A &amp; B &lt;x&gt; &#169;</w:t></w:r><w:bookmarkEnd w:id="0"/>"#,
            r#"</w:p><w:p/>"#
        ))
        .paragraph(&[("Name: ______", "")])
        .build();

    // Same vocabulary with a non-default namespace prefix.
    let prefixed = package_with_document(concat!(
        r#"<?xml version="1.0" encoding="UTF-8"?>"#,
        r#"<ns0:document xmlns:ns0="http://schemas.openxmlformats.org/wordprocessingml/2006/main"><ns0:body>"#,
        r#"<ns0:p><ns0:r><ns0:rPr><ns0:b/></ns0:rPr><ns0:t>Petitioner: </ns0:t></ns0:r><ns0:r><ns0:t>[NAME]</ns0:t></ns0:r></ns0:p>"#,
        r#"<ns0:p><ns0:r><ns0:t xml:space="preserve">  spaced  </ns0:t></ns0:r></ns0:p>"#,
        r#"</ns0:body></ns0:document>"#
    ));

    vec![
        ("demand_letter", demand_letter()),
        ("hyperlinks", hyperlinks),
        ("tables", tables),
        ("mixed_children", mixed_children),
        ("prefixed", prefixed),
    ]
}
