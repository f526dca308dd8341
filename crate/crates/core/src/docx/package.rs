use std::io::{Cursor, Read, Write};

use zip::write::SimpleFileOptions;
use zip::{ZipArchive, ZipWriter};

use super::DocxError;

const OFFICE_DOCUMENT_REL: &str = "http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument";
const OFFICE_DOCUMENT_REL_STRICT: &str = "http://purl.oclc.org/ooxml/officeDocument/relationships/officeDocument";

pub(super) struct Package<'a> {
    bytes: &'a [u8],
    main_part: String,
}

fn not_docx(err: impl std::fmt::Display) -> DocxError {
    DocxError::NotDocx(err.to_string())
}

fn read_entry(archive: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Option<Vec<u8>> {
    let mut file = archive.by_name(name).ok()?;
    let mut buf = Vec::with_capacity(file.size() as usize);
    file.read_to_end(&mut buf).ok()?;
    Some(buf)
}

/// Finds the main document part through the package relationships.
fn locate_main_part(archive: &mut ZipArchive<Cursor<&[u8]>>) -> Option<String> {
    let rels = read_entry(archive, "_rels/.rels")?;
    let rels = String::from_utf8(rels).ok()?;
    let mut reader = quick_xml::Reader::from_str(&rels);
    loop {
        match reader.read_event().ok()? {
            quick_xml::events::Event::Empty(e) | quick_xml::events::Event::Start(e)
                if e.local_name().as_ref() == "Relationship" =>
            {
                let mut kind = None;
                let mut target = None;
                for attr in e.attributes().flatten() {
                    let value = attr
                        .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                        .ok()?
                        .into_owned();
                    match attr.key.as_ref() {
                        "Type" => kind = Some(value),
                        "Target" => target = Some(value),
                        _ => {}
                    }
                }
                if matches!(kind.as_deref(), Some(OFFICE_DOCUMENT_REL | OFFICE_DOCUMENT_REL_STRICT)) {
                    return target.map(|t| t.trim_start_matches('/').to_string());
                }
            }
            quick_xml::events::Event::Eof => return None,
            _ => {}
        }
    }
}

impl<'a> Package<'a> {
    pub fn open(bytes: &'a [u8]) -> Result<Self, DocxError> {
        let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(not_docx)?;
        let main_part = locate_main_part(&mut archive)
            .filter(|p| archive.index_for_name(p).is_some())
            .or_else(|| {
                archive
                    .index_for_name("word/document.xml")
                    .map(|_| "word/document.xml".to_string())
            })
            .ok_or_else(|| not_docx("no main document part"))?;
        Ok(Self { bytes, main_part })
    }

    fn archive(&self) -> Result<ZipArchive<Cursor<&'a [u8]>>, DocxError> {
        ZipArchive::new(Cursor::new(self.bytes)).map_err(not_docx)
    }

    pub fn main_xml(&self) -> Result<String, DocxError> {
        let mut archive = self.archive()?;
        let raw = read_entry(&mut archive, &self.main_part)
            .ok_or_else(|| not_docx(format!("cannot read {}", self.main_part)))?;
        String::from_utf8(raw).map_err(|e| DocxError::MalformedXml(e.to_string()))
    }

    /// Writes a copy of the package with the main part replaced. Every other
    /// entry is copied without recompression.
    pub fn replace_main(&self, xml: &[u8]) -> Result<Vec<u8>, DocxError> {
        let mut archive = self.archive()?;
        let mut writer = ZipWriter::new(Cursor::new(Vec::with_capacity(self.bytes.len())));
        for i in 0..archive.len() {
            let file = archive.by_index_raw(i).map_err(not_docx)?;
            if file.name().map_err(not_docx)? == self.main_part {
                let options = SimpleFileOptions::default()
                    .compression_method(file.compression())
                    .last_modified_time(file.last_modified().unwrap_or_default());
                let name = file.name().map_err(not_docx)?.to_string();
                drop(file);
                writer.start_file(name, options).map_err(not_docx)?;
                writer.write_all(xml).map_err(not_docx)?;
            } else {
                writer.raw_copy_file(file).map_err(not_docx)?;
            }
        }
        Ok(writer.finish().map_err(not_docx)?.into_inner())
    }
}
