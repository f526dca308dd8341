//! The downloadable package: interview, template and a next-steps stub.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

use super::{InterviewError, InterviewSpec};
use crate::llm::DocMetadata;

pub const BUNDLE_INTERVIEW: &str = "data/questions/interview.yaml";
const TEMPLATES: &str = "data/templates";

/// A placeholder for the next-steps document, flagged for authoring.
pub fn next_steps_stub(metadata: &DocMetadata) -> String {
    format!(
        "# {}\n\n{}\n\n<!-- TODO: write the next steps for someone who has just downloaded this form. -->\n",
        metadata.title, metadata.description
    )
}

/// Bundle entries in the order they are written.
pub fn bundle_files(spec: &InterviewSpec, yaml: &str, template: &[u8]) -> Vec<(String, Vec<u8>)> {
    vec![
        (BUNDLE_INTERVIEW.to_string(), yaml.as_bytes().to_vec()),
        (format!("{TEMPLATES}/{}", spec.template.path), template.to_vec()),
        (
            format!("{TEMPLATES}/next_steps.md"),
            next_steps_stub(&spec.metadata).into_bytes(),
        ),
    ]
}

/// Writes a ZIP whose bytes depend only on the entries: fixed timestamps,
/// permissions and compression.
pub fn write_bundle(entries: &[(String, Vec<u8>)]) -> Result<Vec<u8>, InterviewError> {
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .compression_level(Some(6))
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let e = |e: &dyn std::fmt::Display| InterviewError::Bundle(e.to_string());
    for (name, bytes) in entries {
        zip.start_file(name.as_str(), options).map_err(|x| e(&x))?;
        zip.write_all(bytes).map_err(|x| e(&x))?;
    }
    Ok(zip.finish().map_err(|x| e(&x))?.into_inner())
}

#[cfg(test)]
mod tests {
    use std::io::Read;

    use super::*;

    #[test]
    fn bundles_are_reproducible_and_readable() {
        let entries = vec![
            ("a.txt".to_string(), b"alpha".to_vec()),
            ("dir/b.bin".to_string(), vec![0u8; 1000]),
        ];
        let one = write_bundle(&entries).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(1100));
        assert_eq!(write_bundle(&entries).unwrap(), one);
        let mut archive = zip::ZipArchive::new(Cursor::new(one)).unwrap();
        let mut s = String::new();
        archive.by_name("a.txt").unwrap().read_to_string(&mut s).unwrap();
        assert_eq!(s, "alpha");
    }
}
