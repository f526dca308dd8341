//! Inputs shared by the benchmarks.

use std::collections::BTreeMap;
use std::path::PathBuf;

use formdraft::fixtures::pdf::{FORM14_BOXES, FORM14_TEXT};
use formdraft::pdf::FieldValue;

pub fn form14_fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/form14")
}

/// A full answer set for the 14-field form.
pub fn form14_answers() -> BTreeMap<String, FieldValue> {
    let mut out = BTreeMap::new();
    for (i, f) in FORM14_TEXT.iter().enumerate() {
        out.insert(f.1.to_string(), FieldValue::Text(format!("Answer number {i}")));
    }
    for (i, b) in FORM14_BOXES.iter().enumerate() {
        out.insert(b.1.to_string(), FieldValue::Bool(i % 2 == 0));
    }
    out
}
