mod common;

use std::collections::BTreeMap;

use formdraft::fixtures::pdf::form14;
use formdraft::pdf::{FieldKind, FieldValue, enumerate_fields, fill_fields, read_field_values};
use proptest::prelude::*;

#[test]
fn checked_in_fixture_matches_the_builder() {
    assert_eq!(std::fs::read(common::form14_pdf()).unwrap(), form14());
}

#[test]
fn fixture_has_ten_text_fields_and_four_checkboxes() {
    let fields = enumerate_fields(&form14()).unwrap().fields;
    let count = |k: FieldKind| fields.iter().filter(|f| f.kind == k).count();
    assert_eq!((count(FieldKind::Text), count(FieldKind::Checkbox)), (10, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fill_then_read_back_is_exact(answers in common::answer_set()) {
        let template = form14();
        let filled = fill_fields(&template, &answers).unwrap();
        prop_assert_eq!(read_field_values(&filled).unwrap(), answers);
    }
}

#[test]
fn unknown_fields_and_wrong_kinds_are_refused() {
    let template = form14();
    let one = |k: &str, v: FieldValue| BTreeMap::from([(k.to_string(), v)]);
    assert!(fill_fields(&template, &one("no_such_field", FieldValue::Text("x".into()))).is_err());
    assert!(fill_fields(&template, &one("jury_trial", FieldValue::Text("x".into()))).is_err());
    assert!(fill_fields(&template, &one("zip", FieldValue::Bool(true))).is_err());
}

#[test]
fn refilling_replaces_earlier_values() {
    let template = form14();
    let first = fill_fields(
        &template,
        &BTreeMap::from([("zip".into(), FieldValue::Text("02108".into()))]),
    )
    .unwrap();
    let second = fill_fields(
        &first,
        &BTreeMap::from([("zip".into(), FieldValue::Text("10001".into()))]),
    )
    .unwrap();
    assert_eq!(
        read_field_values(&second).unwrap()["zip"],
        FieldValue::Text("10001".into())
    );
}
