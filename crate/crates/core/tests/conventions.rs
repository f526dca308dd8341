mod common;

use formdraft::llm::{NamingConventions, has_errors, validate_variable};

#[test]
fn table_agrees_with_validator() {
    let conv = NamingConventions::default();
    let table = common::variable_table();
    assert!(table.len() >= 20);
    let mut disagreements = Vec::new();
    for (path, valid, kinds) in &table {
        let found = validate_variable(path, &conv);
        let got: Vec<_> = found.iter().map(|v| v.kind).collect();
        if has_errors(&found) == *valid || &got != kinds {
            disagreements.push(format!("{path:?}: expected {valid} {kinds:?}, got {got:?}"));
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:#?}");
}

#[test]
fn messages_name_the_path() {
    let conv = NamingConventions::default();
    for v in validate_variable("Client Name", &conv) {
        assert!(v.message.contains("Client Name"), "{}", v.message);
    }
}

#[test]
fn custom_nouns_change_the_rules() {
    let conv = NamingConventions::parse("reserved_nouns = [\"tenants\"]\nperson_attributes = [\"name\"]").unwrap();
    assert!(validate_variable("users.name", &conv).is_empty());
    assert!(has_errors(&validate_variable("tenants.name", &conv)));
    assert!(!has_errors(&validate_variable("tenants[0].rent", &conv)));
}
