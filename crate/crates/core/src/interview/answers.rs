//! Answer values, per-datatype validation and the datatype guards.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{Datatype, QuestionSpec};

/// One answer as it arrives in an answers file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Bool(bool),
    Number(serde_json::Number),
    Text(String),
}

impl Answer {
    pub fn text(s: impl Into<String>) -> Self {
        Answer::Text(s.into())
    }

    /// The boolean an answer stands for, if any.
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Answer::Bool(b) => Some(*b),
            Answer::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" => Some(true),
                "false" | "no" => Some(false),
                _ => None,
            },
            Answer::Number(_) => None,
        }
    }
}

/// How an answer is written into a document. Text is never reformatted.
impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Bool(true) => f.write_str("Yes"),
            Answer::Bool(false) => f.write_str("No"),
            Answer::Number(n) => write!(f, "{n}"),
            Answer::Text(t) => f.write_str(t),
        }
    }
}

pub type AnswerSet = BTreeMap<String, Answer>;

static EMAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^@\s]+@[^@\s.]+(\.[^@\s.]+)+$").expect("valid regex"));
static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?\d+(\.\d+)?$").expect("valid regex"));
static MONEY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?\d+(\.\d{1,2})?$").expect("valid regex"));
static ZIP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{5}(-\d{4})?$").expect("valid regex"));
static PHONE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\+?[0-9(][0-9 ().\-]*$").expect("valid regex"));

/// Checks an answer against its datatype. The error names the rule.
pub fn validate_answer(value: &Answer, datatype: Datatype) -> Result<(), String> {
    let text = match value {
        Answer::Text(t) => Some(t.as_str()),
        _ => None,
    };
    match datatype {
        Datatype::Yesno => match value.as_bool() {
            Some(_) => Ok(()),
            None => Err("yesno: expected true or false".into()),
        },
        Datatype::Number => match (value, text) {
            (Answer::Number(_), _) => Ok(()),
            (_, Some(t)) if DECIMAL.is_match(t) => Ok(()),
            _ => Err("number: expected a decimal number such as 12 or 3.5".into()),
        },
        Datatype::Currency => match (value, text) {
            (Answer::Number(n), _) if MONEY.is_match(&n.to_string()) => Ok(()),
            (_, Some(t)) if MONEY.is_match(t) => Ok(()),
            _ => Err("currency: expected an amount with at most two decimal places, such as 1250.50".into()),
        },
        Datatype::Date => {
            let t = text.ok_or("date: expected text in the form YYYY-MM-DD")?;
            let shaped = t.len() == 10 && t.as_bytes()[4] == b'-' && t.as_bytes()[7] == b'-';
            if !shaped {
                return Err("date: expected ISO 8601 form YYYY-MM-DD".into());
            }
            chrono::NaiveDate::parse_from_str(t, "%Y-%m-%d")
                .map(|_| ())
                .map_err(|_| format!("date: {t} is not a calendar date"))
        }
        Datatype::Email => match text {
            Some(t) if EMAIL.is_match(t) => Ok(()),
            _ => Err("email: expected an address such as name@example.org".into()),
        },
        Datatype::Zip => match text {
            Some(t) if ZIP.is_match(t) => Ok(()),
            Some(_) => Err("zip: expected 5 digits or 5+4 digits, such as 02108 or 02108-1234".into()),
            None => Err("zip: must be given as text so leading zeros are kept".into()),
        },
        Datatype::Phone => {
            let t = text.ok_or("phone: must be given as text so separators are kept")?;
            let digits = t.chars().filter(char::is_ascii_digit).count();
            if PHONE.is_match(t) && (7..=15).contains(&digits) {
                Ok(())
            } else {
                Err("phone: expected 7 to 15 digits with optional spaces, dashes, dots or parentheses".into())
            }
        }
        Datatype::Text | Datatype::Area => match text {
            Some(t) if !t.trim().is_empty() => Ok(()),
            Some(_) => Err(format!("{datatype}: an answer is required")),
            None => Err(format!("{datatype}: expected text")),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatatypeOverride {
    pub variable: String,
    pub from: Datatype,
    pub to: Datatype,
    pub reason: String,
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

const PHONE_WORDS: &[&str] = &["phone", "telephone", "tel", "mobile", "cell", "fax"];
const ZIP_WORDS: &[&str] = &["zip", "zipcode", "postcode", "postal"];

fn guard(variable: &str, definition: &str) -> Option<(Datatype, String)> {
    let name = words(variable);
    let def = words(definition);
    let hit = |vocab: &[&str], ws: &[String]| ws.iter().find(|w| vocab.contains(&w.as_str())).cloned();
    if let Some(w) = hit(ZIP_WORDS, &name) {
        return Some((Datatype::Zip, format!("variable name contains '{w}'")));
    }
    if let Some(w) = hit(PHONE_WORDS, &name) {
        return Some((Datatype::Phone, format!("variable name contains '{w}'")));
    }
    if let Some(w) = hit(ZIP_WORDS, &def) {
        return Some((Datatype::Zip, format!("definition mentions '{w}'")));
    }
    if let Some(w) = hit(PHONE_WORDS, &def) {
        return Some((Datatype::Phone, format!("definition mentions '{w}'")));
    }
    None
}

/// Forces phone-like and ZIP-like questions to the phone and zip datatypes,
/// which keep separators and leading zeros. Yes/no questions are left alone.
pub fn normalize_datatypes(
    questions: &mut [QuestionSpec],
    definitions: &BTreeMap<String, String>,
) -> Vec<DatatypeOverride> {
    let mut out = Vec::new();
    for q in questions.iter_mut() {
        if q.datatype == Datatype::Yesno {
            continue;
        }
        let def = definitions.get(&q.variable).map_or("", String::as_str);
        if let Some((to, reason)) = guard(&q.variable, def)
            && q.datatype != to
        {
            log::info!("{}: datatype {} changed to {to} ({reason})", q.variable, q.datatype);
            out.push(DatatypeOverride {
                variable: q.variable.clone(),
                from: q.datatype,
                to,
                reason,
            });
            q.datatype = to;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Answer {
        Answer::text(s)
    }

    fn q(variable: &str, datatype: Datatype) -> QuestionSpec {
        QuestionSpec {
            variable: variable.into(),
            prompt: "?".into(),
            datatype,
            screen_id: "s".into(),
            screen_title: "S".into(),
            help: None,
        }
    }

    #[test]
    fn validation_table() {
        let ok = [
            (t("true"), Datatype::Yesno),
            (Answer::Bool(false), Datatype::Yesno),
            (t("2024-02-29"), Datatype::Date),
            (t("a@b.org"), Datatype::Email),
            (t("3.25"), Datatype::Number),
            (Answer::Number(7.into()), Datatype::Number),
            (t("1250.50"), Datatype::Currency),
            (t("02108"), Datatype::Zip),
            (t("02108-1234"), Datatype::Zip),
            (t("555-5555"), Datatype::Phone),
            (t("(617) 555-0100"), Datatype::Phone),
            (t("x"), Datatype::Text),
        ];
        for (v, d) in ok {
            assert_eq!(validate_answer(&v, d), Ok(()), "{v:?} {d}");
        }
        let bad = [
            (t("maybe"), Datatype::Yesno, "yesno"),
            (t("2024-02-30"), Datatype::Date, "not a calendar date"),
            (t("02/03/2024"), Datatype::Date, "ISO 8601"),
            (t("a@b"), Datatype::Email, "email"),
            (t("1,000"), Datatype::Number, "number"),
            (t("10.999"), Datatype::Currency, "currency"),
            (t("0"), Datatype::Zip, "5 digits"),
            (Answer::Number(2108.into()), Datatype::Zip, "leading zeros"),
            (t("5555"), Datatype::Phone, "7 to 15 digits"),
            (t("  "), Datatype::Area, "required"),
        ];
        for (v, d, needle) in bad {
            let err = validate_answer(&v, d).unwrap_err();
            assert!(err.contains(needle), "{v:?} {d}: {err}");
        }
    }

    #[test]
    fn guards() {
        let mut qs = vec![
            q("user_phone", Datatype::Number),
            q("mailing_zip", Datatype::Number),
            q("children_count", Datatype::Number),
            q("has_phone", Datatype::Yesno),
            q("contact", Datatype::Text),
        ];
        let defs = BTreeMap::from([("contact".to_string(), "Telephone number of the clerk".to_string())]);
        let log = normalize_datatypes(&mut qs, &defs);
        let types: Vec<Datatype> = qs.iter().map(|q| q.datatype).collect();
        assert_eq!(
            types,
            [
                Datatype::Phone,
                Datatype::Zip,
                Datatype::Number,
                Datatype::Yesno,
                Datatype::Phone
            ]
        );
        assert_eq!(log.len(), 3);
        assert_eq!(log[0].from, Datatype::Number);
        // Idempotent.
        assert!(normalize_datatypes(&mut qs, &defs).is_empty());
    }

    #[test]
    fn display_keeps_text_verbatim() {
        assert_eq!(t("02108").to_string(), "02108");
        assert_eq!(Answer::Bool(true).to_string(), "Yes");
        let n: Answer = serde_json::from_str("1250.5").unwrap();
        assert_eq!(n.to_string(), "1250.5");
    }
}
