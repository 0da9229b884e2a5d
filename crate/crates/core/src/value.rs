//! Runtime values: primitive attribute values, domain objects, and the
//! binding values held in an execution context.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::syntax::ast::BuiltinType;

pub type ObjectId = String;

/// A primitive attribute value. `String`, `Text`, `Email`, and `Date`
/// attributes all hold [`PrimValue::Str`]; their format is checked against
/// the declared type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrimValue {
    Bool(bool),
    Int(i64),
    Decimal(f64),
    Str(String),
}

impl PrimValue {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn email_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[^@\s]+@[^@\s]+\.[^@\s.]+$").unwrap())
}

fn decimal_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^-?[0-9]+(\.[0-9]+)?$").unwrap())
}

pub fn is_valid_email(text: &str) -> bool {
    email_pattern().is_match(text)
}

pub fn is_valid_date(text: &str) -> bool {
    text.len() == 10 && NaiveDate::parse_from_str(text, "%Y-%m-%d").is_ok()
}

/// Checks `value` against `ty`, widening integers to decimals where needed.
pub fn conform(ty: BuiltinType, value: PrimValue) -> Result<PrimValue, String> {
    match (ty, value) {
        (BuiltinType::String | BuiltinType::Text, v @ PrimValue::Str(_)) => Ok(v),
        (BuiltinType::Email, PrimValue::Str(s)) => {
            if is_valid_email(&s) {
                Ok(PrimValue::Str(s))
            } else {
                Err(format!("`{s}` is not a valid email address"))
            }
        }
        (BuiltinType::Date, PrimValue::Str(s)) => {
            if is_valid_date(&s) {
                Ok(PrimValue::Str(s))
            } else {
                Err(format!("`{s}` is not an ISO-8601 date (YYYY-MM-DD)"))
            }
        }
        (BuiltinType::Int, v @ PrimValue::Int(_)) => Ok(v),
        (BuiltinType::Decimal, PrimValue::Int(i)) => Ok(PrimValue::Decimal(i as f64)),
        (BuiltinType::Decimal, PrimValue::Decimal(d)) if d.is_finite() => Ok(PrimValue::Decimal(d)),
        (BuiltinType::Bool, v @ PrimValue::Bool(_)) => Ok(v),
        (ty, v) => Err(format!("expected a {ty} value, found {}", v.to_json())),
    }
}

/// Strict conversion of submitted form text into a value of type `ty`.
pub fn parse_text(ty: BuiltinType, text: &str) -> Result<PrimValue, String> {
    match ty {
        BuiltinType::String | BuiltinType::Text | BuiltinType::Email | BuiltinType::Date => {
            conform(ty, PrimValue::Str(text.to_string()))
        }
        BuiltinType::Int => text
            .parse::<i64>()
            .map(PrimValue::Int)
            .map_err(|_| format!("`{text}` is not a whole number")),
        BuiltinType::Decimal => {
            if !decimal_pattern().is_match(text) {
                return Err(format!("`{text}` is not a decimal number (use `.` as separator)"));
            }
            text.parse::<f64>()
                .map(PrimValue::Decimal)
                .map_err(|_| format!("`{text}` is not a decimal number"))
        }
        BuiltinType::Bool => match text {
            "true" => Ok(PrimValue::Bool(true)),
            "false" => Ok(PrimValue::Bool(false)),
            _ => Err(format!("`{text}` is not `true` or `false`")),
        },
    }
}

/// Accepts either a JSON value of the right shape or its text form.
pub fn from_json(ty: BuiltinType, value: &serde_json::Value) -> Result<PrimValue, String> {
    match value {
        serde_json::Value::String(s) => parse_text(ty, s),
        serde_json::Value::Bool(b) => conform(ty, PrimValue::Bool(*b)),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                conform(ty, PrimValue::Int(i))
            } else if let Some(f) = n.as_f64() {
                conform(ty, PrimValue::Decimal(f))
            } else {
                Err(format!("number {n} is out of range"))
            }
        }
        other => Err(format!("expected a {ty} value, found {other}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainObject {
    pub class_name: String,
    pub id: ObjectId,
    pub fields: BTreeMap<String, PrimValue>,
    pub links: BTreeMap<String, Vec<ObjectId>>,
}

impl DomainObject {
    pub fn new(class_name: impl Into<String>, id: impl Into<String>) -> Self {
        DomainObject {
            class_name: class_name.into(),
            id: id.into(),
            fields: BTreeMap::new(),
            links: BTreeMap::new(),
        }
    }
}

/// A value bound to a pin or variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Value {
    Prim(PrimValue),
    Ref(ObjectId),
    /// An object created in a script and not yet saved; it lives in the
    /// context's transient objects.
    TempRef(String),
    SetOf(Vec<Value>),
}

impl Value {
    /// The object identity for `Ref`/`TempRef`.
    pub fn object_key(&self) -> Option<&str> {
        match self {
            Value::Ref(id) | Value::TempRef(id) => Some(id),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn email_and_date_formats() {
        assert!(is_valid_email("ada@uni.example"));
        assert!(!is_valid_email("not-an-email"));
        assert!(!is_valid_email("a@b"));
        assert!(is_valid_date("2012-02-29"));
        assert!(!is_valid_date("2013-02-29"));
        assert!(!is_valid_date("12.03.2012"));
    }

    #[test]
    fn decimal_text_is_strict() {
        assert_eq!(parse_text(BuiltinType::Decimal, "1.7"), Ok(PrimValue::Decimal(1.7)));
        assert_eq!(parse_text(BuiltinType::Decimal, "2"), Ok(PrimValue::Decimal(2.0)));
        assert_eq!(parse_text(BuiltinType::Decimal, "-0.5"), Ok(PrimValue::Decimal(-0.5)));
        for bad in ["abc", "1,7", "", "1.", ".5", "1e3", "-", "inf", "NaN", " 1"] {
            assert!(parse_text(BuiltinType::Decimal, bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn int_widens_to_decimal() {
        assert_eq!(conform(BuiltinType::Decimal, PrimValue::Int(3)), Ok(PrimValue::Decimal(3.0)));
        assert!(conform(BuiltinType::Int, PrimValue::Decimal(3.0)).is_err());
    }

    #[test]
    fn untagged_json_keeps_decimal_distinct() {
        let json = serde_json::to_string(&PrimValue::Decimal(2.0)).unwrap();
        assert_eq!(json, "2.0");
        let back: PrimValue = serde_json::from_str(&json).unwrap();
        assert_eq!(back, PrimValue::Decimal(2.0));
        let back: PrimValue = serde_json::from_str("2").unwrap();
        assert_eq!(back, PrimValue::Int(2));
    }
}
