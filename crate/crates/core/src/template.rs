//! Declarative metadata templates.
//!
//! A template is a JSON document with top-level keys `id`, `name`, `version`
//! and `fields`. Each field describes one spreadsheet column: its datatype,
//! whether a value is required, and optional constraints (numeric range,
//! regular expression, controlled value set).

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use regex_automata::meta::Regex;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::TemplateError;
use crate::PROVENANCE_COLUMN;

/// Column datatypes understood by the validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Datatype {
    Text,
    Integer,
    Decimal,
    Boolean,
    Date,
    Controlled,
}

impl Datatype {
    pub const ALL: [Datatype; 6] = [
        Datatype::Text,
        Datatype::Integer,
        Datatype::Decimal,
        Datatype::Boolean,
        Datatype::Date,
        Datatype::Controlled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Text => "text",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Boolean => "boolean",
            Datatype::Date => "date",
            Datatype::Controlled => "controlled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Datatype::Integer | Datatype::Decimal)
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive numeric bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// Where a controlled field gets its permissible values from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSetBinding {
    Inline { labels: Vec<String> },
    Terminology { source_id: String, branch_id: String },
}

/// A regular expression constraint. Compares and serializes by its source.
#[derive(Clone)]
pub struct Pattern {
    source: String,
    full: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Self, String> {
        // Compile the bare pattern first so error messages refer to what the
        // author wrote, not the anchored wrapper.
        Regex::new(source).map_err(|e| e.to_string())?;
        let full = Regex::new(&format!(r"\A(?:{source})\z")).map_err(|e| e.to_string())?;
        Ok(Self {
            source: source.to_owned(),
            full,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Whole-string match.
    pub fn full_match(&self, s: &str) -> bool {
        self.full.is_match(s)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pattern").field(&self.source).finish()
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

/// One column's contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSpec {
    pub name: String,
    pub datatype: Datatype,
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_set: Option<ValueSetBinding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
}

impl FieldSpec {
    /// A plain optional field with no constraints.
    pub fn new(name: impl Into<String>, datatype: Datatype) -> Self {
        Self {
            name: name.into(),
            datatype,
            required: false,
            value_set: None,
            range: None,
            pattern: None,
            description: None,
            example: None,
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.value_set = Some(ValueSetBinding::Inline {
            labels: labels.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.range = Some(Range { min, max });
        self
    }

    /// Panics if `source` is not a valid regular expression.
    pub fn with_pattern(mut self, source: &str) -> Self {
        self.pattern = Some(Pattern::new(source).expect("invalid pattern"));
        self
    }

    /// Checks the per-field invariants, reporting violations against `path`.
    fn check(&self, path: &str) -> Result<(), TemplateError> {
        let schema = |p: String, msg: String| Err(TemplateError::Schema { path: p, message: msg });
        if self.name.is_empty() {
            return schema(format!("{path}.name"), "field name must not be empty".into());
        }
        if self.name.chars().any(|c| matches!(c, '\t' | '\n' | '\r')) {
            return schema(
                format!("{path}.name"),
                "field name must not contain tabs or line breaks".into(),
            );
        }
        if self.name == PROVENANCE_COLUMN {
            return schema(
                format!("{path}.name"),
                format!("`{PROVENANCE_COLUMN}` is a reserved column name"),
            );
        }
        if let Some(range) = &self.range {
            if !self.datatype.is_numeric() {
                return schema(
                    format!("{path}.range"),
                    format!(
                        "field `{}`: range is only allowed on integer or decimal fields, not {}",
                        self.name, self.datatype
                    ),
                );
            }
            if range.min.is_nan() || range.max.is_nan() || range.min > range.max {
                return schema(
                    format!("{path}.range"),
                    format!(
                        "field `{}`: range min {} exceeds max {}",
                        self.name, range.min, range.max
                    ),
                );
            }
        }
        match (&self.value_set, self.datatype) {
            (None, Datatype::Controlled) => {
                return schema(
                    format!("{path}.value_set"),
                    format!("field `{}`: controlled fields need a value_set", self.name),
                )
            }
            (Some(_), dt) if dt != Datatype::Controlled => {
                return schema(
                    format!("{path}.value_set"),
                    format!(
                        "field `{}`: value_set is only allowed on controlled fields, not {dt}",
                        self.name
                    ),
                )
            }
            _ => {}
        }
        match &self.value_set {
            Some(ValueSetBinding::Inline { labels }) => {
                if labels.is_empty() {
                    return schema(
                        format!("{path}.value_set.labels"),
                        format!("field `{}`: inline labels must not be empty", self.name),
                    );
                }
                let mut seen = BTreeSet::new();
                for (i, label) in labels.iter().enumerate() {
                    let lp = format!("{path}.value_set.labels[{i}]");
                    if label.trim() != label || label.is_empty() {
                        return schema(
                            lp,
                            format!("label {label:?} is empty or has surrounding whitespace"),
                        );
                    }
                    if !seen.insert(label.as_str()) {
                        return schema(lp, format!("duplicate label {label:?}"));
                    }
                }
            }
            Some(ValueSetBinding::Terminology { source_id, branch_id }) => {
                if source_id.is_empty() {
                    return schema(
                        format!("{path}.value_set.source_id"),
                        "source_id must not be empty".into(),
                    );
                }
                if branch_id.is_empty() {
                    return schema(
                        format!("{path}.value_set.branch_id"),
                        "branch_id must not be empty".into(),
                    );
                }
            }
            None => {}
        }
        Ok(())
    }
}

/// An ordered set of field specifications identified by a unique id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Template {
    pub id: String,
    pub name: String,
    pub version: String,
    pub fields: Vec<FieldSpec>,
}

impl Template {
    /// Builds a template and checks every invariant.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        version: impl Into<String>,
        fields: Vec<FieldSpec>,
    ) -> Result<Self, TemplateError> {
        let t = Self {
            id: id.into(),
            name: name.into(),
            version: version.into(),
            fields,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), TemplateError> {
        if self.id.is_empty() || self.id.chars().any(char::is_whitespace) {
            return Err(TemplateError::Schema {
                path: "id".into(),
                message: format!("template id {:?} must be non-empty without whitespace", self.id),
            });
        }
        if self.fields.is_empty() {
            return Err(TemplateError::Schema {
                path: "fields".into(),
                message: "a template needs at least one field".into(),
            });
        }
        let mut names = BTreeSet::new();
        for (i, field) in self.fields.iter().enumerate() {
            let path = format!("fields[{i}]");
            field.check(&path)?;
            if !names.insert(field.name.as_str()) {
                return Err(TemplateError::Schema {
                    path: format!("{path}.name"),
                    message: format!("duplicate field name `{}`", field.name),
                });
            }
        }
        Ok(())
    }

    /// Exact, case-sensitive lookup by column header.
    pub fn lookup_field(&self, column: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == column)
    }

    pub fn field_index(&self, column: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == column)
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }

    /// Canonical JSON document form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("templates always serialize")
    }
}

/// Parses a template document.
pub fn parse_template(document: &[u8]) -> Result<Template, TemplateError> {
    let value: Value = serde_json::from_slice(document).map_err(|e| TemplateError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let template = template_from_value(&value)?;
    template.check()?;
    Ok(template)
}

pub fn serialize_template(template: &Template) -> Vec<u8> {
    template.to_json().into_bytes()
}

fn schema_err<T>(path: &str, message: impl Into<String>) -> Result<T, TemplateError> {
    Err(TemplateError::Schema {
        path: path.to_owned(),
        message: message.into(),
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, TemplateError> {
    v.as_object()
        .map_or_else(|| schema_err(path, "expected an object"), Ok)
}

fn deny_unknown(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), TemplateError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            return schema_err(&p, format!("unknown key `{key}`"));
        }
    }
    Ok(())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn req_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, TemplateError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => schema_err(&join(path, key), "expected a string"),
        None => schema_err(&join(path, key), "missing required key"),
    }
}

fn opt_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<String>, TemplateError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => schema_err(&join(path, key), "expected a string"),
    }
}

fn req_num(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, TemplateError> {
    match obj.get(key).and_then(Value::as_f64) {
        Some(n) => Ok(n),
        None => schema_err(&join(path, key), "expected a number"),
    }
}

fn template_from_value(v: &Value) -> Result<Template, TemplateError> {
    let obj = as_object(v, "")?;
    deny_unknown(obj, &["id", "name", "version", "fields"], "")?;
    let fields = match obj.get("fields") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| field_from_value(item, &format!("fields[{i}]")))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return schema_err("fields", "expected an array"),
        None => return schema_err("fields", "missing required key"),
    };
    Ok(Template {
        id: req_str(obj, "id", "")?,
        name: req_str(obj, "name", "")?,
        version: req_str(obj, "version", "")?,
        fields,
    })
}

fn field_from_value(v: &Value, path: &str) -> Result<FieldSpec, TemplateError> {
    let obj = as_object(v, path)?;
    deny_unknown(
        obj,
        &[
            "name",
            "datatype",
            "required",
            "value_set",
            "range",
            "pattern",
            "description",
            "example",
        ],
        path,
    )?;
    let name = req_str(obj, "name", path)?;
    let dt_raw = req_str(obj, "datatype", path)?;
    let datatype = Datatype::parse(&dt_raw).map_or_else(
        || {
            schema_err(
                &join(path, "datatype"),
                format!("unknown datatype {dt_raw:?}"),
            )
        },
        Ok,
    )?;
    let required = match obj.get("required") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return schema_err(&join(path, "required"), "expected a boolean"),
    };
    let range = match obj.get("range") {
        None | Some(Value::Null) => None,
        Some(r) => {
            let rp = join(path, "range");
            let ro = as_object(r, &rp)?;
            deny_unknown(ro, &["min", "max"], &rp)?;
            Some(Range {
                min: req_num(ro, "min", &rp)?,
                max: req_num(ro, "max", &rp)?,
            })
        }
    };
    let pattern = match opt_str(obj, "pattern", path)? {
        None => None,
        Some(src) => Some(Pattern::new(&src).map_err(|e| TemplateError::Schema {
            path: join(path, "pattern"),
            message: format!("invalid regular expression: {e}"),
        })?),
    };
    let value_set = match obj.get("value_set") {
        None | Some(Value::Null) => None,
        Some(b) => Some(binding_from_value(b, &join(path, "value_set"))?),
    };
    Ok(FieldSpec {
        name,
        datatype,
        required,
        value_set,
        range,
        pattern,
        description: opt_str(obj, "description", path)?,
        example: opt_str(obj, "example", path)?,
    })
}

fn binding_from_value(v: &Value, path: &str) -> Result<ValueSetBinding, TemplateError> {
    let obj = as_object(v, path)?;
    match req_str(obj, "kind", path)?.as_str() {
        "inline" => {
            deny_unknown(obj, &["kind", "labels"], path)?;
            let lp = join(path, "labels");
            let labels = match obj.get("labels") {
                Some(Value::Array(items)) => items
                    .iter()
                    .enumerate()
                    .map(|(i, l)| match l {
                        Value::String(s) => Ok(s.clone()),
                        _ => schema_err(&format!("{lp}[{i}]"), "expected a string"),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                Some(_) => return schema_err(&lp, "expected an array"),
                None => return schema_err(&lp, "missing required key"),
            };
            Ok(ValueSetBinding::Inline { labels })
        }
        "terminology" => {
            deny_unknown(obj, &["kind", "source_id", "branch_id"], path)?;
            Ok(ValueSetBinding::Terminology {
                source_id: req_str(obj, "source_id", path)?,
                branch_id: req_str(obj, "branch_id", path)?,
            })
        }
        other => schema_err(&join(path, "kind"), format!("unknown value_set kind {other:?}")),
    }
}
