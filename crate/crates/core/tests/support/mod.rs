#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use metasheet_core::template::Pattern;
use metasheet_core::vocab::resolve_inline;
use metasheet_core::{Datatype, FieldSpec, IssueKind, Table, Template, ValueSet, PROVENANCE_COLUMN};
use proptest::prelude::*;
use regex::Regex;

pub const LABEL_POOL: &[&str] = &["Year", "Month", "Day", "Human", "Mouse", "Liver", "Kidney"];
pub const PATTERNS: &[&str] = &["[A-Z]{3}-[0-9]+", "[a-z]+", "[0-9]{1,2}", "D[0-9]"];
pub const CELL_POOL: &[&str] = &[
    "", " ", "Day", "days", "Year", "yr", "month", "\"42\"", "'7'", "42", "-3", "3.5", "1e3", "true",
    "yes", "False", "2024-02-29", "2023-02-29", "abc", "ABC-12", "D1", "0", "100", "  7", "Human ",
];

pub fn datatype() -> impl Strategy<Value = Datatype> {
    prop::sample::select(Datatype::ALL.to_vec())
}

pub fn field(name: String) -> impl Strategy<Value = FieldSpec> {
    (
        datatype(),
        any::<bool>(),
        prop::option::of((-5i32..5, 0i32..20)),
        prop::option::weighted(0.3, prop::sample::select(PATTERNS.to_vec())),
        prop::sample::subsequence(LABEL_POOL.to_vec(), 1..=4),
    )
        .prop_map(move |(dt, required, range, pattern, labels)| {
            let mut f = FieldSpec::new(name.clone(), dt);
            f.required = required;
            if dt.is_numeric() {
                if let Some((lo, span)) = range {
                    f.range = Some(metasheet_core::template::Range {
                        min: lo as f64,
                        max: (lo + span) as f64,
                    });
                }
            }
            if let Some(p) = pattern {
                f.pattern = Some(Pattern::new(p).unwrap());
            }
            if dt == Datatype::Controlled {
                f = f.with_labels(labels);
            }
            f
        })
}

pub fn template() -> impl Strategy<Value = Template> {
    (1usize..=8, "[a-z]{1,6}(-[a-z0-9]{1,4})?")
        .prop_flat_map(|(n, id)| {
            let fields: Vec<_> = (0..n).map(|i| field(format!("f{i}"))).collect();
            (Just(id), fields)
        })
        .prop_map(|(id, fields)| Template::new(id, "Generated", "1.0.0", fields).unwrap())
}

pub fn inline_sets(t: &Template) -> BTreeMap<String, ValueSet> {
    t.fields
        .iter()
        .filter_map(|f| Some((f.name.clone(), resolve_inline(f.value_set.as_ref()?)?)))
        .collect()
}

/// A template and a table whose header is a shuffled subset of the
/// template's fields, plus optionally the provenance column and an extra
/// unknown column.
pub fn template_and_table() -> impl Strategy<Value = (Template, Table)> {
    template().prop_flat_map(|t| {
        let names: Vec<String> = t.field_names().map(String::from).collect();
        let id = t.id.clone();
        (
            Just(t),
            prop::sample::subsequence(names.clone(), 0..=names.len()).prop_shuffle(),
            any::<bool>(),
            any::<bool>(),
            0usize..=8,
        )
            .prop_flat_map(move |(t, mut cols, with_prov, with_extra, rows)| {
                if with_prov {
                    cols.push(PROVENANCE_COLUMN.to_string());
                }
                if with_extra {
                    cols.push("notes".to_string());
                }
                let width = cols.len();
                let pool: Vec<String> = CELL_POOL
                    .iter()
                    .map(|s| s.to_string())
                    .chain([id.clone(), "tmpl-other".to_string()])
                    .collect();
                let cells = prop::collection::vec(
                    prop::collection::vec(prop::sample::select(pool), width),
                    rows,
                );
                (Just(t), Just(cols), cells)
            })
            .prop_map(|(t, cols, cells)| (t, Table::from_rows(cols, cells)))
    })
}

/// Independent re-statement of the per-cell rules.
pub fn oracle_cell(f: &FieldSpec, raw: &str, labels: &[String]) -> Option<IssueKind> {
    if raw.trim().is_empty() {
        return f.required.then_some(IssueKind::MissingRequired);
    }
    let int = Regex::new(r"^[+-]?[0-9]+$").unwrap();
    let dec = Regex::new(r"^[+-]?[0-9]+(\.[0-9]+)?$").unwrap();
    let date_shape = Regex::new(r"^[0-9]{4}-[0-9]{2}-[0-9]{2}$").unwrap();
    let type_ok = match f.datatype {
        Datatype::Integer => int.is_match(raw),
        Datatype::Decimal => dec.is_match(raw),
        Datatype::Boolean => raw == "true" || raw == "false",
        Datatype::Date => {
            date_shape.is_match(raw) && chrono::NaiveDate::parse_from_str(raw, "%Y-%m-%d").is_ok()
        }
        Datatype::Text | Datatype::Controlled => true,
    };
    if !type_ok {
        return Some(IssueKind::TypeMismatch);
    }
    if let Some(r) = &f.range {
        let v: f64 = raw.parse().unwrap();
        if v < r.min || v > r.max {
            return Some(IssueKind::OutOfRange);
        }
    }
    if let Some(p) = &f.pattern {
        let full = Regex::new(&format!("^(?:{})$", p.as_str())).unwrap();
        if !full.is_match(raw) {
            return Some(IssueKind::PatternMismatch);
        }
    }
    if f.datatype == Datatype::Controlled && !labels.iter().any(|l| l == raw) {
        return Some(IssueKind::NotInValueSet);
    }
    None
}

/// Every issue the rules imply, as (row, column, kind); row 0 marks a
/// column-level issue.
pub fn oracle_issues(t: &Template, table: &Table) -> BTreeSet<(usize, String, IssueKind)> {
    let mut out = BTreeSet::new();
    let pos = |name: &str| table.columns.iter().position(|c| c == name);
    for f in &t.fields {
        if pos(&f.name).is_none() {
            out.insert((0, f.name.clone(), IssueKind::MissingColumn));
        }
    }
    for (i, c) in table.columns.iter().enumerate() {
        let duplicate = pos(c) != Some(i);
        let unknown = c != PROVENANCE_COLUMN && !t.fields.iter().any(|f| &f.name == c);
        if duplicate || unknown {
            out.insert((0, c.clone(), IssueKind::UnknownColumn));
        }
    }
    for row in &table.rows {
        let present: Vec<(&FieldSpec, usize)> =
            t.fields.iter().filter_map(|f| Some((f, pos(&f.name)?))).collect();
        if present.iter().all(|(_, c)| row.cells[*c].trim().is_empty()) {
            continue;
        }
        for (f, c) in present {
            let labels = match &f.value_set {
                Some(metasheet_core::ValueSetBinding::Inline { labels }) => labels.clone(),
                _ => Vec::new(),
            };
            if let Some(kind) = oracle_cell(f, &row.cells[c], &labels) {
                out.insert((row.index, f.name.clone(), kind));
            }
        }
        if let Some(c) = pos(PROVENANCE_COLUMN) {
            let v = row.cells[c].trim();
            if !v.is_empty() && v != t.id {
                out.insert((row.index, PROVENANCE_COLUMN.to_string(), IssueKind::ProvenanceMismatch));
            }
        }
    }
    out
}
