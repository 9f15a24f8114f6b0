//! Checking a table against a template.
//!
//! Issues fall into two classes. Completeness issues are missing required
//! values or columns; adherence issues are supplied values that break their
//! field's contract. Unknown columns only produce warnings. Every addressed
//! error lands in exactly one [`IssueGroup`], the unit of batch repair.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ValidateError;
use crate::repair::RepairSuggestion;
use crate::table::{CellAddress, Table};
use crate::template::{Datatype, FieldSpec, Template};
use crate::vocab::ValueSet;
use crate::{is_blank, normalize, PROVENANCE_COLUMN};

/// Declaration order is the tie-break order used when sorting issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueKind {
    MissingRequired,
    MissingColumn,
    NotInValueSet,
    TypeMismatch,
    OutOfRange,
    PatternMismatch,
    ProvenanceMismatch,
    UnknownColumn,
}

impl IssueKind {
    pub const ALL: [IssueKind; 8] = [
        IssueKind::MissingRequired,
        IssueKind::MissingColumn,
        IssueKind::NotInValueSet,
        IssueKind::TypeMismatch,
        IssueKind::OutOfRange,
        IssueKind::PatternMismatch,
        IssueKind::ProvenanceMismatch,
        IssueKind::UnknownColumn,
    ];

    pub fn class(self) -> IssueClass {
        match self {
            IssueKind::MissingRequired | IssueKind::MissingColumn => IssueClass::Completeness,
            IssueKind::UnknownColumn => IssueClass::Warning,
            _ => IssueClass::Adherence,
        }
    }

    pub fn severity(self) -> Severity {
        match self.class() {
            IssueClass::Warning => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::MissingRequired => "MissingRequired",
            IssueKind::MissingColumn => "MissingColumn",
            IssueKind::NotInValueSet => "NotInValueSet",
            IssueKind::TypeMismatch => "TypeMismatch",
            IssueKind::OutOfRange => "OutOfRange",
            IssueKind::PatternMismatch => "PatternMismatch",
            IssueKind::ProvenanceMismatch => "ProvenanceMismatch",
            IssueKind::UnknownColumn => "UnknownColumn",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueClass {
    Completeness,
    Adherence,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// A located problem. Column-level issues (`MissingColumn`,
/// `UnknownColumn`) have no row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub severity: Severity,
    pub column: String,
    pub row: Option<usize>,
    pub observed: Option<String>,
    pub expected: String,
}

impl ValidationIssue {
    pub fn address(&self) -> Option<CellAddress> {
        self.row.map(|row| CellAddress::new(row, self.column.clone()))
    }

    pub fn class(&self) -> IssueClass {
        self.kind.class()
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            column: self.column.clone(),
            kind: self.kind,
            normalized_observed: self.observed.as_deref().map(normalize).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub column: String,
    pub kind: IssueKind,
    pub normalized_observed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueGroup {
    pub key: GroupKey,
    pub members: Vec<CellAddress>,
    /// Filled in by the repair engine; empty straight out of validation.
    #[serde(default)]
    pub suggestions: Vec<RepairSuggestion>,
}

/// Issue counts. `by_column` counts error-severity issues only, which is
/// what a per-column error chart wants; `by_kind` counts everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub completeness: usize,
    pub adherence: usize,
    pub errors: usize,
    pub warnings: usize,
    pub by_kind: BTreeMap<IssueKind, usize>,
    pub by_column: BTreeMap<String, usize>,
}

impl Summary {
    pub fn from_issues(issues: &[ValidationIssue]) -> Self {
        let mut s = Summary::default();
        for issue in issues {
            *s.by_kind.entry(issue.kind).or_default() += 1;
            match issue.class() {
                IssueClass::Completeness => s.completeness += 1,
                IssueClass::Adherence => s.adherence += 1,
                IssueClass::Warning => s.warnings += 1,
            }
            if issue.is_error() {
                s.errors += 1;
                *s.by_column.entry(issue.column.clone()).or_default() += 1;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub template_id: String,
    pub row_count: usize,
    /// Set by callers that want a wall-clock stamp; validation itself is
    /// deterministic and leaves it empty.
    pub generated_at: Option<String>,
    pub summary: Summary,
    pub issues: Vec<ValidationIssue>,
    pub groups: Vec<IssueGroup>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.summary.errors > 0
    }

    pub fn group(&self, key: &GroupKey) -> Option<&IssueGroup> {
        self.groups.iter().find(|g| &g.key == key)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

pub fn is_integer(s: &str) -> bool {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

pub fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    all_digits(int) && frac.is_none_or(all_digits)
}

pub fn is_boolean(s: &str) -> bool {
    s == "true" || s == "false"
}

/// ISO 8601 calendar date, `YYYY-MM-DD`, proleptic Gregorian.
pub fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let num = |r: core::ops::Range<usize>| -> Option<u32> {
        let part = &s[r];
        part.bytes()
            .all(|c| c.is_ascii_digit())
            .then(|| part.parse().ok())
            .flatten()
    };
    let (Some(year), Some(month), Some(day)) = (num(0..4), num(5..7), num(8..10)) else {
        return false;
    };
    let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    let days = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&day)
}

/// Whether `s` is syntactically a value of `datatype`. Text and controlled
/// values always parse; membership is checked separately.
pub fn parses_as(datatype: Datatype, s: &str) -> bool {
    match datatype {
        Datatype::Text | Datatype::Controlled => true,
        Datatype::Integer => is_integer(s),
        Datatype::Decimal => is_decimal(s),
        Datatype::Boolean => is_boolean(s),
        Datatype::Date => is_iso_date(s),
    }
}

/// Checks one raw cell. At most one issue is reported: blank, then datatype,
/// then range, then pattern, then value-set membership.
pub fn validate_cell(spec: &FieldSpec, raw: &str, resolved: Option<&ValueSet>) -> Option<IssueKind> {
    if is_blank(raw) {
        return spec.required.then_some(IssueKind::MissingRequired);
    }
    if !parses_as(spec.datatype, raw) {
        return Some(IssueKind::TypeMismatch);
    }
    if let Some(range) = &spec.range {
        if spec.datatype.is_numeric() {
            // syntax was checked above, so this parse only fails on overflow
            let in_range = raw.parse::<f64>().is_ok_and(|v| range.contains(v));
            if !in_range {
                return Some(IssueKind::OutOfRange);
            }
        }
    }
    if let Some(pattern) = &spec.pattern {
        if !pattern.full_match(raw) {
            return Some(IssueKind::PatternMismatch);
        }
    }
    if spec.datatype == Datatype::Controlled {
        if let Some(set) = resolved {
            if !set.contains(raw) {
                return Some(IssueKind::NotInValueSet);
            }
        }
    }
    None
}

fn datatype_description(dt: Datatype) -> &'static str {
    match dt {
        Datatype::Text => "text",
        Datatype::Integer => "integer (optional sign followed by digits)",
        Datatype::Decimal => "decimal (optional sign, digits, optional fraction)",
        Datatype::Boolean => "boolean (`true` or `false`)",
        Datatype::Date => "ISO 8601 date (YYYY-MM-DD)",
        Datatype::Controlled => "a permissible value",
    }
}

const LISTED_LABELS: usize = 10;

/// Human-readable description of the constraint a cell issue violated.
pub fn describe_expected(spec: &FieldSpec, kind: IssueKind, set: Option<&ValueSet>) -> String {
    match kind {
        IssueKind::MissingRequired => format!("a value for required field `{}`", spec.name),
        IssueKind::TypeMismatch => datatype_description(spec.datatype).to_string(),
        IssueKind::OutOfRange => match &spec.range {
            Some(r) => format!("a number between {} and {} inclusive", r.min, r.max),
            None => String::from("a number in range"),
        },
        IssueKind::PatternMismatch => format!(
            "a value fully matching /{}/",
            spec.pattern.as_ref().map_or("", |p| p.as_str())
        ),
        IssueKind::NotInValueSet => match set {
            Some(set) => {
                let shown: Vec<&str> = set.labels.iter().take(LISTED_LABELS).map(String::as_str).collect();
                let more = set.labels.len().saturating_sub(LISTED_LABELS);
                if more > 0 {
                    format!("one of: {} (and {more} more)", shown.join(", "))
                } else {
                    format!("one of: {}", shown.join(", "))
                }
            }
            None => String::from("a permissible value"),
        },
        IssueKind::MissingColumn => format!("column `{}` defined by the template", spec.name),
        IssueKind::ProvenanceMismatch | IssueKind::UnknownColumn => String::new(),
    }
}

/// Header-level checks: missing template columns, unknown and duplicate
/// columns.
pub fn validate_header(template: &Template, table: &Table) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for field in &template.fields {
        if table.column_index(&field.name).is_none() {
            issues.push(ValidationIssue {
                kind: IssueKind::MissingColumn,
                severity: Severity::Error,
                column: field.name.clone(),
                row: None,
                observed: None,
                expected: describe_expected(field, IssueKind::MissingColumn, None),
            });
        }
    }
    for (i, column) in table.columns.iter().enumerate() {
        let first = table.column_index(column) == Some(i);
        let expected = if !first {
            String::from("each column to appear once")
        } else if column != PROVENANCE_COLUMN && template.lookup_field(column).is_none() {
            format!("a column defined by template `{}`", template.id)
        } else {
            continue;
        };
        issues.push(ValidationIssue {
            kind: IssueKind::UnknownColumn,
            severity: Severity::Warning,
            column: column.clone(),
            row: None,
            observed: None,
            expected,
        });
    }
    issues
}

/// Display order of a column: template fields first, then the provenance
/// column, then anything else in header order.
fn column_rank(template: &Template, table: Option<&Table>, column: &str) -> usize {
    let n = template.fields.len();
    if let Some(i) = template.field_index(column) {
        i
    } else if column == PROVENANCE_COLUMN {
        n
    } else {
        n + 1 + table.and_then(|t| t.column_index(column)).unwrap_or(usize::MAX - n - 1)
    }
}

fn sort_issues(template: &Template, table: &Table, issues: &mut [ValidationIssue]) {
    issues.sort_by_key(|i| {
        (
            i.row.unwrap_or(0),
            column_rank(template, Some(table), &i.column),
            i.kind,
        )
    });
}

/// Groups addressed error issues by (column, kind, normalized observed
/// value). Warnings and column-level issues are left out.
pub fn group_issues(template: &Template, issues: &[ValidationIssue]) -> Vec<IssueGroup> {
    let mut groups: BTreeMap<(usize, GroupKey), Vec<CellAddress>> = BTreeMap::new();
    for issue in issues.iter().filter(|i| i.is_error()) {
        let Some(address) = issue.address() else { continue };
        let rank = column_rank(template, None, &issue.column);
        groups.entry((rank, issue.group_key())).or_default().push(address);
    }
    groups
        .into_iter()
        .map(|((_, key), mut members)| {
            members.sort();
            IssueGroup {
                key,
                members,
                suggestions: Vec::new(),
            }
        })
        .collect()
}

/// Validates every data row against the template.
///
/// `sets` maps controlled field names to their resolved value sets; one must
/// be present for each controlled field that appears in the header. Rows
/// that are blank in every template column are skipped.
pub fn validate_table(
    template: &Template,
    table: &Table,
    sets: &BTreeMap<String, ValueSet>,
) -> Result<ValidationReport, ValidateError> {
    let mut issues = validate_header(template, table);

    let mut present: Vec<(&FieldSpec, usize, Option<&ValueSet>)> = Vec::new();
    for field in &template.fields {
        let Some(col) = table.column_index(&field.name) else { continue };
        let set = if field.datatype == Datatype::Controlled {
            Some(sets.get(&field.name).ok_or_else(|| ValidateError::MissingValueSet {
                column: field.name.clone(),
            })?)
        } else {
            None
        };
        present.push((field, col, set));
    }
    let provenance_col = table.column_index(PROVENANCE_COLUMN);

    for row in &table.rows {
        if present.iter().all(|(_, col, _)| is_blank(&row.cells[*col])) {
            continue;
        }
        for &(field, col, set) in &present {
            let raw = &row.cells[col];
            if let Some(kind) = validate_cell(field, raw, set) {
                issues.push(ValidationIssue {
                    kind,
                    severity: kind.severity(),
                    column: field.name.clone(),
                    row: Some(row.index),
                    observed: (kind != IssueKind::MissingRequired).then(|| raw.clone()),
                    expected: describe_expected(field, kind, set),
                });
            }
        }
        if let Some(col) = provenance_col {
            let raw = &row.cells[col];
            if !is_blank(raw) && raw.trim() != template.id {
                issues.push(ValidationIssue {
                    kind: IssueKind::ProvenanceMismatch,
                    severity: Severity::Error,
                    column: PROVENANCE_COLUMN.into(),
                    row: Some(row.index),
                    observed: Some(raw.clone()),
                    expected: format!("template id `{}`", template.id),
                });
            }
        }
    }

    sort_issues(template, table, &mut issues);
    let groups = group_issues(template, &issues);
    Ok(ValidationReport {
        template_id: template.id.clone(),
        row_count: table.rows.len(),
        generated_at: None,
        summary: Summary::from_issues(&issues),
        issues,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::read_tsv;
    use crate::vocab::resolve_inline;
    use alloc::vec;

    fn time_unit() -> FieldSpec {
        FieldSpec::new("time_unit", Datatype::Controlled).with_labels(["Year", "Month", "Day"])
    }

    fn sample() -> Template {
        Template::new(
            "tmpl-sample-v1",
            "Sample",
            "1.0.0",
            vec![FieldSpec::new("donor_id", Datatype::Text).required(), time_unit()],
        )
        .unwrap()
    }

    fn sets(t: &Template) -> BTreeMap<String, ValueSet> {
        t.fields
            .iter()
            .filter_map(|f| Some((f.name.clone(), resolve_inline(f.value_set.as_ref()?)?)))
            .collect()
    }

    #[test]
    fn cell_rules_follow_evaluation_order() {
        let text = FieldSpec::new("donor_id", Datatype::Text).required();
        assert_eq!(validate_cell(&text, "", None), Some(IssueKind::MissingRequired));
        assert_eq!(validate_cell(&text, "   ", None), Some(IssueKind::MissingRequired));
        let optional = FieldSpec::new("note", Datatype::Text);
        assert_eq!(validate_cell(&optional, " ", None), None);

        let tu = time_unit();
        let set = resolve_inline(tu.value_set.as_ref().unwrap()).unwrap();
        assert_eq!(validate_cell(&tu, "days", Some(&set)), Some(IssueKind::NotInValueSet));
        assert_eq!(validate_cell(&tu, "day", Some(&set)), Some(IssueKind::NotInValueSet));
        assert_eq!(validate_cell(&tu, "Day", Some(&set)), None);

        let n = FieldSpec::new("n", Datatype::Integer).with_range(1.0, 10.0);
        assert_eq!(validate_cell(&n, "7", None), None);
        assert_eq!(validate_cell(&n, "\"42\"", None), Some(IssueKind::TypeMismatch));
        assert_eq!(validate_cell(&n, "12", None), Some(IssueKind::OutOfRange));
        assert_eq!(validate_cell(&n, "1", None), None);
        assert_eq!(validate_cell(&n, "10", None), None);
    }

    #[test]
    fn type_failure_stops_before_pattern() {
        let f = FieldSpec::new("n", Datatype::Integer).with_pattern("[0-9]{3}");
        assert_eq!(validate_cell(&f, "x", None), Some(IssueKind::TypeMismatch));
        assert_eq!(validate_cell(&f, "12", None), Some(IssueKind::PatternMismatch));
        assert_eq!(validate_cell(&f, "123", None), None);
    }

    #[test]
    fn datatype_syntax() {
        for ok in ["0", "-12", "+7", "0042"] {
            assert!(is_integer(ok), "{ok}");
        }
        for bad in ["", "-", "1.0", " 1", "1e3", "١"] {
            assert!(!is_integer(bad), "{bad}");
        }
        for ok in ["1", "1.5", "-0.25", "+3.0"] {
            assert!(is_decimal(ok), "{ok}");
        }
        for bad in [".5", "5.", "1.2.3", "1e3", "NaN", "inf"] {
            assert!(!is_decimal(bad), "{bad}");
        }
        assert!(is_boolean("true") && is_boolean("false"));
        assert!(!is_boolean("True") && !is_boolean("yes"));
        for ok in ["2024-02-29", "2000-02-29", "1999-12-31"] {
            assert!(is_iso_date(ok), "{ok}");
        }
        for bad in ["1900-02-29", "2023-02-29", "2024-13-01", "2024-04-31", "2024-1-01", "20240101", "2024-00-10"] {
            assert!(!is_iso_date(bad), "{bad}");
        }
    }

    #[test]
    fn header_checks() {
        let t = sample();
        let exact = read_tsv(b"donor_id\ttime_unit\tmetadata_schema_id\n").unwrap();
        assert!(validate_header(&t, &exact).is_empty());

        let missing = read_tsv(b"time_unit\tmetadata_schema_id\n").unwrap();
        let issues = validate_header(&t, &missing);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::MissingColumn);
        assert_eq!(issues[0].column, "donor_id");

        let extra = read_tsv(b"donor_id\ttime_unit\tnotes\n").unwrap();
        let issues = validate_header(&t, &extra);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::UnknownColumn);
        assert_eq!(issues[0].severity, Severity::Warning);

        let dup = read_tsv(b"donor_id\ttime_unit\tdonor_id\n").unwrap();
        let issues = validate_header(&t, &dup);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::UnknownColumn);
    }

    #[test]
    fn five_issue_fixture() {
        let t = sample();
        let table = read_tsv(
            b"donor_id\ttime_unit\tmetadata_schema_id\n\
              \tdays\ttmpl-sample-v1\n\
              D2\tdays\ttmpl-sample-v1\n\
              \tYear\ttmpl-sample-v1\n\
              D4\tdays\ttmpl-sample-v1\n\
              D5\tMonth\ttmpl-sample-v1\n",
        )
        .unwrap();
        let report = validate_table(&t, &table, &sets(&t)).unwrap();
        assert_eq!(report.summary.completeness, 2);
        assert_eq!(report.summary.adherence, 3);
        assert_eq!(report.groups.len(), 2);
        assert_eq!(report.groups[0].members.len(), 2);
        assert_eq!(report.groups[0].key.kind, IssueKind::MissingRequired);
        assert_eq!(report.groups[1].members.len(), 3);
        assert_eq!(report.groups[1].key.normalized_observed, "days");
        // sorted by row then template column order
        let order: Vec<(Option<usize>, &str)> =
            report.issues.iter().map(|i| (i.row, i.column.as_str())).collect();
        assert_eq!(
            order,
            vec![
                (Some(1), "donor_id"),
                (Some(1), "time_unit"),
                (Some(2), "time_unit"),
                (Some(3), "donor_id"),
                (Some(4), "time_unit"),
            ]
        );
    }

    #[test]
    fn provenance_mismatch_and_blank_rows() {
        let t = sample();
        let table = read_tsv(
            b"donor_id\ttime_unit\tmetadata_schema_id\n\
              D1\tDay\ttmpl-other\n\
              \t\ttmpl-sample-v1\n\
              \t \t\n",
        )
        .unwrap();
        let report = validate_table(&t, &table, &sets(&t)).unwrap();
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].kind, IssueKind::ProvenanceMismatch);
        assert_eq!(report.row_count, 3);
    }

    #[test]
    fn controlled_column_needs_a_set() {
        let t = sample();
        let table = read_tsv(b"donor_id\ttime_unit\nD1\tDay\n").unwrap();
        assert_eq!(
            validate_table(&t, &table, &BTreeMap::new()),
            Err(ValidateError::MissingValueSet { column: "time_unit".into() })
        );
        // absent controlled column needs no set
        let table = read_tsv(b"donor_id\nD1\n").unwrap();
        assert!(validate_table(&t, &table, &BTreeMap::new()).is_ok());
    }

    #[test]
    fn grouping_normalizes_observed() {
        let t = sample();
        let table = read_tsv(b"donor_id\ttime_unit\nD1\tdays\nD2\tDays\nD3\t days \n").unwrap();
        let report = validate_table(&t, &table, &sets(&t)).unwrap();
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].members.len(), 3);
    }

    #[test]
    fn missing_required_in_two_columns_makes_two_groups() {
        let t = Template::new(
            "t",
            "t",
            "1",
            vec![
                FieldSpec::new("a", Datatype::Text).required(),
                FieldSpec::new("b", Datatype::Text).required(),
                FieldSpec::new("c", Datatype::Text),
            ],
        )
        .unwrap();
        let table = read_tsv(b"a\tb\tc\n\t\tx\n").unwrap();
        let report = validate_table(&t, &table, &BTreeMap::new()).unwrap();
        assert_eq!(report.groups.len(), 2);
        assert_eq!(report.groups[0].key.column, "a");
        assert_eq!(report.groups[1].key.column, "b");
    }
}
