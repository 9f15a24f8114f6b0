//! Template-driven validation and repair of metadata spreadsheets.
//!
//! This crate is `no_std` (it needs `alloc`). File formats beyond TSV,
//! terminology lookups, the HTTP service and the command line live in the
//! `metasheet` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod generate;
pub mod repair;
pub mod table;
pub mod template;
pub mod validate;
pub mod vocab;

use alloc::string::String;

pub use error::{RepairError, TemplateError, TsvError, ValidateError, ValueSetError};
pub use generate::{blank_table, generate_blank_tsv, render_spec};
pub use repair::{
    accept_top_suggestions, apply_repairs, edit_distance, fill_suggestions, similarity,
    suggest_for_group, RepairAction, RepairSuggestion, RepairTarget, SuggestConfig,
    SuggestionSource,
};
pub use table::{read_tsv, write_tsv, CellAddress, Row, Table};
pub use template::{parse_template, serialize_template, Datatype, FieldSpec, Template, ValueSetBinding};
pub use validate::{
    group_issues, validate_cell, validate_header, validate_table, GroupKey, IssueClass,
    IssueGroup, IssueKind, Severity, Summary, ValidationIssue, ValidationReport,
};
pub use vocab::ValueSet;

/// Reserved trailing column that binds each data row to its template.
pub const PROVENANCE_COLUMN: &str = "metadata_schema_id";

/// Trimmed, lowercased form used for grouping and similarity.
pub fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Empty or whitespace-only.
pub fn is_blank(s: &str) -> bool {
    s.trim().is_empty()
}
