use alloc::string::String;

use thiserror::Error;

/// Failure to parse or validate a template document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

/// Failure to read or write a tab-separated sheet.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TsvError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    NotUtf8 { offset: usize },
    #[error("input is empty: no header line")]
    Empty,
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("cell in row {row}, column `{column}` contains a tab or line break")]
    DelimiterInCell { row: usize, column: String },
    #[error("a table without columns has no TSV form")]
    NoColumns,
    #[error("header column {index} contains a tab or line break")]
    DelimiterInHeader { index: usize },
}

/// A value set that violates its invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueSetError {
    #[error("value set `{id}`: duplicate label {label:?}")]
    DuplicateLabel { id: String, label: String },
    #[error("value set `{id}`: synonym {synonym:?} of {label:?} collides with label {other:?}")]
    SynonymCollision {
        id: String,
        label: String,
        synonym: String,
        other: String,
    },
    #[error("value set `{id}`: synonyms given for unknown label {label:?}")]
    UnknownSynonymLabel { id: String, label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidateError {
    #[error("no resolved value set for controlled column `{column}`")]
    MissingValueSet { column: String },
}

/// Reasons a batch of repair actions is rejected. Rejection is atomic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("no issue group matches {column}/{kind}/{normalized:?}")]
    UnknownGroup {
        column: String,
        kind: String,
        normalized: String,
    },
    #[error("cell (row {row}, column `{column}`) is outside the table")]
    OutOfBounds { row: usize, column: String },
    #[error("conflicting replacements for row {row}, column `{column}`: {first:?} vs {second:?}")]
    Conflict {
        row: usize,
        column: String,
        first: String,
        second: String,
    },
    #[error("replacement {value:?} contains a tab or line break")]
    InvalidReplacement { value: String },
}
