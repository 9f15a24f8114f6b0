//! Operations shared by the CLI and the HTTP service, so both produce the
//! same reports from the same inputs.

use std::collections::BTreeMap;

use metasheet_core::{
    fill_suggestions, generate_blank_tsv, validate_table, SuggestConfig, Table, Template,
    ValidateError, ValidationReport, ValueSet,
};
use thiserror::Error;

use crate::format::SheetFormat;
use crate::terminology::{TerminologyClient, TerminologyError};
use crate::workbook::{self, WorkbookError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Terminology(#[from] TerminologyError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

/// Default number of pre-allocated rows for a format.
pub fn default_rows(format: SheetFormat) -> usize {
    match format {
        SheetFormat::Tsv => metasheet_core::generate::DEFAULT_TSV_ROWS,
        SheetFormat::Xlsx => metasheet_core::generate::DEFAULT_WORKBOOK_ROWS,
    }
}

/// A blank sheet for `template`. Workbooks get dropdowns for controlled
/// fields, which needs their value sets resolved.
pub fn generate_blank(
    template: &Template,
    format: SheetFormat,
    data_rows: usize,
    terminology: &TerminologyClient,
) -> Result<Vec<u8>, PipelineError> {
    Ok(match format {
        SheetFormat::Tsv => generate_blank_tsv(template, data_rows),
        SheetFormat::Xlsx => {
            let sets = terminology.resolve_template_sets(template)?;
            workbook::generate_blank_workbook(template, data_rows, &sets)?
        }
    })
}

/// Resolves value sets and validates. The report is not timestamped.
pub fn validate(
    template: &Template,
    table: &Table,
    terminology: &TerminologyClient,
) -> Result<(ValidationReport, BTreeMap<String, ValueSet>), PipelineError> {
    let sets = terminology.resolve_template_sets(template)?;
    let report = validate_table(template, table, &sets)?;
    Ok((report, sets))
}

/// Validation followed by suggestion filling for every group.
pub fn validate_and_suggest(
    template: &Template,
    table: &Table,
    terminology: &TerminologyClient,
    config: &SuggestConfig,
) -> Result<(ValidationReport, BTreeMap<String, ValueSet>), PipelineError> {
    let (mut report, sets) = validate(template, table, terminology)?;
    fill_suggestions(&mut report, template, &sets, config);
    Ok((report, sets))
}

/// RFC 3339 wall-clock stamp for `generated_at`.
pub fn now_stamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
