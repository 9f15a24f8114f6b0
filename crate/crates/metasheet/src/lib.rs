//! IO, terminology lookup, HTTP service and command line for the
//! `metasheet-core` validator.

pub mod cli;
pub mod format;
pub mod pipeline;
pub mod service;
pub mod store;
pub mod terminology;
pub mod workbook;

pub use format::{read_sheet, write_sheet, SheetError, SheetFormat};
pub use store::TemplateStore;
pub use terminology::{Mode, TerminologyClient, TerminologyConfig, TerminologyError};
