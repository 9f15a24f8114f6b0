use std::fmt;
use std::path::Path;
use std::str::FromStr;

use metasheet_core::{read_tsv, write_tsv, Table, TsvError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workbook::{self, WorkbookError};

/// On-disk spreadsheet flavours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetFormat {
    Tsv,
    Xlsx,
}

impl SheetFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SheetFormat::Tsv => "tsv",
            SheetFormat::Xlsx => "xlsx",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            SheetFormat::Tsv => "text/tab-separated-values; charset=utf-8",
            SheetFormat::Xlsx => "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "xlsx" => Some(SheetFormat::Xlsx),
            "tsv" | "txt" | "tab" => Some(SheetFormat::Tsv),
            _ => None,
        }
    }

    /// Zip archives (and so workbooks) start with `PK\x03\x04`.
    pub fn sniff(bytes: &[u8]) -> Self {
        if bytes.starts_with(b"PK\x03\x04") {
            SheetFormat::Xlsx
        } else {
            SheetFormat::Tsv
        }
    }
}

impl fmt::Display for SheetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SheetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(SheetFormat::Tsv),
            "xlsx" | "workbook" => Ok(SheetFormat::Xlsx),
            other => Err(format!("unknown sheet format {other:?} (expected tsv or xlsx)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SheetError {
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

pub fn read_sheet(bytes: &[u8], format: SheetFormat) -> Result<Table, SheetError> {
    Ok(match format {
        SheetFormat::Tsv => read_tsv(bytes)?,
        SheetFormat::Xlsx => workbook::read_workbook(bytes)?,
    })
}

pub fn write_sheet(table: &Table, format: SheetFormat) -> Result<Vec<u8>, SheetError> {
    Ok(match format {
        SheetFormat::Tsv => write_tsv(table)?,
        SheetFormat::Xlsx => workbook::write_workbook(table)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection() {
        assert_eq!(SheetFormat::from_path(Path::new("a/b.XLSX")), Some(SheetFormat::Xlsx));
        assert_eq!(SheetFormat::from_path(Path::new("b.tsv")), Some(SheetFormat::Tsv));
        assert_eq!(SheetFormat::from_path(Path::new("b")), None);
        assert_eq!(SheetFormat::sniff(b"PK\x03\x04rest"), SheetFormat::Xlsx);
        assert_eq!(SheetFormat::sniff(b"a\tb\n"), SheetFormat::Tsv);
        assert_eq!("XLSX".parse::<SheetFormat>(), Ok(SheetFormat::Xlsx));
        assert!("csv".parse::<SheetFormat>().is_err());
    }
}
