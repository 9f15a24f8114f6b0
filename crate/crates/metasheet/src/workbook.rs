//! Office Open XML workbooks.
//!
//! The first worksheet holds the header and data. Provenance lives in a
//! hidden `_provenance` worksheet as key/value rows (`template_id`, id).
//! Every cell is read back as its display string; numbers never come out in
//! scientific notation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Cursor, Read};

use chrono::NaiveDate;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use metasheet_core::{blank_table, Datatype, Table, Template, ValueSet};
use rust_xlsxwriter::{DataValidation, Formula, Workbook, Worksheet, XlsxError};
use thiserror::Error;
use zip::result::ZipError;
use zip::ZipArchive;

pub const DATA_SHEET: &str = "Metadata";
pub const PROVENANCE_SHEET: &str = "_provenance";
pub const LISTS_SHEET: &str = "_lists";
pub const TEMPLATE_ID_KEY: &str = "template_id";

/// Excel caps an inline list validation at 255 characters.
const INLINE_LIST_LIMIT: usize = 255;

#[derive(Debug, Error)]
pub enum WorkbookError {
    #[error("corrupt workbook archive: {0}")]
    Corrupt(String),
    #[error("workbook has no worksheets")]
    MissingSheet,
    #[error("row {row}: cell in column {column} lies outside the header")]
    CellOutsideHeader { row: usize, column: usize },
    #[error("failed to write workbook: {0}")]
    Write(#[from] XlsxError),
}

/// Upper bound on any decompressed workbook part.
const MAX_PART_BYTES: u64 = 256 * 1024 * 1024;

fn corrupt(e: impl fmt::Display) -> WorkbookError {
    WorkbookError::Corrupt(e.to_string())
}

fn read_part(zip: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Result<Option<Vec<u8>>, WorkbookError> {
    let file = match zip.by_name(name) {
        Ok(f) => f,
        Err(ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(corrupt(e)),
    };
    let mut out = Vec::new();
    file.take(MAX_PART_BYTES).read_to_end(&mut out).map_err(corrupt)?;
    Ok(Some(out))
}

fn attr(e: &BytesStart<'_>, key: &[u8]) -> Result<Option<String>, WorkbookError> {
    for a in e.attributes() {
        let a = a.map_err(corrupt)?;
        if a.key.local_name().as_ref() == key {
            return Ok(Some(a.unescape_value().map_err(corrupt)?.into_owned()));
        }
    }
    Ok(None)
}

struct SheetEntry {
    name: String,
    path: String,
}

/// Sheet names and part paths in workbook order, plus the 1904 date flag.
fn sheet_entries(zip: &mut ZipArchive<Cursor<&[u8]>>) -> Result<(Vec<SheetEntry>, bool), WorkbookError> {
    let workbook = read_part(zip, "xl/workbook.xml")?.ok_or_else(|| corrupt("missing xl/workbook.xml"))?;
    let rels = read_part(zip, "xl/_rels/workbook.xml.rels")?.ok_or_else(|| corrupt("missing workbook relationships"))?;

    let mut targets = HashMap::new();
    let mut reader = Reader::from_reader(rels.as_slice());
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) | Event::Empty(e) if e.local_name().as_ref() == b"Relationship" => {
                if let (Some(id), Some(target)) = (attr(&e, b"Id")?, attr(&e, b"Target")?) {
                    let path = match target.strip_prefix('/') {
                        Some(abs) => abs.to_string(),
                        None => format!("xl/{target}"),
                    };
                    targets.insert(id, path);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    let mut sheets = Vec::new();
    let mut date1904 = false;
    let mut reader = Reader::from_reader(workbook.as_slice());
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) | Event::Empty(e) => match e.local_name().as_ref() {
                b"sheet" => {
                    let name = attr(&e, b"name")?.ok_or_else(|| corrupt("sheet without a name"))?;
                    let id = attr(&e, b"id")?.ok_or_else(|| corrupt("sheet without a relationship"))?;
                    let path = targets
                        .get(&id)
                        .cloned()
                        .ok_or_else(|| corrupt(format!("sheet {name} has no part")))?;
                    sheets.push(SheetEntry { name, path });
                }
                b"workbookPr" => {
                    date1904 = matches!(attr(&e, b"date1904")?.as_deref(), Some("1" | "true"));
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok((sheets, date1904))
}

/// Collects the text of every `<t>` under the current element, skipping
/// phonetic runs, until the element named `end` closes.
fn read_text_until(reader: &mut Reader<&[u8]>, end: &[u8]) -> Result<String, WorkbookError> {
    let mut out = String::new();
    let mut buf = Vec::new();
    let mut in_t = false;
    let mut phonetic = 0usize;
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) => match e.local_name().as_ref() {
                b"t" => in_t = true,
                b"rPh" => phonetic += 1,
                _ => {}
            },
            Event::End(e) => match e.local_name().as_ref() {
                b"t" => in_t = false,
                b"rPh" => phonetic = phonetic.saturating_sub(1),
                name if name == end => return Ok(out),
                _ => {}
            },
            Event::Text(t) if in_t && phonetic == 0 => out.push_str(&t.unescape().map_err(corrupt)?),
            Event::CData(t) if in_t && phonetic == 0 => out.push_str(&String::from_utf8_lossy(&t)),
            Event::Eof => return Err(corrupt("unexpected end of part")),
            _ => {}
        }
        buf.clear();
    }
}

fn shared_strings(zip: &mut ZipArchive<Cursor<&[u8]>>) -> Result<Vec<String>, WorkbookError> {
    let Some(xml) = read_part(zip, "xl/sharedStrings.xml")? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut reader = Reader::from_reader(xml.as_slice());
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) if e.local_name().as_ref() == b"si" => out.push(read_text_until(&mut reader, b"si")?),
            Event::Empty(e) if e.local_name().as_ref() == b"si" => out.push(String::new()),
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(out)
}

fn is_date_format_code(code: &str) -> bool {
    // drop quoted literals, bracketed sections and escaped characters
    let mut plain = String::new();
    let mut chars = code.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                }
            }
            '[' => {
                for c in chars.by_ref() {
                    if c == ']' {
                        break;
                    }
                }
            }
            '\\' | '_' | '*' => {
                chars.next();
            }
            c => plain.push(c.to_ascii_lowercase()),
        }
    }
    plain.contains(['y', 'd']) || plain.contains("h") || plain.contains("s")
}

/// For each cell style index, whether it formats numbers as dates.
fn date_styles(zip: &mut ZipArchive<Cursor<&[u8]>>) -> Result<Vec<bool>, WorkbookError> {
    let Some(xml) = read_part(zip, "xl/styles.xml")? else {
        return Ok(Vec::new());
    };
    let mut custom: HashMap<u32, bool> = HashMap::new();
    let mut xfs = Vec::new();
    let mut in_cell_xfs = false;
    let mut reader = Reader::from_reader(xml.as_slice());
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) | Event::Empty(e) => match e.local_name().as_ref() {
                b"numFmt" => {
                    if let (Some(id), Some(code)) = (attr(&e, b"numFmtId")?, attr(&e, b"formatCode")?) {
                        if let Ok(id) = id.parse() {
                            custom.insert(id, is_date_format_code(&code));
                        }
                    }
                }
                b"cellXfs" => in_cell_xfs = true,
                b"xf" if in_cell_xfs => {
                    let id: u32 = attr(&e, b"numFmtId")?.and_then(|v| v.parse().ok()).unwrap_or(0);
                    let date = match id {
                        14..=22 | 45..=47 => true,
                        _ => custom.get(&id).copied().unwrap_or(false),
                    };
                    xfs.push(date);
                }
                _ => {}
            },
            Event::End(e) if e.local_name().as_ref() == b"cellXfs" => in_cell_xfs = false,
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(xfs)
}

/// Zero-based (row, column) of an A1 reference.
fn parse_ref(r: &str) -> Option<(u32, u32)> {
    let split = r.find(|c: char| c.is_ascii_digit())?;
    let (letters, digits) = r.split_at(split);
    if letters.is_empty() {
        return None;
    }
    let mut col: u32 = 0;
    for c in letters.chars() {
        if !c.is_ascii_uppercase() {
            return None;
        }
        col = col.checked_mul(26)?.checked_add(c as u32 - 'A' as u32 + 1)?;
    }
    let row: u32 = digits.parse().ok()?;
    Some((row.checked_sub(1)?, col - 1))
}

fn render_float(f: f64) -> String {
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        // Display for f64 never switches to exponent notation
        format!("{f}")
    }
}

/// Spreadsheet serial date to ISO text; whole days render as a date only.
fn render_serial_date(serial: f64, date1904: bool) -> Option<String> {
    if !serial.is_finite() || serial < 0.0 {
        return None;
    }
    let epoch = if date1904 {
        NaiveDate::from_ymd_opt(1904, 1, 1)?
    } else if serial < 60.0 {
        // before the fictitious 1900-02-29
        NaiveDate::from_ymd_opt(1899, 12, 31)?
    } else {
        NaiveDate::from_ymd_opt(1899, 12, 30)?
    };
    let days = serial.trunc() as i64;
    let seconds = ((serial - serial.trunc()) * 86_400.0).round() as i64;
    let dt = epoch.and_hms_opt(0, 0, 0)? + chrono::Duration::days(days) + chrono::Duration::seconds(seconds);
    Some(if dt.time() == chrono::NaiveTime::MIN {
        dt.date().format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S").to_string()
    })
}

struct Styles<'a> {
    shared: &'a [String],
    dates: &'a [bool],
    date1904: bool,
}

/// Display string of a cell given its type attribute, raw value and style.
fn render_cell(kind: Option<&str>, value: &str, style: Option<usize>, styles: &Styles<'_>) -> Result<String, WorkbookError> {
    Ok(match kind {
        Some("s") => {
            let idx: usize = value.trim().parse().map_err(|_| corrupt(format!("bad shared string index {value:?}")))?;
            styles
                .shared
                .get(idx)
                .cloned()
                .ok_or_else(|| corrupt(format!("shared string {idx} out of range")))?
        }
        Some("b") => match value.trim() {
            "1" => "true".into(),
            "0" => "false".into(),
            other => other.into(),
        },
        Some("str" | "inlineStr" | "e" | "d") => value.to_string(),
        _ => {
            let Ok(f) = value.trim().parse::<f64>() else {
                return Ok(value.to_string());
            };
            let is_date = style.and_then(|s| styles.dates.get(s).copied()).unwrap_or(false);
            match is_date.then(|| render_serial_date(f, styles.date1904)).flatten() {
                Some(d) => d,
                None => render_float(f),
            }
        }
    })
}

type Grid = BTreeMap<u32, BTreeMap<u32, String>>;

/// Non-empty cells of one worksheet part keyed by zero-based row and column.
fn read_grid(xml: &[u8], styles: &Styles<'_>) -> Result<Grid, WorkbookError> {
    let mut grid = Grid::new();
    let mut reader = Reader::from_reader(xml);
    let mut buf = Vec::new();
    let mut next_row: u32 = 0;
    let mut current_row: u32 = 0;
    let mut next_col: u32 = 0;
    loop {
        let event = reader.read_event_into(&mut buf).map_err(corrupt)?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) if e.local_name().as_ref() == b"row" => {
                current_row = match attr(e, b"r")?.and_then(|r| r.parse::<u32>().ok()) {
                    Some(r) if r > 0 => r - 1,
                    _ => next_row,
                };
                next_row = current_row + 1;
                next_col = 0;
            }
            Event::Start(ref e) if e.local_name().as_ref() == b"c" => {
                let (row, col) = match attr(e, b"r")?.as_deref().and_then(parse_ref) {
                    Some(rc) => rc,
                    None => (current_row, next_col),
                };
                next_col = col + 1;
                let kind = attr(e, b"t")?;
                let style = attr(e, b"s")?.and_then(|s| s.parse().ok());
                let value = read_cell_value(&mut reader, kind.as_deref())?;
                let text = render_cell(kind.as_deref(), &value, style, styles)?;
                if !text.is_empty() {
                    grid.entry(row).or_default().insert(col, text);
                }
            }
            Event::Empty(ref e) if e.local_name().as_ref() == b"c" => {
                next_col = match attr(e, b"r")?.as_deref().and_then(parse_ref) {
                    Some((_, c)) => c + 1,
                    None => next_col + 1,
                };
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(grid)
}

/// Reads the `<v>` (or inline `<is>`) payload of a `<c>` element.
fn read_cell_value(reader: &mut Reader<&[u8]>, kind: Option<&str>) -> Result<String, WorkbookError> {
    let mut buf = Vec::new();
    let mut value = String::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Start(e) => match e.local_name().as_ref() {
                b"v" => value = read_plain_text(reader, b"v")?,
                b"is" if kind == Some("inlineStr") => value = read_text_until(reader, b"is")?,
                b"f" => {
                    read_plain_text(reader, b"f")?;
                }
                _ => {}
            },
            Event::End(e) if e.local_name().as_ref() == b"c" => return Ok(value),
            Event::Eof => return Err(corrupt("unexpected end of worksheet")),
            _ => {}
        }
        buf.clear();
    }
}

fn read_plain_text(reader: &mut Reader<&[u8]>, end: &[u8]) -> Result<String, WorkbookError> {
    let mut buf = Vec::new();
    let mut out = String::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(corrupt)? {
            Event::Text(t) => out.push_str(&t.unescape().map_err(corrupt)?),
            Event::CData(t) => out.push_str(&String::from_utf8_lossy(&t)),
            Event::End(e) if e.local_name().as_ref() == end => return Ok(out),
            Event::Eof => return Err(corrupt("unexpected end of worksheet")),
            _ => {}
        }
        buf.clear();
    }
}

pub fn read_workbook(bytes: &[u8]) -> Result<Table, WorkbookError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(corrupt)?;
    let (sheets, date1904) = sheet_entries(&mut zip)?;
    let first = sheets.first().ok_or(WorkbookError::MissingSheet)?;
    let shared = shared_strings(&mut zip)?;
    let dates = date_styles(&mut zip)?;
    let styles = Styles {
        shared: &shared,
        dates: &dates,
        date1904,
    };
    let xml = read_part(&mut zip, &first.path)?.ok_or_else(|| corrupt(format!("missing part {}", first.path)))?;
    let mut grid = read_grid(&xml, &styles)?;

    let header_row = grid.remove(&0).unwrap_or_default();
    let width = header_row.keys().next_back().map_or(0, |c| *c as usize + 1);
    let mut columns = vec![String::new(); width];
    for (c, v) in header_row {
        columns[c as usize] = v;
    }
    let last_row = grid.keys().next_back().copied().unwrap_or(0);
    let mut rows = Vec::with_capacity(last_row as usize);
    for r in 1..=last_row {
        let mut cells = vec![String::new(); width];
        if let Some(row) = grid.remove(&r) {
            for (c, v) in row {
                let c = c as usize;
                if c >= width {
                    return Err(WorkbookError::CellOutsideHeader {
                        row: r as usize,
                        column: c + 1,
                    });
                }
                cells[c] = v;
            }
        }
        rows.push(cells);
    }
    let mut table = Table::from_rows(columns, rows);

    table.provenance = None;
    if let Some(entry) = sheets.iter().find(|s| s.name == PROVENANCE_SHEET) {
        if let Some(xml) = read_part(&mut zip, &entry.path)? {
            let grid = read_grid(&xml, &styles)?;
            table.provenance = grid.values().find_map(|row| {
                (row.get(&0)? == TEMPLATE_ID_KEY)
                    .then(|| row.get(&1).cloned())
                    .flatten()
            });
        }
    }
    Ok(table)
}

fn write_data_sheet(sheet: &mut Worksheet, table: &Table) -> Result<(), XlsxError> {
    sheet.set_name(DATA_SHEET)?;
    for (c, name) in table.columns.iter().enumerate() {
        if !name.is_empty() {
            sheet.write_string(0, c as u16, name)?;
        }
    }
    for (r, row) in table.rows.iter().enumerate() {
        for (c, cell) in row.cells.iter().enumerate() {
            if !cell.is_empty() {
                sheet.write_string(r as u32 + 1, c as u16, cell)?;
            }
        }
    }
    Ok(())
}

fn add_provenance_sheet(wb: &mut Workbook, template_id: &str) -> Result<(), XlsxError> {
    let sheet = wb.add_worksheet();
    sheet.set_name(PROVENANCE_SHEET)?;
    sheet.write_string(0, 0, TEMPLATE_ID_KEY)?;
    sheet.write_string(0, 1, template_id)?;
    sheet.set_hidden(true);
    Ok(())
}

/// Writes the table as a workbook. Values are stored as strings so reading
/// them back gives exactly what was written.
pub fn write_workbook(table: &Table) -> Result<Vec<u8>, WorkbookError> {
    let mut wb = Workbook::new();
    write_data_sheet(wb.add_worksheet(), table)?;
    if let Some(id) = &table.provenance {
        add_provenance_sheet(&mut wb, id)?;
    }
    Ok(wb.save_to_buffer()?)
}

fn fits_inline(labels: &[String]) -> bool {
    let joined: usize = labels.iter().map(|l| l.chars().count() + 1).sum();
    joined <= INLINE_LIST_LIMIT && labels.iter().all(|l| !l.contains(',') && !l.contains('"'))
}

/// Column letters for a zero-based index (0 -> A, 26 -> AA).
fn column_letters(mut index: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// A blank workbook for `template` whose controlled columns carry dropdowns
/// over the pre-allocated rows. Long or comma-bearing label lists are placed
/// on a hidden `_lists` sheet and referenced from the validation.
pub fn generate_blank_workbook(
    template: &Template,
    data_rows: usize,
    sets: &BTreeMap<String, ValueSet>,
) -> Result<Vec<u8>, WorkbookError> {
    let table = blank_table(template, data_rows);
    let mut wb = Workbook::new();
    let mut overflow: Vec<(usize, &[String])> = Vec::new();
    {
        let sheet = wb.add_worksheet();
        write_data_sheet(sheet, &table)?;
        if data_rows > 0 {
            let last = data_rows as u32;
            for (c, field) in template.fields.iter().enumerate() {
                if field.datatype != Datatype::Controlled {
                    continue;
                }
                let Some(set) = sets.get(&field.name) else { continue };
                if set.labels.is_empty() {
                    continue;
                }
                let validation = if fits_inline(&set.labels) {
                    DataValidation::new().allow_list_strings(&set.labels)?
                } else {
                    let list_col = overflow.len();
                    overflow.push((list_col, &set.labels));
                    let formula = format!(
                        "={LISTS_SHEET}!${col}$1:${col}${n}",
                        col = column_letters(list_col),
                        n = set.labels.len()
                    );
                    DataValidation::new().allow_list_formula(Formula::new(formula))
                };
                sheet.add_data_validation(1, c as u16, last, c as u16, &validation)?;
            }
        }
    }
    add_provenance_sheet(&mut wb, &template.id)?;
    if !overflow.is_empty() {
        let lists = wb.add_worksheet();
        lists.set_name(LISTS_SHEET)?;
        for (c, labels) in overflow {
            for (r, label) in labels.iter().enumerate() {
                lists.write_string(r as u32, c as u16, label)?;
            }
        }
        lists.set_hidden(true);
    }
    Ok(wb.save_to_buffer()?)
}
