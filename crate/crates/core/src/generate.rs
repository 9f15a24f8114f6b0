//! Blank, provenance-bearing sheets and human-readable template renderings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::table::Table;
use crate::template::{Template, ValueSetBinding};
use crate::vocab::ValueSet;
use crate::PROVENANCE_COLUMN;

pub const DEFAULT_TSV_ROWS: usize = 0;
pub const DEFAULT_WORKBOOK_ROWS: usize = 20;

/// Header = field names in template order plus the provenance column. Each
/// pre-allocated row is empty apart from the template id.
pub fn blank_table(template: &Template, data_rows: usize) -> Table {
    let mut columns: Vec<String> = template.field_names().map(String::from).collect();
    columns.push(PROVENANCE_COLUMN.into());
    let width = columns.len();
    let rows = (0..data_rows)
        .map(|_| {
            let mut cells = alloc::vec![String::new(); width];
            cells[width - 1] = template.id.clone();
            cells
        })
        .collect();
    let mut table = Table::from_rows(columns, rows);
    table.provenance = Some(template.id.clone());
    table
}

pub fn generate_blank_tsv(template: &Template, data_rows: usize) -> Vec<u8> {
    // template invariants keep names delimiter-free and ids whitespace-free
    crate::table::write_tsv(&blank_table(template, data_rows)).expect("template names are TSV-safe")
}

fn escape_md(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Markdown rendering of a template. Terminology-bound fields list their
/// labels when a resolved set is supplied in `sets`.
pub fn render_spec(template: &Template, sets: &BTreeMap<String, ValueSet>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} ({})", escape_md(&template.name), template.version);
    let _ = writeln!(out);
    let _ = writeln!(out, "Template id: `{}`", template.id);
    let _ = writeln!(out);
    let _ = writeln!(out, "| Field | Type | Required | Constraints |");
    let _ = writeln!(out, "|---|---|---|---|");
    for f in &template.fields {
        let mut constraints: Vec<String> = Vec::new();
        if let Some(r) = &f.range {
            constraints.push(format!("range {}..={}", r.min, r.max));
        }
        if let Some(p) = &f.pattern {
            constraints.push(format!("pattern `{}`", escape_md(p.as_str())));
        }
        match &f.value_set {
            Some(ValueSetBinding::Inline { labels }) => {
                constraints.push(format!("one of: {}", escape_md(&labels.join(", "))));
            }
            Some(ValueSetBinding::Terminology { source_id, branch_id }) => {
                constraints.push(format!("terms from `{source_id}/{branch_id}`"));
                if let Some(set) = sets.get(&f.name) {
                    constraints.push(format!("one of: {}", escape_md(&set.labels.join(", "))));
                }
            }
            None => {}
        }
        let _ = writeln!(
            out,
            "| `{}` | {} | {} | {} |",
            escape_md(&f.name),
            f.datatype,
            if f.required { "required" } else { "optional" },
            constraints.join("; ")
        );
    }
    let described: Vec<_> = template
        .fields
        .iter()
        .filter(|f| f.description.is_some() || f.example.is_some())
        .collect();
    if !described.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "## Field notes");
        for f in described {
            let _ = writeln!(out);
            let _ = writeln!(out, "### `{}`", f.name);
            if let Some(d) = &f.description {
                let _ = writeln!(out);
                let _ = writeln!(out, "{d}");
            }
            if let Some(e) = &f.example {
                let _ = writeln!(out);
                let _ = writeln!(out, "Example: `{e}`");
            }
        }
    }
    out
}
