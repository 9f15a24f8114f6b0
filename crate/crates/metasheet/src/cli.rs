//! Command-line front end.
//!
//! Exit codes: 0 on success (for `validate`, no error-severity issues),
//! 1 when validation found errors, 2 on usage or IO failure.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metasheet_core::{
    accept_top_suggestions, apply_repairs, parse_template, render_spec, RepairAction,
    SuggestConfig, Table, Template, ValidationReport,
};

use crate::format::{read_sheet, write_sheet, SheetFormat};
use crate::pipeline;
use crate::service::{self, AppState, ServiceConfig};
use crate::store::TemplateStore;
use crate::terminology::{Mode, TerminologyClient, TerminologyConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "metasheet", version, about = "Generate, validate and repair template-driven metadata spreadsheets")]
pub struct Cli {
    #[command(flatten)]
    pub globals: Globals,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Globals {
    /// Directory of template documents (`<id>.json`)
    #[arg(long, global = true, env = "METASHEET_TEMPLATES")]
    pub templates: Option<PathBuf>,
    /// Terminology fixture directory (`<source>/<branch>.json`)
    #[arg(long, global = true, env = "METASHEET_FIXTURES")]
    pub fixtures: Option<PathBuf>,
    /// Terminology mode: fixture or live
    #[arg(long, global = true, env = "METASHEET_TERMINOLOGY_MODE", default_value = "fixture")]
    pub terminology_mode: Mode,
    /// Base URL of the live terminology service
    #[arg(long, global = true, env = "METASHEET_TERMINOLOGY_URL")]
    pub terminology_url: Option<String>,
    /// API key forwarded to the live terminology service
    #[arg(long, global = true, env = "METASHEET_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Value-set cache lifetime in seconds
    #[arg(long, global = true, env = "METASHEET_TERMINOLOGY_TTL", default_value_t = 86_400)]
    pub terminology_ttl: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a blank, provenance-bearing sheet for a template
    Generate {
        /// Template document
        template: PathBuf,
        #[arg(long, default_value = "tsv")]
        format: SheetFormat,
        /// Pre-allocated data rows (default 0 for tsv, 20 for xlsx)
        #[arg(long)]
        rows: Option<usize>,
        /// Output file (stdout when omitted)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Render a template as Markdown
    Render {
        template: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Validate a filled sheet
    Validate {
        sheet: PathBuf,
        #[command(flatten)]
        input: SheetInput,
        /// Write the report JSON here (`-` for stdout)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print ranked repair suggestions for every issue group as JSON
    Suggest {
        sheet: PathBuf,
        #[command(flatten)]
        input: SheetInput,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Apply repair actions and write the repaired sheet
    Repair {
        sheet: PathBuf,
        #[command(flatten)]
        input: SheetInput,
        /// JSON array of repair actions
        #[arg(long, required_unless_present = "accept_top", conflicts_with = "accept_top")]
        actions: Option<PathBuf>,
        /// Accept the top suggestion of every group that has one
        #[arg(long)]
        accept_top: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the HTTP service
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SheetInput {
    /// Template file or registered template id; defaults to the sheet's provenance
    #[arg(long)]
    pub template: Option<String>,
    /// Sheet format; inferred from the extension or content when omitted
    #[arg(long)]
    pub format: Option<SheetFormat>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "METASHEET_BIND", default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
    #[arg(long, env = "METASHEET_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Session lifetime in seconds
    #[arg(long, env = "METASHEET_SESSION_TTL", default_value_t = 3600)]
    pub session_ttl: u64,
    /// Upload size cap in bytes
    #[arg(long, env = "METASHEET_MAX_UPLOAD", default_value_t = service::DEFAULT_MAX_UPLOAD)]
    pub max_upload: usize,
    /// Allowed CORS origin (any when omitted)
    #[arg(long, env = "METASHEET_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
}

impl Globals {
    fn terminology(&self) -> TerminologyClient {
        TerminologyClient::new(TerminologyConfig {
            mode: self.terminology_mode,
            fixture_dir: self.fixtures.clone(),
            base_url: self.terminology_url.clone(),
            api_key: self.api_key.clone(),
            ttl: Duration::from_secs(self.terminology_ttl),
        })
    }

    fn store(&self) -> Result<TemplateStore> {
        match &self.templates {
            Some(dir) => Ok(TemplateStore::open(dir)?),
            None => Ok(TemplateStore::in_memory()),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display()))
        }
        _ => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("cannot write to stdout")
        }
    }
}

fn load_template_file(path: &Path) -> Result<Template> {
    parse_template(&read_file(path)?).with_context(|| format!("invalid template {}", path.display()))
}

fn load_sheet(path: &Path, format: Option<SheetFormat>) -> Result<(Table, SheetFormat)> {
    let bytes = read_file(path)?;
    let format = format
        .or_else(|| SheetFormat::from_path(path))
        .unwrap_or_else(|| SheetFormat::sniff(&bytes));
    let table = read_sheet(&bytes, format).with_context(|| format!("cannot parse {}", path.display()))?;
    Ok((table, format))
}

/// `--template` may name a file or a registered id; without it the sheet's
/// provenance picks the template from the template directory.
fn resolve_template(globals: &Globals, input: &SheetInput, table: &Table) -> Result<Template> {
    if let Some(arg) = &input.template {
        let path = Path::new(arg);
        if path.is_file() {
            return load_template_file(path);
        }
    }
    let id = input
        .template
        .clone()
        .or_else(|| table.provenance.clone())
        .ok_or_else(|| anyhow!("template not identified: the sheet has no provenance; pass --template"))?;
    let store = globals.store()?;
    store
        .get(&id)
        .map(|t| (*t).clone())
        .ok_or_else(|| match &globals.templates {
            Some(dir) => anyhow!("unknown template `{id}` (not in {})", dir.display()),
            None => anyhow!("unknown template `{id}`: pass --template <file> or --templates <dir>"),
        })
}

fn print_summary(report: &ValidationReport) {
    let s = &report.summary;
    eprintln!(
        "template {}: {} rows, {} errors ({} completeness, {} adherence), {} warnings",
        report.template_id, report.row_count, s.errors, s.completeness, s.adherence, s.warnings
    );
    for issue in &report.issues {
        let place = match issue.row {
            Some(r) => format!("row {r}, {}", issue.column),
            None => issue.column.clone(),
        };
        let observed = issue.observed.as_deref().map(|o| format!(" {o:?}")).unwrap_or_default();
        eprintln!("  {place}: {}{observed}; expected {}", issue.kind, issue.expected);
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    let g = &cli.globals;
    match cli.command {
        Command::Generate { template, format, rows, out } => {
            let t = load_template_file(&template)?;
            let rows = rows.unwrap_or_else(|| pipeline::default_rows(format));
            let bytes = pipeline::generate_blank(&t, format, rows, &g.terminology())?;
            write_output(out.as_deref(), &bytes)?;
            Ok(EXIT_OK)
        }
        Command::Render { template, out } => {
            let t = load_template_file(&template)?;
            let sets = g.terminology().resolve_template_sets(&t).unwrap_or_default();
            write_output(out.as_deref(), render_spec(&t, &sets).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Validate { sheet, input, report } => {
            let (table, _) = load_sheet(&sheet, input.format)?;
            let template = resolve_template(g, &input, &table)?;
            let (mut rep, _) = pipeline::validate(&template, &table, &g.terminology())?;
            rep.generated_at = Some(pipeline::now_stamp());
            print_summary(&rep);
            if let Some(path) = report {
                let mut json = rep.to_json_pretty();
                json.push('\n');
                write_output(Some(&path), json.as_bytes())?;
            }
            Ok(if rep.has_errors() { EXIT_INVALID } else { EXIT_OK })
        }
        Command::Suggest { sheet, input, threshold, top_k } => {
            let (table, _) = load_sheet(&sheet, input.format)?;
            let template = resolve_template(g, &input, &table)?;
            let config = SuggestConfig { threshold, top_k };
            let (rep, _) = pipeline::validate_and_suggest(&template, &table, &g.terminology(), &config)?;
            let mut json = serde_json::to_string_pretty(&rep.groups)?;
            json.push('\n');
            write_output(None, json.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Repair { sheet, input, actions, accept_top, out } => {
            let (table, format) = load_sheet(&sheet, input.format)?;
            let template = resolve_template(g, &input, &table)?;
            let (rep, _) = pipeline::validate_and_suggest(&template, &table, &g.terminology(), &SuggestConfig::default())?;
            let actions: Vec<RepairAction> = match (actions, accept_top) {
                (Some(path), _) => serde_json::from_slice(&read_file(&path)?)
                    .with_context(|| format!("invalid actions file {}", path.display()))?,
                (None, true) => accept_top_suggestions(&rep),
                (None, false) => bail!("pass --actions <file> or --accept-top"),
            };
            let repaired = apply_repairs(&table, &rep, &actions)?;
            let out_format = SheetFormat::from_path(&out).unwrap_or(format);
            write_output(Some(&out), &write_sheet(&repaired, out_format)?)?;
            let changed = table
                .rows
                .iter()
                .zip(&repaired.rows)
                .map(|(a, b)| a.cells.iter().zip(&b.cells).filter(|(x, y)| x != y).count())
                .sum::<usize>();
            eprintln!("{} action(s), {changed} cell(s) changed -> {}", actions.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Serve(args) => {
            let state = AppState::new(
                g.store()?,
                g.terminology(),
                ServiceConfig {
                    session_ttl: Duration::from_secs(args.session_ttl),
                    max_upload: args.max_upload,
                    cors_origin: args.cors_origin,
                    suggest: SuggestConfig::default(),
                },
            );
            let addr = SocketAddr::new(args.bind, args.port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(addr, state))?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses arguments and maps failures onto the exit-code convention.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
