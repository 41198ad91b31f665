//! Rendering of command results as CSV, JSON or an aligned text table.

use std::io::Write;

use serde_json::Value;

use crate::args::Format;
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What a command produced. `success = false` maps to exit code 1.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub json: Value,
    pub table: Table,
    pub default_format: Option<Format>,
    pub success: bool,
}

/// Quote an argument for the provenance comment if it needs it.
fn shell_word(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_.:/=,+*".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', "'\\''"))
    }
}

pub fn invocation_comment(args: &[String]) -> String {
    let words: Vec<String> = args.iter().map(|a| shell_word(a)).collect();
    format!("# rotkey {} {}", env!("CARGO_PKG_VERSION"), words.join(" "))
}

pub fn write_csv(out: &mut dyn Write, table: &Table, args: &[String]) -> Result<(), CliError> {
    writeln!(out, "{}", invocation_comment(args))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(out: &mut dyn Write, table: &Table) -> Result<(), CliError> {
    let widths: Vec<usize> = (0..table.header.len())
        .map(|i| table.rows.iter().map(|r| r[i].len()).chain([table.header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(&table.header))?;
    for row in &table.rows {
        writeln!(out, "{}", line(row))?;
    }
    Ok(())
}

pub fn write_outcome(out: &mut dyn Write, outcome: &Outcome, format: Option<Format>, args: &[String]) -> Result<(), CliError> {
    match format.or(outcome.default_format) {
        Some(Format::Csv) => write_csv(out, &outcome.table, args),
        Some(Format::Json) => {
            serde_json::to_writer_pretty(&mut *out, &outcome.json).map_err(|e| CliError::Failure(e.to_string()))?;
            writeln!(out)?;
            Ok(())
        }
        None => write_text(out, &outcome.table),
    }
}
