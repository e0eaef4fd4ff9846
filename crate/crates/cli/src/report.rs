//! CSV tables, Markdown summaries and the per-run outcome.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use martree::rational::{num_den, Rational};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// Numerator and denominator columns of an exact rational.
pub fn rational_cols(r: &Rational) -> [String; 2] {
    let (n, d) = num_den(r);
    [n, d]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything a command produced: its invariant checks, tables and notes.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub title: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn new(title: &str) -> Self {
        Outcome {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_table(dir: &Path, table: &Table) -> CliResult<PathBuf> {
    let path = dir.join(table.file_name());
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(&table.headers).map_err(csv_err(&path))?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io(&path))?;
    Ok(path)
}

/// Re-reads a written CSV into a table.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err(path))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    Ok(Table { name, headers, rows })
}

/// Writes every table and the Markdown summary; each table is read back
/// and compared with what the run holds in memory.
pub fn emit(dir: &Path, outcome: &mut Outcome, invocation: &str) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::new();
    let mut round_trip = Vec::new();
    for t in &outcome.tables {
        let path = write_table(dir, t)?;
        round_trip.push((t.file_name(), read_table(&path)? == *t));
        files.push(path);
    }
    for (name, ok) in round_trip {
        outcome.check(&format!("{name} re-parses"), ok, if ok { "identical" } else { "mismatch" });
    }
    let path = dir.join("summary.md");
    std::fs::write(&path, summary(outcome, invocation, &files)).map_err(io(&path))?;
    files.push(path);
    Ok(files)
}

pub fn summary(outcome: &Outcome, invocation: &str, files: &[PathBuf]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n", outcome.title);
    let _ = writeln!(s, "Invocation: `{invocation}`\n");
    let verdict = if outcome.passed() { "all invariants passed" } else { "invariant violations" };
    let _ = writeln!(s, "Result: **{verdict}**\n");
    let _ = writeln!(s, "| check | result | detail |\n|---|---|---|");
    for c in &outcome.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(s, "| {} | {mark} | {} |", c.name, c.detail.replace('|', "\\|"));
    }
    if !outcome.notes.is_empty() {
        let _ = writeln!(s);
        for n in &outcome.notes {
            let _ = writeln!(s, "- {n}");
        }
    }
    if !files.is_empty() {
        let _ = writeln!(s, "\nFiles:\n");
        for f in files {
            let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let _ = writeln!(s, "- `{name}`");
        }
    }
    s
}
